#!/usr/bin/env node
/**
 * plot --spec <path>
 *
 * Reads a plot spec (JSON), renders the requested figure from harness logs,
 * writes the SVG, and prints the output path. Named errors (SchemaError,
 * EmptyInputError, SpecError) come back as exit code 1 with a one-line
 * `Name: message` on stderr.
 */

import fs from "node:fs";
import path from "node:path";
import { pathToFileURL } from "node:url";
import { EmptyInputError, SchemaError } from "./csv.js";
import { massFigure, speedsFigure, sweepFigure, trackingFigure } from "./figures.js";
import { loadSpec, PlotSpec, SpecError } from "./spec.js";

const USAGE = "usage: plot --spec <path.json>";

export function renderSpec(spec: PlotSpec): string {
  switch (spec.kind) {
    case "tracking":
      return trackingFigure(spec.logDir!, spec.joints);
    case "speeds":
      return speedsFigure(spec.logDir!, spec.joints);
    case "mass":
      return massFigure(spec.logDir!, spec.trueMass);
    case "sweep-panel":
      return sweepFigure(spec.csv!);
  }
}

export function main(
  argv: string[],
  log: (line: string) => void = console.log,
  err: (line: string) => void = console.error
): number {
  let specPath: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--spec") {
      specPath = argv[++i];
    } else if (a === "-h" || a === "--help") {
      log(USAGE);
      return 0;
    } else {
      err(`unknown argument: ${a}`);
      err(USAGE);
      return 2;
    }
  }
  if (!specPath) {
    err(USAGE);
    return 2;
  }

  try {
    const spec = loadSpec(specPath);
    const svg = renderSpec(spec);
    fs.mkdirSync(path.dirname(path.resolve(spec.out)), { recursive: true });
    fs.writeFileSync(spec.out, svg);
    log(spec.out);
    return 0;
  } catch (e) {
    if (e instanceof SchemaError || e instanceof EmptyInputError || e instanceof SpecError) {
      err(`${e.name}: ${e.message}`);
      return 1;
    }
    throw e;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
