/**
 * Plot job description: a small JSON file naming the figure kind, its
 * inputs, and the output path. Validation is strict so a typo fails with
 * a message instead of an empty figure.
 */

import fs from "node:fs";

export class SpecError extends Error {
  override name = "SpecError";
}

export const KINDS = ["tracking", "speeds", "mass", "sweep-panel"] as const;
export type FigureKind = (typeof KINDS)[number];

export interface PlotSpec {
  kind: FigureKind;
  /** run log directory; required for tracking/speeds/mass */
  logDir?: string;
  /** sweep CSV; required for sweep-panel */
  csv?: string;
  /** joint indices to plot (default: all) */
  joints?: number[];
  /** output SVG path */
  out: string;
  /** reference line for the mass figure [kg] */
  trueMass?: number;
}

export function validateSpec(raw: unknown, source: string): PlotSpec {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new SpecError(`${source}: spec must be a JSON object`);
  }
  const obj = raw as Record<string, unknown>;

  const kind = obj.kind;
  if (typeof kind !== "string" || !(KINDS as readonly string[]).includes(kind)) {
    throw new SpecError(
      `${source}: kind must be one of ${KINDS.join(", ")} (got ${JSON.stringify(kind)})`
    );
  }

  if (typeof obj.out !== "string" || obj.out.length === 0) {
    throw new SpecError(`${source}: out must be a non-empty output path`);
  }

  if (kind === "sweep-panel") {
    if (typeof obj.csv !== "string" || obj.csv.length === 0) {
      throw new SpecError(`${source}: sweep-panel needs a csv path`);
    }
  } else {
    if (typeof obj.logDir !== "string" || obj.logDir.length === 0) {
      throw new SpecError(`${source}: ${kind} needs a logDir`);
    }
  }

  let joints: number[] | undefined;
  if (obj.joints !== undefined) {
    if (
      !Array.isArray(obj.joints) ||
      obj.joints.some((j) => typeof j !== "number" || !Number.isInteger(j) || j < 0)
    ) {
      throw new SpecError(`${source}: joints must be an array of non-negative integers`);
    }
    joints = obj.joints as number[];
  }

  let trueMass: number | undefined;
  if (obj.trueMass !== undefined) {
    if (typeof obj.trueMass !== "number" || !Number.isFinite(obj.trueMass)) {
      throw new SpecError(`${source}: trueMass must be a finite number`);
    }
    trueMass = obj.trueMass;
  }

  return {
    kind: kind as FigureKind,
    logDir: typeof obj.logDir === "string" ? obj.logDir : undefined,
    csv: typeof obj.csv === "string" ? obj.csv : undefined,
    joints,
    out: obj.out,
    trueMass,
  };
}

export function loadSpec(specPath: string): PlotSpec {
  let text: string;
  try {
    text = fs.readFileSync(specPath, "utf8");
  } catch {
    throw new SpecError(`cannot read spec file: ${specPath}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (e) {
    throw new SpecError(`${specPath} is not valid JSON: ${(e as Error).message}`);
  }
  return validateSpec(raw, specPath);
}
