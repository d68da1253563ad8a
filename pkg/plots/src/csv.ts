/**
 * Reader for the harness log contract: one CSV per topic with header
 * `t,v1,...,vn` and full-precision decimal floats, plus summary.json.
 * Anything that violates that contract throws a named error so callers
 * (and exit codes) can tell schema trouble from empty inputs.
 */

import fs from "node:fs";
import path from "node:path";

export class SchemaError extends Error {
  override name = "SchemaError";
}

export class EmptyInputError extends Error {
  override name = "EmptyInputError";
}

export interface Table {
  /** file the data came from, for error messages */
  file: string;
  columns: string[];
  /** row-major samples, one entry per column */
  rows: number[][];
}

export function parseCsv(text: string, file: string): Table {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new EmptyInputError(`${file} has no header line`);
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new SchemaError(
        `${file}: row ${i} has ${cells.length} cells, header has ${columns.length}`
      );
    }
    const row = new Array<number>(cells.length);
    for (let j = 0; j < cells.length; j++) {
      const v = Number(cells[j]);
      if (!Number.isFinite(v)) {
        throw new SchemaError(
          `${file}: row ${i}, column ${columns[j]} is not a finite number: ${cells[j]!.trim()}`
        );
      }
      row[j] = v;
    }
    rows.push(row);
  }
  if (rows.length === 0) {
    throw new EmptyInputError(`${file} contains a header but no samples`);
  }
  return { file, columns, rows };
}

export function readTable(filePath: string): Table {
  let text: string;
  try {
    text = fs.readFileSync(filePath, "utf8");
  } catch {
    throw new SchemaError(`expected log file is missing: ${filePath}`);
  }
  return parseCsv(text, path.basename(filePath));
}

/** Column by name; throws a SchemaError naming the column and the file. */
export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `${table.file} is missing column ${name} (has: ${table.columns.join(",")})`
    );
  }
  return table.rows.map((r) => r[idx]);
}

export function requireColumns(table: Table, names: string[]): void {
  for (const n of names) {
    if (!table.columns.includes(n)) {
      throw new SchemaError(
        `${table.file} is missing column ${n} (has: ${table.columns.join(",")})`
      );
    }
  }
}

/** Number of v-columns, i.e. the topic's vector width. */
export function vectorWidth(table: Table): number {
  return table.columns.filter((c) => /^v\d+$/.test(c)).length;
}

export interface RunSummary {
  dof?: number;
  payload_mass_true?: number;
  scenario_name?: string;
  [key: string]: unknown;
}

export function readSummary(dir: string): RunSummary {
  const p = path.join(dir, "summary.json");
  try {
    return JSON.parse(fs.readFileSync(p, "utf8")) as RunSummary;
  } catch {
    // figures fall back to widths inferred from the CSVs themselves
    return {};
  }
}
