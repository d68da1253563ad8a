import { describe, expect, it } from "vitest";
import path from "node:path";
import { fileURLToPath } from "node:url";
import {
  column,
  EmptyInputError,
  parseCsv,
  readTable,
  requireColumns,
  SchemaError,
  vectorWidth,
} from "../src/csv.js";

const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));

describe("parseCsv", () => {
  it("parses header and float rows", () => {
    const t = parseCsv("t,v1,v2\n0.0,1.5,-2.0\n0.004,1.0,3.5\n", "x.csv");
    expect(t.columns).toEqual(["t", "v1", "v2"]);
    expect(t.rows).toEqual([
      [0.0, 1.5, -2.0],
      [0.004, 1.0, 3.5],
    ]);
    expect(vectorWidth(t)).toBe(2);
  });

  it("throws EmptyInputError for a header-only file", () => {
    expect(() => parseCsv("t,v1\n", "x.csv")).toThrow(EmptyInputError);
  });

  it("throws EmptyInputError for an empty file", () => {
    expect(() => parseCsv("", "x.csv")).toThrow(EmptyInputError);
  });

  it("throws SchemaError on a non-numeric cell, naming row and column", () => {
    let err: Error | undefined;
    try {
      parseCsv("t,v1\n0.0,oops\n", "x.csv");
    } catch (e) {
      err = e as Error;
    }
    expect(err).toBeInstanceOf(SchemaError);
    expect(err!.message).toContain("v1");
    expect(err!.message).toContain("oops");
  });

  it("throws SchemaError on a ragged row", () => {
    expect(() => parseCsv("t,v1\n0.0,1.0,2.0\n", "x.csv")).toThrow(SchemaError);
  });
});

describe("column access", () => {
  it("names the missing column and the file in the error", () => {
    const t = readTable(path.join(FIXTURES, "missing_column.csv"));
    let err: Error | undefined;
    try {
      column(t, "v5");
    } catch (e) {
      err = e as Error;
    }
    expect(err).toBeInstanceOf(SchemaError);
    expect(err!.name).toBe("SchemaError");
    expect(err!.message).toContain("v5");
    expect(err!.message).toContain("missing_column.csv");
  });

  it("requireColumns passes when all are present", () => {
    const t = parseCsv("t,v1,v2\n0,1,2\n", "x.csv");
    expect(() => requireColumns(t, ["t", "v1", "v2"])).not.toThrow();
    expect(() => requireColumns(t, ["v3"])).toThrow(SchemaError);
  });

  it("readTable raises a SchemaError for a missing file", () => {
    expect(() => readTable(path.join(FIXTURES, "nope.csv"))).toThrow(SchemaError);
  });

  it("readTable raises EmptyInputError for the header-only fixture", () => {
    expect(() => readTable(path.join(FIXTURES, "empty.csv"))).toThrow(EmptyInputError);
  });
});
