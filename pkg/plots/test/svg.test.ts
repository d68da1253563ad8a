import { describe, expect, it } from "vitest";
import { decimate, niceTicks, renderFigure } from "../src/svg.js";

describe("niceTicks", () => {
  it("uses 1-2-5 steps that cover the range", () => {
    const ticks = niceTicks(0, 10);
    expect(ticks[0]).toBeGreaterThanOrEqual(0);
    expect(ticks[ticks.length - 1]).toBeLessThanOrEqual(10 + 1e-9);
    const step = ticks[1] - ticks[0];
    const mantissa = step / Math.pow(10, Math.floor(Math.log10(step)));
    expect([1, 2, 5]).toContainEqual(Math.round(mantissa));
  });

  it("handles degenerate ranges without looping forever", () => {
    expect(niceTicks(3, 3).length).toBeGreaterThan(0);
  });
});

describe("decimate", () => {
  it("passes short series through untouched", () => {
    const x = [0, 1, 2];
    const y = [5, 6, 7];
    expect(decimate(x, y)).toEqual({ x, y });
  });

  it("preserves the global extremes of a long series", () => {
    const n = 10000;
    const x = Array.from({ length: n }, (_, i) => i);
    const y = x.map((i) => Math.sin(i / 50));
    y[4321] = 99; // spike must survive decimation
    y[1234] = -99;
    const d = decimate(x, y, 300);
    expect(d.x.length).toBeLessThan(2 * 300 + 2);
    expect(Math.max(...d.y)).toBe(99);
    expect(Math.min(...d.y)).toBe(-99);
  });
});

describe("renderFigure", () => {
  const panel = {
    title: "p",
    xLabel: "time [s]",
    yLabel: "mass [kg]",
    series: [{ label: "a", color: "#000", x: [0, 1, 2], y: [0.1, 0.3, 0.2] }],
  };

  it("emits a standalone SVG with fixed dimensions", () => {
    const svg = renderFigure("title", [panel]);
    expect(svg).toMatch(/^<svg xmlns="http:\/\/www\.w3\.org\/2000\/svg" width="\d+" height="\d+"/);
    expect(svg).toContain("</svg>");
    expect(svg).not.toContain("<script");
  });

  it("escapes markup in labels", () => {
    const svg = renderFigure("a<b", [{ ...panel, title: "x & y" }]);
    expect(svg).toContain("a&lt;b");
    expect(svg).toContain("x &amp; y");
    expect(svg).not.toContain("a<b");
  });

  it("draws the reference line with its label", () => {
    const svg = renderFigure("t", [{ ...panel, refY: 0.25, refLabel: "true mass 0.25 kg" }]);
    expect(svg).toContain("true mass 0.25 kg");
    expect(svg).toContain("stroke-dasharray");
  });
});
