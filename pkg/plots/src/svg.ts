/**
 * Minimal deterministic SVG line charts. No runtime dependencies, no
 * timestamps, no randomness: the same data always yields the same bytes,
 * which keeps figure diffs meaningful in review.
 */

export interface Series {
  label: string;
  color: string;
  x: number[];
  y: number[];
  /** SVG stroke-dasharray, e.g. "6 3" for the reference/goal styling */
  dash?: string;
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  /** horizontal dashed reference line (e.g. true mass) */
  refY?: number;
  refLabel?: string;
}

const PANEL_W = 760;
const PANEL_H = 210;
const MARGIN = { left: 64, right: 16, top: 26, bottom: 38 };
const LEGEND_H = 22;

/** Round-trip-stable coordinate formatting (fixed precision). */
function fmt(v: number): string {
  return v.toFixed(2);
}

/** Tick label: short, locale-independent. */
function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.001) return v.toExponential(1);
  return String(parseFloat(v.toPrecision(4)));
}

/** 1-2-5 "nice" ticks covering [lo, hi]. */
export function niceTicks(lo: number, hi: number, target = 5): number[] {
  if (!(hi > lo)) {
    hi = lo + 1;
    lo = lo - 1;
  }
  const span = hi - lo;
  const raw = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    if (mag * m >= raw) {
      step = mag * m;
      break;
    }
  }
  const ticks: number[] = [];
  const first = Math.ceil(lo / step) * step;
  for (let v = first; v <= hi + step * 1e-9; v += step) {
    // snap to the grid to avoid 0.30000000000000004-style labels
    ticks.push(parseFloat(v.toPrecision(12)));
  }
  return ticks;
}

interface Extent {
  lo: number;
  hi: number;
}

function extent(values: number[], seed?: Extent): Extent {
  let lo = seed ? seed.lo : Infinity;
  let hi = seed ? seed.hi : -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
    lo = 0;
    hi = 1;
  }
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  return { lo, hi };
}

/**
 * Min-max decimation: keep the per-bucket extremes so chatter and spikes
 * survive, while a 20 kHz-grade trace does not inflate the SVG.
 */
export function decimate(x: number[], y: number[], maxBuckets = 600): { x: number[]; y: number[] } {
  const n = x.length;
  if (n <= 2 * maxBuckets) return { x, y };
  const ox: number[] = [];
  const oy: number[] = [];
  const per = n / maxBuckets;
  for (let b = 0; b < maxBuckets; b++) {
    const s = Math.floor(b * per);
    const e = Math.min(n, Math.floor((b + 1) * per));
    let iMin = s;
    let iMax = s;
    for (let i = s; i < e; i++) {
      if (y[i] < y[iMin]) iMin = i;
      if (y[i] > y[iMax]) iMax = i;
    }
    const a = Math.min(iMin, iMax);
    const z = Math.max(iMin, iMax);
    ox.push(x[a]);
    oy.push(y[a]);
    if (z !== a) {
      ox.push(x[z]);
      oy.push(y[z]);
    }
  }
  return { x: ox, y: oy };
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function renderPanel(panel: Panel, yOffset: number): string {
  const x0 = MARGIN.left;
  const x1 = PANEL_W - MARGIN.right;
  const y0 = yOffset + MARGIN.top;
  const y1 = yOffset + PANEL_H - MARGIN.bottom;

  let ex: Extent | undefined;
  let ey: Extent | undefined;
  for (const s of panel.series) {
    ex = extent(s.x, ex);
    ey = extent(s.y, ey);
  }
  if (!ex || !ey) {
    ex = { lo: 0, hi: 1 };
    ey = { lo: 0, hi: 1 };
  }
  if (panel.refY !== undefined) ey = extent([panel.refY], ey);
  // headroom so lines do not hug the frame
  const pad = (ey.hi - ey.lo) * 0.06;
  ey = { lo: ey.lo - pad, hi: ey.hi + pad };

  const sx = (v: number) => x0 + ((v - ex.lo) / (ex.hi - ex.lo)) * (x1 - x0);
  const sy = (v: number) => y1 - ((v - ey.lo) / (ey.hi - ey.lo)) * (y1 - y0);

  const parts: string[] = [`<g class="panel">`];
  // frame
  parts.push(
    `<rect x="${fmt(x0)}" y="${fmt(y0)}" width="${fmt(x1 - x0)}" height="${fmt(
      y1 - y0
    )}" fill="none" stroke="#888" stroke-width="1"/>`
  );
  // ticks + grid
  for (const t of niceTicks(ex.lo, ex.hi, 6)) {
    const px = sx(t);
    if (px < x0 - 0.5 || px > x1 + 0.5) continue;
    parts.push(
      `<line x1="${fmt(px)}" y1="${fmt(y0)}" x2="${fmt(px)}" y2="${fmt(y1)}" stroke="#ddd" stroke-width="0.5"/>`,
      `<text x="${fmt(px)}" y="${fmt(y1 + 14)}" font-size="10" text-anchor="middle" fill="#333">${tickLabel(t)}</text>`
    );
  }
  for (const t of niceTicks(ey.lo, ey.hi, 4)) {
    const py = sy(t);
    if (py < y0 - 0.5 || py > y1 + 0.5) continue;
    parts.push(
      `<line x1="${fmt(x0)}" y1="${fmt(py)}" x2="${fmt(x1)}" y2="${fmt(py)}" stroke="#ddd" stroke-width="0.5"/>`,
      `<text x="${fmt(x0 - 5)}" y="${fmt(py + 3)}" font-size="10" text-anchor="end" fill="#333">${tickLabel(t)}</text>`
    );
  }
  // reference line
  if (panel.refY !== undefined) {
    const py = sy(panel.refY);
    parts.push(
      `<line x1="${fmt(x0)}" y1="${fmt(py)}" x2="${fmt(x1)}" y2="${fmt(py)}" stroke="#555" stroke-width="1" stroke-dasharray="2 3"/>`
    );
    if (panel.refLabel) {
      parts.push(
        `<text x="${fmt(x1 - 4)}" y="${fmt(py - 4)}" font-size="10" text-anchor="end" fill="#555">${esc(panel.refLabel)}</text>`
      );
    }
  }
  // data
  for (const s of panel.series) {
    const d = decimate(s.x, s.y);
    const pts: string[] = [];
    for (let i = 0; i < d.x.length; i++) {
      pts.push(`${i === 0 ? "M" : "L"}${fmt(sx(d.x[i]))} ${fmt(sy(d.y[i]))}`);
    }
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<path d="${pts.join("")}" fill="none" stroke="${s.color}" stroke-width="1.2"${dash}/>`
    );
  }
  // labels
  parts.push(
    `<text x="${fmt(x0)}" y="${fmt(y0 - 8)}" font-size="11" font-weight="bold" fill="#111">${esc(panel.title)}</text>`,
    `<text x="${fmt((x0 + x1) / 2)}" y="${fmt(y1 + 30)}" font-size="11" text-anchor="middle" fill="#111">${esc(panel.xLabel)}</text>`,
    `<text x="${fmt(14)}" y="${fmt((y0 + y1) / 2)}" font-size="11" text-anchor="middle" fill="#111" transform="rotate(-90 14 ${fmt((y0 + y1) / 2)})">${esc(panel.yLabel)}</text>`,
    `</g>`
  );
  return parts.join("\n");
}

/** Legend entries are the union of series labels, in first-seen order. */
function legendEntries(panels: Panel[]): Series[] {
  const seen = new Map<string, Series>();
  for (const p of panels) {
    for (const s of p.series) {
      if (!seen.has(s.label)) seen.set(s.label, s);
    }
  }
  return [...seen.values()];
}

export function renderFigure(title: string, panels: Panel[]): string {
  const entries = legendEntries(panels);
  const height = LEGEND_H + 18 + panels.length * PANEL_H + 6;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${PANEL_W}" height="${height}" viewBox="0 0 ${PANEL_W} ${height}" font-family="Helvetica, Arial, sans-serif">`,
    `<rect x="0" y="0" width="${PANEL_W}" height="${height}" fill="#fff"/>`,
    `<text x="${fmt(PANEL_W / 2)}" y="15" font-size="13" font-weight="bold" text-anchor="middle" fill="#111">${esc(title)}</text>`,
  ];
  // legend row
  let lx = MARGIN.left;
  const ly = LEGEND_H + 8;
  for (const s of entries) {
    parts.push(
      `<line x1="${fmt(lx)}" y1="${fmt(ly - 3)}" x2="${fmt(lx + 18)}" y2="${fmt(ly - 3)}" stroke="${s.color}" stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`,
      `<text x="${fmt(lx + 22)}" y="${fmt(ly)}" font-size="11" fill="#111">${esc(s.label)}</text>`
    );
    lx += 22 + 8 * s.label.length + 24;
  }
  let yOff = LEGEND_H + 14;
  for (const p of panels) {
    parts.push(renderPanel(p, yOff));
    yOff += PANEL_H;
  }
  parts.push(`</svg>`);
  return parts.join("\n") + "\n";
}
