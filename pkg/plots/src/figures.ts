/**
 * Figure builders over the harness log directory. Each builder returns the
 * SVG text; the CLI is responsible for writing it to disk.
 *
 * Log contract (one CSV per topic, header t,v1..vn):
 *   measured_q      n    encoder positions [rad]
 *   true_state      2n   plant q, qd
 *   smo_state       2n   sliding-mode observer q, qd estimates
 *   ekf_state       2n   EKF q, qd estimates (absent in constant-torque runs)
 *   trajectory_ref  2n   commanded q, qd (absent in constant-torque runs)
 *   mass_estimate   5    mass [kg], joint torque [N m], pitch [rad],
 *                        gate flag, window-averaged mass [kg]
 */

import fs from "node:fs";
import path from "node:path";
import { column, readSummary, readTable, SchemaError, Table, vectorWidth } from "./csv.js";
import { Panel, renderFigure, Series } from "./svg.js";

// fixed palette so reruns produce identical bytes
const COLOR = {
  measured: "#1f77b4",
  goal: "#2ca02c",
  smo: "#d62728",
  ekf: "#9467bd",
  truth: "#1f77b4",
  raw: "#1f77b4",
  smoothed: "#d62728",
};

function tryTable(dir: string, topic: string): Table | undefined {
  const p = path.join(dir, `${topic}.csv`);
  return fs.existsSync(p) ? readTable(p) : undefined;
}

function mustTable(dir: string, topic: string): Table {
  const p = path.join(dir, `${topic}.csv`);
  if (!fs.existsSync(p)) {
    throw new SchemaError(`expected log file is missing: ${p}`);
  }
  return readTable(p);
}

function jointColumn(table: Table, j: number): number[] {
  return column(table, `v${j + 1}`);
}

/** Offset by `width` to address the velocity half of a (q, qd) table. */
function speedColumn(table: Table, j: number, width: number): number[] {
  return column(table, `v${width + j + 1}`);
}

function resolveJoints(requested: number[] | undefined, dof: number): number[] {
  if (requested === undefined || requested.length === 0) {
    return Array.from({ length: dof }, (_, i) => i);
  }
  for (const j of requested) {
    if (!Number.isInteger(j) || j < 0 || j >= dof) {
      throw new SchemaError(`joint index ${j} out of range for a ${dof}-dof log`);
    }
  }
  return requested;
}

/** Per-joint panels of measured vs goal positions with both observers. */
export function trackingFigure(logDir: string, joints?: number[]): string {
  const measured = mustTable(logDir, "measured_q");
  const smo = mustTable(logDir, "smo_state");
  const ref = tryTable(logDir, "trajectory_ref");
  const ekf = tryTable(logDir, "ekf_state");

  const dof = vectorWidth(measured);
  const t = column(measured, "t");
  const panels: Panel[] = [];
  for (const j of resolveJoints(joints, dof)) {
    const series: Series[] = [
      { label: "measured", color: COLOR.measured, x: t, y: jointColumn(measured, j) },
    ];
    if (ref) {
      series.push({
        label: "goal",
        color: COLOR.goal,
        x: column(ref, "t"),
        y: jointColumn(ref, j),
        dash: "6 3",
      });
    }
    series.push({ label: "SMO", color: COLOR.smo, x: column(smo, "t"), y: jointColumn(smo, j) });
    if (ekf) {
      series.push({
        label: "EKF",
        color: COLOR.ekf,
        x: column(ekf, "t"),
        y: jointColumn(ekf, j),
        dash: "2 2",
      });
    }
    panels.push({
      title: `joint ${j}`,
      xLabel: "time [s]",
      yLabel: "position [rad]",
      series,
    });
  }
  return renderFigure("joint position tracking", panels);
}

/** Per-joint panels of true vs estimated joint speeds. */
export function speedsFigure(logDir: string, joints?: number[]): string {
  const truth = mustTable(logDir, "true_state");
  const smo = mustTable(logDir, "smo_state");
  const ref = tryTable(logDir, "trajectory_ref");
  const ekf = tryTable(logDir, "ekf_state");

  const dof = vectorWidth(truth) / 2;
  if (!Number.isInteger(dof) || dof < 1) {
    throw new SchemaError(`${truth.file} does not hold an even number of state columns`);
  }
  const t = column(truth, "t");
  const panels: Panel[] = [];
  for (const j of resolveJoints(joints, dof)) {
    const series: Series[] = [
      { label: "true", color: COLOR.truth, x: t, y: speedColumn(truth, j, dof) },
    ];
    if (ref) {
      series.push({
        label: "goal",
        color: COLOR.goal,
        x: column(ref, "t"),
        y: speedColumn(ref, j, dof),
        dash: "6 3",
      });
    }
    series.push({
      label: "SMO",
      color: COLOR.smo,
      x: column(smo, "t"),
      y: speedColumn(smo, j, dof),
    });
    if (ekf) {
      series.push({
        label: "EKF",
        color: COLOR.ekf,
        x: column(ekf, "t"),
        y: speedColumn(ekf, j, dof),
        dash: "2 2",
      });
    }
    panels.push({
      title: `joint ${j}`,
      xLabel: "time [s]",
      yLabel: "speed [rad/s]",
      series,
    });
  }
  return renderFigure("joint speeds", panels);
}

/**
 * Raw and window-averaged mass estimate, with a dashed line at the true
 * payload mass when it is known (from the plot spec or summary.json).
 */
export function massFigure(logDir: string, trueMass?: number): string {
  const mass = mustTable(logDir, "mass_estimate");
  const t = column(mass, "t");
  const raw = column(mass, "v1");
  const smoothed = column(mass, "v5");

  let ref = trueMass;
  if (ref === undefined) {
    const summary = readSummary(logDir);
    if (typeof summary.payload_mass_true === "number") {
      ref = summary.payload_mass_true;
    }
  }

  const panel: Panel = {
    title: "grasped mass estimate",
    xLabel: "time [s]",
    yLabel: "mass [kg]",
    series: [
      { label: "instantaneous", color: COLOR.raw, x: t, y: raw },
      { label: "window average", color: COLOR.smoothed, x: t, y: smoothed },
    ],
  };
  if (ref !== undefined) {
    panel.refY = ref;
    panel.refLabel = `true mass ${ref} kg`;
  }
  return renderFigure("payload mass reconstruction", [panel]);
}

/** Single panel from a two-column sweep CSV (x value, final mass). */
export function sweepFigure(csvPath: string): string {
  const table = readTable(csvPath);
  if (table.columns.length < 2) {
    throw new SchemaError(
      `${table.file} needs two columns (sweep variable, final mass), has: ${table.columns.join(",")}`
    );
  }
  const xName = table.columns[0];
  const yName = table.columns[1];
  const x = table.rows.map((r) => r[0]);
  const y = table.rows.map((r) => r[1]);
  const panel: Panel = {
    title: `${yName} vs ${xName}`,
    xLabel: xName,
    yLabel: `${yName} [kg]`,
    series: [{ label: yName, color: COLOR.raw, x, y }],
  };
  return renderFigure("sweep", [panel]);
}
