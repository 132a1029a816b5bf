/**
 * The two figure builders: objective-gap convergence curves (log scale,
 * against communication rounds or elapsed seconds) and per-round inner
 * iteration cost.  The reference value for the gap is the smallest
 * objective value seen across all input runs, standing in for the unknown
 * minimizer the way experiment reports usually do.
 */

import fs from "node:fs";
import { MetricsError, MetricsRun, readRun } from "./metrics.js";
import { PALETTE, renderChart, Series } from "./svg.js";

export type XAxis = "rounds" | "seconds";

function xValues(run: MetricsRun, axis: XAxis): number[] {
  if (axis === "rounds") return run.rows.map((r) => r.round);
  let acc = 0;
  return run.rows.map((r) => {
    acc += r.wall_ms / 1000;
    return acc;
  });
}

export function convergenceSvg(files: string[], axis: XAxis): string {
  if (files.length === 0) throw new MetricsError("need at least one metrics file");
  const runs = files.map(readRun);
  const fmin = Math.min(...runs.flatMap((r) => r.rows.map((q) => q.f_value)));
  const series: Series[] = runs.map((run, i) => {
    const xs = xValues(run, axis);
    const points: Array<[number, number]> = [];
    run.rows.forEach((row, j) => {
      const gap = row.f_value - fmin;
      if (gap > 0) points.push([xs[j], gap]);
    });
    if (points.length === 0) {
      throw new MetricsError(
        `${run.file}: no positive objective gaps to draw on a log scale`,
      );
    }
    return { label: run.label, points, color: PALETTE[i % PALETTE.length] };
  });
  return renderChart(series, {
    title: "objective gap vs " + (axis === "rounds" ? "communication rounds" : "wall time"),
    xLabel: axis === "rounds" ? "communication rounds" : "seconds",
    yLabel: "objective gap",
    logY: true,
    markers: true,
  });
}

export function innerCostSvg(file: string): string {
  const run = readRun(file);
  const series: Series[] = [
    {
      label: run.label,
      points: run.rows.map((r) => [r.round, r.inner_iters]),
      color: PALETTE[0],
    },
  ];
  return renderChart(series, {
    title: "subproblem cost per communication round",
    xLabel: "communication rounds",
    yLabel: "inner iterations",
    logY: false,
    markers: true,
  });
}

export function writeFigure(svg: string, out: string): void {
  if (out.toLowerCase().endsWith(".png")) {
    throw new MetricsError(
      "png encoding is not built in; write .svg (every viewer and converter reads it)",
    );
  }
  fs.writeFileSync(out, svg);
}

export function plotConvergence(files: string[], out: string, axis: XAxis): void {
  writeFigure(convergenceSvg(files, axis), out);
}

export function plotInnerCost(file: string, out: string): void {
  writeFigure(innerCostSvg(file), out);
}
