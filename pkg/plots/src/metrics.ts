/**
 * Reading and validating the solver's metrics files.
 *
 * A run is a CSV of per-trial rows written by the experiment CLI plus an
 * optional JSON sidecar (same path with a .json extension) holding run
 * metadata used for legend labels.  This module never recomputes any
 * optimization quantity: it only reads what the CSV contains.
 */

import fs from "node:fs";
import path from "node:path";
import Papa from "papaparse";

export interface MetricsRow {
  round: number;
  f_value: number;
  inner_iters: number;
  wall_ms: number;
}

export interface MetricsRun {
  file: string;
  label: string;
  rows: MetricsRow[];
}

export class MetricsError extends Error {}

const REQUIRED = ["round", "f_value", "inner_iters", "wall_ms"] as const;

function labelFromSidecar(csvPath: string): string {
  const sidecar = csvPath.replace(/\.[^.]*$/, "") + ".json";
  const fallback = path.basename(csvPath).replace(/\.[^.]*$/, "");
  if (!fs.existsSync(sidecar)) return fallback;
  try {
    const meta = JSON.parse(fs.readFileSync(sidecar, "utf-8"));
    const parts: string[] = [];
    if (meta.m !== undefined) parts.push(`m=${meta.m}`);
    if (meta.n_precond !== undefined) parts.push(`n=${meta.n_precond}`);
    if (meta.sigma !== undefined) parts.push(`sigma=${meta.sigma}`);
    return parts.length ? `${fallback} (${parts.join(", ")})` : fallback;
  } catch {
    return fallback;
  }
}

export function readRun(file: string): MetricsRun {
  if (!fs.existsSync(file)) {
    throw new MetricsError(`metrics file not found: ${file}`);
  }
  const text = fs.readFileSync(file, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new MetricsError(`${file}: row ${(e.row ?? 0) + 1}: ${e.message}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const col of REQUIRED) {
    if (!fields.includes(col)) {
      throw new MetricsError(`${file}: missing required column '${col}'`);
    }
  }
  if (parsed.data.length === 0) {
    throw new MetricsError(`${file}: no data rows (header only)`);
  }
  const rows: MetricsRow[] = parsed.data.map((raw, i) => {
    const row: Partial<MetricsRow> = {};
    for (const col of REQUIRED) {
      const v = Number(raw[col]);
      if (!Number.isFinite(v)) {
        throw new MetricsError(
          `${file}: row ${i + 2}: column '${col}' is not numeric: ${raw[col]}`,
        );
      }
      row[col] = v;
    }
    return row as MetricsRow;
  });
  for (let i = 1; i < rows.length; i++) {
    if (rows[i].round < rows[i - 1].round) {
      throw new MetricsError(
        `${file}: row ${i + 2}: rounds must be nondecreasing`,
      );
    }
  }
  return { file, label: labelFromSidecar(file), rows };
}
