/**
 * Minimal deterministic SVG chart primitives: linear / log10 scales,
 * tick generation, polylines and markers.  No DOM, no randomness; the
 * same inputs always produce the same bytes.
 */

export interface Scale {
  (v: number): number;
  ticks(): number[];
}

export function linearScale(
  lo: number,
  hi: number,
  outLo: number,
  outHi: number,
): Scale {
  if (hi <= lo) hi = lo + 1;
  const f = ((v: number) => outLo + ((v - lo) / (hi - lo)) * (outHi - outLo)) as Scale;
  f.ticks = () => {
    const span = hi - lo;
    const step = Math.pow(10, Math.floor(Math.log10(span / 4)));
    const mult = span / step > 8 ? 2 : 1;
    const ticks: number[] = [];
    const start = Math.ceil(lo / (step * mult)) * step * mult;
    for (let v = start; v <= hi + 1e-12 * span; v += step * mult) {
      ticks.push(Number(v.toPrecision(12)));
    }
    return ticks;
  };
  return f;
}

export function log10Scale(
  lo: number,
  hi: number,
  outLo: number,
  outHi: number,
): Scale {
  if (lo <= 0) throw new Error("log scale needs positive bounds");
  if (hi <= lo) hi = lo * 10;
  const la = Math.log10(lo);
  const lb = Math.log10(hi);
  const f = ((v: number) =>
    outLo + ((Math.log10(v) - la) / (lb - la)) * (outHi - outLo)) as Scale;
  f.ticks = () => {
    const ticks: number[] = [];
    for (let e = Math.ceil(la); e <= Math.floor(lb); e++) {
      ticks.push(Math.pow(10, e));
    }
    if (ticks.length === 0) ticks.push(lo, hi);
    return ticks;
  };
  return f;
}

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
  "#e377c2", "#17becf",
];

export interface Series {
  label: string;
  points: Array<[number, number]>;
  color: string;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  width?: number;
  height?: number;
  logY?: boolean;
  markers?: boolean;
}

function fmtTick(v: number): string {
  if (v !== 0 && (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3)) {
    const e = Math.floor(Math.log10(Math.abs(v)));
    const m = v / Math.pow(10, e);
    return m === 1 ? `1e${e}` : `${m.toPrecision(3)}e${e}`;
  }
  return String(Number(v.toPrecision(6)));
}

export function renderChart(series: Series[], spec: ChartSpec): string {
  const W = spec.width ?? 720;
  const H = spec.height ?? 480;
  const m = { left: 70, right: 20, top: 40, bottom: 50 };
  const xs = series.flatMap((s) => s.points.map((p) => p[0]));
  const ys = series.flatMap((s) => s.points.map((p) => p[1]));
  if (xs.length === 0) throw new Error("nothing to plot");
  const x = linearScale(Math.min(...xs), Math.max(...xs), m.left, W - m.right);
  const y = spec.logY
    ? log10Scale(Math.min(...ys), Math.max(...ys), H - m.bottom, m.top)
    : linearScale(Math.min(0, ...ys), Math.max(...ys), H - m.bottom, m.top);

  const out: string[] = [];
  out.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`,
  );
  out.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  out.push(
    `<text x="${W / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="15">${spec.title}</text>`,
  );
  // axes
  out.push(
    `<line x1="${m.left}" y1="${H - m.bottom}" x2="${W - m.right}" y2="${H - m.bottom}" stroke="black"/>`,
  );
  out.push(
    `<line x1="${m.left}" y1="${m.top}" x2="${m.left}" y2="${H - m.bottom}" stroke="black"/>`,
  );
  for (const t of x.ticks()) {
    const px = x(t);
    out.push(
      `<line x1="${px.toFixed(2)}" y1="${H - m.bottom}" x2="${px.toFixed(2)}" y2="${H - m.bottom + 5}" stroke="black"/>`,
    );
    out.push(
      `<text x="${px.toFixed(2)}" y="${H - m.bottom + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">${fmtTick(t)}</text>`,
    );
  }
  for (const t of y.ticks()) {
    const py = y(t);
    out.push(
      `<line x1="${m.left - 5}" y1="${py.toFixed(2)}" x2="${m.left}" y2="${py.toFixed(2)}" stroke="black"/>`,
    );
    out.push(
      `<line x1="${m.left}" y1="${py.toFixed(2)}" x2="${W - m.right}" y2="${py.toFixed(2)}" stroke="#dddddd" stroke-width="0.5"/>`,
    );
    out.push(
      `<text x="${m.left - 8}" y="${(py + 4).toFixed(2)}" text-anchor="end" font-family="sans-serif" font-size="11">${fmtTick(t)}</text>`,
    );
  }
  out.push(
    `<text x="${(m.left + W - m.right) / 2}" y="${H - 12}" text-anchor="middle" font-family="sans-serif" font-size="13">${spec.xLabel}</text>`,
  );
  out.push(
    `<text x="18" y="${(m.top + H - m.bottom) / 2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 ${(m.top + H - m.bottom) / 2})">${spec.yLabel}</text>`,
  );
  // series
  series.forEach((s, idx) => {
    const pts = s.points
      .map(([px, py]) => `${x(px).toFixed(2)},${y(py).toFixed(2)}`)
      .join(" ");
    if (s.points.length > 1) {
      out.push(
        `<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="1.8"/>`,
      );
    }
    if (spec.markers || s.points.length === 1) {
      for (const [px, py] of s.points) {
        out.push(
          `<circle cx="${x(px).toFixed(2)}" cy="${y(py).toFixed(2)}" r="2.5" fill="${s.color}"/>`,
        );
      }
    }
    // legend
    const ly = m.top + 16 * idx;
    out.push(
      `<line x1="${W - m.right - 150}" y1="${ly}" x2="${W - m.right - 125}" y2="${ly}" stroke="${s.color}" stroke-width="2"/>`,
    );
    out.push(
      `<text x="${W - m.right - 120}" y="${ly + 4}" font-family="sans-serif" font-size="11">${s.label}</text>`,
    );
  });
  out.push("</svg>");
  return out.join("\n") + "\n";
}
