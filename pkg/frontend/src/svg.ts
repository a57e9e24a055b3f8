/**
 * Deterministic SVG figure rendering: overlay curves and grouped box plots.
 * No timestamps, no randomness, fixed generic font stack — same inputs
 * always produce byte-identical output.
 */
import type { Series, BoxSummary } from "./schema.js";

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const FONT = 'font-family="Helvetica,Arial,sans-serif"';

/** Fixed-precision coordinate formatting so output never varies by platform. */
function fmt(v: number): string {
  return Number(v.toFixed(2)).toString();
}

/** Round-ish axis tick positions over [lo, hi]. */
export function ticks(lo: number, hi: number, count = 5): number[] {
  if (hi <= lo) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / (count * step);
  const mult = err >= 7.5 ? 10 : err >= 3 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const out: number[] = [];
  for (let t = Math.ceil(lo / s) * s; t <= hi + 1e-9; t += s) out.push(Number(t.toFixed(10)));
  return out;
}

interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

const DEFAULT_FRAME: Frame = {
  width: 720,
  height: 480,
  margin: { top: 24, right: 24, bottom: 56, left: 72 },
};

function axes(
  frame: Frame,
  xlo: number,
  xhi: number,
  ylo: number,
  yhi: number,
  xLabel: string,
  yLabel: string,
): { parts: string[]; sx: (v: number) => number; sy: (v: number) => number } {
  const { width, height, margin } = frame;
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const sx = (v: number) => margin.left + ((v - xlo) / (xhi - xlo || 1)) * plotW;
  const sy = (v: number) => margin.top + plotH - ((v - ylo) / (yhi - ylo || 1)) * plotH;
  const parts: string[] = [];
  parts.push(`<rect x="0" y="0" width="${width}" height="${height}" fill="#ffffff"/>`);
  for (const t of ticks(xlo, xhi)) {
    const px = fmt(sx(t));
    parts.push(
      `<line x1="${px}" y1="${fmt(margin.top)}" x2="${px}" y2="${fmt(margin.top + plotH)}" stroke="#dddddd" stroke-width="1"/>`,
      `<text x="${px}" y="${fmt(margin.top + plotH + 18)}" ${FONT} font-size="12" fill="#333333" text-anchor="middle">${t}</text>`,
    );
  }
  for (const t of ticks(ylo, yhi)) {
    const py = fmt(sy(t));
    parts.push(
      `<line x1="${fmt(margin.left)}" y1="${py}" x2="${fmt(margin.left + plotW)}" y2="${py}" stroke="#dddddd" stroke-width="1"/>`,
      `<text x="${fmt(margin.left - 8)}" y="${fmt(sy(t) + 4)}" ${FONT} font-size="12" fill="#333333" text-anchor="end">${t}</text>`,
    );
  }
  parts.push(
    `<rect x="${fmt(margin.left)}" y="${fmt(margin.top)}" width="${fmt(plotW)}" height="${fmt(plotH)}" fill="none" stroke="#333333" stroke-width="1"/>`,
    `<text x="${fmt(margin.left + plotW / 2)}" y="${fmt(height - 12)}" ${FONT} font-size="14" fill="#000000" text-anchor="middle">${xLabel}</text>`,
    `<text x="18" y="${fmt(margin.top + plotH / 2)}" ${FONT} font-size="14" fill="#000000" text-anchor="middle" transform="rotate(-90 18 ${fmt(margin.top + plotH / 2)})">${yLabel}</text>`,
  );
  return { parts, sx, sy };
}

function svgDocument(frame: Frame, body: string[]): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}">\n` +
    body.join("\n") +
    "\n</svg>\n"
  );
}

/** Overlay line chart of several series with a legend. */
export function renderCurve(
  series: Series[],
  xLabel = "allocation index",
  yLabel = "unique blocks touched",
): string {
  const frame = DEFAULT_FRAME;
  const xhi = Math.max(...series.map((s) => Math.max(...s.x)));
  const yhi = Math.max(...series.map((s) => Math.max(...s.y)));
  const { parts, sx, sy } = axes(frame, 0, xhi, 0, yhi * 1.05, xLabel, yLabel);
  series.forEach((s, i) => {
    const pts = s.x.map((xv, k) => `${fmt(sx(xv))},${fmt(sy(s.y[k]))}`).join(" ");
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${PALETTE[i % PALETTE.length]}" stroke-width="2"/>`,
    );
  });
  // Legend, top-left inside the plot area.
  const lx = frame.margin.left + 12;
  let ly = frame.margin.top + 16;
  parts.push(
    `<rect x="${fmt(lx - 6)}" y="${fmt(ly - 12)}" width="140" height="${fmt(series.length * 18 + 8)}" fill="#ffffff" stroke="#999999" stroke-width="1"/>`,
  );
  series.forEach((s, i) => {
    parts.push(
      `<line x1="${fmt(lx)}" y1="${fmt(ly)}" x2="${fmt(lx + 24)}" y2="${fmt(ly)}" stroke="${PALETTE[i % PALETTE.length]}" stroke-width="2"/>`,
      `<text x="${fmt(lx + 30)}" y="${fmt(ly + 4)}" ${FONT} font-size="12" fill="#000000">${s.label}</text>`,
    );
    ly += 18;
  });
  return svgDocument(frame, parts);
}

/** Grouped box-and-whisker figure from five-number summaries. */
export function renderBox(summaries: BoxSummary[], yLabel = "recycle count per block"): string {
  const frame = DEFAULT_FRAME;
  const yhi = Math.max(...summaries.map((s) => s.max));
  const { parts, sx, sy } = axes(frame, 0, summaries.length, 0, yhi * 1.05, "", yLabel);
  const boxHalf = 0.3; // half-width in x-axis units
  summaries.forEach((s, i) => {
    const cx = i + 0.5;
    const color = PALETTE[i % PALETTE.length];
    const x0 = fmt(sx(cx - boxHalf));
    const x1 = fmt(sx(cx + boxHalf));
    const xc = fmt(sx(cx));
    parts.push(
      `<line x1="${xc}" y1="${fmt(sy(s.min))}" x2="${xc}" y2="${fmt(sy(s.q1))}" stroke="#333333" stroke-width="1"/>`,
      `<line x1="${xc}" y1="${fmt(sy(s.q3))}" x2="${xc}" y2="${fmt(sy(s.max))}" stroke="#333333" stroke-width="1"/>`,
      `<line x1="${fmt(sx(cx - boxHalf / 2))}" y1="${fmt(sy(s.min))}" x2="${fmt(sx(cx + boxHalf / 2))}" y2="${fmt(sy(s.min))}" stroke="#333333" stroke-width="1"/>`,
      `<line x1="${fmt(sx(cx - boxHalf / 2))}" y1="${fmt(sy(s.max))}" x2="${fmt(sx(cx + boxHalf / 2))}" y2="${fmt(sy(s.max))}" stroke="#333333" stroke-width="1"/>`,
      `<rect x="${x0}" y="${fmt(sy(s.q3))}" width="${fmt(sx(cx + boxHalf) - sx(cx - boxHalf))}" height="${fmt(sy(s.q1) - sy(s.q3))}" fill="${color}" fill-opacity="0.35" stroke="#333333" stroke-width="1"/>`,
      `<line x1="${x0}" y1="${fmt(sy(s.median))}" x2="${x1}" y2="${fmt(sy(s.median))}" stroke="#000000" stroke-width="2"/>`,
      `<text x="${xc}" y="${fmt(frame.height - frame.margin.bottom + 18)}" ${FONT} font-size="12" fill="#333333" text-anchor="middle">${s.label}</text>`,
    );
  });
  return svgDocument(frame, parts);
}
