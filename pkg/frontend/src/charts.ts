// Inline SVG charts rendered from the typed series the API delivers —
// the same series the report HTML embeds, so both views share one
// source of truth.

import { escapeHtml } from "./format.js";
import type { Comparison, Perception, RateBin, WeekPoint } from "./types.js";

const LINE_W = 640;
const LINE_H = 220;
const PAD = 32;

export function weeklyLineChart(points: WeekPoint[]): string {
  if (!points.length) return "<p>No weekly data.</p>";
  const ys = points.map((p) => p.mean_take_rate_pct);
  const lo = Math.min(...ys);
  const hi = Math.max(...ys) === lo ? lo + 1 : Math.max(...ys);
  const coords = points.map((p, i) => {
    const x = PAD + ((LINE_W - 2 * PAD) * i) / Math.max(points.length - 1, 1);
    const y = LINE_H - PAD - ((LINE_H - 2 * PAD) * (p.mean_take_rate_pct - lo)) / (hi - lo);
    return `${x.toFixed(1)},${y.toFixed(1)}`;
  });
  return (
    `<svg viewBox="0 0 ${LINE_W} ${LINE_H}" role="img" aria-label="weekly take rate">` +
    `<polyline fill="none" stroke="#2a6f97" stroke-width="1.5" points="${coords.join(" ")}"/>` +
    `<text x="${PAD}" y="${LINE_H - 8}" font-size="10">${escapeHtml(points[0].iso_week)}</text>` +
    `<text x="${LINE_W - PAD}" y="${LINE_H - 8}" font-size="10" text-anchor="end">` +
    `${escapeHtml(points[points.length - 1].iso_week)}</text>` +
    `<text x="4" y="${PAD}" font-size="10">${hi.toFixed(1)}%</text>` +
    `<text x="4" y="${LINE_H - PAD}" font-size="10">${lo.toFixed(1)}%</text>` +
    `</svg>`
  );
}

function histogram(values: number[], binWidth: number): Map<number, number> {
  const counts = new Map<number, number>();
  for (const v of values) {
    const k = Math.floor(v / binWidth);
    counts.set(k, (counts.get(k) ?? 0) + 1);
  }
  return counts;
}

export function comparisonHistogram(comp: Comparison): string {
  const a = comp.values_a ?? [];
  const b = comp.values_b ?? [];
  if (!a.length || !b.length) return "<p>Not enough data for a histogram.</p>";
  const sides: Array<[number[], string, string]> = [
    [a, "#2a6f97", comp.label_a],
    [b, "#bc4749", comp.label_b],
  ];
  const allKs: number[] = [];
  const series = sides.map(([values, color, label]) => {
    const counts = histogram(values, comp.bin_width_pct);
    allKs.push(...counts.keys());
    return { counts, color, label, total: values.length };
  });
  const loK = Math.min(...allKs);
  const hiK = Math.max(...allKs) === loK ? loK + 1 : Math.max(...allKs);
  const maxShare = Math.max(
    ...series.flatMap((s) => [...s.counts.values()].map((c) => c / s.total)),
  );
  const polylines = series
    .map(({ counts, color, total }) => {
      const coords: string[] = [];
      for (let k = loK; k <= hiK; k++) {
        const share = (counts.get(k) ?? 0) / total;
        const x = PAD + ((LINE_W - 2 * PAD) * (k - loK)) / (hiK - loK);
        const y = LINE_H - PAD - ((LINE_H - 2 * PAD) * share) / maxShare;
        coords.push(`${x.toFixed(1)},${y.toFixed(1)}`);
      }
      return `<polyline fill="none" stroke="${color}" stroke-width="1.5" points="${coords.join(" ")}"/>`;
    })
    .join("");
  const legend =
    `<text x="${PAD}" y="14" font-size="10" fill="#2a6f97">${escapeHtml(comp.label_a)}</text>` +
    `<text x="${PAD + 110}" y="14" font-size="10" fill="#bc4749">${escapeHtml(comp.label_b)}</text>` +
    `<text x="4" y="${LINE_H - PAD}" font-size="10">${(loK * comp.bin_width_pct).toFixed(0)}%</text>` +
    `<text x="${LINE_W - PAD}" y="${LINE_H - PAD}" font-size="10" text-anchor="end">` +
    `${(hiK * comp.bin_width_pct).toFixed(0)}%</text>`;
  return (
    `<svg viewBox="0 0 ${LINE_W} ${LINE_H}" role="img" aria-label="take rate histogram">` +
    polylines +
    legend +
    `</svg>`
  );
}

export function barChart(bars: Array<{ label: string; value: number }>, unit = "%"): string {
  if (!bars.length) return "<p>No data.</p>";
  const w = 480;
  const h = 200;
  const hi = Math.max(...bars.map((b) => b.value)) || 1;
  const bw = (w - 2 * PAD) / bars.length;
  const rects = bars
    .map((bar, i) => {
      const bh = ((h - 2 * PAD) * bar.value) / hi;
      const x = PAD + i * bw;
      const y = h - PAD - bh;
      return (
        `<rect x="${(x + 4).toFixed(1)}" y="${y.toFixed(1)}" width="${(bw - 8).toFixed(1)}"` +
        ` height="${bh.toFixed(1)}" fill="#2a6f97"/>` +
        `<text x="${(x + bw / 2).toFixed(1)}" y="${h - PAD + 14}" font-size="10"` +
        ` text-anchor="middle">${escapeHtml(bar.label)}</text>` +
        `<text x="${(x + bw / 2).toFixed(1)}" y="${(y - 4).toFixed(1)}" font-size="10"` +
        ` text-anchor="middle">${bar.value.toFixed(2)}${unit}</text>`
      );
    })
    .join("");
  return `<svg viewBox="0 0 ${w} ${h}" role="img">${rects}</svg>`;
}

export function perceptionChart(p: Perception): string {
  if (!p.n_respondents) return "<p>No survey responses yet.</p>";
  return barChart([
    { label: "estimated", value: p.mean_estimated_pct ?? 0 },
    { label: "fair", value: p.mean_fair_pct ?? 0 },
    { label: "actual", value: p.actual_pct ?? 0 },
  ]);
}

export function ratePerMileChart(bins: RateBin[]): string {
  if (!bins.length) return "<p>No distance data.</p>";
  return barChart(
    bins.map((b) => ({
      label: `${b.lo_miles}-${b.hi_miles} mi`,
      value: b.mean_rate_usd_per_mile,
    })),
    "",
  );
}
