/** Hand-rolled SVG charts: attribution waterfall and |phi| bars.
 *
 * Every scientific number here comes from the explain response; the chart
 * code only maps values to pixels and rounds labels to 2 decimals.
 */

import type { WaterfallStep } from "./types";

export function round2(value: number): string {
  return value.toFixed(2);
}

const W = 640;
const ROW = 26;
const LABEL_W = 170;
const VALUE_W = 120;

export function waterfallSvg(steps: WaterfallStep[]): string {
  if (steps.length === 0) {
    return `<svg class="waterfall" width="${W}" height="30"></svg>`;
  }
  const values = steps.map((s) => s.cumulative);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const plotW = W - LABEL_W - VALUE_W;
  const x = (v: number) => LABEL_W + ((v - lo) / span) * plotW;
  const height = steps.length * ROW + 30;

  const parts: string[] = [];
  let previous = steps[0].cumulative;
  steps.forEach((step, i) => {
    const y = 10 + i * ROW;
    const isBase = i === 0;
    const from = isBase ? steps[0].cumulative : previous;
    const x0 = Math.min(x(from), x(step.cumulative));
    const width = Math.max(Math.abs(x(step.cumulative) - x(from)), 2);
    const cls = isBase ? "bar base" : step.phi >= 0 ? "bar positive" : "bar negative";
    parts.push(
      `<text class="label" x="${LABEL_W - 8}" y="${y + 14}" text-anchor="end">${step.label}</text>`,
      `<rect class="${cls}" x="${x0}" y="${y}" width="${width}" height="${ROW - 8}"></rect>`,
      `<text class="value" x="${W - VALUE_W + 8}" y="${y + 14}">` +
        (isBase ? `${round2(step.cumulative)}` : `${step.phi >= 0 ? "+" : ""}${round2(step.phi)} → ${round2(step.cumulative)}`) +
        `</text>`,
    );
    previous = step.cumulative;
  });
  const finalX = x(steps[steps.length - 1].cumulative);
  parts.push(
    `<line class="final" x1="${finalX}" x2="${finalX}" y1="4" y2="${height - 20}"></line>`,
  );
  return `<svg class="waterfall" width="${W}" height="${height}" role="img">${parts.join("")}</svg>`;
}

export function phiBarsSvg(entries: { name: string; phi: number }[]): string {
  if (entries.length === 0) {
    return `<svg class="phi-bars" width="${W}" height="30"></svg>`;
  }
  const maxAbs = Math.max(...entries.map((e) => Math.abs(e.phi))) || 1;
  const plotW = W - LABEL_W - VALUE_W;
  const mid = LABEL_W + plotW / 2;
  const height = entries.length * ROW + 20;
  const parts: string[] = [];
  entries.forEach((entry, i) => {
    const y = 8 + i * ROW;
    const width = (Math.abs(entry.phi) / maxAbs) * (plotW / 2);
    const x0 = entry.phi >= 0 ? mid : mid - width;
    parts.push(
      `<text class="label" x="${LABEL_W - 8}" y="${y + 14}" text-anchor="end">${entry.name}</text>`,
      `<rect class="bar ${entry.phi >= 0 ? "positive" : "negative"}" x="${x0}" y="${y}" width="${Math.max(width, 1)}" height="${ROW - 10}"></rect>`,
      `<text class="value" x="${W - VALUE_W + 8}" y="${y + 14}">${entry.phi >= 0 ? "+" : ""}${round2(entry.phi)}</text>`,
    );
  });
  parts.push(`<line class="axis" x1="${mid}" x2="${mid}" y1="2" y2="${height - 12}"></line>`);
  return `<svg class="phi-bars" width="${W}" height="${height}" role="img">${parts.join("")}</svg>`;
}
