/**
 * Dependency-free SVG bar chart: mean intervention length per episode.
 * Returns markup as a string so it can be tested without a DOM.
 */

import { EpisodeStatsRow } from "./stats.js";

export interface ChartOptions {
  width?: number;
  height?: number;
  barColor?: string;
}

export function interventionChartSvg(
  rows: EpisodeStatsRow[],
  options: ChartOptions = {}
): string {
  const width = options.width ?? 640;
  const height = options.height ?? 220;
  const color = options.barColor ?? "#c2571a";
  const pad = { left: 36, right: 8, top: 12, bottom: 28 };
  const plotW = width - pad.left - pad.right;
  const plotH = height - pad.top - pad.bottom;
  const maxValue = Math.max(1, ...rows.map((r) => r.meanRunLength));
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `class="intervention-chart" role="img">`,
    `<line x1="${pad.left}" y1="${pad.top + plotH}" x2="${pad.left + plotW}" ` +
      `y2="${pad.top + plotH}" stroke="#888"/>`,
    `<line x1="${pad.left}" y1="${pad.top}" x2="${pad.left}" ` +
      `y2="${pad.top + plotH}" stroke="#888"/>`,
    `<text x="4" y="${pad.top + 8}" font-size="10" fill="#555">${maxValue.toFixed(1)}</text>`,
    `<text x="4" y="${pad.top + plotH}" font-size="10" fill="#555">0</text>`,
  ];
  const n = Math.max(rows.length, 1);
  const slot = plotW / n;
  const barW = Math.max(2, slot * 0.7);
  rows.forEach((row, i) => {
    const h = (row.meanRunLength / maxValue) * plotH;
    const x = pad.left + i * slot + (slot - barW) / 2;
    const y = pad.top + plotH - h;
    parts.push(
      `<rect x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${barW.toFixed(1)}" ` +
        `height="${h.toFixed(1)}" fill="${color}" data-episode="${row.id}" ` +
        `data-mean="${row.meanRunLength.toFixed(3)}"><title>${row.id}: ` +
        `${row.meanRunLength.toFixed(3)}</title></rect>`
    );
  });
  parts.push(
    `<text x="${pad.left + plotW / 2}" y="${height - 8}" font-size="11" ` +
      `fill="#555" text-anchor="middle">episode</text>`,
    "</svg>"
  );
  return parts.join("");
}

/** The numeric series a chart renders, for equality checks against the CLI. */
export function chartData(rows: EpisodeStatsRow[]): Array<{ id: string; mean: string }> {
  return rows.map((row) => ({ id: row.id, mean: row.meanRunLength.toFixed(3) }));
}
