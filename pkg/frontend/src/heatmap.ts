/**
 * Heatmap rendering: one colored cell per sweep grid point, axis tick
 * labels, a vertical colorbar, and neutral fills (with a warning) for
 * cells absent from the CSV.
 */

import { luminance, MISSING_CELL, Rgb, viridis } from "./colormap.js";
import { SchemaError, SweepRow } from "./csv.js";
import { drawText, GLYPH_H, textWidth } from "./font.js";
import { encodePng, Raster } from "./png.js";

export interface HeatmapSpec {
  metric: string;
  stat: "mean" | "std";
  vmin?: number;
  vmax?: number;
  title?: string;
  cellSize?: number;
  warn?: (message: string) => void;
}

export interface HeatmapModel {
  axis1Name: string;
  axis2Name: string;
  axis1Values: number[];
  axis2Values: number[];
  /** values[i][j] for (axis1Values[i], axis2Values[j]); NaN = missing */
  values: number[][];
  vmin: number;
  vmax: number;
}

function formatTick(v: number): string {
  if (v !== 0 && (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3)) {
    return v.toExponential(1);
  }
  const fixed = v.toFixed(3);
  return fixed.replace(/\.?0+$/, "").replace(/^-0$/, "0");
}

/** Default color-scale bounds: the std of a [0,1]-valued metric lives in
 * [0, 0.5]; anything else scales to the data. */
export function scaleBounds(
  spec: Pick<HeatmapSpec, "metric" | "stat" | "vmin" | "vmax">,
  values: number[],
): [number, number] {
  if (spec.vmin !== undefined && spec.vmax !== undefined) {
    if (!(Number.isFinite(spec.vmin) && Number.isFinite(spec.vmax)) || spec.vmax <= spec.vmin) {
      throw new Error(`bad color-scale bounds [${spec.vmin}, ${spec.vmax}]`);
    }
    return [spec.vmin, spec.vmax];
  }
  if (spec.stat === "std" && spec.metric === "gini") {
    return [0.0, 0.5];
  }
  const finite = values.filter((v) => Number.isFinite(v));
  if (finite.length === 0) {
    return [0, 1];
  }
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  if (hi <= lo) {
    hi = lo + 1e-9;
  }
  return [lo, hi];
}

export function buildModel(rows: SweepRow[], spec: HeatmapSpec): HeatmapModel {
  const metrics = new Set(rows.map((r) => r.metric));
  if (!metrics.has(spec.metric)) {
    throw new SchemaError(
      `metric '${spec.metric}' not present (have: ${[...metrics].sort().join(", ")})`,
      "metric",
    );
  }
  const stats = new Set(rows.map((r) => r.stat));
  if (!stats.has(spec.stat)) {
    throw new SchemaError(`stat '${spec.stat}' not present`, "stat");
  }
  const selected = rows.filter((r) => r.metric === spec.metric && r.stat === spec.stat);
  const axis1Values = [...new Set(selected.map((r) => r.axis1Value))].sort((a, b) => a - b);
  const axis2Values = [...new Set(selected.map((r) => r.axis2Value))].sort((a, b) => a - b);
  const values = axis1Values.map(() => axis2Values.map(() => Number.NaN));
  for (const row of selected) {
    const i = axis1Values.indexOf(row.axis1Value);
    const j = axis2Values.indexOf(row.axis2Value);
    values[i][j] = row.value;
  }
  const warn = spec.warn ?? ((msg: string) => console.warn(msg));
  for (let i = 0; i < axis1Values.length; i++) {
    for (let j = 0; j < axis2Values.length; j++) {
      if (Number.isNaN(values[i][j])) {
        warn(
          `missing cell (${axis1Values[i]}, ${axis2Values[j]}) for ${spec.metric}/${spec.stat}; rendered neutral`,
        );
      }
    }
  }
  const flat = values.flat();
  const [vmin, vmax] = scaleBounds(spec, flat);
  return {
    axis1Name: selected[0].axis1Name,
    axis2Name: selected[0].axis2Name,
    axis1Values,
    axis2Values,
    values,
    vmin,
    vmax,
  };
}

const MARGIN_LEFT = 64;
const MARGIN_BOTTOM = 40;
const MARGIN_TOP = 24;
const BAR_GAP = 14;
const BAR_WIDTH = 16;
const MARGIN_RIGHT = BAR_GAP + BAR_WIDTH + 52;

export function renderHeatmap(model: HeatmapModel, spec: HeatmapSpec): Raster {
  const cell = spec.cellSize ?? 44;
  const cols = model.axis1Values.length;
  const rowsN = model.axis2Values.length;
  const plotW = cols * cell;
  const plotH = rowsN * cell;
  const raster = new Raster(
    MARGIN_LEFT + plotW + MARGIN_RIGHT,
    MARGIN_TOP + plotH + MARGIN_BOTTOM,
  );
  const annotate = cols === 1 && rowsN === 1;
  const span = model.vmax - model.vmin;
  for (let i = 0; i < cols; i++) {
    for (let j = 0; j < rowsN; j++) {
      const value = model.values[i][j];
      const color: Rgb = Number.isNaN(value)
        ? MISSING_CELL
        : viridis((value - model.vmin) / span);
      // axis2 grows upward, raster y grows downward
      const x0 = MARGIN_LEFT + i * cell;
      const y0 = MARGIN_TOP + (rowsN - 1 - j) * cell;
      raster.fillRect(x0, y0, cell - 1, cell - 1, color);
      if (annotate && !Number.isNaN(value)) {
        const label = formatTick(value);
        const ink: Rgb = luminance(color) > 0.5 ? [0, 0, 0] : [255, 255, 255];
        drawText(
          raster,
          x0 + Math.max(2, Math.floor((cell - textWidth(label)) / 2)),
          y0 + Math.floor((cell - GLYPH_H) / 2),
          label,
          ink,
        );
      }
    }
  }
  const title = spec.title ?? `${spec.metric} (${spec.stat})`;
  drawText(raster, MARGIN_LEFT, Math.floor((MARGIN_TOP - GLYPH_H) / 2), title);
  // x ticks and axis name
  for (let i = 0; i < cols; i++) {
    const label = formatTick(model.axis1Values[i]);
    const cx = MARGIN_LEFT + i * cell + Math.floor((cell - textWidth(label)) / 2);
    drawText(raster, cx, MARGIN_TOP + plotH + 4, label);
  }
  drawText(
    raster,
    MARGIN_LEFT + Math.max(0, Math.floor((plotW - textWidth(model.axis1Name)) / 2)),
    MARGIN_TOP + plotH + 16 + 4,
    model.axis1Name,
  );
  // y ticks and axis name (vertical placement, horizontal text)
  for (let j = 0; j < rowsN; j++) {
    const label = formatTick(model.axis2Values[j]);
    const cy = MARGIN_TOP + (rowsN - 1 - j) * cell + Math.floor((cell - GLYPH_H) / 2);
    drawText(raster, Math.max(2, MARGIN_LEFT - 6 - textWidth(label)), cy, label);
  }
  drawText(raster, 2, Math.max(2, Math.floor((MARGIN_TOP - GLYPH_H) / 2)), model.axis2Name);
  // colorbar
  const barX = MARGIN_LEFT + plotW + BAR_GAP;
  for (let y = 0; y < plotH; y++) {
    const t = 1 - y / Math.max(plotH - 1, 1);
    const color = viridis(t);
    for (let x = 0; x < BAR_WIDTH; x++) {
      raster.set(barX + x, MARGIN_TOP + y, color);
    }
  }
  drawText(raster, barX + BAR_WIDTH + 4, MARGIN_TOP, formatTick(model.vmax));
  drawText(raster, barX + BAR_WIDTH + 4, MARGIN_TOP + plotH - GLYPH_H, formatTick(model.vmin));
  return raster;
}

export function heatmapPng(rows: SweepRow[], spec: HeatmapSpec): Buffer {
  return encodePng(renderHeatmap(buildModel(rows, spec), spec));
}
