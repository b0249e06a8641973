/**
 * Redemption-curve family figure: per-validator price against the
 * stake-to-issuance ratio for several curve exponents, with the collateral
 * boundary marked.  Pure SVG so output is deterministic text.
 */

export interface CurveSpec {
  ks: number[];
  c: number;
  /** display ceiling for the price axis (curves diverge at the boundary) */
  yMax?: number;
  samples?: number;
}

const PALETTE = ["#440154", "#31688e", "#35b779", "#fde725", "#d95f02", "#7570b3"];

/** Price of the calibrated curve at stake ratio x = stake/issuance. */
export function curvePrice(k: number, c: number, x: number): number {
  if (x >= 1) return 1;
  if (x <= c) return Number.POSITIVE_INFINITY;
  const u = (x - c) / (1 - c);
  return k === 0 ? 1 : u ** -k;
}

function fmt(v: number): string {
  return Number(v.toFixed(4)).toString();
}

export function curveFamilySvg(spec: CurveSpec): string {
  if (spec.ks.length === 0) {
    throw new Error("need at least one curve exponent");
  }
  if (!(spec.c > 0 && spec.c < 1)) {
    throw new Error(`collateral factor must lie in (0, 1), got ${spec.c}`);
  }
  const yMax = spec.yMax ?? 5;
  const samples = spec.samples ?? 400;
  const width = 560;
  const height = 360;
  const m = { left: 56, right: 16, top: 28, bottom: 44 };
  const plotW = width - m.left - m.right;
  const plotH = height - m.top - m.bottom;
  const x0 = Math.max(0, spec.c - 0.05 * (1 - spec.c));
  const x1 = 1.25;
  const toX = (x: number) => m.left + ((x - x0) / (x1 - x0)) * plotW;
  const toY = (y: number) => m.top + (1 - (y - 0) / yMax) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${m.left}" y="16" font-family="monospace" font-size="12">redemption price vs stake/issuance ratio</text>`,
  );
  // axes
  parts.push(
    `<line x1="${m.left}" y1="${toY(0)}" x2="${m.left + plotW}" y2="${toY(0)}" stroke="black"/>`,
    `<line x1="${m.left}" y1="${m.top}" x2="${m.left}" y2="${toY(0)}" stroke="black"/>`,
  );
  for (const tick of [0, 1, 2, 3, 4, 5].filter((t) => t <= yMax)) {
    parts.push(
      `<line x1="${m.left - 4}" y1="${toY(tick)}" x2="${m.left}" y2="${toY(tick)}" stroke="black"/>`,
      `<text x="${m.left - 8}" y="${toY(tick) + 4}" text-anchor="end" font-family="monospace" font-size="10">${tick}</text>`,
    );
  }
  const xTicks = [spec.c, 1.0, 1.25].filter((t) => t >= x0 - 1e-12);
  for (const tick of xTicks) {
    parts.push(
      `<line x1="${fmt(toX(tick))}" y1="${toY(0)}" x2="${fmt(toX(tick))}" y2="${toY(0) + 4}" stroke="black"/>`,
      `<text x="${fmt(toX(tick))}" y="${toY(0) + 16}" text-anchor="middle" font-family="monospace" font-size="10">${fmt(tick)}</text>`,
    );
  }
  parts.push(
    `<text x="${m.left + plotW / 2}" y="${height - 8}" text-anchor="middle" font-family="monospace" font-size="11">stake / issuance stake</text>`,
  );
  // collateral boundary marker
  parts.push(
    `<line x1="${fmt(toX(spec.c))}" y1="${m.top}" x2="${fmt(toX(spec.c))}" y2="${toY(0)}" stroke="black" stroke-dasharray="4,3"/>`,
    `<text x="${fmt(toX(spec.c) + 4)}" y="${m.top + 12}" font-family="monospace" font-size="10">c=${fmt(spec.c)}</text>`,
  );
  // curves
  spec.ks.forEach((k, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const points: string[] = [];
    for (let s = 0; s <= samples; s++) {
      const x = x0 + ((x1 - x0) * s) / samples;
      const y = curvePrice(k, spec.c, x);
      if (!Number.isFinite(y) || y > yMax) continue;
      points.push(`${fmt(toX(x))},${fmt(toY(y))}`);
    }
    parts.push(
      `<polyline fill="none" stroke="${color}" stroke-width="1.5" points="${points.join(" ")}"/>`,
    );
    parts.push(
      `<text x="${m.left + plotW - 8}" y="${m.top + 14 + 13 * idx}" text-anchor="end" font-family="monospace" font-size="11" fill="${color}">k=${fmt(k)}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
