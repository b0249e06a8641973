/** Viridis colormap via linear interpolation between anchor stops. */

export type Rgb = [number, number, number];

const ANCHORS: Rgb[] = [
  [68, 1, 84],
  [72, 40, 120],
  [62, 74, 137],
  [49, 104, 142],
  [38, 130, 142],
  [31, 158, 137],
  [53, 183, 121],
  [109, 205, 89],
  [180, 222, 44],
  [253, 231, 37],
];

export const MISSING_CELL: Rgb = [180, 180, 180];

export function viridis(t: number): Rgb {
  const clamped = Math.min(Math.max(t, 0), 1);
  const scaled = clamped * (ANCHORS.length - 1);
  const lo = Math.floor(scaled);
  const hi = Math.min(lo + 1, ANCHORS.length - 1);
  const frac = scaled - lo;
  return [
    Math.round(ANCHORS[lo][0] + frac * (ANCHORS[hi][0] - ANCHORS[lo][0])),
    Math.round(ANCHORS[lo][1] + frac * (ANCHORS[hi][1] - ANCHORS[lo][1])),
    Math.round(ANCHORS[lo][2] + frac * (ANCHORS[hi][2] - ANCHORS[lo][2])),
  ];
}

/** Perceived brightness used to pick readable annotation ink. */
export function luminance([r, g, b]: Rgb): number {
  return (0.299 * r + 0.587 * g + 0.114 * b) / 255;
}
