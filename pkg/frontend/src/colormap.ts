// Fitness colormap: dark violet to bright yellow, monotone in brightness so
// "brighter = fitter" holds everywhere.

const ANCHORS: [number, number, number][] = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

function lerp(a: number, b: number, u: number): number {
  return a + (b - a) * u;
}

/** Map a value in [lo, hi] to an rgb() string; NaN-safe (clamps). */
export function fitnessColor(value: number, lo: number, hi: number): string {
  const [r, g, b] = fitnessRgb(value, lo, hi);
  return `rgb(${r},${g},${b})`;
}

export function fitnessRgb(value: number, lo: number, hi: number): [number, number, number] {
  let u = hi > lo ? (value - lo) / (hi - lo) : 0.5;
  u = Math.min(1, Math.max(0, u));
  const x = u * (ANCHORS.length - 1);
  const i = Math.min(ANCHORS.length - 2, Math.floor(x));
  const f = x - i;
  return [
    Math.round(lerp(ANCHORS[i][0], ANCHORS[i + 1][0], f)),
    Math.round(lerp(ANCHORS[i][1], ANCHORS[i + 1][1], f)),
    Math.round(lerp(ANCHORS[i][2], ANCHORS[i + 1][2], f)),
  ];
}

/** Perceived brightness, used to verify the monotone rendering contract. */
export function luminance(rgb: [number, number, number]): number {
  return 0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2];
}
