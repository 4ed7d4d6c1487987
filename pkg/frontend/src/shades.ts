import type { RecommendedItem } from "./types.js";

/** One grid row: display name, per-level cell intensity, predicted level. */
export interface ShadeRow {
  item: number;
  title: string;
  intensities: number[];
  predicted: number;
}

/**
 * Index of the most relevant level; a tie goes to the higher level, which
 * matches the server's rating prediction rule.
 */
export function argmaxLevel(shades: number[]): number {
  let best = 0;
  for (let k = 1; k < shades.length; k++) {
    if (shades[k] >= shades[best]) best = k;
  }
  return best;
}

/**
 * Max-normalize all shade cells of one response into [0, 1]. Only the
 * relative density matters for display; negative scores render empty.
 */
export function buildView(items: RecommendedItem[]): ShadeRow[] {
  let top = 0;
  for (const entry of items) {
    for (const s of entry.shades) top = Math.max(top, s);
  }
  return items.map((entry) => ({
    item: entry.item,
    title: entry.title ?? `#${entry.item}`,
    intensities: entry.shades.map((s) => (top > 0 ? Math.max(0, s) / top : 0)),
    predicted: argmaxLevel(entry.shades),
  }));
}
