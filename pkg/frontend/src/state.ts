import type { RatingEntry, RecommendedItem, ScaleInfo } from "./types.js";

/** The whole client session; the server keeps no state between requests. */
export interface SessionState {
  scale: ScaleInfo | null;
  ratings: RatingEntry[];
  recommendations: RecommendedItem[] | null;
  error: string | null;
}

export function emptyState(): SessionState {
  return { scale: null, ratings: [], recommendations: null, error: null };
}

export function withScale(state: SessionState, scale: ScaleInfo): SessionState {
  return { ...state, scale };
}

/**
 * Add or replace a rating; re-rating an item keeps one entry with the new
 * value. Values outside the scale advertised by the server are refused so
 * they can never reach the wire.
 */
export function upsertRating(state: SessionState, entry: RatingEntry): SessionState {
  if (state.scale === null) {
    throw new RangeError("rating scale not loaded yet");
  }
  if (!state.scale.values.includes(entry.rating)) {
    throw new RangeError(
      `rating ${entry.rating} is not on the scale ${state.scale.values.join(", ")}`,
    );
  }
  const ratings = state.ratings.filter((r) => r.item !== entry.item);
  ratings.push(entry);
  return { ...state, ratings };
}

export function removeRating(state: SessionState, item: number): SessionState {
  return { ...state, ratings: state.ratings.filter((r) => r.item !== item) };
}

export function applyRecommendations(
  state: SessionState,
  recommendations: RecommendedItem[],
): SessionState {
  return { ...state, recommendations, error: null };
}

/** Server trouble surfaces as a banner; the local list is untouched. */
export function applyError(state: SessionState, message: string): SessionState {
  return { ...state, error: message };
}
