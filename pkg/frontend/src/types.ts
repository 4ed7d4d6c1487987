/** Payload shapes of the recommendation service's JSON API. */

export interface ScaleInfo {
  values: number[];
  threshold: number;
}

export interface HealthInfo {
  status: string;
  model: {
    ranks: number[];
    M: number;
    N: number;
    K: number;
    scale: ScaleInfo;
  };
}

export interface CatalogItem {
  item: number;
  title: string;
}

export interface RatingEntry {
  item: number;
  title: string;
  rating: number;
}

export interface RecommendedItem {
  item: number;
  title?: string;
  score: number;
  /** Relevance score per rating level, ascending level order. */
  shades: number[];
}
