import type { CatalogItem, HealthInfo, RecommendedItem } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    if (body && typeof body.error === "string") return body.error;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${resp.status}`;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
    return (await resp.json()) as T;
  }

  health(): Promise<HealthInfo> {
    return this.get<HealthInfo>("/health");
  }

  searchItems(prefix: string): Promise<CatalogItem[]> {
    return this.get<CatalogItem[]>(`/items?query=${encodeURIComponent(prefix)}`);
  }

  async recommend(
    ratings: { item: number; rating: number }[],
    n: number,
  ): Promise<RecommendedItem[]> {
    const resp = await this.fetchImpl(this.baseUrl + "/recommend", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ ratings, n }),
    });
    if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
    const body = (await resp.json()) as { items: RecommendedItem[] };
    return body.items;
  }
}

/** Ticket counter so only the newest in-flight recommend call may land. */
export class LatestWins {
  private ticket = 0;

  next(): number {
    return ++this.ticket;
  }

  isCurrent(ticket: number): boolean {
    return ticket === this.ticket;
  }
}
