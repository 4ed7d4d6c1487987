import { ApiClient, ApiError, LatestWins } from "./api.js";
import { renderError, renderGrid, renderRatings, renderSearchResults } from "./render.js";
import { buildView } from "./shades.js";
import {
  applyError,
  applyRecommendations,
  emptyState,
  removeRating,
  upsertRating,
  withScale,
} from "./state.js";

const TOP_N = 10;

const api = new ApiClient(
  (window as unknown as { API_BASE?: string }).API_BASE ?? "http://localhost:8080",
);
const gate = new LatestWins();
let state = emptyState();

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function paint(): void {
  $("error").innerHTML = renderError(state.error);
  $("ratings").innerHTML = renderRatings(state.ratings);
  if (state.recommendations && state.scale) {
    $("grid").innerHTML = renderGrid(buildView(state.recommendations), state.scale);
  }
}

async function refresh(): Promise<void> {
  if (state.ratings.length === 0) return;  // nothing to fold in yet
  const ticket = gate.next();
  try {
    const items = await api.recommend(
      state.ratings.map((r) => ({ item: r.item, rating: r.rating })),
      TOP_N,
    );
    if (!gate.isCurrent(ticket)) return;
    state = applyRecommendations(state, items);
  } catch (err) {
    if (!gate.isCurrent(ticket)) return;
    const message = err instanceof ApiError ? err.message : "service unreachable";
    state = applyError(state, message);
  }
  paint();
}

function rate(item: number, title: string, rating: number): void {
  state = upsertRating(state, { item, title, rating });
  paint();
  void refresh();
}

function wireSearch(): void {
  const input = $("search") as HTMLInputElement;
  input.addEventListener("input", async () => {
    const prefix = input.value.trim();
    if (!prefix) {
      $("results").innerHTML = "";
      return;
    }
    try {
      const results = await api.searchItems(prefix);
      $("results").innerHTML = renderSearchResults(results);
    } catch {
      $("results").innerHTML = "";
    }
  });
  $("results").addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest("button.pick");
    if (!(button instanceof HTMLButtonElement) || !state.scale) return;
    const item = Number(button.dataset.item);
    const title = button.dataset.title ?? `#${item}`;
    const picker = state.scale.values
      .map(
        (v) =>
          `<button class="star" data-item="${item}" data-title="${title}" ` +
          `data-rating="${v}">${v}★</button>`,
      )
      .join(" ");
    $("picker").innerHTML = `Rate &ldquo;${title}&rdquo;: ${picker}`;
  });
  $("picker").addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest("button.star");
    if (!(button instanceof HTMLButtonElement)) return;
    rate(
      Number(button.dataset.item),
      button.dataset.title ?? "",
      Number(button.dataset.rating),
    );
    $("picker").innerHTML = "";
  });
  $("ratings").addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest("button.remove");
    if (!(button instanceof HTMLButtonElement)) return;
    state = removeRating(state, Number(button.dataset.item));
    paint();
    void refresh();
  });
}

async function boot(): Promise<void> {
  try {
    const health = await api.health();
    state = withScale(state, health.model.scale);
    $("status").textContent =
      `model ${health.model.ranks.join("x")} over ${health.model.N} items`;
  } catch {
    state = applyError(state, "recommendation service is not reachable");
  }
  wireSearch();
  paint();
}

void boot();
