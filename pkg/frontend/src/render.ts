import type { ShadeRow } from "./shades.js";
import type { RatingEntry, ScaleInfo } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** The rating list with one remove control per entry. */
export function renderRatings(ratings: RatingEntry[]): string {
  if (ratings.length === 0) {
    return '<p class="hint">Search for a movie and rate it to get recommendations.</p>';
  }
  const rows = ratings
    .map(
      (r) =>
        `<li data-item="${r.item}">${escapeHtml(r.title)} &mdash; ${r.rating}★ ` +
        `<button class="remove" data-item="${r.item}">remove</button></li>`,
    )
    .join("");
  return `<ul class="ratings">${rows}</ul>`;
}

/**
 * The shades grid: one row per recommended item, one cell per rating
 * level, denser background for higher relevance, the predicted level
 * outlined. Pure string building, so snapshots are cheap.
 */
export function renderGrid(view: ShadeRow[], scale: ScaleInfo): string {
  if (view.length === 0) return '<p class="hint">No recommendations yet.</p>';
  const header = scale.values.map((v) => `<th>${v}★</th>`).join("");
  const body = view
    .map((row) => {
      const cells = row.intensities
        .map((x, k) => {
          const predicted = k === row.predicted ? " predicted" : "";
          return (
            `<td class="shade${predicted}" ` +
            `style="background: rgba(30, 90, 160, ${x.toFixed(3)})"></td>`
          );
        })
        .join("");
      return `<tr data-item="${row.item}"><td class="title">${escapeHtml(row.title)}</td>${cells}</tr>`;
    })
    .join("");
  return (
    `<table class="shades"><thead><tr><th></th>${header}</tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderError(message: string | null): string {
  if (!message) return "";
  return `<div class="error">${escapeHtml(message)}</div>`;
}

export function renderSearchResults(results: { item: number; title: string }[]): string {
  return results
    .map(
      (r) =>
        `<li><button class="pick" data-item="${r.item}" ` +
        `data-title="${escapeHtml(r.title)}">${escapeHtml(r.title)}</button></li>`,
    )
    .join("");
}
