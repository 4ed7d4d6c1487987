"""Movielens-style rating ingestion: parsing, filtering, dense re-indexing."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

CSV_HEADER = ["userId", "movieId", "rating", "timestamp"]


class ParseError(ValueError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class RatingScale:
    """Ordered admissible rating values plus the negativity threshold.

    Values strictly above the threshold count as positive feedback;
    everything else is negative. Level k is the zero-based position of a
    value in `values`, so the scale also fixes K, the size of the rating
    mode of the interaction tensor.
    """

    values: tuple[float, ...]
    negativity_threshold: float

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 2:
            raise ValueError("rating scale needs at least two values")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("rating scale values must be strictly increasing")
        if not (vals[0] <= self.negativity_threshold <= vals[-1]):
            raise ValueError("negativity threshold must lie within the scale")

    @property
    def n_levels(self) -> int:
        return len(self.values)

    def level(self, value: float) -> int:
        """Zero-based ordinal position of a rating value; raises if absent."""
        try:
            return self._index[float(value)]
        except KeyError:
            raise ValueError(f"rating {value} not in scale {self.values}") from None

    def value_of(self, level: int) -> float:
        if not 0 <= level < len(self.values):
            raise ValueError(f"level {level} out of range 0..{len(self.values) - 1}")
        return self.values[level]

    def is_positive(self, value: float) -> bool:
        return value > self.negativity_threshold

    def positive_levels(self) -> tuple[int, ...]:
        return tuple(k for k, v in enumerate(self.values) if v > self.negativity_threshold)

    @property
    def _index(self) -> dict[float, int]:
        return {v: k for k, v in enumerate(self.values)}


def whole_star_scale(threshold: float = 3.0) -> RatingScale:
    """The 1..5 integer scale of Movielens 1M (K=5)."""
    return RatingScale(tuple(float(v) for v in range(1, 6)), threshold)


def half_star_scale(threshold: float = 3.5) -> RatingScale:
    """The 0.5..5 half-step scale of Movielens 10M and later (K=10)."""
    return RatingScale(tuple(0.5 * v for v in range(1, 11)), threshold)


@dataclass(frozen=True)
class RawRating:
    user_id: int
    item_id: int
    rating: float
    timestamp: int


@dataclass
class RatingTable:
    """Deduplicated interactions with dense internal user/item indices.

    Arrays are aligned: row t is (users[t], items[t]) rated at level
    levels[t] at time timestamps[t]. `user_ids[u]` / `item_ids[j]` map
    internal indices back to the external dataset ids.
    """

    users: np.ndarray
    items: np.ndarray
    levels: np.ndarray
    timestamps: np.ndarray
    scale: RatingScale
    user_ids: np.ndarray
    item_ids: np.ndarray
    user_map: dict[int, int] = field(repr=False, default_factory=dict)
    item_map: dict[int, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.user_map:
            self.user_map = {int(e): i for i, e in enumerate(self.user_ids)}
        if not self.item_map:
            self.item_map = {int(e): i for i, e in enumerate(self.item_ids)}

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_ratings(self) -> int:
        return len(self.users)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_users, self.n_items, self.scale.n_levels)

    def triplets(self) -> Iterable[tuple[int, int, int]]:
        return zip(self.users.tolist(), self.items.tolist(), self.levels.tolist())

    def rating_values(self) -> np.ndarray:
        """Per-row raw rating values recovered from the level indices."""
        return np.asarray(self.scale.values, dtype=np.float64)[self.levels]

    def value_matrix(self):
        """M x N CSR matrix of raw rating values, zeros where unrated."""
        import scipy.sparse as sp

        return sp.csr_matrix(
            (self.rating_values(), (self.users, self.items)),
            shape=(self.n_users, self.n_items),
        )

    def user_rows(self, user: int) -> np.ndarray:
        return np.flatnonzero(self.users == user)

    def restrict_users(self, keep: Sequence[int]) -> "RatingTable":
        """Sub-table of the given internal user indices, densely re-indexed.

        The minimum-ratings filter is not reapplied; filtering happens once
        at build time, before any splitting.
        """
        keep = np.asarray(sorted(set(int(u) for u in keep)), dtype=np.int64)
        mask = np.isin(self.users, keep)
        users, items = self.users[mask], self.items[mask]
        kept_user_ids = self.user_ids[keep]
        kept_item_internal = np.unique(items)
        kept_item_ids = self.item_ids[kept_item_internal]
        user_renum = np.full(self.n_users, -1, dtype=np.int64)
        user_renum[keep] = np.arange(len(keep))
        item_renum = np.full(self.n_items, -1, dtype=np.int64)
        item_renum[kept_item_internal] = np.arange(len(kept_item_internal))
        return RatingTable(
            users=user_renum[users],
            items=item_renum[items],
            levels=self.levels[mask].copy(),
            timestamps=self.timestamps[mask].copy(),
            scale=self.scale,
            user_ids=kept_user_ids.copy(),
            item_ids=kept_item_ids.copy(),
        )


def save_table(table: RatingTable, path: str | Path) -> None:
    """Serialize a processed table (indices, ids, scale) to one .npz file."""
    np.savez(
        Path(path),
        format_version=np.int64(1),
        users=table.users,
        items=table.items,
        levels=table.levels,
        timestamps=table.timestamps,
        user_ids=table.user_ids,
        item_ids=table.item_ids,
        scale_values=np.asarray(table.scale.values, dtype=np.float64),
        threshold=np.float64(table.scale.negativity_threshold),
    )


def load_table(path: str | Path) -> RatingTable:
    with np.load(Path(path), allow_pickle=False) as data:
        if int(data["format_version"]) != 1:
            raise ValueError(f"unsupported table format version {int(data['format_version'])}")
        scale = RatingScale(tuple(float(v) for v in data["scale_values"]), float(data["threshold"]))
        return RatingTable(
            users=data["users"],
            items=data["items"],
            levels=data["levels"],
            timestamps=data["timestamps"],
            scale=scale,
            user_ids=data["user_ids"],
            item_ids=data["item_ids"],
        )


def _parse_dat_line(line: str, lineno: int) -> RawRating:
    parts = line.split("::")
    if len(parts) != 4:
        raise ParseError(f"expected 4 '::'-separated fields, got {len(parts)}", lineno)
    try:
        return RawRating(int(parts[0]), int(parts[1]), float(parts[2]), int(parts[3]))
    except ValueError:
        raise ParseError(f"non-numeric field in {parts!r}", lineno) from None


def parse_movielens(
    path: str | Path,
    format: str = "dat",
    scale: RatingScale | None = None,
) -> list[RawRating]:
    """Read a Movielens ratings file into RawRating records, order preserved.

    `dat` lines are ``UserID::MovieID::Rating::Timestamp``; `csv` files carry
    the ``userId,movieId,rating,timestamp`` header. When a scale is given,
    out-of-scale ratings raise immediately with their line number.
    """
    path = Path(path)
    if format not in ("dat", "csv"):
        raise ValueError(f"unknown format {format!r}, expected 'dat' or 'csv'")
    out: list[RawRating] = []
    with path.open(encoding="utf-8") as fh:
        if format == "dat":
            rows = (
                (_parse_dat_line(line.rstrip("\n"), no), no)
                for no, line in enumerate(fh, start=1)
                if line.strip()
            )
        else:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return []
            if [h.strip() for h in header] != CSV_HEADER:
                raise ParseError(f"expected header {','.join(CSV_HEADER)}", 1)
            def _csv_rows():
                for no, rec in enumerate(reader, start=2):
                    if not rec:
                        continue
                    if len(rec) != 4:
                        raise ParseError(f"expected 4 columns, got {len(rec)}", no)
                    try:
                        yield RawRating(int(rec[0]), int(rec[1]), float(rec[2]), int(rec[3])), no
                    except ValueError:
                        raise ParseError(f"non-numeric field in {rec!r}", no) from None
            rows = _csv_rows()
        for rating, no in rows:
            if rating.user_id < 1 or rating.item_id < 1:
                raise ParseError("user and item ids must be >= 1", no)
            if scale is not None and float(rating.rating) not in scale.values:
                raise ParseError(f"rating {rating.rating} outside scale", no)
            out.append(rating)
    return out


def parse_titles(path: str | Path) -> dict[int, str]:
    """Read a ``MovieID::Title::Genres`` (or 2-column csv) sidecar into id -> title."""
    path = Path(path)
    titles: dict[int, str] = {}
    with path.open(encoding="utf-8", errors="replace") as fh:
        for no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "::" in line:
                parts = line.split("::")
            else:
                parts = next(csv.reader([line]))
            if len(parts) < 2:
                raise ParseError("expected at least id and title", no)
            try:
                titles[int(parts[0])] = parts[1]
            except ValueError:
                if no == 1:
                    continue  # csv header
                raise ParseError(f"bad item id {parts[0]!r}", no) from None
    return titles


def rating_level(scale: RatingScale, value: float) -> int:
    """Zero-based ordinal of a rating value on the scale."""
    return scale.level(value)


def build_table(
    ratings: Sequence[RawRating],
    min_ratings: int,
    scale: RatingScale,
) -> RatingTable:
    """Deduplicate, filter shallow users, and re-index into a RatingTable.

    Duplicate (user, item) pairs keep the entry with the latest timestamp
    (later file position wins ties). Users are dropped when they have fewer
    than `min_ratings` distinct items, before any index is assigned.
    """
    if min_ratings < 1:
        raise ValueError("min_ratings must be >= 1")
    latest: dict[tuple[int, int], RawRating] = {}
    for r in ratings:
        key = (r.user_id, r.item_id)
        prev = latest.get(key)
        if prev is None or r.timestamp >= prev.timestamp:
            latest[key] = r
    counts: dict[int, int] = {}
    for u, _ in latest:
        counts[u] = counts.get(u, 0) + 1
    kept = [r for (u, _), r in latest.items() if counts[u] >= min_ratings]
    if not kept:
        raise ValueError("no users left after the minimum-ratings filter")
    user_ids = np.array(sorted({r.user_id for r in kept}), dtype=np.int64)
    item_ids = np.array(sorted({r.item_id for r in kept}), dtype=np.int64)
    user_map = {int(e): i for i, e in enumerate(user_ids)}
    item_map = {int(e): i for i, e in enumerate(item_ids)}
    n = len(kept)
    users = np.empty(n, dtype=np.int64)
    items = np.empty(n, dtype=np.int64)
    levels = np.empty(n, dtype=np.int64)
    stamps = np.empty(n, dtype=np.int64)
    for t, r in enumerate(kept):
        users[t] = user_map[r.user_id]
        items[t] = item_map[r.item_id]
        levels[t] = scale.level(r.rating)
        stamps[t] = r.timestamp
    order = np.lexsort((stamps, items, users))
    table = RatingTable(
        users=users[order],
        items=items[order],
        levels=levels[order],
        timestamps=stamps[order],
        scale=scale,
        user_ids=user_ids,
        item_ids=item_ids,
        user_map=user_map,
        item_map=item_map,
    )
    log.info(
        "built table: %d users, %d items, %d ratings (dropped %d shallow users)",
        table.n_users, table.n_items, table.n_ratings, len(counts) - len(user_ids),
    )
    return table
