"""The tensor model and the comparison recommenders behind one interface.

The tensor route factorizes the binary (user, item, rating-level) tensor
and scores unseen users by double projection through the item and level
subspaces; every item gets a full vector of per-level relevance scores
("shades"). The matrix route (PureSVD) factorizes raw rating values, so a
lone rating's value only scales its fold-in scores; the tensor route is
genuinely sensitive to it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ingest import RatingScale, RatingTable
from .linalg import TruncatedSvd, project, truncated_svd
from .tensor import SparseTensor, TuckerModel, hooi

log = logging.getLogger(__name__)


class ScoringError(ValueError):
    """A model cannot produce scores for this particular user."""


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    rank: int = 10
    mlrank: tuple[int, int, int] = (13, 10, 2)
    seed: int = 0
    ranking: str = "sum_positive"  # or "top_level"

    def __post_init__(self):
        if self.rank < 1 or any(r < 1 for r in self.mlrank):
            raise ValueError("ranks must be positive")
        if self.ranking not in ("sum_positive", "top_level"):
            raise ValueError(f"unknown ranking mode {self.ranking!r}")


@dataclass
class PreferenceMatrix:
    """One user's N x K binary preference matrix, stored as (item, level) pairs."""

    items: np.ndarray
    levels: np.ndarray
    n_items: int
    n_levels: int

    def __post_init__(self):
        self.items = np.asarray(self.items, dtype=np.int64)
        self.levels = np.asarray(self.levels, dtype=np.int64)
        if self.items.shape != self.levels.shape:
            raise ValueError("items and levels must align")
        if len(np.unique(self.items)) != len(self.items):
            raise ValueError("at most one rating level per item")
        if len(self.items) and (self.items.min() < 0 or self.items.max() >= self.n_items):
            raise ValueError("item index out of range")
        if len(self.levels) and (self.levels.min() < 0 or self.levels.max() >= self.n_levels):
            raise ValueError("level index out of range")

    @classmethod
    def from_values(
        cls, items: Sequence[int], values: Sequence[float], scale: RatingScale, n_items: int
    ) -> "PreferenceMatrix":
        levels = [scale.level(v) for v in values]
        return cls(np.asarray(items), np.asarray(levels), n_items, scale.n_levels)


def fit_coffee(
    table: RatingTable,
    mlrank: tuple[int, int, int] = (13, 10, 2),
    max_iters: int = 25,
    tol: float = 1e-5,
    seed: int = 0,
) -> TuckerModel:
    """Tucker-decompose the binary interaction tensor of the table."""
    if table.n_ratings == 0:
        raise ValueError("empty rating table")
    return hooi(SparseTensor.from_table(table), mlrank, max_iters=max_iters, tol=tol, seed=seed)


def fold_in_coffee(model: TuckerModel, prefs: PreferenceMatrix) -> np.ndarray:
    """Project a preference matrix through the item and level subspaces.

    Returns the dense N x K shades matrix V V^T P W W^T. For a training
    user's own preferences this reproduces the model's slice exactly when
    r1 >= r2 * r3.
    """
    N, K = model.V.shape[0], model.W.shape[0]
    if (prefs.n_items, prefs.n_levels) != (N, K):
        raise ValueError(
            f"preference shape ({prefs.n_items}, {prefs.n_levels}) does not match model ({N}, {K})"
        )
    mid = model.V[prefs.items].T @ model.W[prefs.levels]  # r2 x r3
    return model.V @ mid @ model.W.T


def rank_scores(scores: np.ndarray, n: int, exclude: Iterable[int] = ()) -> list[int]:
    """Indices of the n largest scores, ties broken by ascending index,
    excluded indices removed first."""
    if n <= 0:
        return []
    banned = set(int(e) for e in exclude)
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    out = []
    for idx in order:
        if int(idx) in banned:
            continue
        out.append(int(idx))
        if len(out) == n:
            break
    return out


def rank_items_shades(
    shades: np.ndarray,
    positive_levels: Iterable[int],
    n: int,
    exclude: Iterable[int] = (),
) -> list[int]:
    """Rank items by their summed relevance over the given rating levels."""
    levels = sorted(set(int(k) for k in positive_levels))
    if not levels:
        raise ValueError("positive_levels must be nonempty")
    if max(levels) >= shades.shape[1] or min(levels) < 0:
        raise ValueError("positive level out of range")
    scores = shades[:, levels].sum(axis=1)
    return rank_scores(scores, n, exclude)


def predict_rating(shades: np.ndarray, item: int) -> int:
    """Most relevant rating level for an item; ties go to the higher level."""
    if not 0 <= item < shades.shape[0]:
        raise IndexError(f"item {item} out of range 0..{shades.shape[0] - 1}")
    row = shades[item]
    return int(len(row) - 1 - np.argmax(row[::-1]))


def fit_puresvd(table: RatingTable, rank: int, seed: int = 0) -> TruncatedSvd:
    """Truncated SVD of the raw rating values with zeros for missing entries."""
    return truncated_svd(table.value_matrix(), rank, seed=seed)


def fold_in_svd(svd: TruncatedSvd, p: np.ndarray) -> np.ndarray:
    """Matrix folding-in V V^T p over a length-N vector of rating values."""
    return project(svd.V, np.asarray(p, dtype=np.float64).ravel())


def _cosine_sims(matrix, row_norms: np.ndarray, target: np.ndarray) -> np.ndarray:
    tnorm = float(np.linalg.norm(target))
    if tnorm == 0.0:
        raise ScoringError("target vector is empty")
    num = np.asarray(matrix @ target).ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = np.where(row_norms > 0, num / (row_norms * tnorm), 0.0)
    return sims


def predict_knn(table: RatingTable, target: np.ndarray, item: int) -> float:
    """User-based kNN rating prediction with cosine similarity.

    The neighborhood is every training user with nonzero similarity; the
    normalizer sums |sim| over all of them, and neighbors who did not rate
    the item contribute zero to the numerator.
    """
    if not 0 <= item < table.n_items:
        raise IndexError(f"item {item} out of range")
    R = table.value_matrix()
    norms = np.sqrt(np.asarray(R.multiply(R).sum(axis=1)).ravel())
    sims = _cosine_sims(R, norms, np.asarray(target, dtype=np.float64).ravel())
    denom = float(np.abs(sims).sum())
    if denom == 0.0:
        raise ScoringError("no training user shares rated items with the target")
    column = np.asarray(R[:, item].todense()).ravel()
    return float((column @ sims) / denom)


def recommend_popularity(table: RatingTable, n: int, exclude: Iterable[int] = ()) -> list[int]:
    """Items by descending rating count, regardless of the rating values."""
    counts = np.bincount(table.items, minlength=table.n_items).astype(np.float64)
    return rank_scores(counts, n, exclude)


def recommend_random(
    n_items: int, n: int, seed, exclude: Iterable[int] = ()
) -> list[int]:
    """Uniform sample of unexcluded items, deterministic for a given seed."""
    banned = set(int(e) for e in exclude)
    allowed = np.array([i for i in range(n_items) if i not in banned], dtype=np.int64)
    rng = np.random.default_rng(seed)
    pick = rng.permutation(allowed)[: max(n, 0)]
    return [int(i) for i in pick]


# ---------------------------------------------------------------------------
# Harness-facing recommenders: fit(table) once, then per-user top_n.


class CoffeeRecommender:
    def __init__(self, config: ModelConfig):
        self.config = config
        self.name = "coffee"
        self.model: TuckerModel | None = None
        self.scale: RatingScale | None = None

    def fit(self, table: RatingTable) -> "CoffeeRecommender":
        self.model = fit_coffee(table, self.config.mlrank, seed=self.config.seed)
        self.scale = table.scale
        if self.config.ranking == "top_level":
            self.positive_levels = (self.scale.n_levels - 1,)
        else:
            self.positive_levels = self.scale.positive_levels()
        return self

    def shades(self, items: Sequence[int], values: Sequence[float]) -> np.ndarray:
        prefs = PreferenceMatrix.from_values(items, values, self.scale, self.model.V.shape[0])
        return fold_in_coffee(self.model, prefs)

    def top_n(self, items, values, n, exclude=(), user_id=None) -> list[int]:
        return rank_items_shades(self.shades(items, values), self.positive_levels, n, exclude)

    def predict_values(self, items, values, query_items: Sequence[int]) -> list[float]:
        shades = self.shades(items, values)
        return [self.scale.value_of(predict_rating(shades, q)) for q in query_items]


class PureSvdRecommender:
    def __init__(self, config: ModelConfig):
        self.config = config
        self.name = "puresvd"
        self.svd: TruncatedSvd | None = None
        self.n_items = 0

    def fit(self, table: RatingTable) -> "PureSvdRecommender":
        self.svd = fit_puresvd(table, self.config.rank, seed=self.config.seed)
        self.n_items = table.n_items
        return self

    def scores(self, items, values) -> np.ndarray:
        p = np.zeros(self.n_items)
        p[np.asarray(items, dtype=np.int64)] = np.asarray(values, dtype=np.float64)
        return fold_in_svd(self.svd, p)

    def top_n(self, items, values, n, exclude=(), user_id=None) -> list[int]:
        return rank_scores(self.scores(items, values), n, exclude)


class KnnRecommender:
    def __init__(self, config: ModelConfig):
        self.config = config
        self.name = "knn"

    def fit(self, table: RatingTable) -> "KnnRecommender":
        self.R = table.value_matrix()
        self.norms = np.sqrt(np.asarray(self.R.multiply(self.R).sum(axis=1)).ravel())
        self.n_items = table.n_items
        return self

    def scores(self, items, values) -> np.ndarray:
        target = np.zeros(self.n_items)
        target[np.asarray(items, dtype=np.int64)] = np.asarray(values, dtype=np.float64)
        sims = _cosine_sims(self.R, self.norms, target)
        denom = float(np.abs(sims).sum())
        if denom == 0.0:
            raise ScoringError("no training user shares rated items with the target")
        return np.asarray(self.R.T @ sims).ravel() / denom

    def top_n(self, items, values, n, exclude=(), user_id=None) -> list[int]:
        return rank_scores(self.scores(items, values), n, exclude)


class PopularityRecommender:
    def __init__(self, config: ModelConfig):
        self.config = config
        self.name = "popular"

    def fit(self, table: RatingTable) -> "PopularityRecommender":
        self.counts = np.bincount(table.items, minlength=table.n_items).astype(np.float64)
        return self

    def top_n(self, items, values, n, exclude=(), user_id=None) -> list[int]:
        return rank_scores(self.counts, n, exclude)


class RandomRecommender:
    def __init__(self, config: ModelConfig):
        self.config = config
        self.name = "random"

    def fit(self, table: RatingTable) -> "RandomRecommender":
        self.n_items = table.n_items
        return self

    def top_n(self, items, values, n, exclude=(), user_id=None) -> list[int]:
        seed = (self.config.seed, 0 if user_id is None else int(user_id))
        return recommend_random(self.n_items, n, seed, exclude)


def read_ranked_lists(path: str | Path) -> dict[int, list[int]]:
    """Parse an externally produced recommendation file.

    One line per user: ``user_id<TAB>item_id,item_id,...`` with external ids.
    """
    lists: dict[int, list[int]] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                user_part, items_part = line.split("\t", 1)
                items = [int(tok) for tok in items_part.split(",") if tok.strip()]
                lists[int(user_part)] = items
            except ValueError:
                raise ValueError(f"{path}: malformed ranked list on line {no}") from None
    return lists


class ImportedRankings:
    """Scores pre-computed ranked lists (e.g. from an external library)
    through the same evaluation pipeline."""

    def __init__(self, path: str | Path, name: str | None = None):
        self.path = Path(path)
        self.name = name or self.path.stem
        self.lists = read_ranked_lists(self.path)

    def fit(self, table: RatingTable) -> "ImportedRankings":
        self.item_map = dict(table.item_map)
        return self

    def top_n(self, items, values, n, exclude=(), user_id=None) -> list[int]:
        if user_id is None or int(user_id) not in self.lists:
            raise ScoringError(f"no imported list for user {user_id}")
        banned = set(int(e) for e in exclude)
        out = []
        dropped = 0
        for ext in self.lists[int(user_id)]:
            internal = self.item_map.get(ext)
            if internal is None:
                dropped += 1
                continue
            if internal in banned:
                continue
            out.append(internal)
            if len(out) == n:
                break
        if dropped:
            log.debug("imported list for user %s: %d items outside training set", user_id, dropped)
        return out


MODEL_KINDS = ("coffee", "puresvd", "knn", "popular", "random")


def build_model(config: ModelConfig):
    """Instantiate an unfitted recommender for a model kind."""
    table = {
        "coffee": CoffeeRecommender,
        "puresvd": PureSvdRecommender,
        "knn": KnnRecommender,
        "popular": PopularityRecommender,
        "random": RandomRecommender,
    }
    if config.kind not in table:
        raise ValueError(f"unknown model kind {config.kind!r}; expected one of {MODEL_KINDS}")
    return table[config.kind](config)
