"""Deterministic desk-scale movie-rating corpus generator.

Produces Movielens-format files with the statistical fingerprints the
experiments depend on: a zipf-like exposure skew, users with coherent
likes *and* dislikes over latent genres, per-user leniency, item quality
correlated with popularity, and the 1..5 star marginals of the classic
million-rating corpus. Ratings derive from a latent affinity score pushed
through global quantile thresholds, so predictability is controlled by the
noise knobs rather than baked-in labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import RawRating

_ADJECTIVES = (
    "Silent", "Crimson", "Broken", "Golden", "Midnight", "Electric", "Lost",
    "Savage", "Gentle", "Burning", "Frozen", "Hollow", "Distant", "Velvet",
    "Iron", "Paper", "Neon", "Wandering", "Secret", "Last",
)
_NOUNS = (
    "Horizon", "Garden", "Empire", "Voyage", "Letters", "Summer", "Thief",
    "Orchestra", "Detective", "Mountain", "Harbor", "Promise", "Machine",
    "Carnival", "Shadow", "River", "Comet", "Waltz", "Outpost", "Mirror",
)


@dataclass(frozen=True)
class SyntheticConfig:
    n_users: int = 1200
    n_items: int = 700
    n_genres: int = 8
    seed: int = 7
    mean_ratings: float = 85.0
    min_ratings: int = 22
    max_ratings: int = 280
    taste_strength: float = 1.45
    quality_sd: float = 0.5
    leniency_sd: float = 0.4
    noise_sd: float = 0.5
    # Per-user spread of the noise level: 0 means everyone is equally
    # predictable, 0.5 means individual levels range over 0.5x..1.5x.
    noise_spread: float = 0.45
    popularity_exponent: float = 0.9
    quality_popularity: float = 0.8
    taste_exposure: float = 0.6
    # Scale-usage style: how far each user's band cuts stretch away from the
    # scale midpoint. Below 1 the outer stars swallow the middle (love/hate
    # raters); above 1 the user camps on the middle of the scale.
    style_range: tuple[float, float] = (0.75, 1.45)
    # Personal five-star bar on top of the style warp: half-normal spread in
    # units of the four-star band, so a tail of users almost never awards 5.
    five_bar_scale: float = 0.9
    # Exponential left tail on leniency: a smooth minority of harsh raters
    # whose favourites stay at or below the mid-scale.
    harsh_tail: float = 0.12
    # Cap of the per-user chance that a 5 gets logged as a 4 and vice versa
    # (drawn uniformly per user): like-versus-love capriciousness.
    caprice: float = 0.08
    marginals: tuple[float, ...] = (0.056, 0.107, 0.261, 0.349, 0.227)


def generate_ratings(config: SyntheticConfig = SyntheticConfig()) -> list[RawRating]:
    """Sample the full corpus; identical output for identical configs."""
    c = config
    rng = np.random.default_rng(c.seed)
    T = c.n_genres

    # Items: dominant genre plus spill-over, quality, zipf exposure weight.
    genre = rng.integers(0, T, size=c.n_items)
    item_vec = np.eye(T)[genre] + 0.3 * rng.standard_normal((c.n_items, T))
    item_vec /= np.linalg.norm(item_vec, axis=1, keepdims=True)
    quality = c.quality_sd * rng.standard_normal(c.n_items)
    pop_rank = rng.permutation(c.n_items) + 1
    log_pop = -c.popularity_exponent * np.log(pop_rank) + c.quality_popularity * quality

    # Users: a couple of liked and disliked genres, leniency, profile size.
    taste = np.zeros((c.n_users, T))
    for u in range(c.n_users):
        liked = rng.choice(T, size=2, replace=False)
        rest = np.setdiff1d(np.arange(T), liked)
        disliked = rng.choice(rest, size=rng.integers(1, 3), replace=False)
        taste[u, liked] = 1.0
        taste[u, disliked] = -1.0
    taste += 0.2 * rng.standard_normal((c.n_users, T))
    leniency = c.leniency_sd * rng.standard_normal(c.n_users)
    if c.harsh_tail > 0.0:
        leniency -= rng.exponential(c.harsh_tail, size=c.n_users)
    sizes = np.exp(rng.normal(np.log(c.mean_ratings * 0.8), 0.55, size=c.n_users))
    sizes = np.clip(sizes.astype(int), c.min_ratings, min(c.max_ratings, c.n_items))
    style = rng.uniform(c.style_range[0], c.style_range[1], size=c.n_users)
    five_bar = c.five_bar_scale * np.abs(rng.standard_normal(c.n_users))

    # Exposure: popularity plus a pull toward the user's liked genres.
    affinity_all = taste @ item_vec.T  # users x items
    noise_u = c.noise_sd * rng.uniform(1.0 - c.noise_spread, 1.0 + c.noise_spread, c.n_users)
    users_col: list[np.ndarray] = []
    items_col: list[np.ndarray] = []
    scores_col: list[np.ndarray] = []
    for u in range(c.n_users):
        logits = log_pop + c.taste_exposure * np.maximum(affinity_all[u], 0.0)
        gumbel = rng.gumbel(size=c.n_items)
        chosen = np.argsort(-(logits + gumbel), kind="stable")[: sizes[u]]
        chosen = np.sort(chosen)
        s = (
            c.taste_strength * affinity_all[u, chosen]
            + quality[chosen]
            + leniency[u]
            + noise_u[u] * rng.standard_normal(len(chosen))
        )
        users_col.append(np.full(len(chosen), u))
        items_col.append(chosen)
        scores_col.append(s)
    users = np.concatenate(users_col)
    items = np.concatenate(items_col)
    scores = np.concatenate(scores_col)

    # Stars via per-user warped band cuts. The global cuts come from the
    # pooled score quantiles at the requested marginals; each user's cuts
    # are then stretched away from (or squeezed toward) the scale midpoint
    # by their style factor, which keeps the pooled histogram close to the
    # marginals while making scale usage personal.
    cuts = np.quantile(scores, np.cumsum(c.marginals)[:-1])
    mid = np.quantile(scores, 0.5)
    per_cut = mid + (cuts[None, :] - mid) * style[users, None]
    stars = 1 + (scores[:, None] > per_cut).sum(axis=1)

    # Raise the five-star cut per user, then shift all five-cuts globally so
    # the pooled share of fives stays on the marginals.
    if c.five_bar_scale > 0.0:
        band = cuts[3] - cuts[2]
        bar = per_cut[:, 3] + five_bar[users] * band
        lo, hi = -3.0 * band, 3.0 * band
        for _ in range(50):
            off = 0.5 * (lo + hi)
            if np.mean(scores > bar + off) > c.marginals[4]:
                lo = off
            else:
                hi = off
        stars = np.minimum(stars, 4)
        stars[scores > bar + 0.5 * (lo + hi)] = 5

    if c.caprice > 0.0:
        rate = c.caprice * rng.uniform(0.0, 1.0, size=c.n_users)[users]
        roll = rng.random(len(stars))
        up = rate * c.marginals[4] / c.marginals[3]
        demote = (stars == 5) & (roll < rate)
        promote = (stars == 4) & (roll < up)
        stars = np.where(demote, 4, np.where(promote, 5, stars))

    # External ids shuffled so the id order carries no popularity signal.
    user_ext = rng.permutation(c.n_users) + 1
    item_ext = rng.permutation(c.n_items) + 1
    base = rng.integers(900_000_000, 1_000_000_000, size=c.n_users)
    offsets = np.zeros(len(users), dtype=np.int64)
    start = 0
    for u in range(c.n_users):
        count = sizes[u]
        offsets[start : start + count] = base[u] + rng.choice(
            count * 900, size=count, replace=False
        )
        start += count

    out = [
        RawRating(
            user_id=int(user_ext[u]),
            item_id=int(item_ext[j]),
            rating=float(s),
            timestamp=int(t),
        )
        for u, j, s, t in zip(users, items, stars, offsets)
    ]
    return out


def write_dat(ratings: list[RawRating], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in ratings:
            rating = int(r.rating) if float(r.rating).is_integer() else r.rating
            fh.write(f"{r.user_id}::{r.item_id}::{rating}::{r.timestamp}\n")


def write_titles(n_items: int, path: str | Path, seed: int = 7) -> None:
    """Movielens-style ``id::Title (Year)::Genres`` sidecar with synthetic names."""
    rng = np.random.default_rng((seed, 17))
    with Path(path).open("w", encoding="utf-8") as fh:
        for item_id in range(1, n_items + 1):
            adj = _ADJECTIVES[int(rng.integers(len(_ADJECTIVES)))]
            noun = _NOUNS[int(rng.integers(len(_NOUNS)))]
            year = 1960 + int(rng.integers(60))
            fh.write(f"{item_id}::{adj} {noun} {item_id} ({year})::Drama\n")
