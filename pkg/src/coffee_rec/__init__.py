"""Collaborative filtering with full-feedback rating shades.

Core pipeline: ingest Movielens-style ratings, factorize the binary
(user, item, rating-level) tensor, fold new users in online, and evaluate
top-n quality with negativity-aware metrics.
"""

__version__ = "0.1.0"

from .ingest import (  # noqa: F401
    ParseError,
    RatingScale,
    RatingTable,
    RawRating,
    build_table,
    half_star_scale,
    parse_movielens,
    parse_titles,
    rating_level,
    whole_star_scale,
)
from .linalg import TruncatedSvd, orthonormalize, project, truncated_svd  # noqa: F401
from .tensor import (  # noqa: F401
    SparseTensor,
    TuckerModel,
    hooi,
    load_model,
    mode_multiply,
    reconstruct,
    reconstruct_slice,
    save_model,
    unfold,
)
from .models import (  # noqa: F401
    ModelConfig,
    PreferenceMatrix,
    ScoringError,
    build_model,
    fit_coffee,
    fit_puresvd,
    fold_in_coffee,
    fold_in_svd,
    predict_knn,
    predict_rating,
    rank_items_shades,
    recommend_popularity,
    recommend_random,
)
from .harness import SplitPlan, evaluate_models, rating_experiment, split_users  # noqa: F401
