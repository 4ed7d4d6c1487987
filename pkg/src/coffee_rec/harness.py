"""Experiment orchestration: user splits, scenarios, CV, rating prediction.

Users are partitioned into disjoint folds; each fold's test users reveal an
observation set (everything, or only their worst / random items, depending
on the scenario) and are scored against a withheld holdout that may contain
both liked and disliked items.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics
from .ingest import RatingTable
from .metrics import MetricCurves, aggregate_curves, user_curves
from .models import ScoringError

log = logging.getLogger(__name__)

SCENARIOS = ("negative_1", "negative_3", "random_1", "random_3", "random_5", "all")


def scenario_min_observation(scenario: str) -> int:
    if scenario == "all":
        return 1
    kind, _, k = scenario.partition("_")
    if kind in ("negative", "random") and k.isdigit() and int(k) >= 1:
        return int(k)
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")


@dataclass(frozen=True)
class SplitPlan:
    folds: int = 5
    test_fraction: float | None = None  # derived as 1/folds unless given
    seed: int = 0
    holdout_size: int = 10
    scenarios: tuple[str, ...] = ("negative_1",)

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least two folds")
        if self.test_fraction is None:
            object.__setattr__(self, "test_fraction", 1.0 / self.folds)
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test fraction must be in (0, 1)")
        if abs(self.test_fraction * self.folds - 1.0) > 1e-6:
            raise ValueError("folds must partition the users: test_fraction = 1/folds")
        if self.holdout_size < 1:
            raise ValueError("holdout size must be positive")
        for s in self.scenarios:
            scenario_min_observation(s)


@dataclass
class UserProfile:
    """A test user's full history in external ids, as revealed to make_case."""

    user_id: int
    item_ids: np.ndarray
    values: np.ndarray
    timestamps: np.ndarray


@dataclass
class TestUserCase:
    """Observation revealed to the models plus the withheld holdout."""

    user_id: int
    obs_items: np.ndarray  # train-internal indices
    obs_values: np.ndarray
    holdout: dict[int, float]  # train-internal item -> rating value


def split_users(table: RatingTable, plan: SplitPlan, fold: int) -> tuple[RatingTable, list[UserProfile]]:
    """Fold `fold` of the user partition: re-indexed training table plus the
    raw profiles of that fold's test users."""
    if not 0 <= fold < plan.folds:
        raise ValueError(f"fold {fold} out of range 0..{plan.folds - 1}")
    rng = np.random.default_rng(plan.seed)
    perm = rng.permutation(table.n_users)
    chunks = np.array_split(perm, plan.folds)
    test_users = np.sort(chunks[fold])
    train_users = np.setdiff1d(perm, test_users)
    train = table.restrict_users(train_users)
    profiles = []
    values = table.rating_values()
    for u in test_users:
        rows = table.user_rows(int(u))
        profiles.append(
            UserProfile(
                user_id=int(table.user_ids[u]),
                item_ids=table.item_ids[table.items[rows]],
                values=values[rows],
                timestamps=table.timestamps[rows],
            )
        )
    return train, profiles


def make_case(
    profile: UserProfile,
    plan: SplitPlan,
    scenario: str,
    train_item_map: dict[int, int],
    fold: int,
) -> TestUserCase | None:
    """Build one test case, or None when the user cannot fill the holdout
    plus the scenario's observation quota after cleaning.

    The holdout is a uniform sample of the user's (train-known) items and is
    identical across scenarios; the observation set is scenario-specific:
    the k lowest-rated leftovers (timestamp breaks ties), k random ones, or
    all of them.
    """
    min_obs = scenario_min_observation(scenario)
    keep = [
        (train_item_map[int(e)], float(v), int(t))
        for e, v, t in zip(profile.item_ids, profile.values, profile.timestamps)
        if int(e) in train_item_map
    ]
    if len(keep) < plan.holdout_size + min_obs:
        return None
    rng = np.random.default_rng((plan.seed, fold, profile.user_id))
    pick = rng.choice(len(keep), size=plan.holdout_size, replace=False)
    picked = set(int(p) for p in pick)
    holdout = {keep[p][0]: keep[p][1] for p in picked}
    rest = [keep[p] for p in range(len(keep)) if p not in picked]
    if scenario == "all":
        obs = rest
    elif scenario.startswith("negative"):
        obs = sorted(rest, key=lambda r: (r[1], r[2], r[0]))[:min_obs]
    else:  # random_k
        sel = rng.choice(len(rest), size=min_obs, replace=False)
        obs = [rest[int(s)] for s in sorted(sel)]
    return TestUserCase(
        user_id=profile.user_id,
        obs_items=np.array([o[0] for o in obs], dtype=np.int64),
        obs_values=np.array([o[1] for o in obs], dtype=np.float64),
        holdout=holdout,
    )


@dataclass
class EvalReport:
    """CV-aggregated metric curves per model and scenario."""

    curves: dict[tuple[str, str], MetricCurves]
    counts: dict[tuple[str, str], dict[str, int]]
    threshold: float
    n_max: int
    plan: SplitPlan

    def to_tsv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("model\tscenario\tfold\tn\tprecision\trecall\tfpr\tndcg\tndcl\n")
            for (model, scenario), curves in sorted(self.curves.items()):
                folds = curves.fold_means[metrics.METRICS[0]].shape[0]
                for f in range(folds):
                    for col, n in enumerate(curves.ns):
                        row = "\t".join(
                            f"{curves.fold_means[m][f, col]:.6f}" for m in metrics.METRICS
                        )
                        fh.write(f"{model}\t{scenario}\t{f}\t{n}\t{row}\n")

    def to_json(self, path: str | Path, manifest: dict | None = None) -> None:
        payload = {
            "threshold": self.threshold,
            "n_max": self.n_max,
            "plan": {
                "folds": self.plan.folds,
                "test_fraction": self.plan.test_fraction,
                "seed": self.plan.seed,
                "holdout_size": self.plan.holdout_size,
                "scenarios": list(self.plan.scenarios),
            },
            "counts": {
                f"{model}/{scenario}": dict(c) for (model, scenario), c in sorted(self.counts.items())
            },
            "curves": {
                f"{model}/{scenario}": {
                    m: {
                        "mean": curves.mean[m].tolist(),
                        "std": curves.std[m].tolist(),
                    }
                    for m in metrics.METRICS
                }
                for (model, scenario), curves in sorted(self.curves.items())
            },
        }
        if manifest is not None:
            payload["manifest"] = manifest
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)

    def mean_at(self, model: str, scenario: str, metric: str, n: int) -> float:
        return float(self.curves[(model, scenario)].mean[metric][n - 1])


def run_experiment(
    train: RatingTable,
    cases: Sequence[TestUserCase],
    models: Sequence,
    n_max: int,
    threshold: float,
    arrangement: str = "deepest",
) -> tuple[dict[str, dict[str, np.ndarray]], dict[str, dict[str, int]]]:
    """Score every fitted model on every case of one fold and scenario.

    Returns per-model metric arrays (users x n, NaN where undefined) and
    per-model counters of evaluated/failed users.
    """
    results: dict[str, dict[str, np.ndarray]] = {}
    counts: dict[str, dict[str, int]] = {}
    for model in models:
        rows: dict[str, list[list[float]]] = {m: [] for m in metrics.METRICS}
        evaluated = failed = 0
        for case in cases:
            try:
                rec = model.top_n(
                    case.obs_items,
                    case.obs_values,
                    n_max,
                    exclude=case.obs_items,
                    user_id=case.user_id,
                )
            except ScoringError as exc:
                failed += 1
                log.debug("%s failed on user %s: %s", model.name, case.user_id, exc)
                continue
            evaluated += 1
            curves = user_curves(rec, case.holdout, threshold, n_max, arrangement)
            for m in metrics.METRICS:
                rows[m].append(curves[m])
        if evaluated == 0:
            raise ValueError(f"model {model.name} produced no evaluable user")
        results[model.name] = {m: np.asarray(rows[m], dtype=np.float64) for m in metrics.METRICS}
        counts[model.name] = {"users": evaluated, "failed": failed}
    return results, counts


def evaluate_models(
    table: RatingTable,
    plan: SplitPlan,
    model_factories: Sequence,
    threshold: float,
    n_max: int = 100,
    arrangement: str = "deepest",
) -> EvalReport:
    """Full cross-validated evaluation over every scenario in the plan.

    `model_factories` are callables returning a fresh unfitted recommender;
    each fold fits its own copies on that fold's training table only.
    """
    per_fold: dict[tuple[str, str], list[dict[str, np.ndarray]]] = {}
    totals: dict[tuple[str, str], dict[str, int]] = {}
    for fold in range(plan.folds):
        train, profiles = split_users(table, plan, fold)
        fitted = [factory().fit(train) for factory in model_factories]
        for scenario in plan.scenarios:
            cases = []
            skipped = 0
            for profile in profiles:
                case = make_case(profile, plan, scenario, train.item_map, fold)
                if case is None:
                    skipped += 1
                else:
                    cases.append(case)
            if not cases:
                raise ValueError(f"scenario {scenario}: no usable test user in fold {fold}")
            log.info(
                "fold %d scenario %s: %d cases (%d skipped)", fold, scenario, len(cases), skipped
            )
            results, counts = run_experiment(train, cases, fitted, n_max, threshold, arrangement)
            for model in fitted:
                key = (model.name, scenario)
                per_fold.setdefault(key, []).append(results[model.name])
                agg = totals.setdefault(key, {"users": 0, "failed": 0, "skipped": 0})
                agg["users"] += counts[model.name]["users"]
                agg["failed"] += counts[model.name]["failed"]
                agg["skipped"] += skipped
    curves = {key: aggregate_curves(folds) for key, folds in per_fold.items()}
    return EvalReport(curves=curves, counts=totals, threshold=threshold, n_max=n_max, plan=plan)


@dataclass
class RatingExperimentResult:
    exact_rate: float
    positivity_rate: float
    rmse: float
    n_users: int
    per_fold: list[dict] = field(default_factory=list)


def run_rating_experiment(
    train: RatingTable,
    profiles: Sequence[UserProfile],
    model,
    threshold: float,
) -> tuple[list[float], list[float], int]:
    """Hold out each test user's single favourite item and predict its rating.

    The holdout is the highest-rated item (latest timestamp wins ties); the
    rest of the profile is folded in as the observation. Returns predicted
    and actual values plus the number of skipped users.
    """
    predicted: list[float] = []
    actual: list[float] = []
    skipped = 0
    for profile in profiles:
        keep = [
            (train.item_map[int(e)], float(v), int(t))
            for e, v, t in zip(profile.item_ids, profile.values, profile.timestamps)
            if int(e) in train.item_map
        ]
        if len(keep) < 2:
            skipped += 1
            continue
        top = max(keep, key=lambda r: (r[1], r[2], -r[0]))
        rest = [r for r in keep if r is not top]
        try:
            pred = model.predict_values(
                np.array([r[0] for r in rest], dtype=np.int64),
                np.array([r[1] for r in rest], dtype=np.float64),
                [top[0]],
            )[0]
        except ScoringError:
            skipped += 1
            continue
        predicted.append(float(pred))
        actual.append(top[1])
    return predicted, actual, skipped


def rating_experiment(
    table: RatingTable,
    plan: SplitPlan,
    model_factory,
    threshold: float,
) -> RatingExperimentResult:
    """Cross-validated rating prediction; rates are pooled over all folds."""
    predicted: list[float] = []
    actual: list[float] = []
    per_fold = []
    for fold in range(plan.folds):
        train, profiles = split_users(table, plan, fold)
        model = model_factory().fit(train)
        pred, act, skipped = run_rating_experiment(train, profiles, model, threshold)
        exact = float(np.mean([p == a for p, a in zip(pred, act)])) if pred else 0.0
        per_fold.append(
            {
                "fold": fold,
                "users": len(pred),
                "skipped": skipped,
                "exact": exact,
                "rmse": metrics.rmse(pred, act) if pred else float("nan"),
            }
        )
        predicted.extend(pred)
        actual.extend(act)
    if not predicted:
        raise ValueError("no user could be evaluated")
    pred_arr = np.asarray(predicted)
    act_arr = np.asarray(actual)
    exact_rate = float(np.mean(pred_arr == act_arr))
    positivity_rate = float(np.mean((pred_arr > threshold) == (act_arr > threshold)))
    return RatingExperimentResult(
        exact_rate=exact_rate,
        positivity_rate=positivity_rate,
        rmse=metrics.rmse(pred_arr, act_arr),
        n_users=len(predicted),
        per_fold=per_fold,
    )
