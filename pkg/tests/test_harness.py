import json
import math

import numpy as np
import pytest

from coffee_rec.harness import TestUserCase as UserCase
from coffee_rec.harness import (
    SplitPlan,
    UserProfile,
    evaluate_models,
    make_case,
    rating_experiment,
    run_experiment,
    run_rating_experiment,
    split_users,
)
from coffee_rec.models import ModelConfig, ScoringError, build_model


class OracleModel:
    """Plants each user's holdout in the ideal arrangement: positives first
    in descending rating, unrated filler, negatives at the window bottom in
    the ideal order."""

    name = "oracle"

    def __init__(self, cases, n_items, n_max):
        self.plan = {}
        for case in cases:
            pos = sorted(
                (i for i, v in case.holdout.items() if v > 3.0),
                key=lambda i: -case.holdout[i],
            )
            neg = sorted(
                (i for i, v in case.holdout.items() if v <= 3.0),
                key=lambda i: -case.holdout[i],
            )
            used = set(pos) | set(neg) | set(case.obs_items.tolist())
            filler = [i for i in range(n_items) if i not in used]
            middle = filler[: n_max - len(pos) - len(neg)]
            self.plan[case.user_id] = pos + middle + neg

    def fit(self, table):
        return self

    def top_n(self, items, values, n, exclude=(), user_id=None):
        return self.plan[user_id][:n]


class ConstantModel:
    name = "constant"

    def __init__(self, value):
        self.value = value

    def fit(self, table):
        return self

    def predict_values(self, items, values, query_items):
        return [self.value for _ in query_items]


class EchoModel(ConstantModel):
    """Cheats by reading the true rating; pins the perfect-score contract."""

    name = "echo"

    def __init__(self, truth):
        self.truth = truth

    def predict_values(self, items, values, query_items):
        return [self.truth[q] for q in query_items]


class TestSplit:
    def test_partition_and_disjointness(self, small_table):
        plan = SplitPlan(folds=5, seed=3)
        seen = []
        for fold in range(5):
            train, profiles = split_users(small_table, plan, fold)
            test_ids = {p.user_id for p in profiles}
            train_ids = {int(e) for e in train.user_ids}
            assert not test_ids & train_ids
            assert len(train_ids) + len(test_ids) == small_table.n_users
            seen.append(test_ids)
        union = set().union(*seen)
        assert union == {int(e) for e in small_table.user_ids}
        assert sum(len(s) for s in seen) == small_table.n_users

    def test_same_seed_identical(self, small_table):
        plan = SplitPlan(seed=9)
        a = split_users(small_table, plan, 2)[1]
        b = split_users(small_table, plan, 2)[1]
        assert [p.user_id for p in a] == [p.user_id for p in b]

    def test_seed_changes_partition(self, small_table):
        a = {p.user_id for p in split_users(small_table, SplitPlan(seed=0), 0)[1]}
        b = {p.user_id for p in split_users(small_table, SplitPlan(seed=1), 0)[1]}
        assert a != b

    def test_fold_out_of_range(self, small_table):
        with pytest.raises(ValueError):
            split_users(small_table, SplitPlan(), 5)

    def test_train_reindexed_densely(self, small_table):
        train, _ = split_users(small_table, SplitPlan(), 0)
        assert set(np.unique(train.users)) == set(range(train.n_users))
        assert set(np.unique(train.items)) == set(range(train.n_items))


def profile_of(user_id, rows):
    items, values, stamps = zip(*rows)
    return UserProfile(
        user_id=user_id,
        item_ids=np.array(items),
        values=np.array(values, dtype=float),
        timestamps=np.array(stamps),
    )


class TestMakeCase:
    ITEM_MAP = {e: e - 1 for e in range(1, 40)}

    def plan(self, **kw):
        defaults = dict(folds=5, seed=1, holdout_size=3)
        defaults.update(kw)
        return SplitPlan(**defaults)

    def test_negative_scenario_takes_lowest(self):
        rows = [(i, v, i) for i, v in zip(range(1, 8), (4.0, 1.0, 3.0, 5.0, 2.0, 4.0, 5.0))]
        case = make_case(profile_of(1, rows), self.plan(), "negative_1", self.ITEM_MAP, fold=0)
        rest = {i - 1: v for i, v, _ in rows if i - 1 not in case.holdout}
        assert len(case.obs_items) == 1
        assert case.obs_values[0] == min(rest.values())

    def test_negative_tie_broken_by_earlier_timestamp(self):
        rows = [(1, 1.0, 5), (2, 1.0, 2), (3, 4.0, 1), (4, 5.0, 9), (5, 3.0, 4),
                (6, 2.0, 7), (7, 5.0, 0)]
        holdout_free = self.plan(holdout_size=3)
        case = make_case(profile_of(1, rows), holdout_free, "negative_1", self.ITEM_MAP, fold=0)
        ones = [i - 1 for i, v, _ in rows if v == 1.0]
        surviving = [i for i in ones if i not in case.holdout]
        if len(surviving) == 2:  # both 1.0-rated items escaped the holdout
            assert case.obs_items[0] == 1  # external 2 at t=2 beats external 1 at t=5
        else:
            assert case.obs_items[0] not in case.holdout

    def test_all_scenario_uses_everything(self):
        rows = [(i, 3.0, i) for i in range(1, 10)]
        case = make_case(profile_of(1, rows), self.plan(), "all", self.ITEM_MAP, fold=0)
        assert len(case.obs_items) == 9 - 3
        assert not set(case.obs_items) & set(case.holdout)

    def test_random_scenario_size(self):
        rows = [(i, 3.0, i) for i in range(1, 12)]
        case = make_case(profile_of(1, rows), self.plan(), "random_3", self.ITEM_MAP, fold=0)
        assert len(case.obs_items) == 3

    def test_insufficient_items_skipped(self):
        rows = [(i, 3.0, i) for i in range(1, 4)]
        assert make_case(profile_of(1, rows), self.plan(), "negative_1", self.ITEM_MAP, fold=0) is None

    def test_items_outside_training_cleaned(self):
        rows = [(i, 3.0, i) for i in range(1, 8)] + [(999, 5.0, 0)]
        case = make_case(profile_of(1, rows), self.plan(), "all", self.ITEM_MAP, fold=0)
        assert 998 not in case.obs_items and 998 not in case.holdout

    def test_holdout_identical_across_scenarios(self):
        rows = [(i, float(1 + i % 5), i) for i in range(1, 15)]
        cases = [
            make_case(profile_of(1, rows), self.plan(), scen, self.ITEM_MAP, fold=0)
            for scen in ("negative_1", "random_1", "all")
        ]
        holds = [tuple(sorted(c.holdout.items())) for c in cases]
        assert holds[0] == holds[1] == holds[2]

    def test_unknown_scenario(self):
        with pytest.raises(ValueError):
            make_case(profile_of(1, [(1, 3.0, 0)]), self.plan(), "bogus", self.ITEM_MAP, fold=0)


class TestRunExperiment:
    def _cases(self):
        rng = np.random.default_rng(0)
        cases = []
        for uid in range(10):
            items = rng.choice(50, size=8, replace=False)
            holdout = {int(i): float(v) for i, v in
                       zip(items[:4], rng.choice([1.0, 2.0, 4.0, 5.0], size=4))}
            cases.append(UserCase(
                user_id=uid,
                obs_items=items[4:6].astype(np.int64),
                obs_values=np.array([3.0, 4.0]),
                holdout=holdout,
            ))
        return cases

    def test_oracle_model_maxes_both_metrics(self):
        cases = self._cases()
        model = OracleModel(cases, n_items=50, n_max=20)
        results, counts = run_experiment(None, cases, [model], n_max=20, threshold=3.0)
        curves = results["oracle"]
        for row, case in zip(curves["ndcg"], cases):
            if any(v > 3.0 for v in case.holdout.values()):
                assert row[-1] == 1.0
        for row, case in zip(curves["ndcl"], cases):
            if any(v <= 3.0 for v in case.holdout.values()):
                assert row[-1] == 1.0
        assert counts["oracle"] == {"users": 10, "failed": 0}

    def test_scoring_failures_counted(self):
        cases = self._cases()

        class FragileModel:
            name = "fragile"

            def top_n(self, items, values, n, exclude=(), user_id=None):
                if user_id % 2 == 0:
                    raise ScoringError("cold")
                return [int(i) for i in range(n)]

        results, counts = run_experiment(None, cases, [FragileModel()], 10, 3.0)
        assert counts["fragile"] == {"users": 5, "failed": 5}
        assert results["fragile"]["ndcg"].shape[0] == 5

    def test_every_user_failing_is_an_error(self):
        cases = self._cases()

        class DeadModel:
            name = "dead"

            def top_n(self, *a, **k):
                raise ScoringError("nope")

        with pytest.raises(ValueError):
            run_experiment(None, cases, [DeadModel()], 10, 3.0)


class TestEvaluateModels:
    def test_report_shape_and_determinism(self, small_table, tmp_path):
        plan = SplitPlan(folds=3, seed=2, holdout_size=3, scenarios=("negative_1", "all"))
        factories = [
            lambda: build_model(ModelConfig(kind="popular")),
            lambda: build_model(ModelConfig(kind="random")),
        ]
        report_a = evaluate_models(small_table, plan, factories, threshold=3.0, n_max=20)
        report_b = evaluate_models(small_table, plan, factories, threshold=3.0, n_max=20)
        keys = {("popular", "negative_1"), ("popular", "all"),
                ("random", "negative_1"), ("random", "all")}
        assert set(report_a.curves) == keys
        a_json, b_json = tmp_path / "a.json", tmp_path / "b.json"
        report_a.to_json(a_json)
        report_b.to_json(b_json)
        assert a_json.read_text() == b_json.read_text()

    def test_tsv_layout(self, small_table, tmp_path):
        plan = SplitPlan(folds=2, seed=0, holdout_size=3, scenarios=("all",))
        report = evaluate_models(
            small_table, plan, [lambda: build_model(ModelConfig(kind="popular"))],
            threshold=3.0, n_max=5,
        )
        path = tmp_path / "report.tsv"
        report.to_tsv(path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "model\tscenario\tfold\tn\tprecision\trecall\tfpr\tndcg\tndcl"
        assert len(lines) == 1 + 2 * 5  # folds x n
        first = lines[1].split("\t")
        assert first[0] == "popular" and first[1] == "all" and first[3] == "1"

    def test_random_model_barely_retrieves(self, small_table):
        # With the ignore-unrated rule precision is taken over matched items
        # only, so the uniform baseline shows up in recall/ndcg instead: a
        # random 10 of 90 items recovers ~11% of any holdout.
        plan = SplitPlan(folds=2, seed=1, holdout_size=3, scenarios=("all",))
        report = evaluate_models(
            small_table, plan, [lambda: build_model(ModelConfig(kind="random"))],
            threshold=3.0, n_max=20,
        )
        assert report.mean_at("random", "all", "recall", 10) < 0.3
        assert report.mean_at("random", "all", "ndcg", 10) < 0.3


class TestRatingExperiment:
    def _profiles(self):
        return [
            profile_of(1, [(1, 5.0, 3), (2, 3.0, 1), (3, 4.0, 2)]),
            profile_of(2, [(4, 3.0, 9), (5, 2.0, 0), (6, 3.0, 4)]),
        ]

    ITEM_MAP = {e: e - 1 for e in range(1, 9)}

    class _Train:
        item_map = {e: e - 1 for e in range(1, 9)}

    def test_holdout_is_top_rated_latest(self):
        # user 1's favourite is item 1 (internal 0); user 2 ties at 3.0
        # between internal 3 (t=9) and internal 5 (t=4): latest wins
        echo = EchoModel({0: 5.0, 3: 3.0})
        pred, act, skipped = run_rating_experiment(self._Train(), self._profiles(), echo, 3.0)
        assert act == [5.0, 3.0]
        assert pred == [5.0, 3.0]
        assert skipped == 0

    def test_cv_pools_folds_deterministically(self, small_table):
        plan = SplitPlan(folds=3, seed=0)
        a = rating_experiment(small_table, plan, lambda: ConstantModel(5.0), 3.0)
        b = rating_experiment(small_table, plan, lambda: ConstantModel(5.0), 3.0)
        assert a.n_users == small_table.n_users  # every profile is long enough
        assert (a.exact_rate, a.positivity_rate, a.rmse) == (b.exact_rate, b.positivity_rate, b.rmse)
        assert len(a.per_fold) == 3

    def test_constant_midscale_rmse_by_hand(self):
        profiles = [
            profile_of(1, [(1, 5.0, 1), (2, 2.0, 0)]),
            profile_of(2, [(3, 3.0, 1), (4, 1.0, 0)]),
        ]
        pred, act, skipped = run_rating_experiment(
            self._Train(), profiles, ConstantModel(3.0), 3.0
        )
        assert act == [5.0, 3.0]
        rmse = math.sqrt(np.mean((np.array(pred) - np.array(act)) ** 2))
        assert rmse == pytest.approx(math.sqrt(2.0))

    def test_too_small_profiles_skipped(self):
        profiles = [profile_of(1, [(1, 5.0, 0)])]
        pred, act, skipped = run_rating_experiment(
            self._Train(), profiles, ConstantModel(3.0), 3.0
        )
        assert pred == [] and skipped == 1


class TestSplitPlanValidation:
    def test_bad_fields(self):
        with pytest.raises(ValueError):
            SplitPlan(folds=1)
        with pytest.raises(ValueError):
            SplitPlan(test_fraction=1.5)
        with pytest.raises(ValueError):
            SplitPlan(holdout_size=0)
        with pytest.raises(ValueError):
            SplitPlan(scenarios=("negative_0",))

    def test_fraction_derived_from_folds(self):
        assert SplitPlan(folds=4).test_fraction == pytest.approx(0.25)
        assert SplitPlan(folds=5, test_fraction=0.2).test_fraction == 0.2
        with pytest.raises(ValueError, match="partition"):
            SplitPlan(folds=3, test_fraction=0.2)
