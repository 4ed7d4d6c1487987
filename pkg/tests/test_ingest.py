import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coffee_rec.ingest import (
    ParseError,
    RatingScale,
    RawRating,
    build_table,
    half_star_scale,
    load_table,
    parse_movielens,
    parse_titles,
    rating_level,
    save_table,
    whole_star_scale,
)


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestParse:
    def test_dat_line(self, tmp_path):
        path = _write(tmp_path, "r.dat", "1::1193::5::978300760\n")
        assert parse_movielens(path, "dat") == [RawRating(1, 1193, 5.0, 978300760)]

    def test_empty_file(self, tmp_path):
        assert parse_movielens(_write(tmp_path, "r.dat", ""), "dat") == []

    def test_non_numeric_field_carries_line_number(self, tmp_path):
        path = _write(tmp_path, "r.dat", "1::X::5::0\n")
        with pytest.raises(ParseError) as err:
            parse_movielens(path, "dat")
        assert err.value.line == 1

    def test_error_line_counts_earlier_rows(self, tmp_path):
        path = _write(tmp_path, "r.dat", "1::2::3::4\n\n9::9::bad::9\n")
        with pytest.raises(ParseError) as err:
            parse_movielens(path, "dat")
        assert err.value.line == 3

    def test_csv_roundtrip(self, tmp_path):
        path = _write(tmp_path, "r.csv", "userId,movieId,rating,timestamp\n3,7,4.5,100\n")
        assert parse_movielens(path, "csv") == [RawRating(3, 7, 4.5, 100)]

    def test_csv_bad_header(self, tmp_path):
        path = _write(tmp_path, "r.csv", "user,item,rating,ts\n1,1,3,1\n")
        with pytest.raises(ParseError):
            parse_movielens(path, "csv")

    def test_out_of_scale_rating_rejected_when_scale_given(self, tmp_path):
        path = _write(tmp_path, "r.dat", "1::2::4.25::10\n")
        with pytest.raises(ParseError):
            parse_movielens(path, "dat", scale=whole_star_scale())

    def test_order_preserved(self, tmp_path):
        path = _write(tmp_path, "r.dat", "2::5::3::7\n1::4::2::3\n")
        out = parse_movielens(path, "dat")
        assert [r.user_id for r in out] == [2, 1]

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            parse_movielens(_write(tmp_path, "r.dat", ""), "tsv")

    def test_titles_sidecar(self, tmp_path):
        path = _write(tmp_path, "movies.dat", "1::Toy Story (1995)::Animation\n2::Heat (1995)::Crime\n")
        assert parse_titles(path) == {1: "Toy Story (1995)", 2: "Heat (1995)"}


class TestRatingScale:
    def test_whole_scale_levels(self):
        scale = whole_star_scale()
        assert scale.n_levels == 5
        assert rating_level(scale, 5.0) == 4

    def test_half_scale_levels(self):
        scale = half_star_scale()
        assert scale.n_levels == 10
        assert rating_level(scale, 3.5) == 6

    def test_value_not_on_scale(self):
        with pytest.raises(ValueError):
            rating_level(whole_star_scale(), 4.25)

    def test_positive_levels_above_threshold_strictly(self):
        scale = half_star_scale(3.5)
        assert [scale.value_of(k) for k in scale.positive_levels()] == [4.0, 4.5, 5.0]

    def test_validation(self):
        with pytest.raises(ValueError):
            RatingScale((1.0, 1.0, 2.0), 1.5)
        with pytest.raises(ValueError):
            RatingScale((1.0, 2.0), 5.0)

    @given(st.integers(min_value=0, max_value=9))
    def test_level_bijection(self, level):
        scale = half_star_scale()
        assert scale.level(scale.value_of(level)) == level


def _r(u, i, v, t=0):
    return RawRating(u, i, v, t)


class TestBuildTable:
    def test_min_ratings_filter(self):
        ratings = [_r(1, i, 4.0) for i in range(1, 20)]  # 19 ratings
        ratings += [_r(2, i, 3.0) for i in range(1, 25)]
        table = build_table(ratings, min_ratings=20, scale=whole_star_scale())
        assert 1 not in table.user_map
        assert 2 in table.user_map

    def test_single_rating_indices(self):
        table = build_table([_r(7, 9, 4.0)], min_ratings=1, scale=whole_star_scale())
        assert (table.n_users, table.n_items) == (1, 1)
        assert list(table.triplets()) == [(0, 0, 3)]

    def test_duplicate_keeps_latest_timestamp(self):
        table = build_table(
            [_r(1, 1, 3.0, t=10), _r(1, 1, 5.0, t=20)], min_ratings=1, scale=whole_star_scale()
        )
        assert list(table.levels) == [4]

    def test_duplicate_order_does_not_matter(self):
        table = build_table(
            [_r(1, 1, 5.0, t=20), _r(1, 1, 3.0, t=10)], min_ratings=1, scale=whole_star_scale()
        )
        assert list(table.levels) == [4]

    def test_empty_after_filter(self):
        with pytest.raises(ValueError):
            build_table([_r(1, 1, 3.0)], min_ratings=2, scale=whole_star_scale())

    def test_min_ratings_validated(self):
        with pytest.raises(ValueError):
            build_table([_r(1, 1, 3.0)], min_ratings=0, scale=whole_star_scale())

    @settings(max_examples=25, deadline=None)
    @given(st.lists(
        st.tuples(st.integers(1, 8), st.integers(1, 12), st.integers(0, 4), st.integers(0, 99)),
        min_size=1, max_size=60,
    ))
    def test_roundtrip_and_degree_invariants(self, rows):
        scale = whole_star_scale()
        ratings = [_r(u, i, float(v + 1), t) for u, i, v, t in rows]
        try:
            table = build_table(ratings, min_ratings=2, scale=scale)
        except ValueError:
            return  # everything filtered away
        # id maps are inverse bijections
        for ext, internal in table.user_map.items():
            assert int(table.user_ids[internal]) == ext
        for ext, internal in table.item_map.items():
            assert int(table.item_ids[internal]) == ext
        # indices dense, one triplet per (user, item), degree >= min_ratings
        assert set(np.unique(table.users)) == set(range(table.n_users))
        pairs = list(zip(table.users.tolist(), table.items.tolist()))
        assert len(pairs) == len(set(pairs))
        assert np.bincount(table.users).min() >= 2

    def test_restrict_users_reindexes(self, small_table):
        sub = small_table.restrict_users([0, 3, 5])
        assert sub.n_users == 3
        assert set(np.unique(sub.users)) == {0, 1, 2}
        assert set(np.unique(sub.items)) == set(range(sub.n_items))
        # external ids survive
        assert int(sub.user_ids[0]) == int(small_table.user_ids[0])

    def test_save_load_roundtrip(self, tmp_path, small_table):
        save_table(small_table, tmp_path / "t.npz")
        back = load_table(tmp_path / "t.npz")
        assert np.array_equal(back.users, small_table.users)
        assert np.array_equal(back.levels, small_table.levels)
        assert back.scale == small_table.scale
