import pytest

import coffee_rec as cr
from coffee_rec.models import ModelConfig, build_model
from coffee_rec.synthetic import SyntheticConfig, generate_ratings, write_dat, write_titles


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """The frozen desk-scale corpus, written through the real file format."""
    path = tmp_path_factory.mktemp("corpus")
    cfg = SyntheticConfig()
    write_dat(generate_ratings(cfg), path / "ratings.dat")
    write_titles(cfg.n_items, path / "movies.dat")
    return path


@pytest.fixture(scope="session")
def desk_table(corpus_dir):
    raw = cr.parse_movielens(corpus_dir / "ratings.dat", "dat")
    return cr.build_table(raw, min_ratings=20, scale=cr.whole_star_scale())


@pytest.fixture(scope="session")
def small_table():
    cfg = SyntheticConfig(
        n_users=150, n_items=90, mean_ratings=32, min_ratings=21, max_ratings=70
    )
    return cr.build_table(generate_ratings(cfg), min_ratings=20, scale=cr.whole_star_scale())


@pytest.fixture(scope="session")
def small_coffee(small_table):
    return cr.fit_coffee(small_table, (8, 6, 2))


@pytest.fixture(scope="session")
def small_recommenders(small_table):
    """Fitted coffee + puresvd on the small corpus, shared across tests."""
    coffee = build_model(ModelConfig(kind="coffee", mlrank=(12, 6, 2))).fit(small_table)
    svd = build_model(ModelConfig(kind="puresvd", rank=8)).fit(small_table)
    return coffee, svd
