import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from coffee_rec.cli import main as cli_main
from coffee_rec.service import ModelBundle, RecommenderService, serve
from coffee_rec.synthetic import SyntheticConfig, generate_ratings, write_dat, write_titles


@pytest.fixture(scope="module")
def served(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    cfg = SyntheticConfig(n_users=150, n_items=90, mean_ratings=32,
                          min_ratings=21, max_ratings=70)
    write_dat(generate_ratings(cfg), root / "ratings.dat")
    write_titles(cfg.n_items, root / "movies.dat")
    model_path = root / "coffee.npz"
    assert cli_main(["train", "--data", str(root / "ratings.dat"), "--model", "coffee",
                     "--mlrank", "6,4,2", "--out", str(model_path)]) == 0
    bundle = ModelBundle.load(model_path, root / "movies.dat")
    server = serve(RecommenderService(bundle), port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", bundle
    server.shutdown()
    server.server_close()


def get(base, path):
    try:
        with urllib.request.urlopen(base + path) as resp:
            return resp.status, json.loads(resp.read()), dict(resp.headers)
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read()), dict(err.headers)


def post(base, path, payload):
    req = urllib.request.Request(
        base + path,
        data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


class TestHealth:
    def test_reports_model_shape_and_scale(self, served):
        base, bundle = served
        status, body, headers = get(base, "/health")
        assert status == 200
        assert body["model"]["ranks"] == [6, 4, 2]
        assert body["model"]["K"] == 5
        assert body["model"]["scale"]["values"] == [1.0, 2.0, 3.0, 4.0, 5.0]
        assert headers.get("Access-Control-Allow-Origin") == "*"

    def test_unloaded_model_503(self):
        status, body = RecommenderService(None).health()
        assert status == 503

    def test_unknown_route_404(self, served):
        base, _ = served
        status, _, _ = get(base, "/nothing-here")
        assert status == 404


class TestItems:
    def test_prefix_search(self, served):
        base, bundle = served
        some_title = next(iter(bundle.titles.values()))
        prefix = some_title[:4]
        status, body, _ = get(base, f"/items?query={prefix.replace(' ', '%20')}")
        assert status == 200
        assert body and all(t["title"].lower().startswith(prefix.lower()) for t in body)
        assert len(body) <= 20

    def test_case_insensitive(self, served):
        base, bundle = served
        title = next(iter(bundle.titles.values()))
        status, body, _ = get(base, f"/items?query={title[:3].upper()}")
        assert status == 200 and body

    def test_empty_query_400(self, served):
        base, _ = served
        status, _, _ = get(base, "/items?query=")
        assert status == 400

    def test_unknown_prefix_empty(self, served):
        base, _ = served
        status, body, _ = get(base, "/items?query=zzzzzzz")
        assert status == 200 and body == []


class TestRecommend:
    def test_single_rating_excludes_rated_item(self, served):
        base, bundle = served
        ext = int(bundle.item_ids[0])
        status, body = post(base, "/recommend", {"ratings": [{"item": ext, "rating": 2}], "n": 10})
        assert status == 200
        items = [e["item"] for e in body["items"]]
        assert len(items) == 10 and ext not in items
        assert all(len(e["shades"]) == 5 for e in body["items"])
        assert all("title" in e for e in body["items"])

    def test_rating_outside_scale_400(self, served):
        base, bundle = served
        ext = int(bundle.item_ids[0])
        status, body = post(base, "/recommend", {"ratings": [{"item": ext, "rating": 6}]})
        assert status == 400

    def test_unknown_item_400(self, served):
        base, _ = served
        status, _ = post(base, "/recommend", {"ratings": [{"item": 10_000_000, "rating": 3}]})
        assert status == 400

    def test_empty_ratings_400(self, served):
        base, _ = served
        status, _ = post(base, "/recommend", {"ratings": []})
        assert status == 400

    def test_malformed_json_400(self, served):
        base, _ = served
        req = urllib.request.Request(
            base + "/recommend", data=b"{nope", method="POST",
            headers={"Content-Type": "application/json"},
        )
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(req)
        assert err.value.code == 400

    def test_identical_requests_identical_bodies(self, served):
        base, bundle = served
        ext = int(bundle.item_ids[5])
        payload = {"ratings": [{"item": ext, "rating": 5}], "n": 7}
        first = post(base, "/recommend", payload)
        second = post(base, "/recommend", payload)
        assert first == second

    def test_custom_positive_levels(self, served):
        base, bundle = served
        ext = int(bundle.item_ids[2])
        status, body = post(
            base, "/recommend",
            {"ratings": [{"item": ext, "rating": 1}], "n": 5, "positive_levels": [0]},
        )
        assert status == 200 and len(body["items"]) == 5
        status, _ = post(
            base, "/recommend",
            {"ratings": [{"item": ext, "rating": 1}], "positive_levels": []},
        )
        assert status == 400

    def test_duplicate_item_latest_rating_wins(self, served):
        _, bundle = served
        svc = RecommenderService(bundle)
        ext = int(bundle.item_ids[7])
        once = svc.recommend({"ratings": [{"item": ext, "rating": 5}]})
        twice = svc.recommend(
            {"ratings": [{"item": ext, "rating": 1}, {"item": ext, "rating": 5}]}
        )
        assert once == twice

    def test_unloaded_model_503(self):
        status, _ = RecommenderService(None).recommend({"ratings": [{"item": 1, "rating": 3}]})
        assert status == 503


class TestOptions:
    def test_preflight(self, served):
        base, _ = served
        req = urllib.request.Request(base + "/recommend", method="OPTIONS")
        with urllib.request.urlopen(req) as resp:
            assert resp.status == 204
            assert resp.headers["Access-Control-Allow-Origin"] == "*"
            assert "POST" in resp.headers["Access-Control-Allow-Methods"]
