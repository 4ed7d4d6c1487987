"""Minimal HTTP facade over a trained tensor model.

Stateless JSON API: the client owns the accumulated rating list and sends
it whole on every request; the server folds it in and returns ranked items
with their full per-level score vectors. The model is loaded once and only
ever read, so the threading server needs no locks.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .ingest import RatingScale, parse_titles
from .models import PreferenceMatrix, fold_in_coffee, rank_items_shades
from .tensor import TuckerModel, load_model

log = logging.getLogger(__name__)

MAX_ITEM_RESULTS = 20


@dataclass
class ModelBundle:
    model: TuckerModel
    scale: RatingScale
    item_ids: np.ndarray  # internal index -> external id
    titles: dict[int, str]

    @property
    def item_map(self) -> dict[int, int]:
        if not hasattr(self, "_item_map"):
            self._item_map = {int(e): i for i, e in enumerate(self.item_ids)}
        return self._item_map

    @classmethod
    def load(cls, model_path: str | Path, titles_path: str | Path | None = None) -> "ModelBundle":
        model, extras = load_model(model_path)
        if "item_ids" not in extras or "scale_values" not in extras:
            raise ValueError("model file lacks the item map or rating scale")
        if "kind" in extras and str(np.asarray(extras["kind"]).item()) != "coffee":
            raise ValueError("serving requires a tensor (coffee) model file")
        scale = RatingScale(
            tuple(float(v) for v in extras["scale_values"]),
            float(extras["threshold"]),
        )
        titles = parse_titles(titles_path) if titles_path else {}
        return cls(model=model, scale=scale, item_ids=extras["item_ids"], titles=titles)


class RecommenderService:
    """Request handlers, separated from HTTP plumbing for direct testing."""

    def __init__(self, bundle: ModelBundle | None):
        self.bundle = bundle

    def health(self) -> tuple[int, dict]:
        if self.bundle is None:
            return 503, {"status": "unavailable", "error": "model not loaded"}
        model, scale = self.bundle.model, self.bundle.scale
        M, N, K = model.shape
        return 200, {
            "status": "ok",
            "model": {
                "ranks": list(model.ranks),
                "M": M,
                "N": N,
                "K": K,
                "scale": {
                    "values": list(scale.values),
                    "threshold": scale.negativity_threshold,
                },
            },
        }

    def items(self, query: str) -> tuple[int, object]:
        if self.bundle is None:
            return 503, {"error": "model not loaded"}
        if not query:
            return 400, {"error": "query must be a nonempty prefix"}
        prefix = query.lower()
        known = self.bundle.item_map
        hits = [
            {"item": item_id, "title": title}
            for item_id, title in self.bundle.titles.items()
            if title.lower().startswith(prefix) and item_id in known
        ]
        hits.sort(key=lambda h: (h["title"], h["item"]))
        return 200, hits[:MAX_ITEM_RESULTS]

    def recommend(self, payload: dict) -> tuple[int, dict]:
        if self.bundle is None:
            return 503, {"error": "model not loaded"}
        if not isinstance(payload, dict):
            return 400, {"error": "body must be a JSON object"}
        ratings = payload.get("ratings")
        if not isinstance(ratings, list) or not ratings:
            return 400, {"error": "ratings must be a nonempty list"}
        bundle = self.bundle
        scale = bundle.scale
        by_item: dict[int, int] = {}  # internal item -> level, latest entry wins
        for entry in ratings:
            if not isinstance(entry, dict) or "item" not in entry or "rating" not in entry:
                return 400, {"error": "each rating needs item and rating fields"}
            try:
                internal = bundle.item_map.get(int(entry["item"]))
                level = scale.level(float(entry["rating"]))
            except (TypeError, ValueError):
                return 400, {"error": f"invalid item or rating in {entry}"}
            if internal is None:
                return 400, {"error": f"unknown item {entry['item']}"}
            by_item[internal] = level
        items = list(by_item.keys())
        levels = [by_item[i] for i in items]
        n = payload.get("n", 10)
        if not isinstance(n, int) or n < 1:
            return 400, {"error": "n must be a positive integer"}
        positive = payload.get("positive_levels")
        if positive is None:
            positive = list(scale.positive_levels())
        if (
            not isinstance(positive, list)
            or not positive
            or any(not isinstance(k, int) or not 0 <= k < scale.n_levels for k in positive)
        ):
            return 400, {"error": "positive_levels must be valid level indices"}
        prefs = PreferenceMatrix(
            np.asarray(items), np.asarray(levels), bundle.model.V.shape[0], scale.n_levels
        )
        shades = fold_in_coffee(bundle.model, prefs)
        ranked = rank_items_shades(shades, positive, n, exclude=items)
        out = []
        for j in ranked:
            ext = int(bundle.item_ids[j])
            entry = {
                "item": ext,
                "score": float(shades[j, positive].sum()),
                "shades": [float(s) for s in shades[j]],
            }
            if ext in bundle.titles:
                entry["title"] = bundle.titles[ext]
            out.append(entry)
        return 200, {"items": out}


def make_handler(service: RecommenderService):
    class Handler(BaseHTTPRequestHandler):
        def _send(self, status: int, body) -> None:
            raw = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(raw)

        def do_OPTIONS(self):  # noqa: N802 (stdlib naming)
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()

        def do_GET(self):  # noqa: N802
            url = urlparse(self.path)
            if url.path == "/health":
                self._send(*service.health())
            elif url.path == "/items":
                query = parse_qs(url.query).get("query", [""])[0]
                self._send(*service.items(query))
            else:
                self._send(404, {"error": "not found"})

        def do_POST(self):  # noqa: N802
            url = urlparse(self.path)
            if url.path != "/recommend":
                self._send(404, {"error": "not found"})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                payload = json.loads(self.rfile.read(length) or b"")
            except json.JSONDecodeError:
                self._send(400, {"error": "invalid JSON body"})
                return
            self._send(*service.recommend(payload))

        def log_message(self, fmt, *args):
            log.debug("http: " + fmt, *args)

    return Handler


def serve(service: RecommenderService, port: int = 8080) -> ThreadingHTTPServer:
    """Bind the API server; caller runs serve_forever (or uses it in tests)."""
    server = ThreadingHTTPServer(("0.0.0.0", port), make_handler(service))
    log.info("serving recommendations on port %d", server.server_port)
    return server
