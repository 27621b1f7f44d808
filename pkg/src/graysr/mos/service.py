"""Blinded mean-opinion-score rating service.

Serves shuffled image sets over a small JSON HTTP API. Which method produced
each item is known only server-side (and in the append-only ratings log);
no API payload carries a method name until the per-session report, which is
available only after every item has been rated.

API:
    GET  /api/session            -> { session_id, sets: [ { set_id, items: [ { item_id, image_url } ] } ] }
    GET  /images/{item_id}       -> image/png
    POST /api/rating             <- { session_id, item_id, score: 1..5 } -> 204
    GET  /api/report?session_id= -> { methods: [ { method, mos, n } ] } (409 until complete)
    GET  /                       -> static UI assets
"""

from __future__ import annotations

import io
import json
import os
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from graysr.image import load_image

ITEMS_PER_SET = 7

RATING_LOG_COLUMNS = ("timestamp", "session_id", "item_id", "method", "score")

FALLBACK_PAGE = b"""<!doctype html>
<html><head><meta charset="utf-8"><title>rating service</title></head>
<body><p>The rating service API is running, but no UI bundle is configured.
Point --ui at a built frontend directory.</p></body></html>
"""


def load_session_config(path) -> dict:
    """Parse and validate a sessions spec: sets of exactly 7 items each."""
    path = Path(path)
    config = json.loads(path.read_text())
    sets = config.get("sets")
    if not sets:
        raise ValueError(f"{path}: config has no sets")
    for i, group in enumerate(sets):
        items = group.get("items", [])
        if len(items) != ITEMS_PER_SET:
            raise ValueError(
                f"{path}: set {i} has {len(items)} items, expected {ITEMS_PER_SET}"
            )
        for item in items:
            img = (path.parent / item["path"]).resolve()
            if not img.exists():
                raise ValueError(f"{path}: missing image {img}")
            item["path"] = str(img)
            if "method" not in item:
                raise ValueError(f"{path}: item without method label (set {i})")
    config.setdefault("shuffle_seed", 0)
    return config


class _Session:
    def __init__(self, session_id: str, sets: list):
        self.session_id = session_id
        # sets: list of (public_set_id, [(item_id, method, path)])
        self.sets = sets
        self.items = {
            item_id: (method, path)
            for _, group in sets
            for item_id, method, path in group
        }
        self.ratings: dict = {}

    @property
    def complete(self) -> bool:
        return len(self.ratings) == len(self.items)


class RatingService:
    """Session registry plus the durable ratings log; thread-safe."""

    def __init__(self, config: dict, log_path):
        self.config = config
        self.log_path = Path(log_path)
        self.lock = threading.Lock()
        self.sessions: dict = {}
        self._counter = 0
        if not self.log_path.exists():
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_path, "w") as fh:
                fh.write(",".join(RATING_LOG_COLUMNS) + "\n")

    def new_session(self) -> _Session:
        with self.lock:
            self._counter += 1
            n = self._counter
        session_id = f"s{n:04d}"
        item_counter = 0
        sets = []
        for set_idx, group in enumerate(self.config["sets"]):
            rng = np.random.default_rng(
                np.random.SeedSequence([self.config["shuffle_seed"], n, set_idx])
            )
            order = rng.permutation(ITEMS_PER_SET)
            shuffled = []
            for k in order:
                item = group["items"][int(k)]
                item_counter += 1
                item_id = f"{session_id}-i{item_counter:03d}"
                shuffled.append((item_id, item["method"], item["path"]))
            sets.append((f"g{set_idx + 1}", shuffled))
        session = _Session(session_id, sets)
        with self.lock:
            self.sessions[session_id] = session
        return session

    def session_payload(self, session: _Session) -> dict:
        return {
            "session_id": session.session_id,
            "sets": [
                {
                    "set_id": set_id,
                    "items": [
                        {"item_id": item_id, "image_url": f"/images/{item_id}"}
                        for item_id, _, _ in group
                    ],
                }
                for set_id, group in session.sets
            ],
        }

    def submit_rating(self, session_id: str, item_id: str, score) -> None:
        if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 5:
            raise ValueError(f"score must be an integer in 1..5, got {score!r}")
        with self.lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise KeyError(f"unknown session {session_id!r}")
            if item_id not in session.items:
                raise KeyError(f"unknown item {item_id!r}")
            session.ratings[item_id] = score  # resubmission overwrites
            method = session.items[item_id][0]
            line = f"{time.time():.6f},{session_id},{item_id},{method},{score}\n"
            with open(self.log_path, "a") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())

    def report(self, session_id: str) -> dict:
        with self.lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise KeyError(f"unknown session {session_id!r}")
            if not session.complete:
                remaining = len(session.items) - len(session.ratings)
                raise PermissionError(f"{remaining} items still unrated")
            by_method: dict = {}
            for item_id, score in session.ratings.items():
                by_method.setdefault(session.items[item_id][0], []).append(score)
        from graysr.reports import order_methods

        ordered = [m for m in ("lr", "hr") if m in by_method]
        ordered += order_methods([m for m in by_method if m not in ("lr", "hr")])
        return {
            "methods": [
                {
                    "method": m,
                    "mos": sum(by_method[m]) / len(by_method[m]),
                    "n": len(by_method[m]),
                }
                for m in ordered
            ]
        }

    def image_bytes(self, item_id: str) -> bytes:
        with self.lock:
            path = None
            for session in self.sessions.values():
                if item_id in session.items:
                    path = session.items[item_id][1]
                    break
        if path is None:
            raise KeyError(f"unknown item {item_id!r}")
        if path.lower().endswith(".png"):
            return Path(path).read_bytes()
        img = load_image(path)  # PGM inputs are re-encoded to PNG on the wire
        buf = io.BytesIO()
        quantized = np.rint(np.clip(img.data, 0, 255)).astype(np.uint8)
        PILImage.fromarray(quantized, mode="L").save(buf, format="PNG")
        return buf.getvalue()


class _Handler(BaseHTTPRequestHandler):
    service: RatingService = None
    ui_dir: Path | None = None

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, obj, status=200):
        body = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        path, _, query = self.path.partition("?")
        if path == "/api/session":
            session = self.service.new_session()
            self._send_json(self.service.session_payload(session))
        elif path == "/api/report":
            params = dict(p.split("=", 1) for p in query.split("&") if "=" in p)
            session_id = params.get("session_id", "")
            try:
                self._send_json(self.service.report(session_id))
            except KeyError as err:
                self._send_json({"error": str(err)}, status=404)
            except PermissionError as err:
                self._send_json({"error": str(err)}, status=409)
        elif path.startswith("/images/"):
            try:
                data = self.service.image_bytes(path[len("/images/") :])
            except KeyError as err:
                self._send_json({"error": str(err)}, status=404)
                return
            self.send_response(200)
            self.send_header("Content-Type", "image/png")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
        else:
            self._serve_static(path)

    def _serve_static(self, path):
        name = "index.html" if path == "/" else path.lstrip("/")
        if self.ui_dir is not None:
            target = (self.ui_dir / name).resolve()
            if target.is_file() and self.ui_dir.resolve() in target.parents:
                body = target.read_bytes()
                ctype = {
                    ".html": "text/html; charset=utf-8",
                    ".js": "text/javascript; charset=utf-8",
                    ".css": "text/css; charset=utf-8",
                    ".map": "application/json",
                }.get(target.suffix, "application/octet-stream")
                self.send_response(200)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                return
        if path == "/":
            self.send_response(200)
            self.send_header("Content-Type", "text/html; charset=utf-8")
            self.send_header("Content-Length", str(len(FALLBACK_PAGE)))
            self.end_headers()
            self.wfile.write(FALLBACK_PAGE)
        else:
            self._send_json({"error": "not found"}, status=404)

    def do_POST(self):
        if self.path.partition("?")[0] != "/api/rating":
            self._send_json({"error": "not found"}, status=404)
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length).decode())
            self.service.submit_rating(
                payload["session_id"], payload["item_id"], payload["score"]
            )
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            self._send_json({"error": f"bad request: {err}"}, status=400)
            return
        except ValueError as err:
            self._send_json({"error": str(err)}, status=400)
            return
        self.send_response(204)
        self.end_headers()


def make_server(service: RatingService, host: str, port: int, ui_dir=None):
    handler = type(
        "BoundHandler",
        (_Handler,),
        {"service": service, "ui_dir": Path(ui_dir) if ui_dir else None},
    )
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(config_path, log_path, host="127.0.0.1", port=8731, ui_dir=None):
    config = load_session_config(config_path)
    service = RatingService(config, log_path)
    server = make_server(service, host, port, ui_dir)
    print(f"rating service on http://{host}:{server.server_address[1]}/ "
          f"({len(config['sets'])} sets, log: {log_path})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
