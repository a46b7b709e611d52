"""HTTP inference service and the predictor backends the router plugs in.

The service exposes two endpoints:

    POST /predict   seven named features in, {label, probability, model_version} out
    GET  /health    liveness plus model_version and inference timing counters

Both the HTTP handler and ``InProcessPredictor`` score requests through the
same ``evaluate`` function, so the two backends return bit-identical answers
for the same model and input.  ``HttpPredictor`` is the client side; it maps
timeouts and connection failures to ``PredictorUnavailableError`` so the
router can fall back to plain spray.
"""

from __future__ import annotations

import json
import math
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterator

import requests

from .ml.model_io import LoadedModel, load_model
from .routing import PredictorUnavailableError

DEFAULT_TIMEOUT_S = 0.05


def evaluate(model: LoadedModel, body: dict) -> dict:
    """Validate one request body and score it.

    Raises KeyError naming the first missing feature (in canonical order)
    and ValueError for non-numeric, non-finite, or negative values.  Extra
    fields are ignored.
    """
    features: dict[str, float] = {}
    for name in model.feature_names:
        if name not in body:
            raise KeyError(name)
        try:
            value = float(body[name])
        except (TypeError, ValueError):
            raise ValueError(f"field {name} is not a number") from None
        if not math.isfinite(value):
            raise ValueError(f"field {name} must be finite")
        if value < 0:
            raise ValueError(f"field {name} must be non-negative")
        features[name] = value
    label, prob = model.decide(features)
    return {"label": label, "probability": prob, "model_version": model.version}


class ServiceStats:
    """Thread-safe counters for handler-internal inference timing."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.predictions = 0
        self.inference_s = 0.0

    def record(self, elapsed_s: float) -> None:
        with self._lock:
            self.predictions += 1
            self.inference_s += elapsed_s

    def snapshot(self) -> dict:
        with self._lock:
            n, total = self.predictions, self.inference_s
        mean_ms = total / n * 1000.0 if n else 0.0
        return {"predictions": n, "mean_inference_ms": mean_ms}


class _Handler(BaseHTTPRequestHandler):
    # keep-alive needs accurate Content-Length on every response
    protocol_version = "HTTP/1.1"

    def log_message(self, format: str, *args) -> None:  # noqa: A002
        pass  # the service is driven from simulations; stderr chatter off

    def _send(self, code: int, payload: dict) -> None:
        raw = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_GET(self) -> None:
        if self.path == "/health":
            server: PredictionServer = self.server  # type: ignore[assignment]
            self._send(
                200,
                {
                    "status": "ok",
                    "model_version": server.model.version,
                    **server.stats.snapshot(),
                },
            )
        elif self.path == "/predict":
            self._send(405, {"error": "use POST for /predict"})
        else:
            self._send(404, {"error": f"unknown path {self.path}"})

    def do_POST(self) -> None:
        if self.path != "/predict":
            code = 405 if self.path == "/health" else 404
            self._send(code, {"error": f"no POST handler for {self.path}"})
            return
        server: PredictionServer = self.server  # type: ignore[assignment]
        try:
            length = int(self.headers.get("Content-Length", 0))
        except ValueError:
            self._send(400, {"error": "bad Content-Length"})
            return
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw)
        except json.JSONDecodeError:
            self._send(400, {"error": "body is not valid JSON"})
            return
        if not isinstance(body, dict):
            self._send(400, {"error": "body must be a JSON object"})
            return
        started = time.perf_counter()
        try:
            payload = evaluate(server.model, body)
        except KeyError as exc:
            name = exc.args[0]
            self._send(400, {"error": f"missing field: {name}", "field": name})
            return
        except ValueError as exc:
            self._send(400, {"error": str(exc)})
            return
        server.stats.record(time.perf_counter() - started)
        self._send(200, payload)


class PredictionServer(ThreadingHTTPServer):
    """One loaded model shared, read-only, across handler threads."""

    daemon_threads = True
    # the router can open dozens of connections in a burst; the default
    # accept backlog of 5 turns that into kernel-level resets
    request_queue_size = 128

    def __init__(self, address: tuple[str, int], model: LoadedModel):
        super().__init__(address, _Handler)
        self.model = model
        self.stats = ServiceStats()

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


def parse_bind(bind: str) -> tuple[str, int]:
    """Split "host:port"; the host defaults to loopback when omitted."""
    host, _, port_text = bind.rpartition(":")
    if not port_text:
        raise ValueError(f"bind address {bind!r} needs a :port suffix")
    try:
        port = int(port_text)
    except ValueError:
        raise ValueError(f"bind address {bind!r} has a non-numeric port") from None
    return host or "127.0.0.1", port


@contextmanager
def running_server(
    model_path: str | Path, bind: str = "127.0.0.1:0"
) -> Iterator[PredictionServer]:
    """Serve a model file on a background thread; port 0 picks a free one."""
    server = PredictionServer(parse_bind(bind), load_model(model_path))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5.0)


@dataclass(frozen=True)
class InProcessPredictor:
    """Direct model evaluation; the fast path for large sweeps."""

    model: LoadedModel

    def decide(self, features: dict[str, float]) -> tuple[int, float]:
        payload = evaluate(self.model, features)
        return payload["label"], payload["probability"]

    def predict(self, features: dict[str, float]) -> dict:
        return evaluate(self.model, features)


@dataclass
class HttpPredictor:
    """Client for the /predict endpoint.

    Timeouts and connection failures raise PredictorUnavailableError within
    timeout_s; anything else unexpected surfaces as RuntimeError.  Exactly
    one POST goes out per decide() call: response caching is the router's
    job, not the client's.
    """

    endpoint: str
    timeout_s: float = DEFAULT_TIMEOUT_S
    session: requests.Session = field(default_factory=requests.Session)

    def predict(self, features: dict[str, float]) -> dict:
        try:
            resp = self.session.post(
                f"{self.endpoint}/predict", json=features, timeout=self.timeout_s
            )
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise PredictorUnavailableError(
                f"predictor at {self.endpoint} unreachable: {exc.__class__.__name__}"
            ) from exc
        if resp.status_code != 200:
            detail = resp.text.strip()
            raise RuntimeError(f"/predict returned {resp.status_code}: {detail}")
        return resp.json()

    def decide(self, features: dict[str, float]) -> tuple[int, float]:
        payload = self.predict(features)
        return int(payload["label"]), float(payload["probability"])
