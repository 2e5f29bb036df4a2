"""HTTP suggestion service: one loaded model, bounded concurrency, JSON API.

Endpoints:
  GET  /v1/health   liveness probe
  GET  /v1/config   the limits a client needs (context radius, beam, body size)
  POST /v1/predict  {"grid": <grid document>, "sheet": name?, "target": "D4",
                     "top_k": 5?, "request_id": str?}

Prediction responses carry ranked suggestions (formula text plus its sketch
and relative ranges), diagnostics, and echo the request id.  Failures are
JSON too: 400 for bad input (the message names the offending part), 413 for
oversized bodies, 503 when all in-flight slots are busy, and 500 with an
opaque incident id — never a stack trace.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .formula import parse_formula, to_ir
from .grid import A1ParseError, GridFormatError, parse_a1, sheets_from_doc
from .model import Predictor, Suggestion

log = logging.getLogger(__name__)

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8117
DEFAULT_MAX_BODY_BYTES = 2_000_000
DEFAULT_MAX_IN_FLIGHT = 4

ENV_BIND = "SHEETSUGGEST_BIND"
ENV_CHECKPOINT = "SHEETSUGGEST_CHECKPOINT"


class RequestRejected(Exception):
    """A client-visible failure with an HTTP status."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def resolve_checkpoint(flag_value: str | None) -> str:
    """Checkpoint path from the flag, else the environment."""
    value = flag_value or os.environ.get(ENV_CHECKPOINT)
    if not value:
        raise ValueError(
            f"no checkpoint: pass --checkpoint or set {ENV_CHECKPOINT}"
        )
    return value


def resolve_bind(flag_host: str | None, flag_port: int | None) -> tuple[str, int]:
    """Bind address from flags, else SHEETSUGGEST_BIND=host:port, else defaults."""
    env = os.environ.get(ENV_BIND)
    env_host, env_port = None, None
    if env:
        host_part, sep, port_part = env.rpartition(":")
        if not sep or not port_part.isdigit():
            raise ValueError(f"{ENV_BIND} must look like host:port, got {env!r}")
        env_host, env_port = host_part, int(port_part)
    host = flag_host if flag_host is not None else (env_host or DEFAULT_HOST)
    port = flag_port if flag_port is not None else (env_port if env_port is not None else DEFAULT_PORT)
    return host, port


def suggestion_to_doc(suggestion: Suggestion) -> dict:
    return {
        "rank": suggestion.rank,
        "formula": suggestion.formula,
        "log_prob": suggestion.log_prob,
        "sketch": list(suggestion.ir.sketch),
        "ranges": [
            {"start": list(rel.start), "end": list(rel.end) if rel.end else None}
            for rel in suggestion.ir.ranges
        ],
    }


def check_roundtrip(suggestion: Suggestion, target) -> None:
    """Every shipped formula must parse back to the exact structure we rank.

    This guards the renderer/parser pair; a violation is an internal bug.
    """
    reparsed = to_ir(parse_formula(suggestion.formula), target)
    if reparsed != suggestion.ir:
        raise RuntimeError(
            f"rendered formula {suggestion.formula!r} did not re-parse to its own structure"
        )


class SuggestService(ThreadingHTTPServer):
    """One model instance shared across request threads.

    Inference never mutates the network, so concurrent requests are safe;
    the semaphore only bounds CPU oversubscription.
    """

    daemon_threads = True
    allow_reuse_address = True

    def __init__(
        self,
        address: tuple[str, int],
        predictor: Predictor,
        *,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        max_body_bytes: int | None = None,
    ):
        super().__init__(address, _Handler)
        self.predictor = predictor
        self.max_body_bytes = (
            DEFAULT_MAX_BODY_BYTES if max_body_bytes is None else max_body_bytes
        )
        self.slots = threading.Semaphore(max_in_flight)
        self.max_in_flight = max_in_flight

    def config_doc(self) -> dict:
        config = self.predictor.config
        return {
            "radius": config.radius,
            "window_rows": 2 * config.radius + 1,
            "window_cols": 2 * config.radius + 1,
            "beam_size": config.beam_size,
            "max_top_k": config.beam_size,
            "max_body_bytes": self.max_body_bytes,
            "max_in_flight": self.max_in_flight,
        }


def make_server(
    checkpoint: str | Path,
    host: str = DEFAULT_HOST,
    port: int = DEFAULT_PORT,
    *,
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    max_body_bytes: int | None = None,
) -> SuggestService:
    """Load the model once and bind the service socket."""
    predictor = Predictor.from_checkpoint(checkpoint)
    return SuggestService(
        (host, port),
        predictor,
        max_in_flight=max_in_flight,
        max_body_bytes=max_body_bytes,
    )


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: SuggestService

    # ------------------------------------------------------------------
    # plumbing

    def log_message(self, fmt: str, *args) -> None:
        log.info("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, doc: dict, extra_headers: dict | None = None) -> None:
        # One response per connection: an erroring client may leave an unread
        # body on the socket, so keep-alive would desynchronize the stream.
        self.close_connection = True
        body = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Connection", "close")
        for key, value in (extra_headers or {}).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, status: int, message: str, **fields) -> None:
        self._send_json(status, {"error": {"status": status, "message": message, **fields}})

    # ------------------------------------------------------------------
    # routes

    def do_OPTIONS(self) -> None:  # CORS preflight for browser clients
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        if self.path == "/v1/health":
            self._send_json(200, {"status": "ok"})
        elif self.path == "/v1/config":
            self._send_json(200, self.server.config_doc())
        else:
            self._send_error_json(404, f"unknown path {self.path!r}")

    def do_POST(self) -> None:
        if self.path != "/v1/predict":
            self._send_error_json(404, f"unknown path {self.path!r}")
            return
        if not self.server.slots.acquire(blocking=False):
            self._send_error_json(
                503, "server is at its in-flight request limit"
            )
            return
        try:
            request_id = None
            try:
                doc = self._read_request_doc()
                request_id = self._request_id(doc)
                response = self._predict(doc, request_id)
            except RequestRejected as exc:
                self._send_error_json(
                    exc.status, str(exc), request_id=request_id or ""
                )
                return
            except Exception:
                incident = uuid.uuid4().hex[:12]
                log.exception("prediction failed (incident %s)", incident)
                self._send_error_json(
                    500, "internal error", incident=incident, request_id=request_id or ""
                )
                return
            self._send_json(200, response)
        finally:
            self.server.slots.release()

    # ------------------------------------------------------------------
    # request handling

    def _read_request_doc(self) -> dict:
        length_header = self.headers.get("Content-Length")
        if length_header is None:
            raise RequestRejected(411, "Content-Length is required")
        try:
            length = int(length_header)
        except ValueError:
            raise RequestRejected(400, f"bad Content-Length {length_header!r}")
        if length > self.server.max_body_bytes:
            raise RequestRejected(
                413,
                f"body of {length} bytes exceeds the "
                f"{self.server.max_body_bytes} byte limit",
            )
        body = self.rfile.read(length)
        try:
            doc = json.loads(body)
        except json.JSONDecodeError as exc:
            raise RequestRejected(400, f"body is not valid JSON: {exc.msg}")
        if not isinstance(doc, dict):
            raise RequestRejected(400, "body must be a JSON object")
        return doc

    @staticmethod
    def _request_id(doc: dict) -> str:
        request_id = doc.get("request_id")
        if request_id is None:
            return uuid.uuid4().hex[:12]
        if not isinstance(request_id, str):
            raise RequestRejected(400, "request_id must be a string")
        return request_id

    def _predict(self, doc: dict, request_id: str) -> dict:
        started = time.monotonic()
        if "grid" not in doc:
            raise RequestRejected(400, "missing 'grid'")
        try:
            sheets = sheets_from_doc(doc["grid"])
        except GridFormatError as exc:
            raise RequestRejected(400, f"bad grid: {exc}")
        if not sheets:
            raise RequestRejected(400, "grid has no sheets")

        sheet_name = doc.get("sheet")
        if sheet_name is None:
            sheet = sheets[0]
        else:
            matches = [s for s in sheets if s.name == sheet_name]
            if not matches:
                raise RequestRejected(400, f"no sheet named {sheet_name!r}")
            sheet = matches[0]

        raw_target = doc.get("target")
        if not isinstance(raw_target, str) or not raw_target:
            raise RequestRejected(400, f"bad target {raw_target!r}: must be an A1 cell")
        try:
            ref = parse_a1(raw_target)
        except A1ParseError as exc:
            raise RequestRejected(400, f"bad target {raw_target!r}: {exc}")
        if ref.end is not None:
            raise RequestRejected(400, f"bad target {raw_target!r}: must be a single cell")
        target = ref.start

        top_k = doc.get("top_k", 5)
        if not isinstance(top_k, int) or isinstance(top_k, bool):
            raise RequestRejected(400, "top_k must be an integer")
        try:
            suggestions, diagnostics = self.server.predictor.predict(
                sheet, target, top_k=top_k
            )
        except ValueError as exc:
            raise RequestRejected(400, str(exc))

        for suggestion in suggestions:
            check_roundtrip(suggestion, target)
        latency_ms = (time.monotonic() - started) * 1000.0
        return {
            "request_id": request_id,
            "target": raw_target,
            "sheet": sheet.name,
            "suggestions": [suggestion_to_doc(s) for s in suggestions],
            "diagnostics": {
                "dropped_unrenderable": diagnostics.get("dropped_unrenderable", 0),
                "beam_steps": diagnostics.get("steps", 0),
                "latency_ms": round(latency_ms, 3),
            },
        }


def run_server(server: SuggestService) -> None:
    try:
        server.serve_forever()
    finally:
        server.server_close()
