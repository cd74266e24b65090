"""HTTP scoring client plus an in-process stub server for tests and demos.

Wire format (both directions implemented here and by any conforming scoring
service):

* ``POST /score`` — request body is a PNG image (``Content-Type:
  image/png``); success is ``200`` with JSON ``{"fake_probability": p}``,
  ``p`` in [0, 1]. A malformed image is ``400``; a missing/wrong bearer
  token is ``401``; an oversized body is ``413``; an internal model failure
  is an opaque ``500``.
* ``POST /batch_score`` — ``multipart/form-data`` with one PNG per part;
  success is ``200`` with a JSON array of probabilities in part order.
* ``429`` means back off and retry; the client retries it like a transport
  failure. Any other non-200 status is a protocol error (no retry).
"""

from __future__ import annotations

import json
import threading
import time
from email.parser import BytesParser
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import requests

from .imageops import decode_png, encode_png
from .oracle import (
    DetectorScore,
    OracleProtocolError,
    OracleTransportError,
    QueryLedger,
    score,
)


class RemoteOracle:
    """Client for a remote scoring endpoint.

    Transport failures and 429 responses are retried up to `retries` times
    with a short linear backoff; anything else non-200 raises
    OracleProtocolError immediately. The bearer `token`, when given, is
    passed through on every request.
    """

    def __init__(
        self,
        url: str,
        retries: int = 3,
        timeout: float = 10.0,
        token: str | None = None,
        retry_wait: float = 0.05,
    ):
        if retries < 1:
            raise ValueError("retries must be at least 1")
        self.url = url.rstrip("/")
        self.retries = retries
        self.timeout = timeout
        self.token = token
        self.retry_wait = retry_wait

    @property
    def identifier(self) -> str:
        """Canonical id; `oracle_from_id` parses it back (token not included)."""
        return f"remote:{self.url}"

    def _headers(self, content_type: str) -> dict:
        headers = {"Content-Type": content_type}
        if self.token is not None:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def _post(self, path: str, body: bytes, content_type: str, files=None):
        last = None
        for attempt in range(1, self.retries + 1):
            try:
                if files is not None:
                    resp = requests.post(
                        self.url + path,
                        files=files,
                        headers={k: v for k, v in self._headers("").items() if k != "Content-Type"},
                        timeout=self.timeout,
                    )
                else:
                    resp = requests.post(
                        self.url + path,
                        data=body,
                        headers=self._headers(content_type),
                        timeout=self.timeout,
                    )
            except requests.RequestException as exc:
                last = f"attempt {attempt}: {exc}"
                if attempt < self.retries:
                    time.sleep(self.retry_wait * attempt)
                continue
            if resp.status_code == 429:
                last = f"attempt {attempt}: 429 rate limited"
                if attempt < self.retries:
                    time.sleep(self.retry_wait * attempt)
                continue
            if resp.status_code != 200:
                raise OracleProtocolError(
                    f"scoring endpoint answered {resp.status_code}: {resp.text[:200]}"
                )
            return resp
        raise OracleTransportError(f"endpoint unreachable after {self.retries} tries ({last})")

    def fake_probability(self, img) -> float:
        resp = self._post("/score", encode_png(img), "image/png")
        try:
            payload = resp.json()
            return float(payload["fake_probability"])
        except (ValueError, TypeError, KeyError) as exc:
            raise OracleProtocolError(f"malformed scoring response: {resp.text[:200]}") from exc

    def batch_fake_probability(self, imgs) -> list[float]:
        files = [
            ("images", (f"img{i}.png", encode_png(im), "image/png"))
            for i, im in enumerate(imgs)
        ]
        resp = self._post("/batch_score", b"", "", files=files)
        try:
            payload = resp.json()
            out = [float(v) for v in payload]
        except (ValueError, TypeError) as exc:
            raise OracleProtocolError(f"malformed batch response: {resp.text[:200]}") from exc
        if len(out) != len(files):
            raise OracleProtocolError(
                f"batch response has {len(out)} entries for {len(files)} images"
            )
        return out


def remote_score(oracle: RemoteOracle, img, ledger: QueryLedger) -> DetectorScore:
    """Score one image remotely, charging one ledger unit on success only."""
    return score(oracle, img, ledger)


def remote_score_batch(oracle: RemoteOracle, imgs, ledger: QueryLedger) -> list[DetectorScore]:
    """Score a batch, charging one ledger unit per image; a failed call
    refunds the whole reservation."""
    imgs = list(imgs)
    if not imgs:
        return []
    ledger.reserve(len(imgs))
    try:
        probs = oracle.batch_fake_probability(imgs)
        try:
            return [DetectorScore(float(p)) for p in probs]
        except (TypeError, ValueError) as exc:
            raise OracleProtocolError(f"batch contained invalid probability: {exc}") from exc
    except BaseException:
        ledger.refund(len(imgs))
        raise


# --- stub server -------------------------------------------------------------


class StubStatus(Exception):
    """Raised by a scorer to make the stub answer a bare HTTP status."""

    def __init__(self, code: int):
        super().__init__(f"stub status {code}")
        self.code = code


class ScriptedScorer:
    """Pops one action per call: a float answers normally, ``("status", c)``
    answers HTTP c, ``("sleep", s, v)`` sleeps s seconds then answers v."""

    def __init__(self, actions):
        self._actions = list(actions)
        self._lock = threading.Lock()

    def __call__(self, img) -> float:
        with self._lock:
            if not self._actions:
                raise StubStatus(500)
            action = self._actions.pop(0)
        if isinstance(action, tuple):
            if action[0] == "status":
                raise StubStatus(int(action[1]))
            if action[0] == "sleep":
                time.sleep(float(action[1]))
                return float(action[2])
            raise ValueError(f"unknown scripted action {action!r}")
        return float(action)


def _parse_multipart(content_type: str, body: bytes) -> list[bytes]:
    msg = BytesParser().parsebytes(
        b"Content-Type: " + content_type.encode("latin-1") + b"\r\n\r\n" + body
    )
    if not msg.is_multipart():
        raise ValueError("expected multipart/form-data")
    return [part.get_payload(decode=True) for part in msg.get_payload()]


class _StubHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):  # keep test output quiet
        pass

    def _reply(self, code: int, payload) -> None:
        body = json.dumps(payload).encode()
        try:
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        except (BrokenPipeError, ConnectionResetError):
            pass  # client gave up (e.g. timed out); nothing to do

    def do_POST(self):
        server = self.server
        token = server.stub_token
        if token is not None and self.headers.get("Authorization") != f"Bearer {token}":
            self._reply(401, {"error": "unauthorized"})
            return
        length = int(self.headers.get("Content-Length", 0))
        if length > server.stub_max_bytes:
            self._reply(413, {"error": "request too large"})
            return
        body = self.rfile.read(length)
        if self.path == "/score":
            try:
                img = decode_png(body)
            except Exception:
                self._reply(400, {"error": "unreadable image"})
                return
            try:
                value = server.stub_scorer(img)
            except StubStatus as stop:
                self._reply(stop.code, {"error": f"status {stop.code}"})
                return
            except Exception:
                self._reply(500, {"error": "model failure"})
                return
            self._reply(200, {"fake_probability": value})
        elif self.path == "/batch_score":
            try:
                parts = _parse_multipart(self.headers.get("Content-Type", ""), body)
                imgs = [decode_png(p) for p in parts]
            except Exception:
                self._reply(400, {"error": "unreadable batch"})
                return
            try:
                values = [server.stub_scorer(im) for im in imgs]
            except StubStatus as stop:
                self._reply(stop.code, {"error": f"status {stop.code}"})
                return
            except Exception:
                self._reply(500, {"error": "model failure"})
                return
            self._reply(200, values)
        else:
            self._reply(404, {"error": "unknown endpoint"})


class StubScoreServer:
    """In-process scoring service implementing the wire format above.

    `scorer` is any callable taking a float image array and returning the
    probability to report; it is mirrored verbatim (no clamping), which lets
    tests exercise client-side validation. Use as a context manager:

        with StubScoreServer(lambda img: 0.4) as stub:
            RemoteOracle(stub.url).fake_probability(img)
    """

    def __init__(self, scorer, token: str | None = None, max_request_bytes: int = 16 << 20):
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        self._server.stub_scorer = scorer
        self._server.stub_token = token
        self._server.stub_max_bytes = max_request_bytes
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "StubScoreServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "StubScoreServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
