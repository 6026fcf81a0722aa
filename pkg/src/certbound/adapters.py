"""Black-box classifier adapters.

The certifier only ever sees a ModelHandle: something with a digest, a label
count, an input shape, and a classify function returning softmax-normalized
confidence vectors. Three transports are provided — an in-process
feed-forward evaluator for fixtures, a newline-delimited-JSON subprocess
child, and an HTTP service. Adapters that are not concurrency safe are
driven through a single dispatcher; either way classify is a pure function
of (digest, input), so downstream statistics never depend on scheduling.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import requests

from .core import ConfidenceVector
from .errors import AdapterError, ProtocolViolationError, ShapeMismatchError

PROTOCOL = "certbound/1"
DEFAULT_TIMEOUT_SECS = 30.0


class AdapterKind(str, enum.Enum):
    BUILTIN = "Builtin"
    SUBPROCESS = "Subprocess"
    HTTP = "Http"


class Activation(str, enum.Enum):
    RELU = "relu"
    IDENTITY = "id"


@dataclass(frozen=True)
class BuiltinNet:
    """Dense feed-forward net with a terminal softmax; the fixture stand-in model."""

    layers: tuple[tuple[np.ndarray, np.ndarray, Activation], ...]
    label_count: int

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=np.float64)
        for w, b, act in self.layers:
            h = h @ w.T + b
            if act is Activation.RELU:
                h = np.maximum(h, 0.0)
        h = h - h.max(axis=1, keepdims=True)
        e = np.exp(h)
        return e / e.sum(axis=1, keepdims=True)


class _BuiltinAdapter:
    concurrent = True

    def __init__(self, net: BuiltinNet):
        self.net = net

    def predict_batch(self, inputs: np.ndarray) -> np.ndarray:
        return self.net.forward_batch(inputs)

    def close(self):
        pass


class _SubprocessAdapter:
    """Speaks the newline-delimited JSON wire protocol over a child's stdio.

    A reader thread feeds stdout lines into a queue; responses may arrive out
    of order and are parked by id until their requester claims them.
    """

    def __init__(self, argv: Sequence[str], timeout: float):
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                list(argv), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1,
            )
        except OSError as exc:
            raise AdapterError(f"cannot launch model subprocess {argv!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._parked: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._seq = 0
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self.handshake = self._read_message()
        self.concurrent = bool(self.handshake.get("concurrent", False))

    def _pump(self):
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        except ValueError:
            pass  # stream closed during shutdown
        self._lines.put(None)

    def _read_message(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise AdapterError(f"model subprocess produced no output within {self.timeout}s") from None
        if line is None:
            raise AdapterError(
                f"model subprocess exited (code {self.proc.poll()}) before answering"
            )
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolViolationError(f"child emitted invalid JSON: {line!r}") from exc
        if not isinstance(msg, dict):
            raise ProtocolViolationError(f"child emitted a non-object message: {line!r}")
        return msg

    def _request(self, flat: Sequence[float]) -> list:
        with self._lock:
            self._seq += 1
            rid = f"r{self._seq}"
            payload = json.dumps({"id": rid, "input": list(map(float, flat))})
            try:
                self.proc.stdin.write(payload + "\n")
                self.proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise AdapterError(f"model subprocess pipe closed: {exc}") from exc
            while rid not in self._parked:
                msg = self._read_message()
                mid = msg.get("id")
                if mid is None:
                    raise ProtocolViolationError(f"response without id: {msg!r}")
                self._parked[str(mid)] = msg
            msg = self._parked.pop(rid)
        if "error" in msg:
            raise AdapterError(f"model subprocess error: {msg['error']}")
        if "scores" not in msg:
            raise ProtocolViolationError(f"response missing scores: {msg!r}")
        return msg["scores"]

    def predict_batch(self, inputs: np.ndarray) -> np.ndarray:
        return np.asarray([self._request(row) for row in inputs], dtype=np.float64)

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
                self.proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self.proc.kill()
                self.proc.wait()


class _HttpAdapter:
    def __init__(self, base_url: str, timeout: float):
        self.base = base_url.rstrip("/")
        self.timeout = timeout
        self.session = requests.Session()
        self._lock = threading.Lock()
        self._seq = 0
        try:
            resp = self.session.get(f"{self.base}/handshake", timeout=timeout)
        except requests.RequestException as exc:
            raise AdapterError(f"handshake request to {self.base} failed: {exc}") from exc
        if resp.status_code != 200:
            raise AdapterError(f"handshake returned HTTP {resp.status_code}")
        self.handshake = resp.json()
        self.concurrent = bool(self.handshake.get("concurrent", False))

    def _request(self, flat: Sequence[float]) -> list:
        with self._lock:
            self._seq += 1
            rid = f"h{self._seq}"
        try:
            resp = self.session.post(
                f"{self.base}/classify",
                json={"id": rid, "input": list(map(float, flat))},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise AdapterError(f"classify request failed: {exc}") from exc
        if resp.status_code != 200:
            raise AdapterError(f"classify returned HTTP {resp.status_code}: {resp.text[:200]}")
        msg = resp.json()
        if "scores" not in msg:
            raise ProtocolViolationError(f"response missing scores: {msg!r}")
        return msg["scores"]

    def predict_batch(self, inputs: np.ndarray) -> np.ndarray:
        return np.asarray([self._request(row) for row in inputs], dtype=np.float64)

    def close(self):
        self.session.close()


@dataclass(frozen=True, eq=False)
class ModelHandle:
    adapter_kind: AdapterKind
    model_digest: str
    label_count: int
    input_shape: tuple[int, ...]
    concurrency_safe: bool
    adapter: object = field(repr=False)

    def __post_init__(self):
        size = 1
        for s in self.input_shape:
            size *= int(s)
        object.__setattr__(self, "input_size", size)

    def close(self):
        self.adapter.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _validate_handshake(msg: dict, transport: str) -> tuple[str, int, tuple[int, ...]]:
    if msg.get("protocol") != PROTOCOL:
        raise ProtocolViolationError(
            f"{transport} handshake protocol {msg.get('protocol')!r}, expected {PROTOCOL!r}"
        )
    for key in ("labels", "shape", "digest"):
        if key not in msg:
            raise ProtocolViolationError(f"{transport} handshake missing {key!r}")
    labels = int(msg["labels"])
    if labels < 2:
        raise ProtocolViolationError("handshake labels must be >= 2")
    shape = tuple(int(s) for s in msg["shape"])
    return str(msg["digest"]), labels, shape


def load_builtin(path) -> ModelHandle:
    """Load the builtin weight JSON and digest the file bytes."""
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise AdapterError(f"cannot parse builtin weights {path}: {exc}") from exc
    if not isinstance(doc, dict) or "layers" not in doc or "labels" not in doc:
        raise AdapterError(f"builtin weights {path} must provide 'layers' and 'labels'")
    labels = int(doc["labels"])
    layers = []
    prev_width = None
    for i, layer in enumerate(doc["layers"]):
        try:
            w = np.asarray(layer["w"], dtype=np.float64)
            b = np.asarray(layer["b"], dtype=np.float64)
            act = Activation(layer["act"])
        except (KeyError, ValueError, TypeError) as exc:
            raise AdapterError(f"layer {i}: malformed entry ({exc})") from exc
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise AdapterError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
        if prev_width is not None and w.shape[1] != prev_width:
            raise AdapterError(
                f"layer {i}: expects input width {w.shape[1]}, previous layer emits {prev_width}"
            )
        prev_width = w.shape[0]
        layers.append((w, b, act))
    if not layers:
        raise AdapterError("builtin net needs at least one layer")
    if prev_width != labels:
        raise AdapterError(f"final layer width {prev_width} != labels {labels}")
    if labels < 2:
        raise AdapterError("builtin net needs labels >= 2")
    net = BuiltinNet(layers=tuple(layers), label_count=labels)
    return ModelHandle(
        adapter_kind=AdapterKind.BUILTIN,
        model_digest=hashlib.sha256(blob).hexdigest(),
        label_count=labels,
        input_shape=(int(layers[0][0].shape[1]),),
        concurrency_safe=True,
        adapter=_BuiltinAdapter(net),
    )


def connect_subprocess(command, timeout: float = DEFAULT_TIMEOUT_SECS) -> ModelHandle:
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    adapter = _SubprocessAdapter(argv, timeout)
    digest, labels, shape = _validate_handshake(adapter.handshake, "subprocess")
    return ModelHandle(
        adapter_kind=AdapterKind.SUBPROCESS,
        model_digest=digest,
        label_count=labels,
        input_shape=shape,
        concurrency_safe=adapter.concurrent,
        adapter=adapter,
    )


def connect_http(url: str, timeout: float = DEFAULT_TIMEOUT_SECS) -> ModelHandle:
    adapter = _HttpAdapter(url, timeout)
    digest, labels, shape = _validate_handshake(adapter.handshake, "http")
    return ModelHandle(
        adapter_kind=AdapterKind.HTTP,
        model_digest=digest,
        label_count=labels,
        input_shape=shape,
        concurrency_safe=adapter.concurrent,
        adapter=adapter,
    )


def open_model(locator: str, timeout: float = DEFAULT_TIMEOUT_SECS) -> ModelHandle:
    """Resolve a model locator: builtin:<path>, cmd:<command line>, or an http(s) URL."""
    if locator.startswith("builtin:"):
        return load_builtin(locator[len("builtin:"):])
    if locator.startswith("cmd:"):
        return connect_subprocess(locator[len("cmd:"):], timeout=timeout)
    if locator.startswith(("http://", "https://")):
        return connect_http(locator, timeout=timeout)
    raise AdapterError(
        f"unrecognized model locator {locator!r}; expected builtin:<path>, cmd:<command>, or an http(s) URL"
    )


def _where(index: Optional[int]) -> str:
    return "" if index is None else f"batch element {index}: "


def predict_scores(handle: ModelHandle, rows: np.ndarray) -> np.ndarray:
    """Score matrix for a stacked (B, input_size) batch, wire contract enforced.

    Vectorized twin of classify_batch for bulk paths (sampling loops, grid
    enumeration); the first offending row is reported on any violation.
    """
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != handle.input_size:
        raise ShapeMismatchError(
            f"batch shape {rows.shape} does not match model input size {handle.input_size}"
        )
    finite = np.isfinite(rows).all(axis=1)
    if not finite.all():
        raise ShapeMismatchError(
            f"{_where(int(np.argmin(finite)))}input contains non-finite components"
        )
    scores = np.asarray(handle.adapter.predict_batch(rows), dtype=np.float64)
    if scores.shape != (rows.shape[0], handle.label_count):
        raise ProtocolViolationError(
            f"adapter returned score shape {scores.shape}, expected "
            f"{(rows.shape[0], handle.label_count)}"
        )
    good = (
        np.isfinite(scores).all(axis=1)
        & (scores >= 0.0).all(axis=1)
        & (scores <= 1.0).all(axis=1)
        & (np.abs(scores.sum(axis=1) - 1.0) <= 1e-6)
    )
    if not good.all():
        i = int(np.argmin(good))
        raise ProtocolViolationError(
            f"{_where(i)}scores must be finite, in [0, 1], and sum to 1 within 1e-6 "
            f"(got sum={math.fsum(map(float, scores[i]))!r})"
        )
    return scores


def classify(handle: ModelHandle, input_tensor) -> ConfidenceVector:
    """Classify one input; deterministic for a fixed model digest."""
    flat = np.asarray(input_tensor, dtype=np.float64).reshape(1, -1)
    scores = predict_scores(handle, flat)[0]
    return ConfidenceVector(scores=tuple(map(float, scores)), label_count=handle.label_count)


def classify_batch(handle: ModelHandle, inputs) -> list[ConfidenceVector]:
    """Classify a sequence of inputs, preserving order; element i equals classify(inputs[i])."""
    rows = [np.asarray(x, dtype=np.float64).reshape(-1) for x in inputs]
    if not rows:
        return []
    for i, row in enumerate(rows):
        if row.size != handle.input_size:
            raise ShapeMismatchError(
                f"{_where(i)}input has {row.size} components, model expects {handle.input_size}"
            )
    scores = predict_scores(handle, np.stack(rows))
    n = handle.label_count
    return [ConfidenceVector(scores=tuple(map(float, s)), label_count=n) for s in scores]
