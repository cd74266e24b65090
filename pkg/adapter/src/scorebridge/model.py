"""Loading and guarding the user-supplied scoring script.

A model script is any Python file exposing::

    def score(image_bytes: bytes) -> float: ...

Optionally it may declare ``REENTRANT = False``, in which case the service
serializes calls behind a lock (for models that keep mutable state or wrap
non-thread-safe runtimes). Anything heavier — frameworks, checkpoints,
preprocessing — lives entirely inside the script.
"""

from __future__ import annotations

import importlib.util
import threading
from pathlib import Path


class ModelEntry:
    """A callable scoring entry, optionally serialized behind a lock."""

    def __init__(self, fn, reentrant: bool, name: str):
        self._fn = fn
        self.reentrant = reentrant
        self.name = name
        self._lock = None if reentrant else threading.Lock()

    def score(self, image_bytes: bytes) -> float:
        if self._lock is None:
            return self._fn(image_bytes)
        with self._lock:
            return self._fn(image_bytes)


def load_model(path) -> ModelEntry:
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"model script not found: {path}")
    spec = importlib.util.spec_from_file_location(f"scorebridge_model_{path.stem}", path)
    if spec is None or spec.loader is None:
        raise ValueError(f"cannot import model script: {path}")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    fn = getattr(module, "score", None)
    if not callable(fn):
        raise ValueError(f"model script {path} must define a callable score(image_bytes)")
    reentrant = bool(getattr(module, "REENTRANT", True))
    return ModelEntry(fn, reentrant, path.stem)
