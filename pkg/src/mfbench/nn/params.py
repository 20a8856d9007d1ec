"""Named parameter storage and the on-disk checkpoint format.

Checkpoint layout (a directory)::

    index.json   {"format": "mfbench-params/1", "byte_order": "little",
                  "dtype": "float64", "params": [{"name", "shape",
                  "offset", "count"}, ...], "meta": {...}}
    params.bin   all parameters concatenated in index order, each stored
                 row-major as little-endian IEEE-754 float64; ``offset`` and
                 ``count`` are in elements, not bytes.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from pathlib import Path

import numpy as np

from mfbench.errors import DimensionError, StateError
from mfbench.nn.tensor import Tensor

CHECKPOINT_FORMAT = "mfbench-params/1"


class ParamStore:
    """Ordered named parameters plus AdamW moments and a step counter."""

    def __init__(self, seed: int = 0):
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0
        self.rng = np.random.default_rng(seed)

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self.params[name]
        except KeyError:
            raise KeyError(f"unknown parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self) -> int:
        return len(self.params)

    def names(self) -> list[str]:
        return list(self.params)

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise StateError(f"parameter {name!r} already exists")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def uniform(self, name: str, shape: tuple[int, ...], fan_in: int) -> Tensor:
        bound = 1.0 / np.sqrt(fan_in)
        return self.add(name, self.rng.uniform(-bound, bound, size=shape))

    def zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self.add(name, np.zeros(shape))

    def ones(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self.add(name, np.ones(shape))

    def set(self, name: str, value) -> None:
        value = np.asarray(value, dtype=np.float64)
        t = self[name]
        if value.shape != t.shape:
            raise DimensionError(f"{name}: shape {value.shape} != {t.shape}")
        t.data[...] = value

    def subset(self, prefix: str, seed: int = 0) -> ParamStore:
        """A store sharing the ``prefix*`` tensors, with fresh optimiser moments."""
        sub = ParamStore(seed)
        for name, t in self.params.items():
            if name.startswith(prefix):
                sub.params[name] = t
                sub.m[name] = np.zeros_like(t.data)
                sub.v[name] = np.zeros_like(t.data)
        return sub

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad[...] = 0.0

    def grads(self) -> dict[str, np.ndarray]:
        return {k: t.grad.copy() for k, t in self.params.items()}

    def count(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for name, t in self.params.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def copy(self) -> ParamStore:
        other = ParamStore()
        for name, t in self.params.items():
            other.add(name, t.data.copy())
        return other


def save_params(store: ParamStore, path: str | Path, meta: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries, offset = [], 0
    with open(path / "params.bin", "wb") as fh:
        for name, t in store:
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
            entries.append({"name": name, "shape": list(t.shape), "offset": offset,
                            "count": int(t.data.size)})
            offset += t.data.size
    index = {"format": CHECKPOINT_FORMAT, "byte_order": "little", "dtype": "float64",
             "params": entries, "meta": meta or {}}
    (path / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True))
    return path


def load_params(path: str | Path) -> tuple[ParamStore, dict]:
    path = Path(path)
    index_file = path / "index.json"
    if not index_file.exists():
        raise FileNotFoundError(f"no checkpoint index at {index_file}")
    index = json.loads(index_file.read_text())
    if index.get("format") != CHECKPOINT_FORMAT:
        raise StateError(f"unsupported checkpoint format {index.get('format')!r}")
    blob = np.frombuffer((path / "params.bin").read_bytes(), dtype="<f8")
    store = ParamStore()
    for e in index["params"]:
        chunk = blob[e["offset"]:e["offset"] + e["count"]]
        if chunk.size != e["count"]:
            raise StateError(f"truncated parameter blob at {e['name']}")
        store.add(e["name"], chunk.astype(np.float64).reshape(e["shape"]))
    return store, index.get("meta", {})
