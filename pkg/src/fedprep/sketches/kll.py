"""KLL quantile sketch with lazy compaction.

Level ``h`` holds items of weight ``2**h``.  Level capacities shrink
geometrically (factor 2/3) from the top level, which holds ``k`` items, down
to a floor of 8.  When the retained total exceeds the sum of capacities, the
lowest level at or over its capacity is sorted and every other item (random
parity) is promoted one level up.  The exact stream min and max are tracked so
that ``q = 0`` and ``q = 1`` are answered exactly.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from ..errors import EmptySketch, InvalidQuantile, InvalidValue, MergeError
from . import codec

DEFAULT_K = 200
MIN_LEVEL_CAPACITY = 8
_DECAY = 2.0 / 3.0
_INGEST_CHUNK = 256


def _capacity(k: int, depth: int) -> int:
    """Capacity of a level ``depth`` steps below the top level."""
    return max(MIN_LEVEL_CAPACITY, int(math.ceil(k * _DECAY**depth)))


class KLLSketch:
    def __init__(self, k: int = DEFAULT_K, seed: int = 0) -> None:
        if k < MIN_LEVEL_CAPACITY:
            raise ValueError(f"k must be >= {MIN_LEVEL_CAPACITY}")
        self.k = int(k)
        self.seed = int(seed)
        self.n = 0
        self.min = math.nan
        self.max = math.nan
        self.levels: list[np.ndarray] = [np.empty(0)]
        self._rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0]))

    # -- ingestion ---------------------------------------------------------

    def update(self, x: float) -> "KLLSketch":
        return self.update_many(np.array([x], dtype=np.float64))

    def update_many(self, xs: Iterable[float] | np.ndarray) -> "KLLSketch":
        x = np.asarray(xs, dtype=np.float64).ravel()
        if x.size == 0:
            return self
        if not np.all(np.isfinite(x)):
            raise InvalidValue("KLL sketch accepts finite values only")
        lo, hi = float(x.min()), float(x.max())
        self.min = lo if self.n == 0 else min(self.min, lo)
        self.max = hi if self.n == 0 else max(self.max, hi)
        for start in range(0, x.size, _INGEST_CHUNK):
            chunk = x[start : start + _INGEST_CHUNK]
            self.levels[0] = np.concatenate([self.levels[0], chunk])
            self.n += chunk.size
            self._compress()
        return self

    def _capacities(self) -> list[int]:
        depth = len(self.levels)
        return [_capacity(self.k, depth - 1 - h) for h in range(depth)]

    def _compress(self) -> None:
        while True:
            caps = self._capacities()
            if sum(len(lv) for lv in self.levels) <= sum(caps):
                return
            # over budget implies at least one level is at or over capacity
            h = next(h for h, lv in enumerate(self.levels) if len(lv) >= caps[h])
            self._compact(h)

    def _compact(self, h: int) -> None:
        if h + 1 == len(self.levels):
            self.levels.append(np.empty(0))
        items = np.sort(self.levels[h], kind="stable")
        keep = items[:1] if len(items) % 2 else items[:0]
        pairs = items[len(keep) :]
        offset = int(self._rng.integers(2))
        self.levels[h + 1] = np.concatenate([self.levels[h + 1], pairs[offset::2]])
        self.levels[h] = keep.copy()

    # -- merging -----------------------------------------------------------

    def merge(self, other: "KLLSketch") -> "KLLSketch":
        codec.check_same_type(self, other)
        if other.k != self.k:
            raise MergeError(f"KLL k mismatch: {self.k} vs {other.k}")
        out = KLLSketch(self.k, self.seed)
        out._rng = np.random.default_rng(np.random.SeedSequence([self.seed, other.seed, self.n, other.n, 1]))
        depth = max(len(self.levels), len(other.levels))
        out.levels = [
            np.concatenate([
                self.levels[h] if h < len(self.levels) else np.empty(0),
                other.levels[h] if h < len(other.levels) else np.empty(0),
            ])
            for h in range(depth)
        ]
        out.n = self.n + other.n
        if self.n == 0:
            out.min, out.max = other.min, other.max
        elif other.n == 0:
            out.min, out.max = self.min, self.max
        else:
            out.min, out.max = min(self.min, other.min), max(self.max, other.max)
        out._compress()
        return out

    # -- queries -----------------------------------------------------------

    @property
    def num_retained(self) -> int:
        return sum(len(lv) for lv in self.levels)

    def _sorted_view(self) -> tuple[np.ndarray, np.ndarray]:
        vals = np.concatenate(self.levels)
        weights = np.concatenate([np.full(len(lv), 2.0**h) for h, lv in enumerate(self.levels)])
        order = np.argsort(vals, kind="stable")
        return vals[order], np.cumsum(weights[order])

    def quantiles(self, qs: Iterable[float]) -> np.ndarray:
        q = np.asarray(list(qs) if not isinstance(qs, np.ndarray) else qs, dtype=np.float64)
        if self.n == 0:
            raise EmptySketch("quantile query on an empty sketch")
        if np.any(~((q >= 0.0) & (q <= 1.0))):
            raise InvalidQuantile(f"quantile fractions must lie in [0, 1], got {q}")
        vals, cum = self._sorted_view()
        idx = np.searchsorted(cum, q * self.n, side="left")
        out = vals[np.minimum(idx, len(vals) - 1)]
        out = np.where(q == 0.0, self.min, out)
        return np.where(q == 1.0, self.max, out)

    def quantile(self, q: float) -> float:
        return float(self.quantiles([q])[0])

    def rank(self, x: float) -> float:
        """Estimated number of stream items ``<= x``."""
        if self.n == 0:
            return 0.0
        vals, cum = self._sorted_view()
        i = np.searchsorted(vals, x, side="right")
        return float(cum[i - 1]) if i else 0.0

    # -- wire format -------------------------------------------------------

    def to_bytes(self) -> bytes:
        w = codec.Writer(codec.TAG_KLL).u64(self.k).u64(self.n).u64(self.seed).f64(self.min).f64(self.max)
        w.u64(len(self.levels))
        for lv in self.levels:
            w.u64(len(lv)).f64s(lv)
        return w.bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "KLLSketch":
        r = codec.Reader(data, codec.TAG_KLL)
        out = cls(r.u64())
        out.n = r.u64()
        out.seed = r.u64()
        out.min, out.max = r.f64(), r.f64()
        out.levels = [r.f64s(r.u64()) for _ in range(r.u64())]
        r.done()
        out._rng = np.random.default_rng(np.random.SeedSequence([out.seed, out.n, 2]))
        return out

    def __repr__(self) -> str:
        return f"KLLSketch(k={self.k}, n={self.n}, retained={self.num_retained})"


def kll_quantile(sketch: KLLSketch, q: float) -> float:
    return sketch.quantile(q)
