from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidValue
from . import codec


@dataclass(frozen=True)
class MomentsSummary:
    """Count, sum, sum of squares, min and max of the present cells of a column.

    ``min``/``max`` are NaN while ``n == 0``.
    """

    n: int = 0
    sum: float = 0.0
    sum_sq: float = 0.0
    min: float = math.nan
    max: float = math.nan

    @classmethod
    def of(cls, values: np.ndarray) -> "MomentsSummary":
        x = np.asarray(values, dtype=np.float64)
        if x.size == 0:
            return cls()
        if not np.all(np.isfinite(x)):
            raise InvalidValue("moments accept finite values only")
        return cls(int(x.size), float(x.sum()), float(np.dot(x, x)), float(x.min()), float(x.max()))

    def update(self, x: float) -> "MomentsSummary":
        x = float(x)
        if not math.isfinite(x):
            raise InvalidValue(f"non-finite value {x!r}")
        if self.n == 0:
            return MomentsSummary(1, x, x * x, x, x)
        return MomentsSummary(self.n + 1, self.sum + x, self.sum_sq + x * x, min(self.min, x), max(self.max, x))

    def merge(self, other: "MomentsSummary") -> "MomentsSummary":
        codec.check_same_type(self, other)
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        return MomentsSummary(
            self.n + other.n,
            self.sum + other.sum,
            self.sum_sq + other.sum_sq,
            min(self.min, other.min),
            max(self.max, other.max),
        )

    @property
    def constant(self) -> bool:
        return self.n > 0 and self.min == self.max

    @property
    def mean(self) -> float:
        if self.constant:
            return self.min
        return self.sum / self.n if self.n else math.nan

    @property
    def variance(self) -> float:
        """Population variance ``S/N - mu**2``, floored at zero.

        A column whose exact min equals its max has variance exactly 0; the
        subtraction alone would leave rounding noise of order ulp(mu**2).
        """
        if not self.n:
            return math.nan
        if self.constant:
            return 0.0
        mu = self.sum / self.n
        return max(self.sum_sq / self.n - mu * mu, 0.0)

    @property
    def max_abs(self) -> float:
        return max(abs(self.min), abs(self.max)) if self.n else math.nan

    def to_bytes(self) -> bytes:
        return codec.Writer(codec.TAG_MOMENTS).u64(self.n).f64(self.sum).f64(self.sum_sq).f64(self.min).f64(self.max).bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "MomentsSummary":
        r = codec.Reader(data, codec.TAG_MOMENTS)
        out = cls(r.u64(), r.f64(), r.f64(), r.f64(), r.f64())
        r.done()
        return out
