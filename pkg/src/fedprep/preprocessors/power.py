"""Box–Cox and Yeo–Johnson transforms, their profile log-likelihood and the λ search."""

from __future__ import annotations

import math

import numpy as np

RANGES = {"yeo-johnson": (-4.0, 4.0), "box-cox": (-2.0, 2.0)}
_EPS = np.spacing(1.0)
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def yeo_johnson(x: np.ndarray, lam: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    if abs(lam) < _EPS:
        out[pos] = np.log1p(x[pos])
    else:
        out[pos] = (np.power(x[pos] + 1.0, lam) - 1.0) / lam
    if abs(lam - 2.0) > _EPS:
        out[~pos] = -(np.power(-x[~pos] + 1.0, 2.0 - lam) - 1.0) / (2.0 - lam)
    else:
        out[~pos] = -np.log1p(-x[~pos])
    return out


def box_cox(x: np.ndarray, lam: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if abs(lam) < _EPS:
        return np.log(x)
    return (np.power(x, lam) - 1.0) / lam


def apply(method: str, x: np.ndarray, lam: float) -> np.ndarray:
    return yeo_johnson(x, lam) if method == "yeo-johnson" else box_cox(x, lam)


def jacobian_terms(method: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.log1p(np.abs(x)) if method == "yeo-johnson" else np.log(x)


def loglik(n: float, variance: float, jacobian_sum: float, lam: float) -> float:
    """Profile log-likelihood from the aggregated variance and Jacobian sum."""
    if n == 0:
        return 0.0
    if not (variance > 0 and math.isfinite(variance)):
        return -math.inf
    return -0.5 * n * math.log(variance) + (lam - 1.0) * jacobian_sum


class GoldenSection:
    """Maximizer driven one evaluation batch at a time.

    The first batch asks for both interior points, each later batch for one.
    After the last batch, :attr:`best` is the midpoint of the final bracket.
    """

    def __init__(self, lo: float, hi: float) -> None:
        self.a, self.b = lo, hi
        self.c = hi - INV_PHI * (hi - lo)
        self.d = lo + INV_PHI * (hi - lo)
        self.fc = self.fd = None

    def pending(self) -> list[float]:
        if self.fc is None and self.fd is None:
            return [self.c, self.d]
        return [self.c] if self.fc is None else [self.d]

    def tell(self, values: list[float]) -> None:
        if self.fc is None and self.fd is None:
            self.fc, self.fd = values
        elif self.fc is None:
            self.fc = values[0]
        else:
            self.fd = values[0]
        self._shrink()

    def _shrink(self) -> None:
        if self.fc > self.fd:
            self.b, self.d, self.fd = self.d, self.c, self.fc
            self.c = self.b - INV_PHI * (self.b - self.a)
            self.fc = None
        else:
            self.a, self.c, self.fc = self.c, self.d, self.fd
            self.d = self.a + INV_PHI * (self.b - self.a)
            self.fd = None

    @property
    def best(self) -> float:
        return 0.5 * (self.a + self.b)
