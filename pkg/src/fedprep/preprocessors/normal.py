"""Inverse standard normal CDF.

Acklam's rational approximation (relative error < 1.15e-9) followed by one
Halley refinement step, which brings the absolute error near machine precision.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erfc

CLIP = 1e-12

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00, 3.754408661907416e00)
_LOW = 0.02425


def _poly(coeffs, x):
    out = np.zeros_like(x)
    for c in coeffs:
        out = out * x + c
    return out


def ndtri(p) -> np.ndarray:
    """Φ⁻¹(p) with p clipped to [1e-12, 1 − 1e-12]."""
    p = np.clip(np.asarray(p, dtype=np.float64), CLIP, 1.0 - CLIP)
    upper = p > 0.5
    # work in the lower half, where 1 - p is exact, then reflect
    pl = np.where(upper, 1.0 - p, p)
    x = np.empty_like(pl)
    lo = pl < _LOW
    q = np.sqrt(-2.0 * np.log(pl[lo]))
    x[lo] = _poly(_C, q) / (_poly(_D, q) * q + 1.0)
    q = pl[~lo] - 0.5
    r = q * q
    x[~lo] = _poly(_A, r) * q / (_poly(_B, r) * r + 1.0)

    e = 0.5 * erfc(-x / np.sqrt(2.0)) - pl
    u = e * np.sqrt(2.0 * np.pi) * np.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    return np.where(upper, -x, x)
