"""Clamped B-spline bases via the Cox–de Boor recursion."""

from __future__ import annotations

import numpy as np


def clamped_knots(breaks: np.ndarray, degree: int) -> np.ndarray:
    """Full knot vector: interior breakpoints with boundary multiplicity ``degree + 1``."""
    b = np.asarray(breaks, dtype=np.float64)
    return np.concatenate([np.repeat(b[0], degree), b, np.repeat(b[-1], degree)])


def basis(x: np.ndarray, knots: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate all ``len(knots) - degree - 1`` basis functions at ``x``.

    Values outside the knot span are clamped to the boundary, and the right
    end point belongs to the last non-empty interval so the bases always sum
    to one.
    """
    t = np.asarray(knots, dtype=np.float64)
    x = np.clip(np.asarray(x, dtype=np.float64), t[0], t[-1])
    n_basis = len(t) - degree - 1
    # degree 0: indicator of [t_i, t_{i+1}), closed on the right for the last real span
    last = np.flatnonzero(t[:-1] < t[1:]).max()
    B = np.zeros((len(x), len(t) - 1))
    for i in range(len(t) - 1):
        if t[i] < t[i + 1]:
            inside = (x >= t[i]) & (x < t[i + 1])
            if i == last:
                inside |= x == t[i + 1]
            B[:, i] = inside
    for d in range(1, degree + 1):
        nxt = np.zeros((len(x), len(t) - 1 - d))
        for i in range(len(t) - 1 - d):
            left = t[i + d] - t[i]
            right = t[i + d + 1] - t[i + 1]
            if left > 0:
                nxt[:, i] += (x - t[i]) / left * B[:, i]
            if right > 0:
                nxt[:, i] += (t[i + d + 1] - x) / right * B[:, i + 1]
        B = nxt
    return B[:, :n_basis]
