"""Horizontal federated k-Means (Lloyd iterations on aggregated cluster sums)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import FitError
from ..federation import ProtocolContext


@dataclass
class KMeansState:
    centroids: np.ndarray
    sums: np.ndarray
    counts: np.ndarray
    inertia: float
    iter: int
    converged: bool
    trace: list[np.ndarray] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "version": 1,
            "centroids": self.centroids.tolist(),
            "counts": self.counts.tolist(),
            "inertia": self.inertia,
            "iter": self.iter,
            "converged": self.converged,
        }


def _as_2d(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    return a.reshape(-1, 1) if a.ndim == 1 else a


def assign(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per row (ties to the lowest index) and squared distances."""
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1) if len(centroids) else np.zeros(len(X), dtype=np.int64)
    return labels, d2[np.arange(len(X)), labels]


def local_stats(X: np.ndarray, centroids: np.ndarray) -> dict:
    k, d = centroids.shape
    labels, dist = assign(X, centroids)
    sums = np.zeros((k, d))
    np.add.at(sums, labels, X)
    return {"sums": sums, "counts": np.bincount(labels, minlength=k).astype(np.int64), "inertia": float(dist.sum())}


def h_fed_kmeans_batch(
    ctx: ProtocolContext,
    data: Sequence[Sequence[np.ndarray]],
    inits: Sequence[np.ndarray],
    max_iter: int = 300,
    tol: float = 1e-9,
    statistics: Sequence[str] = ("mean",),
) -> list[KMeansState]:
    """Run several independent k-Means problems in lockstep.

    ``data[c][p]`` is client ``c``'s matrix for problem ``p``.  Every iteration
    is one round: the server broadcasts the centroids of all still-active
    problems and clients answer with per-cluster sums and counts.
    """
    n_prob = len(inits)
    cents = [_as_2d(c) for c in inits]
    states: list[KMeansState | None] = [None] * n_prob
    traces: list[list[np.ndarray]] = [[c.copy()] for c in cents]
    active = list(range(n_prob))
    it = 0
    while active and it < max_iter:
        it += 1
        ctx.broadcast({str(p): cents[p] for p in active}, "centroids", statistics)

        def reply(c: int) -> dict:
            got = ctx.received[c]
            return {p: local_stats(_as_2d(data[c][int(p)]), got[p]) for p in got}

        parts = ctx.gather(reply, "cluster_stats", reply=True)
        still = []
        for p in active:
            key = str(p)
            sums = sum(part[key]["sums"] for part in parts)
            counts = sum(part[key]["counts"] for part in parts)
            inertia = float(sum(part[key]["inertia"] for part in parts))
            if it == 1 and counts.sum() < len(cents[p]):
                raise FitError(f"k={len(cents[p])} exceeds the {counts.sum()} available samples")
            nonempty = counts > 0
            new = cents[p].copy()
            new[nonempty] = sums[nonempty] / counts[nonempty, None]
            shift = float(np.max(np.abs(new - cents[p]))) if new.size else 0.0
            cents[p] = new
            traces[p].append(new.copy())
            done = shift < tol
            states[p] = KMeansState(new, sums, counts, inertia, it, done, traces[p])
            if not done:
                still.append(p)
        active = still
    return states  # type: ignore[return-value]


def h_fed_kmeans(
    ctx: ProtocolContext,
    data: Sequence[np.ndarray],
    k: int,
    init_centroids: np.ndarray,
    max_iter: int = 300,
    tol: float = 1e-9,
    statistics: Sequence[str] = ("mean",),
) -> KMeansState:
    init = _as_2d(init_centroids)
    if k < 1 or init.shape[0] != k:
        raise FitError(f"need k >= 1 initial centroids, got {init.shape[0]} for k={k}")
    return h_fed_kmeans_batch(ctx, [[X] for X in data], [init], max_iter, tol, statistics)[0]
