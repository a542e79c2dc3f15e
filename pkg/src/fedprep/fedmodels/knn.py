"""Federated k-NN regression over horizontal or vertical partitions.

Distances are missing-aware: over the coordinates present in both rows,

    d(x, y) = sqrt( (m_total / m_valid) · Σ_valid (x_j − y_j)² )

and a pair sharing no present coordinate is infinitely far apart.  Squared
terms and valid counts are additive over feature blocks, which is what makes
the vertical protocol exact.  Each squared term is split into an exact
(product, error) pair and accumulated in double-double, so the rounded sum
does not depend on how coordinates are grouped into blocks; exact distance
ties stay ties.  Ties break by (distance, client id, local index).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import PredictError
from ..federation import ProtocolContext

_CHUNK = 256


_SPLIT = 134217729.0  # 2**27 + 1


def two_square(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """a*a as an unevaluated sum p + e, exactly (Veltkamp split)."""
    p = a * a
    t = _SPLIT * a
    hi = t - (t - a)
    lo = a - hi
    return p, ((hi * hi - p) + 2.0 * hi * lo) + lo * lo


def dd_add(hi: np.ndarray, lo: np.ndarray, b_hi: np.ndarray, b_lo: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Double-double addition (hi, lo) + (b_hi, b_lo), renormalized."""
    s = hi + b_hi
    v = s - hi
    err = (hi - (s - v)) + (b_hi - v)
    err = err + lo + b_lo
    out = s + err
    return out, err - (out - s)


def partial_sqdist(Q: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Masked squared-difference sums as double-double (hi, lo) plus shared-coordinate counts."""
    Q = np.asarray(Q, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    shape = (Q.shape[0], X.shape[0])
    hi, lo = np.zeros(shape), np.zeros(shape)
    cnt = np.zeros(shape, dtype=np.int64)
    for j in range(Q.shape[1]):
        diff = Q[:, j, None] - X[None, :, j]
        ok = ~np.isnan(diff)
        p, e = two_square(np.where(ok, diff, 0.0))
        hi, lo = dd_add(hi, lo, p, e)
        cnt += ok
    return hi, lo, cnt


def finish_distance(sq_hi: np.ndarray, sq_lo: np.ndarray, cnt: np.ndarray, m_total: int) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.sqrt(m_total / cnt * (sq_hi + sq_lo))
    return np.where(cnt > 0, d, np.inf)


def masked_distance(Q: np.ndarray, X: np.ndarray) -> np.ndarray:
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    out = np.empty((Q.shape[0], np.asarray(X).shape[0]))
    for s in range(0, Q.shape[0], _CHUNK):
        hi, lo, cnt = partial_sqdist(Q[s : s + _CHUNK], X)
        out[s : s + _CHUNK] = finish_distance(hi, lo, cnt, Q.shape[1])
    return out


def local_topk(d: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per row, the k smallest finite distances and their column indices (ties to lower index).

    Rows with fewer than k finite entries are padded with (inf, -1).
    """
    kk = min(k, d.shape[1])
    idx = np.argsort(d, axis=1, kind="stable")[:, :kk]
    dist = np.take_along_axis(d, idx, axis=1)
    idx = np.where(np.isfinite(dist), idx, -1)
    if kk < k:
        pad = k - kk
        dist = np.hstack([dist, np.full((d.shape[0], pad), np.inf)])
        idx = np.hstack([idx, np.full((d.shape[0], pad), -1)])
    return dist, idx


def merge_topk(dists: Sequence[np.ndarray], idxs: Sequence[np.ndarray], k: int):
    """Global top-k from per-client candidate lists.

    Returns (distance, client, index) arrays of shape (q, k), padded with
    (inf, -1, -1) where fewer than k valid candidates exist.
    """
    q = dists[0].shape[0]
    D = np.hstack(dists)
    I = np.hstack(idxs)
    C = np.hstack([np.full(d.shape, c) for c, d in enumerate(dists)])
    out_d = np.full((q, k), np.inf)
    out_c = np.full((q, k), -1, dtype=np.int64)
    out_i = np.full((q, k), -1, dtype=np.int64)
    for r in range(q):
        valid = np.flatnonzero(I[r] >= 0)
        order = valid[np.lexsort((I[r, valid], C[r, valid], D[r, valid]))][:k]
        n = len(order)
        out_d[r, :n], out_c[r, :n], out_i[r, :n] = D[r, order], C[r, order], I[r, order]
    return out_d, out_c, out_i


def neighbor_weights(dist: np.ndarray, weights: str) -> np.ndarray:
    """Weights for (q, k) neighbor distances; invalid slots (inf) get 0."""
    valid = np.isfinite(dist)
    if weights == "uniform":
        return valid.astype(np.float64)
    if weights != "distance":
        raise ValueError(f"unknown weights mode {weights!r}")
    zero = valid & (dist == 0)
    with np.errstate(divide="ignore"):
        w = np.where(valid, 1.0 / dist, 0.0)
    return np.where(zero.any(axis=1, keepdims=True), zero.astype(np.float64), w)


def weighted_mean(values: np.ndarray, w: np.ndarray) -> np.ndarray:
    total = w.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, (np.where(w > 0, values, 0.0) * w).sum(axis=1) / total, np.nan)


def h_fed_knn_predict(
    ctx: ProtocolContext,
    train: Sequence[tuple[np.ndarray, np.ndarray]],
    queries: np.ndarray,
    k: int = 5,
    weights: str = "uniform",
) -> np.ndarray:
    """Predict each query row from the k nearest training rows across all clients."""
    if k < 1:
        raise PredictError("k must be >= 1")
    if sum(len(y) for _, y in train) == 0:
        raise PredictError("empty training set")
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    ctx.broadcast(Q, "knn_query", ("min_max",))

    def candidates(c: int) -> dict:
        d, i = local_topk(masked_distance(ctx.received[c], train[c][0]), k)
        return {"dist": d, "idx": i}

    parts = ctx.gather(candidates, "knn_candidates", reply=True)
    dist, owner, idx = merge_topk([p["dist"] for p in parts], [p["idx"] for p in parts], k)
    if np.any(owner[:, 0] < 0):
        raise PredictError("a query shares no valid coordinate with any training row")

    requests = {c: idx[owner == c] for c in range(ctx.n_clients) if np.any(owner == c)}
    got = ctx.scatter(requests, "knn_request", ("mean",), reply=False)
    values = ctx.gather(
        lambda c: np.asarray(train[c][1], dtype=np.float64)[got[c]], "knn_values", clients=got, reply=True
    )
    y = np.zeros(dist.shape)
    for c in requests:
        y[owner == c] = values[c]
    return weighted_mean(y, neighbor_weights(dist, weights))


def v_fed_knn_predict(
    ctx: ProtocolContext,
    blocks: Sequence[np.ndarray],
    y: np.ndarray,
    label_holder: int,
    query_blocks: Sequence[np.ndarray],
    k: int = 5,
    weights: str = "uniform",
) -> np.ndarray:
    """Vertical k-NN: the server sums partial distances, the label holder averages."""
    if k < 1:
        raise PredictError("k must be >= 1")
    if len(y) == 0:
        raise PredictError("empty training set")

    def partial(c: int) -> dict:
        Qc = np.atleast_2d(np.asarray(query_blocks[c], dtype=np.float64))
        hi, lo, cnt = partial_sqdist(Qc, blocks[c])
        return {"sq_hi": hi, "sq_lo": lo, "cnt": cnt, "m": Qc.shape[1]}

    parts = ctx.gather(partial, "knn_partial", ("sum",))
    hi, lo = np.zeros_like(parts[0]["sq_hi"]), np.zeros_like(parts[0]["sq_lo"])
    for p in parts:
        hi, lo = dd_add(hi, lo, p["sq_hi"], p["sq_lo"])
    cnt = sum(p["cnt"] for p in parts)
    dist, idx = local_topk(finish_distance(hi, lo, cnt, sum(p["m"] for p in parts)), k)
    if np.any(idx[:, 0] < 0):
        raise PredictError("a query shares no valid coordinate with any training row")
    w = neighbor_weights(dist, weights)
    got = ctx.scatter({label_holder: {"idx": idx, "w": w}}, "knn_neighbors")[label_holder]
    yv = np.asarray(y, dtype=np.float64)
    preds = ctx.gather(
        lambda c: weighted_mean(yv[np.maximum(got["idx"], 0)], got["w"]),
        "knn_prediction",
        clients=[label_holder],
        reply=True,
    )
    return preds[label_holder]
