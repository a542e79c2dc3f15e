"""Federated Bayesian linear regression with evidence (α, β) re-estimation.

α is the prior precision of the coefficients and β the noise precision.  With
Σ = αI + βXᵀX the posterior mean is ω = βΣ⁻¹XᵀY, and the hyperparameters are
re-estimated under Gamma(a₁, a₂) / Gamma(b₁, b₂) hyperpriors as

    γ = Σᵢ βΛᵢ / (α + βΛᵢ)
    α ← (γ + 2a₁) / (‖ω‖² + 2a₂)
    β ← (n − γ + 2b₁) / (ε + 2b₂)

where Λ are the eigenvalues of the Gram matrix and ε = ‖Y − Xω‖².

Horizontal clients upload a thin factor F of their local XᵀX (m × rank); the
vertical variant works with XXᵀ instead and never forms a cross-client feature
product, via the identity βΣ⁻¹Xᵀ = βXᵀ(αI + βXXᵀ)⁻¹.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import FitError, PredictError
from ..federation import ProtocolContext

EIG_CLAMP = 1e-12
DENOM_FLOOR = 1e-300


@dataclass(frozen=True)
class BLRHyper:
    a1: float = 1e-6
    a2: float = 1e-6
    b1: float = 1e-6
    b2: float = 1e-6
    alpha0: float = 1.0
    beta0: float = 1.0
    tol: float = 1e-4
    max_iter: int = 300


@dataclass
class BLRState:
    alpha: float
    beta: float
    omega: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    gamma: float
    epsilon: float
    iter: int
    converged: bool
    mode: str = "horizontal"
    trace: list[np.ndarray] = field(default_factory=list, repr=False)
    fitted: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "version": 1,
            "mode": self.mode,
            "alpha": self.alpha,
            "beta": self.beta,
            "omega": self.omega.tolist(),
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "iter": self.iter,
            "converged": self.converged,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BLRState":
        return cls(
            alpha=float(doc["alpha"]),
            beta=float(doc["beta"]),
            omega=np.asarray(doc["omega"], dtype=np.float64),
            eigvals=np.empty(0),
            eigvecs=np.empty((0, 0)),
            gamma=float(doc["gamma"]),
            epsilon=float(doc["epsilon"]),
            iter=int(doc["iter"]),
            converged=bool(doc["converged"]),
            mode=doc.get("mode", "horizontal"),
        )


def thin_factor(X: np.ndarray, row_space: bool = True) -> np.ndarray:
    """F with F Fᵀ = XᵀX (``row_space``) or XXᵀ, keeping only the numerical rank."""
    if X.size == 0:
        return np.zeros((X.shape[1] if row_space else X.shape[0], 0))
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    keep = s > s[0] * max(X.shape) * np.finfo(float).eps if s.size else s > 0
    return Vt[keep].T * s[keep] if row_space else U[:, keep] * s[keep]


def _eigh(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam, vecs = np.linalg.eigh(G)
    top = lam.max(initial=0.0)
    lam = np.where(lam < EIG_CLAMP * top, 0.0, lam)
    return lam, vecs


def _update(hp: BLRHyper, alpha: float, beta: float, lam: np.ndarray, w2: float, eps: float, n: int):
    pos = lam[lam > 0]
    gamma = float(np.sum(beta * pos / (alpha + beta * pos)))
    new_alpha = (gamma + 2 * hp.a1) / max(w2 + 2 * hp.a2, DENOM_FLOOR)
    new_beta = (n - gamma + 2 * hp.b1) / max(eps + 2 * hp.b2, DENOM_FLOOR)
    return gamma, new_alpha, new_beta


def h_fed_blr_fit(
    ctx: ProtocolContext,
    data: Sequence[tuple[np.ndarray, np.ndarray]],
    hyper: BLRHyper = BLRHyper(),
    statistics: Sequence[str] = ("sum",),
) -> BLRState:
    """Horizontal BLR: one sufficient-statistics round, then one ε round per iteration."""
    widths = {np.asarray(X).shape[1] for X, _ in data}
    if len(widths) != 1:
        raise FitError(f"clients disagree on the feature count: {sorted(widths)}")
    for X, Y in data:
        if np.asarray(X).shape[0] != np.asarray(Y).shape[0]:
            raise FitError("X and Y row counts differ")

    def local_stats(c: int) -> dict:
        X, Y = (np.asarray(a, dtype=np.float64) for a in data[c])
        return {"factor": thin_factor(X), "xty": X.T @ Y, "n": X.shape[0]}

    parts = ctx.gather(local_stats, "blr_stats", statistics)
    m = widths.pop()
    G = np.zeros((m, m))
    xty = np.zeros(m)
    n = 0
    for p in parts:
        G += p["factor"] @ p["factor"].T
        xty += p["xty"]
        n += p["n"]
    if n < 1:
        raise FitError("no training rows")
    lam, V = _eigh(G)
    Vty = V.T @ xty

    alpha, beta = hyper.alpha0, hyper.beta0
    trace: list[np.ndarray] = []
    state = None
    for it in range(1, hyper.max_iter + 1):
        omega = V @ (beta * Vty / (alpha + beta * lam))
        ctx.broadcast(omega, "blr_refine")

        def residual(c: int) -> float:
            X, Y = (np.asarray(a, dtype=np.float64) for a in data[c])
            r = Y - X @ ctx.received[c]
            return float(r @ r)

        eps = float(sum(ctx.gather(residual, "blr_residual", reply=True)))
        gamma, na, nb = _update(hyper, alpha, beta, lam, float(omega @ omega), eps, n)
        trace.append(omega)
        done = abs(math.log(na) - math.log(alpha)) + abs(math.log(nb) - math.log(beta)) < hyper.tol
        state = BLRState(alpha, beta, omega, lam, V, gamma, eps, it, done, "horizontal", trace)
        if done:
            break
        alpha, beta = na, nb
    return state


def v_fed_blr_fit(
    ctx: ProtocolContext,
    blocks: Sequence[np.ndarray],
    y: np.ndarray,
    label_holder: int,
    hyper: BLRHyper = BLRHyper(),
    train_mask: np.ndarray | None = None,
    statistics: Sequence[str] = ("sum",),
) -> BLRState:
    """Vertical BLR over aligned feature blocks.

    ``y`` lives on ``label_holder``; rows outside ``train_mask`` take no part
    in the fit but still receive predictions in ``state.fitted``.  The state's
    ``omega`` is the stacked per-client coefficients, which stay client-side
    in a real deployment.
    """
    n_all = {np.asarray(B).shape[0] for B in blocks}
    if len(n_all) != 1:
        raise FitError(f"feature blocks are not row-aligned: {sorted(n_all)}")
    n_all = n_all.pop()
    y = np.asarray(y, dtype=np.float64)
    mask = np.ones(n_all, dtype=bool) if train_mask is None else np.asarray(train_mask, dtype=bool)
    if mask.shape != (n_all,) or np.count_nonzero(mask) != y.shape[0]:
        raise FitError("labels do not line up with the training rows")

    def local_stats(c: int) -> dict:
        msg = {"factor": thin_factor(np.asarray(blocks[c], dtype=np.float64), row_space=False)}
        if c == label_holder:
            msg["y"] = y
            msg["y_mask"] = mask
        return msg

    parts = ctx.gather(local_stats, "blr_stats", statistics)
    G = sum(p["factor"] @ p["factor"].T for p in parts)
    Y = parts[label_holder]["y"]
    rows = np.flatnonzero(parts[label_holder]["y_mask"])
    n = len(rows)
    if n < 1:
        raise FitError("no training rows")
    lam, U = _eigh(G[np.ix_(rows, rows)])
    Uty = U.T @ Y

    alpha, beta = hyper.alpha0, hyper.beta0
    trace: list[np.ndarray] = []
    state = None
    for it in range(1, hyper.max_iter + 1):
        v = np.zeros(n_all)
        v[rows] = U @ (beta * Uty / (alpha + beta * lam))
        ctx.broadcast(v, "blr_refine")

        omegas: list[np.ndarray] = [np.empty(0)] * len(blocks)

        def contribution(c: int) -> dict:
            B = np.asarray(blocks[c], dtype=np.float64)
            omegas[c] = B.T @ ctx.received[c]
            return {"pred": B @ omegas[c], "w2": float(omegas[c] @ omegas[c])}

        replies = ctx.gather(contribution, "blr_partial", reply=True)
        fitted = sum(r["pred"] for r in replies)
        w2 = float(sum(r["w2"] for r in replies))
        resid = Y - fitted[rows]
        eps = float(resid @ resid)
        gamma, na, nb = _update(hyper, alpha, beta, lam, w2, eps, n)
        omega = np.concatenate(omegas)
        trace.append(omega)
        done = abs(math.log(na) - math.log(alpha)) + abs(math.log(nb) - math.log(beta)) < hyper.tol
        state = BLRState(alpha, beta, omega, lam, U, gamma, eps, it, done, "vertical", trace, fitted)
        if done:
            break
        alpha, beta = na, nb
    return state


def blr_predict(state: BLRState, X_new: np.ndarray) -> np.ndarray:
    X = np.asarray(X_new, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != state.omega.shape[0]:
        if X.ndim == 2 and X.shape[0] == 0:
            return np.zeros(0)
        raise PredictError(f"expected {state.omega.shape[0]} columns, got shape {X.shape}")
    return X @ state.omega
