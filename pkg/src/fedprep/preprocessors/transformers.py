"""Power, quantile and spline transformers."""

from __future__ import annotations

import math

import numpy as np

from ..datakit import Column, ColumnarDataset
from ..errors import FitError, TransformError
from . import bspline, power
from ._common import (
    fit_column,
    fitter,
    floats,
    gather_column_summaries,
    kll_of,
    moments_of,
    require_present,
    transform_column,
    transformer,
)
from .normal import ndtri
from .spec import FitParameters

BOUNDS_EPS = 1e-7


# -- PowerTransformer -------------------------------------------------------


def centered_moments(x: np.ndarray) -> list[float]:
    """(n, mean, M2) of ``x``; merge with :func:`merge_centered`."""
    if x.size == 0:
        return [0.0, 0.0, 0.0]
    mu = float(x.mean())
    return [float(x.size), mu, float(((x - mu) ** 2).sum())]


def merge_centered(parts) -> tuple[float, float, float]:
    n, mean, m2 = 0.0, 0.0, 0.0
    for nb, mb, m2b in parts:
        if nb == 0:
            continue
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


@fitter("PowerTransformer")
def fit_power(ctx, spec, data) -> FitParameters:
    method = spec["method"]
    cols = list(spec.columns)

    def present(c: int, n: str) -> np.ndarray:
        return fit_column(data[c], n, spec).present()

    def jac_stats(c: int) -> dict:
        out = {}
        for n in cols:
            x = present(c, n)
            if method == "box-cox" and x.size and x.min() <= 0:
                out[n] = {"n": x.size, "jac": 0.0, "min": float(x.min())}
            else:
                out[n] = {"n": x.size, "jac": float(power.jacobian_terms(method, x).sum()),
                          "min": float(x.min()) if x.size else math.inf}
        return out

    parts = ctx.gather(jac_stats, "power_jacobian", ("sum",))
    n_tot = {n: sum(p[n]["n"] for p in parts) for n in cols}
    jac = {n: sum(p[n]["jac"] for p in parts) for n in cols}
    for n in cols:
        require_present(n, n_tot[n], spec)
        if method == "box-cox" and min(p[n]["min"] for p in parts) <= 0:
            raise FitError(f"Box-Cox needs strictly positive data; column {n!r} is not")

    lo, hi = power.RANGES[method]
    searches = {n: power.GoldenSection(lo, hi) for n in cols}
    for _ in range(spec["n_iter"]):
        ctx.broadcast({n: s.pending() for n, s in searches.items()}, "power_candidates", ("variance",))

        def candidate_moments(c: int) -> dict:
            got = ctx.received[c]
            return {n: [centered_moments(power.apply(method, present(c, n), lam)) for lam in got[n]] for n in got}

        replies = ctx.gather(candidate_moments, "power_moments", reply=True)
        for n, s in searches.items():
            values = []
            for i, lam in enumerate(s.pending()):
                cnt, _, m2 = merge_centered(r[n][i] for r in replies)
                values.append(power.loglik(cnt, m2 / cnt, jac[n], lam))
            s.tell(values)

    params = FitParameters(spec)
    lambdas = {n: s.best for n, s in searches.items()}
    for n in cols:
        params.columns[n] = {"lambda": lambdas[n]}
    if spec["standardize"]:
        ctx.broadcast(lambdas, "power_lambda", ("mean",))
        replies = ctx.gather(
            lambda c: {n: centered_moments(power.apply(method, present(c, n), ctx.received[c][n])) for n in cols},
            "power_final_moments",
            reply=True,
        )
        for n in cols:
            cnt, mu, m2 = merge_centered(r[n] for r in replies)
            params.columns[n].update({"mean": mu, "std": math.sqrt(max(m2 / cnt, 0.0))})
    return params


@transformer("PowerTransformer")
def transform_power(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    method = params.spec["method"]
    for n in params.spec.columns:
        col = transform_column(ds, n, params)
        p = params.columns[n]
        x = np.where(col.missing, 1.0, col.values)
        if method == "box-cox" and np.any(x <= 0):
            raise TransformError(f"Box-Cox needs strictly positive data; column {n!r} is not")
        y = power.apply(method, x, p["lambda"])
        if "std" in p:
            y = np.zeros_like(y) if p["std"] == 0 else (y - p["mean"]) / p["std"]
        ds = ds.replace(n, [Column.numeric(n, y, col.missing)])
    return ds


# -- QuantileTransformer ----------------------------------------------------


@fitter("QuantileTransformer")
def fit_quantile(ctx, spec, data) -> FitParameters:
    merged = gather_column_summaries(ctx, data, spec, kll_of(spec, ctx.seed), "kll", ("quantiles",))
    params = FitParameters(spec)
    for n, sk in merged.items():
        require_present(n, sk.n, spec)
        nq = min(spec["n_quantiles"], sk.n)
        refs = np.linspace(0.0, 1.0, max(nq, 2))
        params.columns[n] = {"quantiles": floats(sk.quantiles(refs))}
    return params


def quantile_cdf(x: np.ndarray, quantiles: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Empirical CDF by averaged forward/backward interpolation (robust to repeated quantiles)."""
    y = 0.5 * (np.interp(x, quantiles, refs) - np.interp(-x, -quantiles[::-1], -refs[::-1]))
    y = np.where(x - BOUNDS_EPS < quantiles[0], refs[0], y)
    return np.where(x + BOUNDS_EPS > quantiles[-1], refs[-1], y)


@transformer("QuantileTransformer")
def transform_quantile(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    for n in params.spec.columns:
        col = transform_column(ds, n, params)
        p = params.columns[n]
        qs = np.asarray(p["quantiles"])
        y = quantile_cdf(col.values, qs, np.linspace(0.0, 1.0, len(qs)))
        if params.spec["output"] == "normal":
            y = ndtri(y)
        ds = ds.replace(n, [Column.numeric(n, y, col.missing)])
    return ds


# -- SplineTransformer ------------------------------------------------------


def _dedupe(edges: np.ndarray, name: str, params: FitParameters, what: str) -> np.ndarray:
    out = np.unique(edges)
    if len(out) < len(edges):
        params.warnings.append(f"column {name!r}: {len(edges) - len(out)} duplicate {what} dropped")
    return out


@fitter("SplineTransformer")
def fit_spline(ctx, spec, data) -> FitParameters:
    params = FitParameters(spec)
    nk, degree = spec["n_knots"], spec["degree"]
    if spec["knots"] == "uniform":
        merged = gather_column_summaries(ctx, data, spec, moments_of, "moments", ("min_max",))
        breaks = {}
        for n, m in merged.items():
            require_present(n, m.n, spec)
            breaks[n] = np.linspace(m.min, m.max, nk)
    else:
        merged = gather_column_summaries(ctx, data, spec, kll_of(spec, ctx.seed), "kll", ("quantiles",))
        breaks = {}
        for n, sk in merged.items():
            require_present(n, sk.n, spec)
            breaks[n] = sk.quantiles(np.linspace(0.0, 1.0, nk))
    for n, b in breaks.items():
        b = _dedupe(b, n, params, "knots")
        if len(b) < 2:
            raise FitError(f"SplineTransformer: column {n!r} is constant")
        params.columns[n] = {"breaks": floats(b), "knots": floats(bspline.clamped_knots(b, degree))}
    return params


@transformer("SplineTransformer")
def transform_spline(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    degree = params.spec["degree"]
    for n in params.spec.columns:
        col = transform_column(ds, n, params)
        B = bspline.basis(col.values, np.asarray(params.columns[n]["knots"]), degree)
        ds = ds.replace(n, [Column.numeric(f"{n}_sp{i}", B[:, i], col.missing) for i in range(B.shape[1])])
    return ds
