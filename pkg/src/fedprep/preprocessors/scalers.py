"""Scalers, the Normalizer and the Binarizer."""

from __future__ import annotations

import math

import numpy as np

from ..datakit import Column, ColumnarDataset
from ..errors import TransformError
from ._common import (
    fit_column,
    fitter,
    gather_column_summaries,
    kll_of,
    moments_of,
    owned_columns,
    require_present,
    transform_column,
    transformer,
)
from .spec import FitParameters

QUARTILES = (0.25, 0.5, 0.75)


@fitter("MaxAbsScaler", "MinMaxScaler")
def fit_extremes(ctx, spec, data) -> FitParameters:
    merged = gather_column_summaries(ctx, data, spec, moments_of, "moments", ("min_max",))
    params = FitParameters(spec)
    for name, m in merged.items():
        require_present(name, m.n, spec)
        params.columns[name] = {"max_abs": m.max_abs} if spec.kind == "MaxAbsScaler" else {"min": m.min, "max": m.max}
    return params


@fitter("StandardScaler")
def fit_standard(ctx, spec, data) -> FitParameters:
    merged = gather_column_summaries(ctx, data, spec, moments_of, "moments", ("mean", "variance"))
    params = FitParameters(spec)
    for name, m in merged.items():
        require_present(name, m.n, spec)
        sigma = math.sqrt(m.variance)
        params.columns[name] = {"mean": m.mean, "std": sigma, "constant": sigma == 0.0}
    return params


@fitter("RobustScaler")
def fit_robust(ctx, spec, data) -> FitParameters:
    merged = gather_column_summaries(ctx, data, spec, kll_of(spec, ctx.seed), "kll", ("quantiles",))
    params = FitParameters(spec)
    for name, sk in merged.items():
        require_present(name, sk.n, spec)
        q1, q2, q3 = (float(v) for v in sk.quantiles(QUARTILES))
        params.columns[name] = {"q1": q1, "q2": q2, "q3": q3}
    return params


def _scaled(col: Column, offset: float, scale: float) -> Column:
    """(x - offset) / scale, with a zero scale mapping every cell to 0."""
    if scale == 0.0 or not math.isfinite(scale):
        return Column.numeric(col.name, np.zeros(len(col)), col.missing)
    return Column.numeric(col.name, (col.values - offset) / scale, col.missing)


@transformer("MaxAbsScaler", "MinMaxScaler", "StandardScaler", "RobustScaler")
def transform_scaler(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    for name in owned_columns(params, ds):
        col = transform_column(ds, name, params)
        p = params.columns[name]
        if params.kind == "MaxAbsScaler":
            new = _scaled(col, 0.0, p["max_abs"])
        elif params.kind == "MinMaxScaler":
            new = _scaled(col, p["min"], p["max"] - p["min"])
        elif params.kind == "StandardScaler":
            new = _scaled(col, p["mean"], p["std"])
        else:
            new = _scaled(col, p["q2"], p["q3"] - p["q1"])
        ds = ds.replace(name, [new])
    return ds


# -- Normalizer -------------------------------------------------------------


def _row_contribution(norm: str, X: np.ndarray) -> np.ndarray:
    A = np.abs(np.nan_to_num(X, nan=0.0))
    if norm == "l1":
        return A.sum(axis=1)
    if norm == "l2":
        return (A * A).sum(axis=1)
    return A.max(axis=1, initial=0.0)


@fitter("Normalizer")
def fit_normalizer(ctx, spec, data) -> FitParameters:
    if ctx.mode == "horizontal":
        # row norms are local to each row's owner
        return FitParameters(spec, delivery="none")
    norm = spec["norm"]

    def partial(c: int) -> np.ndarray:
        names = [n for n in spec.columns if n in data[c]]
        for n in names:
            fit_column(data[c], n, spec)
        return _row_contribution(norm, data[c].numeric_matrix(names))

    stat = "min_max" if norm == "max" else "sum"
    parts = ctx.gather(partial, "row_norms", (stat,))
    stacked = np.vstack(parts)
    if norm == "max":
        norms = stacked.max(axis=0)
    else:
        norms = stacked.sum(axis=0)
        if norm == "l2":
            norms = np.sqrt(norms)
    return FitParameters(spec, mode="vertical", shared={"row_norms": norms.tolist()})


@transformer("Normalizer")
def transform_normalizer(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    names = owned_columns(params, ds)
    cols = [transform_column(ds, n, params) for n in names]
    if params.mode == "vertical":
        norms = np.asarray(params.shared["row_norms"], dtype=np.float64)
        if len(norms) != ds.n_rows:
            raise TransformError(f"parameters hold {len(norms)} row norms, shard has {ds.n_rows} rows")
    else:
        contrib = _row_contribution(params.spec["norm"], ds.numeric_matrix(names))
        norms = np.sqrt(contrib) if params.spec["norm"] == "l2" else contrib
    safe = np.where(norms == 0.0, 1.0, norms)
    for col in cols:
        ds = ds.replace(col.name, [Column.numeric(col.name, col.values / safe, col.missing)])
    return ds


# -- Binarizer --------------------------------------------------------------


@fitter("Binarizer")
def fit_binarizer(ctx, spec, data) -> FitParameters:
    for ds in data:
        for n in spec.columns:
            if n in ds or ctx.mode == "horizontal":
                fit_column(ds, n, spec)
    return FitParameters(spec, mode=ctx.mode, shared={"threshold": float(spec["threshold"])}, delivery="none")


@transformer("Binarizer")
def transform_binarizer(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    t = params.shared["threshold"]
    for name in owned_columns(params, ds):
        col = transform_column(ds, name, params)
        ds = ds.replace(name, [Column.numeric(name, (col.values > t).astype(np.float64), col.missing)])
    return ds
