"""KBinsDiscretizer with uniform, quantile and k-means bin edges."""

from __future__ import annotations

import numpy as np

from ..datakit import Column, ColumnarDataset
from ..fedmodels.kmeans import h_fed_kmeans_batch
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
from .spec import FitParameters


def _store(params: FitParameters, name: str, edges: np.ndarray) -> None:
    out = np.unique(edges)
    if len(out) < len(edges):
        params.warnings.append(
            f"column {name!r}: {len(edges) - len(out)} duplicate bin edges dropped, {max(len(out) - 1, 1)} bins remain"
        )
    params.columns[name] = {"edges": floats(out)}


@fitter("KBinsDiscretizer")
def fit_kbins(ctx, spec, data) -> FitParameters:
    params = FitParameters(spec)
    nb = spec["n_bins"]
    strategy = spec["strategy"]
    if strategy == "quantile":
        merged = gather_column_summaries(ctx, data, spec, kll_of(spec, ctx.seed), "kll", ("quantiles",))
        for n, sk in merged.items():
            require_present(n, sk.n, spec)
            _store(params, n, sk.quantiles(np.linspace(0.0, 1.0, nb + 1)))
        return params

    merged = gather_column_summaries(ctx, data, spec, moments_of, "moments", ("min_max",))
    for n, m in merged.items():
        require_present(n, m.n, spec)
    uniform = {n: np.linspace(m.min, m.max, nb + 1) for n, m in merged.items()}
    if strategy == "uniform":
        for n, edges in uniform.items():
            _store(params, n, edges)
        return params

    # k-means: start from the centres of the uniform bins
    cols = list(spec.columns)
    inits = [0.5 * (uniform[n][1:] + uniform[n][:-1]) for n in cols]
    local = [[fit_column(ds, n, spec).present() for n in cols] for ds in data]
    states = h_fed_kmeans_batch(ctx, local, inits, max_iter=spec["max_iter"], tol=1e-9, statistics=("mean",))
    for n, st in zip(cols, states):
        centres = np.sort(st.centroids[:, 0])
        edges = np.concatenate([[merged[n].min], 0.5 * (centres[1:] + centres[:-1]), [merged[n].max]])
        _store(params, n, edges)
        params.columns[n]["iterations"] = st.iter
    return params


def bin_codes(x: np.ndarray, edges: np.ndarray) -> np.ndarray:
    n_bins = max(len(edges) - 1, 1)
    return np.clip(np.searchsorted(edges[1:-1], x, side="right"), 0, n_bins - 1).astype(np.float64)


@transformer("KBinsDiscretizer")
def transform_kbins(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    for n in params.spec.columns:
        col = transform_column(ds, n, params)
        codes = bin_codes(col.values, np.asarray(params.columns[n]["edges"]))
        ds = ds.replace(n, [Column.numeric(n, codes, col.missing)])
    return ds
