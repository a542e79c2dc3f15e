"""Simple, k-NN and iterative (BLR round-robin) imputers."""

from __future__ import annotations

import numpy as np

from .. import sketches
from ..datakit import Column, ColumnarDataset, format_number
from ..errors import FitError, TransformError
from ..fedmodels.blr import h_fed_blr_fit, v_fed_blr_fit
from ..fedmodels.knn import dd_add, finish_distance, local_topk, masked_distance, merge_topk, neighbor_weights, \
    partial_sqdist, weighted_mean
from ._common import (
    fit_column,
    fitter,
    gather_column_summaries,
    kll_of,
    moments_of,
    require_present,
    transform_column,
    transformer,
)
from .spec import FitParameters

# -- SimpleImputer ----------------------------------------------------------


def _frequent_of(spec):
    def make(col: Column, client: int) -> sketches.FrequentItemsSketch:
        vals = col.present()
        items = [format_number(v) for v in vals] if col.is_numeric else list(vals)
        return sketches.FrequentItemsSketch(spec["fi_capacity"]).update_many(items)

    return make


@fitter("SimpleImputer")
def fit_simple(ctx, spec, data) -> FitParameters:
    strategy = spec["strategy"]
    if strategy != "most_frequent":
        for ds in data:
            for n in spec.columns:
                if n in ds and not ds[n].is_numeric:
                    raise FitError(f"SimpleImputer({strategy}) needs numeric columns; {n!r} is categorical")
    params = FitParameters(spec)
    if strategy == "mean":
        for n, m in gather_column_summaries(ctx, data, spec, moments_of, "moments", ("mean",)).items():
            require_present(n, m.n, spec)
            params.columns[n] = {"fill": m.mean}
    elif strategy == "median":
        for n, sk in gather_column_summaries(ctx, data, spec, kll_of(spec, ctx.seed), "kll", ("quantiles",)).items():
            require_present(n, sk.n, spec)
            params.columns[n] = {"fill": sk.quantile(0.5)}
    else:
        numeric = {n: data[0][n].is_numeric for n in spec.columns if n in data[0]}
        merged = gather_column_summaries(ctx, data, spec, _frequent_of(spec), "frequent", ("freq_items",))
        for n, fi in merged.items():
            require_present(n, fi.n, spec)
            top = max(fi.counters.values())
            tied = [item for item, c in fi.counters.items() if c == top]
            # ties go to the smallest value, numerically for numeric columns
            if numeric.get(n, False):
                params.columns[n] = {"fill": min(float(t) for t in tied)}
            else:
                params.columns[n] = {"fill": min(tied)}
    return params


@transformer("SimpleImputer")
def transform_simple(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    for n in params.spec.columns:
        if n not in ds:
            raise TransformError(f"SimpleImputer: column {n!r} not found")
        col = ds[n]
        fill = params.columns[n]["fill"]
        if col.is_numeric:
            if isinstance(fill, str):
                raise TransformError(f"SimpleImputer: column {n!r} is numeric but the fill value is a category")
            new = Column.numeric(n, np.where(col.missing, fill, col.values))
        else:
            new = Column.categorical(n, [fill if m else v for v, m in zip(col.values, col.missing)])
        ds = ds.replace(n, [new])
    return ds


# -- per-client imputed cells -------------------------------------------------


def _add_cells(params: FitParameters, client: int, name: str, rows, values) -> None:
    cell = params.clients.setdefault(client, {}).setdefault(name, {"rows": [], "values": []})
    cell["rows"].extend(int(r) for r in rows)
    cell["values"].extend(float(v) for v in values)


def _sort_cells(params: FitParameters) -> None:
    for cells in params.clients.values():
        for cell in cells.values():
            order = np.argsort(cell["rows"], kind="stable")
            cell["rows"] = [cell["rows"][i] for i in order]
            cell["values"] = [cell["values"][i] for i in order]


@transformer("KNNImputer", "IterativeImputer")
def transform_cells(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    if "sequence" in params.shared:
        return _replay_sequence(params, ds)
    if client is None:
        raise TransformError(f"{params.kind} parameters hold per-client cells; pass the client id")
    cells = params.clients.get(int(client), {})
    for n in params.spec.columns:
        if n not in ds:
            if params.mode == "vertical":
                continue
            raise TransformError(f"{params.kind}: column {n!r} not found")
        col = transform_column(ds, n, params)
        cell = cells.get(n, {"rows": [], "values": []})
        rows = np.asarray(cell["rows"], dtype=np.int64)
        if not np.array_equal(np.flatnonzero(col.missing), rows):
            raise TransformError(f"{params.kind}: missing cells of {n!r} differ from the fitted shard of client {client}")
        vals = col.values.copy()
        vals[rows] = cell["values"]
        ds = ds.replace(n, [Column.numeric(n, vals)])
    return ds


# -- KNNImputer ---------------------------------------------------------------


def _matrices(spec, data, mode):
    cols = list(spec.columns)
    if mode == "horizontal":
        for ds in data:
            for n in cols:
                fit_column(ds, n, spec)
        return cols, [ds.numeric_matrix(cols) for ds in data]
    owned = []
    for ds in data:
        mine = [n for n in cols if n in ds]
        for n in mine:
            fit_column(ds, n, spec)
        owned.append(mine)
    orphan = [n for n in cols if not any(n in o for o in owned)]
    if orphan:
        raise FitError(f"{spec.kind}: columns {orphan} are held by no client")
    return owned, [ds.numeric_matrix(o) for ds, o in zip(data, owned)]


@fitter("KNNImputer")
def fit_knn(ctx, spec, data) -> FitParameters:
    return _fit_knn_h(ctx, spec, data) if ctx.mode == "horizontal" else _fit_knn_v(ctx, spec, data)


def _fit_knn_h(ctx, spec, data) -> FitParameters:
    cols, mats = _matrices(spec, data, "horizontal")
    k, m = spec["k"], len(cols)

    def incomplete(c: int) -> dict:
        rows = np.flatnonzero(np.isnan(mats[c]).any(axis=1))
        return {"rows": rows, "X": mats[c][rows]}

    up = ctx.gather(incomplete, "knn_queries")
    Q = np.vstack([u["X"].reshape(-1, m) for u in up])
    q_owner = np.concatenate([np.full(len(u["rows"]), c) for c, u in enumerate(up)]).astype(np.int64)
    q_row = np.concatenate([u["rows"] for u in up]).astype(np.int64)
    qi, fj = np.nonzero(np.isnan(Q))

    ctx.broadcast({"Q": Q, "qi": qi, "fj": fj}, "knn_queries", ("min_max",))

    def candidates(c: int) -> dict:
        msg = ctx.received[c]
        X = mats[c]
        D = masked_distance(msg["Q"], X)[msg["qi"]]
        D[np.isnan(X[:, msg["fj"]]).T] = np.inf
        dist, idx = local_topk(D, k)
        return {"dist": dist, "idx": idx}

    parts = ctx.gather(candidates, "knn_candidates", reply=True)
    dist, owner, idx = merge_topk([p["dist"] for p in parts], [p["idx"] for p in parts], k)

    feat = np.broadcast_to(fj[:, None], idx.shape)
    requests = {c: {"idx": idx[owner == c], "feat": feat[owner == c]} for c in range(ctx.n_clients)}
    got = ctx.scatter(requests, "knn_request", ("mean",), reply=False)

    def values(c: int) -> dict:
        X = mats[c]
        r = got[c]
        present = ~np.isnan(X)
        return {"values": X[r["idx"], r["feat"]], "sum": np.where(present, X, 0.0).sum(axis=0),
                "count": present.sum(axis=0)}

    vals = ctx.gather(values, "knn_values", reply=True)
    Y = np.zeros(dist.shape)
    for c in range(ctx.n_clients):
        Y[owner == c] = vals[c]["values"]
    counts = sum(v["count"] for v in vals)
    if np.any(counts == 0):
        raise FitError(f"KNNImputer: columns {[cols[j] for j in np.flatnonzero(counts == 0)]} have no observed values")
    means = sum(v["sum"] for v in vals) / counts
    fill = weighted_mean(Y, neighbor_weights(dist, spec["weights"]))
    fill = np.where(np.isnan(fill), means[fj], fill)

    params = FitParameters(spec, delivery="scatter")
    for p in range(len(qi)):
        _add_cells(params, int(q_owner[qi[p]]), cols[fj[p]], [q_row[qi[p]]], [fill[p]])
    _sort_cells(params)
    return params


def _fit_knn_v(ctx, spec, data) -> FitParameters:
    owned, mats = _matrices(spec, data, "vertical")
    k = spec["k"]
    m_total = len(spec.columns)

    masks = ctx.gather(lambda c: ~np.isnan(mats[c]), "presence")
    n = mats[0].shape[0]
    qrows = np.flatnonzero(np.any([~mk.all(axis=1) for mk in masks], axis=0))
    ctx.broadcast(qrows, "query_rows", reply=True)

    def partial(c: int) -> dict:
        X = mats[c]
        hi, lo, cnt = partial_sqdist(X[ctx.received[c]], X)
        return {"sq_hi": hi, "sq_lo": lo, "cnt": cnt}

    parts = ctx.gather(partial, "knn_partial", ("sum",))
    hi, lo = np.zeros_like(parts[0]["sq_hi"]), np.zeros_like(parts[0]["sq_lo"])
    for p in parts:
        hi, lo = dd_add(hi, lo, p["sq_hi"], p["sq_lo"])
    D = finish_distance(hi, lo, sum(p["cnt"] for p in parts), m_total)

    orders = {}
    for c, mk in enumerate(masks):
        qi, fj = np.nonzero(~mk[qrows])
        Dp = D[qi].copy()
        Dp[~mk[:, fj].T] = np.inf
        dist, idx = local_topk(Dp, k)
        orders[c] = {"rows": qrows[qi], "feat": fj, "idx": idx, "w": neighbor_weights(dist, spec["weights"])}
    got = ctx.scatter(orders, "knn_neighbors")

    params = FitParameters(spec, mode="vertical", delivery="none")
    for c, o in got.items():
        X = mats[c]
        if not len(o["rows"]):
            continue
        present = ~np.isnan(X)
        counts = present.sum(axis=0)
        if np.any(counts == 0):
            raise FitError(f"KNNImputer: a column of client {c} has no observed values")
        means = np.where(present, X, 0.0).sum(axis=0) / counts
        donors = X[np.maximum(o["idx"], 0), o["feat"][:, None]]
        fill = weighted_mean(donors, o["w"])
        fill = np.where(np.isnan(fill), means[o["feat"]], fill)
        for r, j, v in zip(o["rows"], o["feat"], fill):
            _add_cells(params, c, owned[c][j], [r], [v])
    _sort_cells(params)
    return params


# -- IterativeImputer -----------------------------------------------------------


def _design(X: np.ndarray, j: int) -> np.ndarray:
    """Predictors for column ``j``: the other columns plus a constant column."""
    return np.hstack([np.delete(X, j, axis=1), np.ones((X.shape[0], 1))])


@fitter("IterativeImputer")
def fit_iterative(ctx, spec, data) -> FitParameters:
    return _fit_iter_h(ctx, spec, data) if ctx.mode == "horizontal" else _fit_iter_v(ctx, spec, data)


def _visit_order(missing: dict[str, int], cols: list[str]) -> list[str]:
    return sorted((n for n in cols if missing[n] > 0), key=lambda n: (missing[n], cols.index(n)))


def _fit_iter_h(ctx, spec, data) -> FitParameters:
    cols, mats = _matrices(spec, data, "horizontal")
    stats = ctx.gather(
        lambda c: {"rows": mats[c].shape[0], **{n: moments_of(data[c][n]) for n in cols}}, "moments", ("mean",)
    )
    n_rows = sum(s["rows"] for s in stats)
    merged = {n: sketches.merge_all(s[n] for s in stats) for n in cols}
    for n in cols:
        require_present(n, merged[n].n, spec)
    means = np.array([merged[n].mean for n in cols])
    order = _visit_order({n: n_rows - merged[n].n for n in cols}, cols)

    miss = [np.isnan(X) for X in mats]
    work = [np.where(mk, means, X) for X, mk in zip(mats, miss)]
    sequence = []
    sweeps, converged = 0, not order
    while order and sweeps < spec["max_iter"]:
        sweeps += 1
        before = [W.copy() for W in work]
        for n in order:
            j = cols.index(n)
            train = [(_design(W[~mk[:, j]], j), X[~mk[:, j], j]) for W, X, mk in zip(work, mats, miss)]
            state = h_fed_blr_fit(ctx, train, statistics=("sum",))
            for c, (W, mk) in enumerate(zip(work, miss)):
                # each client predicts with the coefficients it received last
                W[mk[:, j], j] = _design(W[mk[:, j]], j) @ ctx.received[c]
            sequence.append({"target": n, "omega": state.omega.tolist()})
        change = max(ctx.gather(lambda c: float(np.max(np.abs(work[c] - before[c]), initial=0.0)), "change"))
        if change < spec["tol"]:
            converged = True
            break

    params = FitParameters(spec)
    params.shared = {"means": means.tolist(), "sequence": sequence, "sweeps": sweeps, "converged": converged,
                     "fits": len(sequence)}
    return params


def _replay_sequence(params: FitParameters, ds: ColumnarDataset) -> ColumnarDataset:
    cols = list(params.spec.columns)
    for n in cols:
        transform_column(ds, n, params)
    X = ds.numeric_matrix(cols)
    mk = np.isnan(X)
    W = np.where(mk, np.asarray(params.shared["means"]), X)
    for step in params.shared["sequence"]:
        j = cols.index(step["target"])
        W[mk[:, j], j] = _design(W[mk[:, j]], j) @ np.asarray(step["omega"])
    for j, n in enumerate(cols):
        ds = ds.replace(n, [Column.numeric(n, W[:, j])])
    return ds


def _fit_iter_v(ctx, spec, data) -> FitParameters:
    owned, mats = _matrices(spec, data, "vertical")
    owner = {n: c for c, names in enumerate(owned) for n in names}
    summary = ctx.gather(lambda c: {n: moments_of(data[c][n]) for n in owned[c]}, "missing_counts")
    n_rows = mats[0].shape[0]
    info = {}
    for n in spec.columns:
        m = summary[owner[n]][n]
        require_present(n, m.n, spec)
        info[n] = (n_rows - m.n, m.mean)
    cols = list(spec.columns)
    order = _visit_order({n: info[n][0] for n in cols}, cols)

    miss = [np.isnan(X) for X in mats]
    work = [np.where(mk, [info[n][1] for n in names], X) if X.size else X.copy()
            for X, mk, names in zip(mats, miss, owned)]
    # server-side copy of the current imputations, used for the change test
    current = {n: np.full(int(info[n][0]), info[n][1]) for n in order}
    sweeps, converged = 0, not order
    while order and sweeps < spec["max_iter"]:
        sweeps += 1
        change = 0.0
        for n in order:
            o = owner[n]
            j = owned[o].index(n)
            blocks = [_design(work[c], j) if c == o else work[c] for c in range(ctx.n_clients)]
            obs = ~miss[o][:, j]
            state = v_fed_blr_fit(ctx, blocks, mats[o][obs, j], o, train_mask=obs, statistics=("sum",))
            preds = state.fitted[~obs]
            got = ctx.scatter({o: preds}, "imputed_values")[o]
            work[o][~obs, j] = got
            change = max(change, float(np.max(np.abs(preds - current[n]), initial=0.0)))
            current[n] = preds
        if change < spec["tol"]:
            converged = True
            break

    params = FitParameters(spec, mode="vertical", delivery="none")
    for n in order:
        o = owner[n]
        j = owned[o].index(n)
        rows = np.flatnonzero(miss[o][:, j])
        _add_cells(params, o, n, rows, work[o][rows, j])
    params.shared = {"sweeps": sweeps, "converged": converged, "fits": sweeps * len(order)}
    return params
