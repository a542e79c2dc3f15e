"""Categorical encoders built on set unions, frequent-item sketches and per-category counts."""

from __future__ import annotations

import numpy as np

from .. import sketches
from ..datakit import Column, ColumnarDataset, format_number
from ..errors import FitError, MergeError, ProtocolError
from ._common import fit_column, fitter, transform_column, transformer
from .spec import FitParameters

UNKNOWN_CODE = -1
INFREQUENT = "infrequent"


def _labels(col: Column, spec) -> list[str]:
    """Observed category labels; multi-label cells are split on the separator."""
    vals = col.present()
    if spec.kind == "MultiLabelBinarizer":
        return sorted({part for v in vals for part in v.split(spec["sep"]) if part})
    return list(vals)


def _merge(parts, key):
    try:
        return sketches.merge_all(p[key] for p in parts)
    except MergeError as exc:
        raise ProtocolError(str(exc)) from exc


@fitter("LabelBinarizer", "MultiLabelBinarizer", "LabelEncoder", "OneHotEncoder", "OrdinalEncoder")
def fit_categories(ctx, spec, data) -> FitParameters:
    min_count = spec.options.get("min_count")

    def local(c: int) -> dict:
        out = {}
        for n in spec.columns:
            labels = _labels(fit_column(data[c], n, spec), spec)
            out[n] = {"cats": sketches.CategorySet.of(labels)}
            if min_count:
                out[n]["freq"] = sketches.FrequentItemsSketch(spec["fi_capacity"]).update_many(labels)
        return out

    stats = ("set_union", "freq_items") if min_count else ("set_union",)
    parts = ctx.gather(local, "categories", stats)
    params = FitParameters(spec)
    for n in spec.columns:
        cats = _merge([p[n] for p in parts], "cats")
        if not len(cats):
            raise FitError(f"{spec.kind}: column {n!r} has no observed values")
        rare: list[str] = []
        if min_count:
            freq = _merge([p[n] for p in parts], "freq")
            # upper bound below the threshold proves the true count is too
            rare = [item for item in cats.items if freq.upper_bound(item) < min_count]
        kept = [item for item in cats.items if item not in set(rare)]
        params.columns[n] = {"categories": kept, "infrequent": rare}
    return params


@transformer("LabelEncoder", "OrdinalEncoder")
def transform_ordinal(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    for n in params.spec.columns:
        col = transform_column(ds, n, params)
        p = params.columns[n]
        code = {c: i for i, c in enumerate(p["categories"])}
        code.update({c: len(p["categories"]) for c in p["infrequent"]})
        vals = np.array([code.get(v, UNKNOWN_CODE) for v in col.values], dtype=np.float64)
        ds = ds.replace(n, [Column.numeric(n, vals, col.missing)])
    return ds


def _indicator_columns(name: str, col: Column, classes: list[str], hit) -> list[Column]:
    return [
        Column.numeric(f"{name}={c}", [float(not m and hit(v, c)) for v, m in zip(col.values, col.missing)])
        for c in classes
    ]


@transformer("OneHotEncoder")
def transform_onehot(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    for n in params.spec.columns:
        col = transform_column(ds, n, params)
        p = params.columns[n]
        new = _indicator_columns(n, col, p["categories"], lambda v, c: v == c)
        if p["infrequent"]:
            rare = set(p["infrequent"])
            new += _indicator_columns(n, col, [INFREQUENT], lambda v, c: v in rare)
        ds = ds.replace(n, new)
    return ds


@transformer("LabelBinarizer")
def transform_label_binarizer(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    for n in params.spec.columns:
        col = transform_column(ds, n, params)
        classes = params.columns[n]["categories"]
        if len(classes) <= 2:
            positive = classes[-1] if len(classes) == 2 else None
            vals = [float(not m and v == positive) for v, m in zip(col.values, col.missing)]
            ds = ds.replace(n, [Column.numeric(n, vals)])
        else:
            ds = ds.replace(n, _indicator_columns(n, col, classes, lambda v, c: v == c))
    return ds


@transformer("MultiLabelBinarizer")
def transform_multilabel(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    sep = params.spec["sep"]
    for n in params.spec.columns:
        col = transform_column(ds, n, params)
        classes = params.columns[n]["categories"]
        ds = ds.replace(n, _indicator_columns(n, col, classes, lambda v, c: c in v.split(sep)))
    return ds


# -- TargetEncoder ----------------------------------------------------------


def label_strings(col: Column) -> np.ndarray:
    if col.is_numeric:
        return np.array([format_number(v) for v in col.values], dtype=object)
    return col.values


def target_encoding(n_i: int, pos_i: int, prior: float, tau2: float) -> float:
    """Shrunk category mean λ·p_i + (1 − λ)·prior with λ = n_i / (m + n_i), m = σ_i² / τ²."""
    p_i = pos_i / n_i
    if tau2 == 0.0:
        return p_i
    m = p_i * (1.0 - p_i) / tau2
    lam = n_i / (m + n_i)
    return lam * p_i + (1.0 - lam) * prior


@fitter("TargetEncoder")
def fit_target(ctx, spec, data) -> FitParameters:
    label = spec["label"]

    def local(c: int) -> dict:
        ds = data[c]
        if label not in ds:
            raise FitError(f"TargetEncoder: label column {label!r} not found")
        ycol = ds[label]
        ys = label_strings(ycol)
        label_counts: dict[str, int] = {}
        for y in ys[~ycol.missing]:
            label_counts[y] = label_counts.get(y, 0) + 1
        out = {}
        for n in spec.columns:
            col = fit_column(ds, n, spec)
            table: dict[str, dict[str, int]] = {}
            for v, y, mv, my in zip(col.values, ys, col.missing, ycol.missing):
                if not (mv or my):
                    row = table.setdefault(v, {})
                    row[y] = row.get(y, 0) + 1
            out[n] = table
        return {"columns": out, "label": label_counts}

    parts = ctx.gather(local, "category_label_counts", ("mean", "variance", "set_union"))
    params = FitParameters(spec)
    classes = sorted({y for p in parts for y in p["label"]})
    if len(classes) != 2:
        raise FitError(f"TargetEncoder needs a binary label, found classes {classes}")
    positive = classes[1]
    n_all = sum(sum(p["label"].values()) for p in parts)
    prior = sum(p["label"].get(positive, 0) for p in parts) / n_all
    tau2 = prior * (1.0 - prior)
    for n in spec.columns:
        counts: dict[str, list[int]] = {}
        for p in parts:
            for cat, row in p["columns"][n].items():
                acc = counts.setdefault(cat, [0, 0])
                acc[0] += sum(row.values())
                acc[1] += row.get(positive, 0)
        if not counts:
            raise FitError(f"TargetEncoder: column {n!r} has no observed values")
        enc = {cat: target_encoding(a, b, prior, tau2) for cat, (a, b) in sorted(counts.items())}
        params.columns[n] = {"encodings": enc}
    params.shared.update({"classes": classes, "prior": prior, "tau2": tau2})
    return params


@transformer("TargetEncoder")
def transform_target(params: FitParameters, ds: ColumnarDataset, client=None) -> ColumnarDataset:
    for n in params.spec.columns:
        col = transform_column(ds, n, params)
        p = params.columns[n]
        vals = [p["encodings"].get(v, params.shared["prior"]) for v in col.values]
        ds = ds.replace(n, [Column.numeric(n, vals, col.missing)])
    return ds
