"""Registry and helpers shared by the preprocessor families."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .. import sketches
from ..datakit import Column, ColumnarDataset
from ..errors import FitError, MergeError, ProtocolError, TransformError
from ..federation import ProtocolContext
from .spec import CATEGORICAL_KINDS, NUMERIC_KINDS, FitParameters, PreprocessorSpec

FITTERS: dict[str, Callable] = {}
TRANSFORMERS: dict[str, Callable] = {}


def fitter(*kinds: str):
    def register(fn):
        for k in kinds:
            FITTERS[k] = fn
        return fn

    return register


def transformer(*kinds: str):
    def register(fn):
        for k in kinds:
            TRANSFORMERS[k] = fn
        return fn

    return register


def fit_column(ds: ColumnarDataset, name: str, spec: PreprocessorSpec) -> Column:
    """Column ``name`` of a client dataset, type-checked for fitting."""
    if name not in ds:
        raise FitError(f"{spec.kind}: column {name!r} not found")
    col = ds[name]
    if spec.kind in NUMERIC_KINDS and not col.is_numeric:
        raise FitError(f"{spec.kind}: column {name!r} is categorical, expected numeric")
    if spec.kind in CATEGORICAL_KINDS and col.is_numeric:
        raise FitError(f"{spec.kind}: column {name!r} is numeric, expected categorical")
    return col


def transform_column(ds: ColumnarDataset, name: str, params: FitParameters) -> Column:
    if name not in ds:
        raise TransformError(f"{params.kind}: column {name!r} not found")
    col = ds[name]
    if params.kind in NUMERIC_KINDS and not col.is_numeric:
        raise TransformError(f"{params.kind}: column {name!r} is categorical, expected numeric")
    if params.kind in CATEGORICAL_KINDS and col.is_numeric:
        raise TransformError(f"{params.kind}: column {name!r} is numeric, expected categorical")
    return col


def owned_columns(params: FitParameters, ds: ColumnarDataset) -> list[str]:
    """Target columns a client must transform: all of them in horizontal mode, its own in vertical."""
    if params.mode == "vertical":
        return [c for c in params.spec.columns if c in ds]
    return list(params.spec.columns)


def gather_column_summaries(
    ctx: ProtocolContext,
    data: Sequence[ColumnarDataset],
    spec: PreprocessorSpec,
    make: Callable[[Column, int], object],
    tag: str,
    statistics: Sequence[str],
) -> dict[str, object]:
    """One round: every client sends ``make(column, client)`` per target column; merged per column."""
    parts = ctx.gather(lambda c: {n: make(fit_column(data[c], n, spec), c) for n in spec.columns}, tag, statistics)
    out = {}
    for n in spec.columns:
        try:
            out[n] = sketches.merge_all(p[n] for p in parts)
        except MergeError as exc:
            raise ProtocolError(f"column {n!r}: {exc}") from exc
    return out


def moments_of(col: Column, client: int = 0) -> sketches.MomentsSummary:
    return sketches.MomentsSummary.of(col.present())


def kll_of(spec: PreprocessorSpec, seed: int):
    def make(col: Column, client: int) -> sketches.KLLSketch:
        return sketches.KLLSketch(spec["kll_k"], seed=seed * 7919 + client).update_many(col.present())

    return make


def require_present(name: str, n: int, spec: PreprocessorSpec) -> None:
    if n == 0:
        raise FitError(f"{spec.kind}: column {name!r} has no observed values")


def numeric_out(name: str, values: np.ndarray, missing: np.ndarray) -> Column:
    return Column.numeric(name, values, missing)


def floats(a) -> list[float]:
    return [float(x) for x in np.asarray(a, dtype=np.float64).ravel()]
