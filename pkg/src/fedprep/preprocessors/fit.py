"""The fit runner: support check, fit protocol, parameter delivery."""

from __future__ import annotations

from typing import Sequence

from ..datakit import ColumnarDataset
from ..errors import ProtocolError, UnsupportedPartition
from ..federation import LOCAL_ONLY, ROUND_TABLE, CommReport, ProtocolContext
from . import discretizers, encoders, imputers, scalers, transformers  # noqa: F401  (registration)
from ._common import FITTERS
from .spec import FitParameters, PreprocessorSpec


def supported_modes(spec: PreprocessorSpec) -> list[str]:
    keys = set(ROUND_TABLE) | LOCAL_ONLY
    return [m for m in ("horizontal", "vertical") if (spec.kind, spec.variant, m) in keys]


def check_supported(spec: PreprocessorSpec, mode: str) -> None:
    key = (spec.kind, spec.variant, mode)
    if key in ROUND_TABLE or key in LOCAL_ONLY:
        return
    label = spec.kind + (f"({spec.variant})" if spec.variant else "")
    modes = supported_modes(spec)
    raise UnsupportedPartition(
        f"{label} has no {mode} protocol; the round table lists it for: {', '.join(modes) or 'no partitioning'}"
    )


def fit_local(ctx: ProtocolContext, spec: PreprocessorSpec, data: Sequence[ColumnarDataset]) -> FitParameters:
    """Run the fit protocol without delivering the parameters."""
    check_supported(spec, ctx.mode)
    if len(data) != ctx.n_clients:
        raise ProtocolError(f"{len(data)} client datasets for {ctx.n_clients} clients")
    params = FITTERS[spec.kind](ctx, spec, data)
    params.mode = ctx.mode
    return params


def run_fit(
    ctx: ProtocolContext, spec: PreprocessorSpec, data: Sequence[ColumnarDataset]
) -> tuple[FitParameters, CommReport]:
    ctx.reset_meter()
    params = fit_local(ctx, spec, data)
    if params.delivery == "broadcast":
        ctx.broadcast(params.for_client(0), "params", reply=ctx.meter.rounds > 0)
    elif params.delivery == "scatter":
        ctx.scatter({c: params.for_client(c) for c in range(ctx.n_clients)}, "params")
    return params, ctx.meter.report(spec.kind + (f"({spec.variant})" if spec.variant else ""), ctx.mode)


def iteration_count(params: FitParameters) -> int | None:
    """The run's ``t``: how many times the iterated statistic was aggregated."""
    spec = params.spec
    if spec.kind == "PowerTransformer":
        return spec["n_iter"]
    if spec.kind == "KBinsDiscretizer" and spec["strategy"] == "kmeans":
        return max(p.get("iterations", 0) for p in params.columns.values())
    if spec.kind == "IterativeImputer":
        return params.shared.get("fits", 0)
    return None


def expected_rounds(params: FitParameters) -> dict[str, int]:
    """Round-table row for this fit with ``t`` filled in; empty for local-only fits."""
    row = ROUND_TABLE.get((params.spec.kind, params.spec.variant, params.mode), {})
    t = iteration_count(params)
    return {stat: (t if n == "t" else n) for stat, n in row.items()}


def rounds_match(params: FitParameters, report: CommReport) -> bool:
    """Do the measured per-statistic rounds equal the table's, statistic by statistic?"""
    want = expected_rounds(params)
    return all(report.rounds_by_statistic.get(s, 0) == n for s, n in want.items())
