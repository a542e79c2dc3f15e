"""Command-line entry point: ``fedprep {partition,fit,transform,bench-comm,verify}``.

Every command reads one JSON config; flags override individual fields.
Set ``FEDPREP_LOG`` (DEBUG, INFO, WARNING, ...) to change log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import datakit
from .datakit import ColumnarDataset, PartitionPlan
from .errors import ConfigError, FedPrepError
from .federation import CommReport, ProtocolContext
from .oracle import OracleReport, central_fit, compare
from .preprocessors import FitParameters, PreprocessorSpec, expected_rounds, rounds_match, run_fit, transform

log = logging.getLogger("fedprep")

KB = 1024
PARTITION_MODES = ("iid", "dirichlet", "vertical")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class PartitionConfig:
    mode: str = "iid"
    n_clients: int = 4
    alpha: float = 0.5
    seed: int = 0
    label: str | None = None
    groups: list[list[str]] | None = None
    label_holder: int | None = None

    @property
    def fl_mode(self) -> str:
        return "vertical" if self.mode == "vertical" else "horizontal"


@dataclass
class RunConfig:
    dataset: str | None = None
    schema: dict[str, str] | None = None
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    pipeline: list[PreprocessorSpec] = field(default_factory=list)
    output_dir: str = "fedprep-out"
    report_format: str = "text"

    @classmethod
    def from_json(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config: expected a JSON object")
        known = {"dataset", "schema", "partition", "pipeline", "output_dir", "report_format"}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"config: unknown fields {sorted(extra)}")
        part = doc.get("partition", {})
        if not isinstance(part, dict):
            raise ConfigError("partition: expected an object")
        pfields = set(PartitionConfig.__dataclass_fields__)
        if set(part) - pfields:
            raise ConfigError(f"partition: unknown fields {sorted(set(part) - pfields)}")
        pipeline = []
        for i, step in enumerate(doc.get("pipeline", [])):
            try:
                pipeline.append(PreprocessorSpec.from_json(step))
            except (ConfigError, TypeError) as exc:
                raise ConfigError(f"pipeline[{i}]: {exc}") from None
        cfg = cls(
            dataset=doc.get("dataset"),
            schema=doc.get("schema"),
            partition=PartitionConfig(**part),
            pipeline=pipeline,
            output_dir=doc.get("output_dir", "fedprep-out"),
            report_format=doc.get("report_format", "text"),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        p = self.partition
        if p.mode not in PARTITION_MODES:
            raise ConfigError(f"partition.mode: must be one of {PARTITION_MODES}, got {p.mode!r}")
        if not isinstance(p.n_clients, int) or p.n_clients < 1:
            raise ConfigError(f"partition.n_clients: must be a positive integer, got {p.n_clients!r}")
        if p.mode == "dirichlet":
            if not p.label:
                raise ConfigError("partition.label: required for dirichlet partitioning")
            if not (isinstance(p.alpha, (int, float)) and p.alpha > 0):
                raise ConfigError(f"partition.alpha: must be positive, got {p.alpha!r}")
        if p.mode == "vertical" and not p.groups:
            raise ConfigError("partition.groups: vertical partitioning needs column groups")
        if self.report_format not in ("json", "text"):
            raise ConfigError(f"report_format: must be 'json' or 'text', got {self.report_format!r}")


def _set_path(doc: dict, path: str, value: Any) -> None:
    parts = path.split(".")
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{path}: {p!r} is not an object")
    node[parts[-1]] = value


def load_config(args: argparse.Namespace) -> RunConfig:
    doc: dict = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
    overrides = {
        "dataset": getattr(args, "dataset", None),
        "output_dir": getattr(args, "out", None),
        "report_format": getattr(args, "format", None),
        "partition.mode": getattr(args, "mode", None),
        "partition.n_clients": getattr(args, "n_clients", None),
        "partition.alpha": getattr(args, "alpha", None),
        "partition.seed": getattr(args, "seed", None),
        "partition.label": getattr(args, "label", None),
    }
    for path, value in overrides.items():
        if value is not None:
            _set_path(doc, path, value)
    for item in getattr(args, "set", None) or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set {item!r}: expected key.path=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _set_path(doc, key, value)
    return RunConfig.from_json(doc)


# ---------------------------------------------------------------------------
# shared helpers


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(cfg: RunConfig) -> ColumnarDataset:
    if not cfg.dataset:
        raise ConfigError("dataset: a CSV path is required")
    return datakit.load_csv(cfg.dataset, cfg.schema)


def make_plan(cfg: RunConfig, data: ColumnarDataset) -> PartitionPlan:
    p = cfg.partition
    if p.mode == "iid":
        return datakit.partition_iid(data, p.n_clients, p.seed)
    if p.mode == "dirichlet":
        return datakit.partition_dirichlet_label_skew(data, p.label, p.n_clients, p.alpha, p.seed)
    return datakit.vertical_split(data, p.groups, p.label_holder, p.label)


def shard_path(out: Path, c: int) -> Path:
    return out / "shards" / f"client_{c}.csv"


def load_shards(cfg: RunConfig) -> tuple[PartitionPlan, list[ColumnarDataset]]:
    out = Path(cfg.output_dir)
    plan_file = out / "plan.json"
    if not plan_file.exists():
        raise ConfigError(f"{plan_file}: not found; run `fedprep partition` first")
    plan = PartitionPlan.from_json(json.loads(plan_file.read_text()))
    schema = cfg.schema or None
    views = []
    for c in range(plan.n_clients):
        path = shard_path(out, c)
        own = None
        if schema:
            header = path.read_text().split("\n", 1)[0].split(",")
            own = {k: v for k, v in schema.items() if k in header}
        views.append(datakit.load_csv(path, own))
    return plan, views


def _step_name(i: int, spec: PreprocessorSpec) -> str:
    return f"step{i}_{spec.kind}" + (f"_{spec.variant}" if spec.variant else "")


def _emit(cfg: RunConfig, doc: Any, text: str) -> None:
    print(json.dumps(doc, indent=2) if cfg.report_format == "json" else text)


def _transform_views(params: FitParameters, views: Sequence[ColumnarDataset]) -> list[ColumnarDataset]:
    return [transform(FitParameters.from_json(params.for_client(c)), v, client=c) for c, v in enumerate(views)]


# ---------------------------------------------------------------------------
# commands


def cmd_partition(cfg: RunConfig) -> int:
    data = _load_dataset(cfg)
    plan = make_plan(cfg, data)
    out = _out(cfg)
    (out / "shards").mkdir(exist_ok=True)
    for c, view in enumerate(plan.views(data)):
        datakit.write_csv(view, shard_path(out, c))
    (out / "plan.json").write_text(plan.dumps() + "\n")
    sizes = [v.n_rows for v in plan.views(data)]
    log.info("wrote %d shards to %s", plan.n_clients, out / "shards")
    _emit(cfg, {"plan": str(out / "plan.json"), "rows_per_client": sizes},
          f"{plan.n_clients} shards in {out / 'shards'} (rows per client: {sizes})")
    return 0


def cmd_fit(cfg: RunConfig) -> int:
    if not cfg.pipeline:
        raise ConfigError("pipeline: at least one preprocessor step is required")
    plan, views = load_shards(cfg)
    out = _out(cfg)
    (out / "params").mkdir(exist_ok=True)
    (out / "reports").mkdir(exist_ok=True)
    summary = []
    for i, spec in enumerate(cfg.pipeline):
        ctx = ProtocolContext(plan.n_clients, plan.mode, seed=cfg.partition.seed)
        params, report = run_fit(ctx, spec, views)
        name = _step_name(i, spec)
        (out / "params" / f"{name}.json").write_text(params.dumps() + "\n")
        (out / "reports" / f"{name}.json").write_text(report.dumps() + "\n")
        for w in params.warnings:
            log.warning("%s: %s", name, w)
        summary.append(_report_row(name, params, report))
        views = _transform_views(params, views)
    (out / "transformed").mkdir(exist_ok=True)
    for c, v in enumerate(views):
        datakit.write_csv(v, out / "transformed" / f"client_{c}.csv")
    _emit(cfg, summary, _report_table(summary))
    return 0


def _report_row(name: str, params: FitParameters, report: CommReport) -> dict:
    per_client = report.per_client_bytes()
    return {
        "step": name,
        "mode": report.mode,
        "rounds": report.rounds,
        "rounds_by_statistic": report.rounds_by_statistic,
        "expected_rounds": expected_rounds(params),
        "rounds_match": rounds_match(params, report),
        "kb_per_client": round(float(np.mean(per_client)) / KB, 3),
        "uplink_kb_per_client": round(float(np.mean(report.per_client_uplink_bytes)) / KB, 3),
    }


def _report_table(rows: list[dict]) -> str:
    head = f"{'step':<42} {'mode':<10} {'rounds':>6} {'KB/client':>10}  rounds by statistic (table)"
    lines = [head, "-" * len(head)]
    for r in rows:
        stats = ", ".join(f"{k}={v}" for k, v in sorted(r["rounds_by_statistic"].items())) or "-"
        mark = "ok" if r["rounds_match"] else "MISMATCH"
        lines.append(
            f"{r['step']:<42} {r['mode']:<10} {r['rounds']:>6} {r['kb_per_client']:>10.2f}  {stats} ({mark})"
        )
    return "\n".join(lines)


def cmd_transform(params_file: str, shard: str, out_file: str, client: int | None, schema: dict | None) -> int:
    params = FitParameters.loads(Path(params_file).read_text())
    data = datakit.load_csv(shard, schema)
    result = transform(params, data, client=client)
    datakit.write_csv(result, out_file)
    log.info("wrote %s", out_file)
    return 0


# Preprocessor matrix for bench-comm when the config has no pipeline.
def default_bench_pipeline() -> list[PreprocessorSpec]:
    num = list(datakit.ADULT_NUMERIC)
    return [
        PreprocessorSpec("MaxAbsScaler", num),
        PreprocessorSpec("MinMaxScaler", num),
        PreprocessorSpec("StandardScaler", num),
        PreprocessorSpec("RobustScaler", num),
        PreprocessorSpec("Normalizer", num),
        PreprocessorSpec("LabelBinarizer", ["sex"]),
        PreprocessorSpec("MultiLabelBinarizer", ["workclass"]),
        PreprocessorSpec("LabelEncoder", ["income"]),
        PreprocessorSpec("OneHotEncoder", ["workclass", "education", "native-country"]),
        PreprocessorSpec("OrdinalEncoder", ["workclass", "education", "native-country"], {"min_count": 10}),
        PreprocessorSpec("TargetEncoder", ["workclass", "education", "native-country"], {"label": "income"}),
        PreprocessorSpec("PowerTransformer", num),
        PreprocessorSpec("QuantileTransformer", num),
        PreprocessorSpec("SplineTransformer", num),
        PreprocessorSpec("Binarizer", num),
        PreprocessorSpec("KBinsDiscretizer", num, {"strategy": "uniform"}),
        PreprocessorSpec("KBinsDiscretizer", num, {"strategy": "quantile"}),
        PreprocessorSpec("KBinsDiscretizer", num, {"strategy": "kmeans"}),
        PreprocessorSpec("SimpleImputer", num, {"strategy": "mean"}),
        PreprocessorSpec("SimpleImputer", num, {"strategy": "median"}),
        PreprocessorSpec("SimpleImputer", ["workclass", "occupation"], {"strategy": "most_frequent"}),
        PreprocessorSpec("KNNImputer", num),
        PreprocessorSpec("IterativeImputer", num),
    ]


def bench_comm(
    data: ColumnarDataset, plan: PartitionPlan, pipeline: Sequence[PreprocessorSpec], dataset_name: str, seed: int = 0
) -> list[dict]:
    """Fit each spec independently on the raw shards and collect meter readouts."""
    views = plan.views(data)
    rows = []
    for spec in pipeline:
        ctx = ProtocolContext(plan.n_clients, plan.mode, seed=seed)
        params, report = run_fit(ctx, spec, views)
        row = _report_row(spec.kind + (f"({spec.variant})" if spec.variant else ""), params, report)
        row["dataset"] = dataset_name
        rows.append(row)
    return rows


def cmd_bench_comm(cfg: RunConfig, rows_if_synthetic: int) -> int:
    if cfg.dataset:
        data, name = _load_dataset(cfg), Path(cfg.dataset).stem
    else:
        data, name = datakit.adult_like(rows_if_synthetic, seed=cfg.partition.seed), "adult-like"
    plan = make_plan(cfg, data)
    pipeline = cfg.pipeline or default_bench_pipeline()
    rows = bench_comm(data, plan, pipeline, name, cfg.partition.seed)
    out = _out(cfg)
    (out / "bench_comm.json").write_text(json.dumps(rows, indent=2) + "\n")
    text = f"dataset: {name}, {plan.n_clients} clients, {plan.mode}; KB = 1024 bytes of payload " \
           f"(informational: absolute sizes depend on sketch serialization)\n" + _report_table(rows)
    _emit(cfg, rows, text)
    return 0 if all(r["rounds_match"] for r in rows) else 1


def cmd_verify(cfg: RunConfig, params_files: Sequence[str] | None = None) -> int:
    """Federated fit (or given parameter files) against the centralized oracle."""
    plan, views = load_shards(cfg)
    reports: list[OracleReport] = []
    if params_files:
        pooled = plan.reassemble(views)
        for f in params_files:
            fed = FitParameters.loads(Path(f).read_text())
            central = central_fit(fed.spec, pooled, mode=plan.mode)
            reports.append(compare(fed, central, pooled=pooled, plan=plan))
    else:
        if not cfg.pipeline:
            raise ConfigError("pipeline: at least one preprocessor step is required")
        for spec in cfg.pipeline:
            pooled = plan.reassemble(views)
            ctx = ProtocolContext(plan.n_clients, plan.mode, seed=cfg.partition.seed)
            fed, _ = run_fit(ctx, spec, views)
            central = central_fit(spec, pooled, mode=plan.mode)
            reports.append(compare(fed, central, pooled=pooled, plan=plan))
            views = _transform_views(fed, views)
    ok = all(r.passed for r in reports)
    text = "\n".join(r.table() for r in reports) + f"\n\n{'ALL CHECKS PASSED' if ok else 'VERIFICATION FAILED'}"
    _emit(cfg, {"passed": ok, "reports": [r.to_json() for r in reports]}, text)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--dataset", help="CSV path (overrides config.dataset)")
    p.add_argument("--out", help="output directory (overrides config.output_dir)")
    p.add_argument("--format", choices=("json", "text"), help="report format")
    p.add_argument("--mode", choices=PARTITION_MODES, help="partition mode")
    p.add_argument("--n-clients", type=int, dest="n_clients")
    p.add_argument("--alpha", type=float, help="Dirichlet concentration")
    p.add_argument("--seed", type=int)
    p.add_argument("--label", help="label column")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config field (JSON value)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedprep", description="Federated preprocessing over partitioned CSV data.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("partition", "split a CSV into per-client shards"),
        ("fit", "fit the pipeline over the shards"),
        ("verify", "compare federated fits with centralized ones"),
    ):
        _common(sub.add_parser(name, help=helptext))
    sub.choices["verify"].add_argument("--params", action="append", help="verify this parameter file instead of fitting")

    bench = sub.add_parser("bench-comm", help="per-client communication cost of each preprocessor")
    _common(bench)
    bench.add_argument("--rows", type=int, default=30162, help="rows of synthetic Adult-shaped data without --dataset")

    tr = sub.add_parser("transform", help="apply fitted parameters to one shard")
    tr.add_argument("--params", required=True)
    tr.add_argument("--shard", required=True)
    tr.add_argument("--output", required=True)
    tr.add_argument("--client", type=int, help="client id, needed for per-client imputations")
    tr.add_argument("--schema", help="JSON object of column kinds")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("FEDPREP_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        if args.command == "transform":
            schema = json.loads(args.schema) if args.schema else None
            return cmd_transform(args.params, args.shard, args.output, args.client, schema)
        cfg = load_config(args)
        if args.command == "partition":
            return cmd_partition(cfg)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "bench-comm":
            return cmd_bench_comm(cfg, args.rows)
        return cmd_verify(cfg, args.params)
    except FedPrepError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
