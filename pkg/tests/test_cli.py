import json
from pathlib import Path

import numpy as np
import pytest

from fedprep import cli, datakit
from fedprep.datakit import Column, ColumnarDataset


@pytest.fixture
def adult_csv(tmp_path):
    path = tmp_path / "adult.csv"
    datakit.write_csv(datakit.adult_like(400, seed=1), path)
    return path


def write_config(tmp_path, **doc):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def run(*argv):
    return cli.main([str(a) for a in argv])


def shard_rows(out, c):
    return len((Path(out) / "shards" / f"client_{c}.csv").read_text().strip().split("\n")) - 1


def test_iid_shards(tmp_path):
    csv = tmp_path / "d.csv"
    datakit.write_csv(ColumnarDataset((Column.numeric("x", np.arange(100.0)),)), csv)
    out = tmp_path / "out"
    assert run("partition", "--dataset", csv, "--out", out, "--n-clients", 4) == 0
    assert [shard_rows(out, c) for c in range(4)] == [25, 25, 25, 25]
    plan = json.loads((out / "plan.json").read_text())
    assert plan["n_clients"] == 4


def test_dirichlet_is_reproducible(tmp_path, adult_csv):
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        args = ("partition", "--dataset", adult_csv, "--out", out, "--mode", "dirichlet",
                "--label", "income", "--alpha", 0.3, "--seed", 9)
        assert run(*args) == 0
        texts.append([(out / "shards" / f"client_{c}.csv").read_bytes() for c in range(4)])
    assert texts[0] == texts[1]


def test_vertical_groups(tmp_path):
    csv = tmp_path / "d.csv"
    cols = tuple(Column.numeric(f"c{j}", np.arange(10.0) + j) for j in range(5))
    datakit.write_csv(ColumnarDataset(cols), csv)
    cfg = write_config(tmp_path, dataset=str(csv), output_dir=str(tmp_path / "out"),
                       partition={"mode": "vertical", "n_clients": 2, "groups": [["c0", "c1", "c2"], ["c3", "c4"]]})
    assert run("partition", "--config", cfg) == 0
    headers = [(tmp_path / "out" / "shards" / f"client_{c}.csv").read_text().split("\n")[0] for c in range(2)]
    assert headers == ["c0,c1,c2", "c3,c4"]


def fit_pipeline(tmp_path, csv, pipeline, fmt="json"):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, dataset=str(csv), output_dir=str(out), report_format=fmt,
                       partition={"mode": "iid", "n_clients": 3, "seed": 2}, pipeline=pipeline)
    assert run("partition", "--config", cfg) == 0
    return cfg, out


def test_fit_reports_rounds(tmp_path, adult_csv, capsys):
    cfg, out = fit_pipeline(tmp_path, adult_csv, [{"kind": "StandardScaler", "columns": ["age", "hours-per-week"]}])
    capsys.readouterr()
    assert run("fit", "--config", cfg) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["rounds"] == 1 and rows[0]["rounds_match"]
    assert (out / "params" / "step0_StandardScaler.json").exists()
    assert (out / "transformed" / "client_2.csv").exists()


def test_transform_deterministic_and_unknown_category(tmp_path, adult_csv):
    cfg, out = fit_pipeline(tmp_path, adult_csv, [{"kind": "OrdinalEncoder", "columns": ["workclass"]}])
    assert run("fit", "--config", cfg) == 0
    params = out / "params" / "step0_OrdinalEncoder.json"
    shard = tmp_path / "new.csv"
    shard.write_text("workclass\nPrivate\nMartian\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for target in (a, b):
        assert run("transform", "--params", params, "--shard", shard, "--output", target) == 0
    assert a.read_bytes() == b.read_bytes()
    codes = a.read_text().split("\n")[1:3]
    cats = json.loads(params.read_text())["columns"]["workclass"]["categories"]
    assert codes == [str(cats.index("Private")), "-1"]


def test_simple_imputer_fills_all_missing_shard(tmp_path):
    out = tmp_path / "out"
    (out / "shards").mkdir(parents=True)
    (out / "shards" / "client_0.csv").write_text("x\n1\n3\n")
    (out / "shards" / "client_1.csv").write_text("x\n\n\n")
    plan = datakit.PartitionPlan("horizontal", 2, None, [0, 0, 1, 1])
    (out / "plan.json").write_text(plan.dumps())
    cfg = write_config(tmp_path, output_dir=str(out), schema={"x": "numeric"},
                       partition={"n_clients": 2}, pipeline=[{"kind": "SimpleImputer", "columns": ["x"]}])
    assert run("fit", "--config", cfg) == 0
    assert (out / "transformed" / "client_1.csv").read_text().split() == ["x", "2", "2"]


def test_bench_comm_ordering(tmp_path, capsys):
    out = tmp_path / "bench"
    assert run("bench-comm", "--rows", 3000, "--out", out, "--format", "json") == 0
    rows = {r["step"]: r for r in json.loads((out / "bench_comm.json").read_text())}
    kb = {k: r["kb_per_client"] for k, r in rows.items()}
    assert all(r["rounds_match"] for r in rows.values())
    assert kb["SimpleImputer(mean)"] * 5 < kb["SimpleImputer(median)"]
    assert kb["KBinsDiscretizer(uniform)"] < kb["KBinsDiscretizer(quantile)"]
    assert kb["StandardScaler"] < kb["RobustScaler"]


def test_verify_pass_and_corrupt(tmp_path, adult_csv, capsys):
    cfg, out = fit_pipeline(tmp_path, adult_csv, [
        {"kind": "StandardScaler", "columns": ["age"]},
        {"kind": "OneHotEncoder", "columns": ["sex"]},
    ])
    assert run("verify", "--config", cfg) == 0
    assert run("fit", "--config", cfg) == 0
    params = out / "params" / "step0_StandardScaler.json"
    assert run("verify", "--config", cfg, "--params", params) == 0
    doc = json.loads(params.read_text())
    doc["columns"]["age"]["mean"] += 1e-3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    capsys.readouterr()
    assert run("verify", "--config", cfg, "--params", bad) == 1
    assert '"passed": false' in capsys.readouterr().out


def test_vertical_robust_is_unsupported(tmp_path, capsys):
    csv = tmp_path / "d.csv"
    csv.write_text("age,hours\n30,40\n50,20\n")
    out = tmp_path / "out"
    cfg = write_config(tmp_path, dataset=str(csv), output_dir=str(out),
                       partition={"mode": "vertical", "n_clients": 2, "groups": [["age"], ["hours"]]},
                       pipeline=[{"kind": "RobustScaler", "columns": ["age"]}])
    assert run("partition", "--config", cfg) == 0
    capsys.readouterr()
    assert run("fit", "--config", cfg) == 2
    assert "UnsupportedPartition" in capsys.readouterr().err


@pytest.mark.parametrize(
    "doc, fragment",
    [
        ({"partition": {"n_clients": 0}}, "partition.n_clients"),
        ({"partition": {"mode": "dirichlet"}}, "partition.label"),
        ({"partition": {"mode": "ring"}}, "partition.mode"),
        ({"pipeline": [{"kind": "StandardScaler", "columns": ["x"], "options": {"k": 1}}]}, "pipeline[0]"),
        ({"report_format": "xml"}, "report_format"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, doc, fragment):
    cfg = write_config(tmp_path, dataset="x.csv", **doc)
    assert run("partition", "--config", cfg) == 2
    assert fragment in capsys.readouterr().err


def test_set_override(tmp_path, adult_csv):
    out = tmp_path / "o"
    assert run("partition", "--dataset", adult_csv, "--out", out, "--set", "partition.n_clients=5") == 0
    assert json.loads((out / "plan.json").read_text())["n_clients"] == 5
