"""Columnar datasets, CSV ingestion and horizontal/vertical partitioning.

A :class:`ColumnarDataset` is what one client holds locally.  Missing cells are
tracked with an explicit boolean mask, so a NaN that appears in the source data
is a value like any other and never confused with "missing".
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError, PartitionError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
DEFAULT_MISSING_TOKENS = frozenset({"", "?", "NA"})


@dataclass(frozen=True, eq=False)
class Column:
    name: str
    kind: str
    values: np.ndarray
    missing: np.ndarray

    def __post_init__(self) -> None:
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown column kind {self.kind!r}")
        if self.values.shape != self.missing.shape or self.values.ndim != 1:
            raise ValueError(f"column {self.name!r}: values and mask must be 1-D and aligned")

    @classmethod
    def numeric(cls, name: str, values: Iterable, missing: Iterable | None = None) -> "Column":
        vals = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64)
        if missing is None:
            mask = np.zeros(vals.shape, dtype=bool)
        else:
            mask = np.asarray(missing, dtype=bool).copy()
        vals = vals.copy()
        vals[mask] = 0.0
        return cls(name, NUMERIC, vals, mask)

    @classmethod
    def categorical(cls, name: str, values: Iterable, missing: Iterable | None = None) -> "Column":
        raw = list(values)
        if missing is None:
            mask = np.array([v is None for v in raw], dtype=bool)
        else:
            mask = np.asarray(missing, dtype=bool).copy()
        vals = np.array(["" if (m or v is None) else str(v) for v, m in zip(raw, mask)], dtype=object)
        return cls(name, CATEGORICAL, vals, mask)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    def present(self) -> np.ndarray:
        """Values of the non-missing cells."""
        return self.values[~self.missing]

    def take(self, rows: np.ndarray) -> "Column":
        return Column(self.name, self.kind, self.values[rows], self.missing[rows])

    def with_name(self, name: str) -> "Column":
        return Column(name, self.kind, self.values, self.missing)

    def as_float(self) -> np.ndarray:
        """Numeric values with NaN in missing cells (a view for algorithms, not storage)."""
        if not self.is_numeric:
            raise TypeError(f"column {self.name!r} is categorical")
        out = self.values.copy()
        out[self.missing] = np.nan
        return out

    def equals(self, other: "Column") -> bool:
        if self.name != other.name or self.kind != other.kind:
            return False
        if not np.array_equal(self.missing, other.missing):
            return False
        if self.is_numeric:
            # bit-exact, NaN payloads included
            return self.values.tobytes() == other.values.tobytes()
        return list(self.values) == list(other.values)


@dataclass(frozen=True, eq=False)
class ColumnarDataset:
    columns: tuple[Column, ...]
    n_rows: int = field(default=-1)

    def __post_init__(self) -> None:
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        n = self.n_rows
        if n < 0:
            n = len(cols[0]) if cols else 0
            object.__setattr__(self, "n_rows", n)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names in {names}")
        for c in cols:
            if len(c) != n:
                raise ValueError(f"column {c.name!r} has {len(c)} cells, expected {n}")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def __getitem__(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def select(self, names: Sequence[str]) -> "ColumnarDataset":
        return ColumnarDataset(tuple(self[n] for n in names), self.n_rows)

    def drop(self, names: Iterable[str]) -> "ColumnarDataset":
        gone = set(names)
        return ColumnarDataset(tuple(c for c in self.columns if c.name not in gone), self.n_rows)

    def take(self, rows: Sequence[int] | np.ndarray) -> "ColumnarDataset":
        idx = np.asarray(rows, dtype=np.int64)
        return ColumnarDataset(tuple(c.take(idx) for c in self.columns), len(idx))

    def replace(self, name: str, new: Sequence[Column]) -> "ColumnarDataset":
        """Swap column ``name`` for ``new`` (possibly several columns) in place."""
        cols: list[Column] = []
        for c in self.columns:
            cols.extend(new if c.name == name else [c])
        return ColumnarDataset(tuple(cols), self.n_rows)

    def numeric_matrix(self, names: Sequence[str]) -> np.ndarray:
        """Float matrix of the named numeric columns, NaN where missing."""
        if not names:
            return np.zeros((self.n_rows, 0))
        return np.column_stack([self[n].as_float() for n in names])

    def equals(self, other: "ColumnarDataset") -> bool:
        return (
            self.n_rows == other.n_rows
            and self.names == other.names
            and all(a.equals(b) for a, b in zip(self.columns, other.columns))
        )

    @staticmethod
    def concat_rows(parts: Sequence["ColumnarDataset"]) -> "ColumnarDataset":
        first = parts[0]
        cols = []
        for i, c in enumerate(first.columns):
            pieces = [p.columns[i] for p in parts]
            if any(pc.name != c.name or pc.kind != c.kind for pc in pieces):
                raise ValueError("row concatenation needs identical schemas")
            cols.append(
                Column(
                    c.name,
                    c.kind,
                    np.concatenate([pc.values for pc in pieces]),
                    np.concatenate([pc.missing for pc in pieces]),
                )
            )
        return ColumnarDataset(tuple(cols), sum(p.n_rows for p in parts))

    @staticmethod
    def concat_columns(parts: Sequence["ColumnarDataset"]) -> "ColumnarDataset":
        n = parts[0].n_rows
        if any(p.n_rows != n for p in parts):
            raise ValueError("column concatenation needs aligned rows")
        return ColumnarDataset(tuple(c for p in parts for c in p.columns), n)


# ---------------------------------------------------------------------------
# CSV


def load_csv(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS,
) -> ColumnarDataset:
    """Read a comma-separated file with a header row.

    ``schema`` maps column names to ``"numeric"`` or ``"categorical"``.
    Columns without a hint are numeric when every present cell parses as a
    float, categorical otherwise.
    """
    tokens = set(missing_tokens)
    schema = dict(schema or {})
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row expected") from None
        header = [h.strip() for h in header]
        rows = []
        for i, row in enumerate(reader):
            if not row:
                # a blank line is one missing cell when there is a single column
                if len(header) != 1:
                    continue
                row = [""]
            if len(row) != len(header):
                raise ParseError(f"{path}: row {i} has {len(row)} fields, header has {len(header)}")
            rows.append([cell.strip() for cell in row])
    unknown = set(schema) - set(header)
    if unknown:
        raise ParseError(f"{path}: schema names unknown columns {sorted(unknown)}")

    cols = []
    for j, name in enumerate(header):
        raw = [r[j] for r in rows]
        missing = np.array([cell in tokens for cell in raw], dtype=bool)
        kind = schema.get(name)
        if kind is None:
            kind = NUMERIC if all(_is_float(c) for c, m in zip(raw, missing) if not m) else CATEGORICAL
        if kind == NUMERIC:
            vals = np.zeros(len(raw))
            for i, (cell, m) in enumerate(zip(raw, missing)):
                if m:
                    continue
                try:
                    vals[i] = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: cell (row {i}, column {name!r}) = {cell!r} is not numeric") from None
            cols.append(Column(name, NUMERIC, vals, missing))
        elif kind == CATEGORICAL:
            cols.append(Column.categorical(name, raw, missing))
        else:
            raise ParseError(f"{path}: column {name!r} has unknown kind {kind!r}")
    return ColumnarDataset(tuple(cols), len(rows))


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def format_number(x: float) -> str:
    if math.isfinite(x) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def write_csv(data: ColumnarDataset, path: str | Path) -> None:
    """Write ``data`` as CSV; missing cells become empty fields."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.names)
        for i in range(data.n_rows):
            row = []
            for c in data.columns:
                if c.missing[i]:
                    row.append("")
                elif c.is_numeric:
                    row.append(format_number(c.values[i]))
                else:
                    row.append(c.values[i])
            w.writerow(row)


def schema_of(data: ColumnarDataset) -> dict[str, str]:
    return {c.name: c.kind for c in data.columns}


# ---------------------------------------------------------------------------
# Partitioning


@dataclass
class PartitionPlan:
    """Row-to-client (horizontal) or column-to-client (vertical) assignment."""

    mode: str
    n_clients: int
    seed: int | None
    assignments: list
    label_holder: int | None = None
    columns: list[str] | None = None

    def views(self, data: ColumnarDataset) -> list[ColumnarDataset]:
        if self.mode == "horizontal":
            owner = np.asarray(self.assignments)
            if len(owner) != data.n_rows:
                raise PartitionError(f"plan covers {len(owner)} rows, dataset has {data.n_rows}")
            return [data.take(np.flatnonzero(owner == c)) for c in range(self.n_clients)]
        names = self.columns or data.names
        if len(self.assignments) != len(names) or set(names) != set(data.names):
            raise PartitionError("plan does not cover the dataset's columns")
        groups: list[list[str]] = [[] for _ in range(self.n_clients)]
        for name, c in zip(names, self.assignments):
            groups[c].append(name)
        return [data.select(g) for g in groups]

    def reassemble(self, views: Sequence[ColumnarDataset]) -> ColumnarDataset:
        """Inverse of :meth:`views`."""
        if self.mode == "horizontal":
            owner = np.asarray(self.assignments)
            stacked = ColumnarDataset.concat_rows(list(views))
            order = np.concatenate([np.flatnonzero(owner == c) for c in range(self.n_clients)])
            inverse = np.empty_like(order)
            inverse[order] = np.arange(len(order))
            return stacked.take(inverse)
        joined = ColumnarDataset.concat_columns(list(views))
        return joined.select(self.columns or joined.names)

    def to_json(self) -> dict:
        doc = {
            "n_clients": self.n_clients,
            "mode": self.mode,
            "seed": self.seed,
            "assignments": [int(a) for a in self.assignments],
        }
        if self.mode == "vertical":
            doc["columns"] = list(self.columns or [])
            doc["label_holder"] = self.label_holder
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "PartitionPlan":
        return cls(
            doc["mode"],
            int(doc["n_clients"]),
            doc.get("seed"),
            list(doc["assignments"]),
            doc.get("label_holder"),
            doc.get("columns"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def sizes(self) -> list[int]:
        counts = np.bincount(np.asarray(self.assignments, dtype=np.int64), minlength=self.n_clients)
        return [int(x) for x in counts]


def partition_iid(data: ColumnarDataset, n_clients: int, seed: int) -> PartitionPlan:
    """Shuffle rows and deal them out evenly; client sizes differ by at most one."""
    if n_clients < 1:
        raise PartitionError("n_clients must be >= 1")
    if n_clients > data.n_rows:
        raise PartitionError(f"cannot split {data.n_rows} rows across {n_clients} clients")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n_rows)
    owner = np.empty(data.n_rows, dtype=np.int64)
    for c, chunk in enumerate(np.array_split(perm, n_clients)):
        owner[chunk] = c
    return PartitionPlan("horizontal", n_clients, seed, owner.tolist())


_DIRICHLET_RETRIES = 10


def partition_dirichlet_label_skew(
    data: ColumnarDataset, label: str, n_clients: int, alpha: float, seed: int
) -> PartitionPlan:
    """Label-skewed split: each label's rows are divided by Dirichlet(alpha) proportions.

    If some client ends up empty, the largest label's proportions are redrawn
    up to 10 times; after that its rows are dealt round-robin.
    """
    if n_clients < 1:
        raise PartitionError("n_clients must be >= 1")
    if not alpha > 0:
        raise PartitionError("alpha must be positive")
    if n_clients > data.n_rows:
        raise PartitionError(f"cannot split {data.n_rows} rows across {n_clients} clients")
    col = data[label]
    if col.is_numeric:
        keys = np.array([format_number(v) if not m else "" for v, m in zip(col.values, col.missing)], dtype=object)
    else:
        keys = col.values
    labels = sorted(set(keys[~col.missing]))
    if len(labels) < 1:
        raise PartitionError(f"label column {label!r} has no values")
    rng = np.random.default_rng(seed)
    owner = np.full(data.n_rows, -1, dtype=np.int64)

    # rows with a missing label are treated as one more label group
    groups = [np.flatnonzero((keys == lab) & ~col.missing) for lab in labels]
    if col.missing.any():
        groups.append(np.flatnonzero(col.missing))
    groups = [rng.permutation(g) for g in groups]

    def deal(rows: np.ndarray) -> None:
        p = rng.dirichlet(np.full(n_clients, alpha))
        cuts = (np.cumsum(p)[:-1] * len(rows)).astype(np.int64)
        for c, chunk in enumerate(np.split(rows, cuts)):
            owner[chunk] = c

    for rows in groups:
        deal(rows)

    def empty_clients() -> np.ndarray:
        return np.flatnonzero(np.bincount(owner, minlength=n_clients) == 0)

    if len(empty_clients()):
        largest = max(groups, key=len)
        for _ in range(_DIRICHLET_RETRIES):
            deal(largest)
            if not len(empty_clients()):
                break
        else:
            owner[largest] = np.arange(len(largest)) % n_clients
        if len(empty_clients()):
            raise PartitionError("could not give every client at least one row")
    return PartitionPlan("horizontal", n_clients, seed, owner.tolist())


def vertical_split(
    data: ColumnarDataset,
    column_groups: Sequence[Iterable[str]],
    label_holder: int | None = None,
    label: str | None = None,
) -> PartitionPlan:
    """Assign each column to the client whose group names it."""
    groups = [list(g) for g in column_groups]
    owner: dict[str, int] = {}
    for c, g in enumerate(groups):
        for name in g:
            if name in owner:
                raise PartitionError(f"column {name!r} appears in groups {owner[name]} and {c}")
            if name not in data:
                raise PartitionError(f"column {name!r} not in dataset")
            owner[name] = c
    missing = [n for n in data.names if n not in owner]
    if missing:
        raise PartitionError(f"columns not assigned to any client: {missing}")
    if label is not None:
        if label_holder is None:
            raise PartitionError("a label column needs a label_holder")
        if owner[label] != label_holder:
            raise PartitionError(
                f"label column {label!r} is in group {owner[label]} but label_holder is {label_holder}"
            )
    if label_holder is not None and not 0 <= label_holder < len(groups):
        raise PartitionError(f"label_holder {label_holder} out of range")
    return PartitionPlan("vertical", len(groups), None, [owner[n] for n in data.names], label_holder, data.names)


def train_test_split(data: ColumnarDataset, test_fraction: float, seed: int) -> tuple[ColumnarDataset, ColumnarDataset]:
    """Unstratified random split."""
    if not 0.0 < test_fraction < 1.0:
        raise PartitionError("test_fraction must be in (0, 1)")
    perm = np.random.default_rng(seed).permutation(data.n_rows)
    n_test = int(round(test_fraction * data.n_rows))
    return data.take(np.sort(perm[n_test:])), data.take(np.sort(perm[:n_test]))


# ---------------------------------------------------------------------------
# Synthetic data with the shape of the UCI Adult table

ADULT_CATEGORIES: dict[str, list[str]] = {
    "workclass": ["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
                  "State-gov", "Without-pay", "Never-worked"],
    "education": ["Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
                  "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th",
                  "Doctorate", "5th-6th", "Preschool"],
    "marital-status": ["Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
                       "Married-spouse-absent", "Married-AF-spouse"],
    "occupation": ["Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
                   "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
                   "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
                   "Armed-Forces"],
    "relationship": ["Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"],
    "race": ["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"],
    "sex": ["Female", "Male"],
    "native-country": ["United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
                       "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China",
                       "Cuba", "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica",
                       "Vietnam", "Mexico", "Portugal", "Ireland", "France", "Dominican-Republic",
                       "Laos", "Ecuador", "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala",
                       "Nicaragua", "Scotland", "Thailand", "Yugoslavia", "El-Salvador",
                       "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands"],
}
ADULT_NUMERIC = ["age", "fnlwgt", "education-num", "capital-gain", "capital-loss", "hours-per-week"]
ADULT_ORDER = ["age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
               "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
               "hours-per-week", "native-country"]


def adult_like(n_rows: int, seed: int = 0, missing_rate: float = 0.01) -> ColumnarDataset:
    """Random table with Adult's schema: 14 features (8 categorical) plus ``income``.

    Category frequencies are Zipf-skewed; numeric columns follow rough
    marginals of the real table.  Only for protocol and cost experiments.
    """
    rng = np.random.default_rng(seed)
    cols: dict[str, Column] = {}
    age = np.clip(rng.gamma(6.0, 6.5, n_rows) + 17, 17, 90).round()
    cols["age"] = Column.numeric("age", age)
    cols["fnlwgt"] = Column.numeric("fnlwgt", rng.lognormal(12.0, 0.55, n_rows).round())
    cols["education-num"] = Column.numeric("education-num", rng.integers(1, 17, n_rows).astype(float))
    gain = np.where(rng.random(n_rows) < 0.08, rng.lognormal(8.5, 1.0, n_rows).round(), 0.0)
    loss = np.where(rng.random(n_rows) < 0.05, rng.lognormal(7.4, 0.3, n_rows).round(), 0.0)
    cols["capital-gain"] = Column.numeric("capital-gain", gain)
    cols["capital-loss"] = Column.numeric("capital-loss", loss)
    cols["hours-per-week"] = Column.numeric("hours-per-week", np.clip(rng.normal(40, 12, n_rows), 1, 99).round())
    for name, cats in ADULT_CATEGORIES.items():
        w = 1.0 / np.arange(1, len(cats) + 1) ** 1.3
        picks = rng.choice(len(cats), size=n_rows, p=w / w.sum())
        miss = rng.random(n_rows) < (missing_rate if name in ("workclass", "occupation", "native-country") else 0)
        cols[name] = Column.categorical(name, [cats[i] for i in picks], miss)
    score = 0.04 * (age - 38) + 0.25 * (cols["education-num"].values - 10) + (gain > 0) * 1.5
    income = np.where(score + rng.normal(0, 1.2, n_rows) > 1.0, ">50K", "<=50K")
    ordered = [cols[n] for n in ADULT_ORDER] + [Column.categorical("income", income)]
    return ColumnarDataset(tuple(ordered), n_rows)
