"""Centralized reference implementations and federated-versus-central comparison.

Everything here works on pooled data with direct formulas: sorting for
quantiles, exact counts, exhaustive distance scans, full-matrix solves.  No
code is shared with the federated path beyond the data and parameter types.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import optimize, special, stats

from .datakit import Column, ColumnarDataset, PartitionPlan
from .errors import CompareError, FitError
from .preprocessors.spec import FitParameters, PreprocessorSpec

EXACT_REL = 1e-12
SKETCH_RANK = 0.02
ITERATIVE_REL = 1e-3

EXACT_KINDS = {
    "MaxAbsScaler", "MinMaxScaler", "StandardScaler", "Normalizer", "LabelBinarizer", "MultiLabelBinarizer",
    "LabelEncoder", "OneHotEncoder", "OrdinalEncoder", "TargetEncoder", "Binarizer",
}


# ---------------------------------------------------------------------------
# small centralized models


def sorted_quantile(x: np.ndarray, q) -> np.ndarray:
    """Lower empirical quantile: the smallest value whose rank reaches ``q·n``."""
    return np.quantile(np.asarray(x, dtype=np.float64), q, method="inverted_cdf")


def lloyd(X: np.ndarray, init: np.ndarray, max_iter: int = 300, tol: float = 1e-9) -> list[np.ndarray]:
    """Centralized Lloyd iterations; returns the centroid trajectory (init first)."""
    X = np.asarray(X, dtype=np.float64).reshape(len(X), -1)
    C = np.asarray(init, dtype=np.float64).reshape(len(init), -1).copy()
    traj = [C.copy()]
    for _ in range(max_iter):
        labels = np.array([int(np.argmin([np.sum((x - c) ** 2) for c in C])) for x in X])
        new = C.copy()
        for j in range(len(C)):
            members = X[labels == j]
            if len(members):
                new[j] = members.sum(axis=0) / len(members)
        shift = np.max(np.abs(new - C))
        C = new
        traj.append(C.copy())
        if shift < tol:
            break
    return traj


def nan_euclidean(a: np.ndarray, b: np.ndarray) -> float:
    both = ~(np.isnan(a) | np.isnan(b))
    if not both.any():
        return math.inf
    # exact rational sum of squares, rounded once: independent of summation order
    sq = float(sum(Fraction(d) ** 2 for d in (a[both] - b[both]).tolist()))
    return math.sqrt(len(a) / both.sum() * sq)


def knn_oracle(X: np.ndarray, y: np.ndarray, query: np.ndarray, k: int, weights: str = "uniform") -> float:
    """Exhaustive k-NN regression; ties go to the lower row index."""
    d = np.array([nan_euclidean(query, x) for x in X])
    order = sorted((di, i) for i, di in enumerate(d) if math.isfinite(di))[:k]
    if not order:
        raise FitError("no neighbor shares a coordinate with the query")
    dist = np.array([o[0] for o in order])
    vals = np.array([y[o[1]] for o in order])
    if weights == "uniform":
        return float(vals.mean())
    if np.any(dist == 0):
        return float(vals[dist == 0].mean())
    w = 1.0 / dist
    return float((w * vals).sum() / w.sum())


@dataclass
class CentralBLR:
    alpha: float
    beta: float
    omega: np.ndarray
    iter: int
    trace: list[np.ndarray] = field(default_factory=list)


def blr_oracle(
    X: np.ndarray, y: np.ndarray, a1=1e-6, a2=1e-6, b1=1e-6, b2=1e-6, alpha=1.0, beta=1.0, tol=1e-4, max_iter=300
) -> CentralBLR:
    """Evidence-maximizing Bayesian linear regression with dense solves."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = X.shape
    XtX, Xty = X.T @ X, X.T @ y
    lam = np.linalg.eigvalsh(XtX)
    lam = lam[lam > 1e-12 * max(lam.max(initial=0.0), 0.0)]
    trace = []
    for it in range(1, max_iter + 1):
        omega = beta * np.linalg.solve(alpha * np.eye(m) + beta * XtX, Xty)
        trace.append(omega)
        r = y - X @ omega
        gamma = float(np.sum(beta * lam / (alpha + beta * lam)))
        na = (gamma + 2 * a1) / max(float(omega @ omega) + 2 * a2, 1e-300)
        nb = (n - gamma + 2 * b1) / max(float(r @ r) + 2 * b2, 1e-300)
        if abs(math.log(na / alpha)) + abs(math.log(nb / beta)) < tol:
            return CentralBLR(alpha, beta, omega, it, trace)
        alpha, beta = na, nb
    return CentralBLR(alpha, beta, omega, max_iter, trace)


def perceptron(X: np.ndarray, y: np.ndarray, max_epochs: int) -> tuple[bool, int]:
    """Unit-rate perceptron with bias on ±1 labels; (reached zero error, epochs used)."""
    rows = [(float(a), float(b), float(t)) for (a, b), t in zip(np.asarray(X, dtype=np.float64), y)]
    w0 = w1 = bias = 0.0
    for epoch in range(1, max_epochs + 1):
        mistakes = 0
        for a, b, t in rows:
            if t * (w0 * a + w1 * b + bias) <= 0:
                w0 += t * a
                w1 += t * b
                bias += t
                mistakes += 1
        if mistakes == 0:
            return True, epoch
    return False, max_epochs


def scaling_pathology_fixture(
    seed: int = 0, n_per_client: int = 50
) -> tuple[list[ColumnarDataset], list[np.ndarray]]:
    """Two clients, one class each, whose local standardizations coincide.

    Client 0 holds class -1 at P + (-3, 0), client 1 holds class +1 at
    P + (3, 0) for one shared point cloud P inside the unit square.  Pooled,
    the classes are split by x1 = 0.  Per-client standardization maps both
    clients onto the same standardized cloud, now carrying opposite labels.
    """
    rng = np.random.default_rng(seed)
    P = rng.uniform(-1.0, 1.0, size=(n_per_client, 2))
    clients, labels = [], []
    for shift, label in ((-3.0, -1.0), (3.0, 1.0)):
        Z = P + np.array([shift, 0.0])
        clients.append(ColumnarDataset((Column.numeric("x1", Z[:, 0]), Column.numeric("x2", Z[:, 1]))))
        labels.append(np.full(n_per_client, label))
    return clients, labels


# ---------------------------------------------------------------------------
# central_fit


def central_fit(spec: PreprocessorSpec, pooled: ColumnarDataset, mode: str = "horizontal") -> FitParameters:
    """Fit ``spec`` on pooled data by direct formulas.

    ``mode`` only matters for the Normalizer, whose vertical fit ships row norms.
    """
    fn = _CENTRAL.get(spec.kind)
    if fn is None:
        raise FitError(f"no centralized fit for {spec.kind!r}")
    params = FitParameters(spec, mode=mode, delivery="none")
    fn(spec, pooled, params)
    return params


def _present(pooled: ColumnarDataset, name: str) -> np.ndarray:
    x = pooled[name].present()
    if len(x) == 0:
        raise FitError(f"column {name!r} has no observed values")
    return x


def _c_maxabs(spec, pooled, params):
    for n in spec.columns:
        params.columns[n] = {"max_abs": float(np.max(np.abs(_present(pooled, n))))}


def _c_minmax(spec, pooled, params):
    for n in spec.columns:
        x = _present(pooled, n)
        params.columns[n] = {"min": float(x.min()), "max": float(x.max())}


def _c_standard(spec, pooled, params):
    for n in spec.columns:
        x = _present(pooled, n)
        if x.min() == x.max():
            params.columns[n] = {"mean": float(x[0]), "std": 0.0, "constant": True}
            continue
        # two-pass population variance: the accurate value, not a replay of the one-pass formula
        mu = math.fsum(x) / len(x)
        var = math.fsum((x - mu) ** 2) / len(x)
        params.columns[n] = {"mean": mu, "std": math.sqrt(var), "constant": var == 0.0}


def _c_robust(spec, pooled, params):
    for n in spec.columns:
        q1, q2, q3 = sorted_quantile(_present(pooled, n), [0.25, 0.5, 0.75])
        params.columns[n] = {"q1": float(q1), "q2": float(q2), "q3": float(q3)}


def _c_normalizer(spec, pooled, params):
    if params.mode == "vertical":
        X = np.abs(np.nan_to_num(pooled.numeric_matrix(list(spec.columns))))
        norm = spec["norm"]
        if norm == "l1":
            r = X.sum(axis=1)
        elif norm == "l2":
            r = np.sqrt((X**2).sum(axis=1))
        else:
            r = X.max(axis=1, initial=0.0)
        params.shared["row_norms"] = r.tolist()


def _labels(spec, col: Column) -> list[str]:
    if spec.kind == "MultiLabelBinarizer":
        return [p for v in col.present() for p in v.split(spec["sep"]) if p]
    return list(col.present())


def _c_categories(spec, pooled, params):
    for n in spec.columns:
        counts = Counter(_labels(spec, pooled[n]))
        if not counts:
            raise FitError(f"column {n!r} has no observed values")
        mc = spec.options.get("min_count")
        rare = sorted(c for c, k in counts.items() if mc and k < mc)
        params.columns[n] = {"categories": sorted(c for c in counts if c not in rare), "infrequent": rare}


def _c_target(spec, pooled, params):
    ycol = pooled[spec["label"]]
    ys = np.array([str(v) for v in ycol.values], dtype=object) if not ycol.is_numeric else None
    if ys is None:
        from .datakit import format_number

        ys = np.array([format_number(v) for v in ycol.values], dtype=object)
    classes = sorted(set(ys[~ycol.missing]))
    if len(classes) != 2:
        raise FitError(f"TargetEncoder needs a binary label, found {classes}")
    y01 = (ys == classes[1]).astype(np.float64)
    prior = float(y01[~ycol.missing].mean())
    tau2 = float(np.var(y01[~ycol.missing]))
    for n in spec.columns:
        col = pooled[n]
        ok = ~(col.missing | ycol.missing)
        enc = {}
        for cat in sorted(set(col.values[ok])):
            yi = y01[ok & (col.values == cat)]
            p_i, s2 = float(yi.mean()), float(np.var(yi))
            lam = 1.0 if tau2 == 0 else len(yi) / (s2 / tau2 + len(yi))
            enc[cat] = lam * p_i + (1 - lam) * prior
        params.columns[n] = {"encodings": enc}
    params.shared.update({"classes": classes, "prior": prior, "tau2": tau2})


def _c_power(spec, pooled, params):
    method = spec["method"]
    lo, hi = (-4.0, 4.0) if method == "yeo-johnson" else (-2.0, 2.0)
    for n in spec.columns:
        x = _present(pooled, n)
        if method == "box-cox" and x.min() <= 0:
            raise FitError(f"Box-Cox needs strictly positive data; column {n!r} is not")
        llf = stats.yeojohnson_llf if method == "yeo-johnson" else stats.boxcox_llf
        res = optimize.minimize_scalar(lambda l: -llf(l, x), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-9})
        lam = float(res.x)
        params.columns[n] = {"lambda": lam}
        if spec["standardize"]:
            t = stats.yeojohnson(x, lam) if method == "yeo-johnson" else special.boxcox(x, lam)
            params.columns[n].update({"mean": float(np.mean(t)), "std": float(np.std(t))})


def _c_quantile(spec, pooled, params):
    for n in spec.columns:
        x = _present(pooled, n)
        grid = np.linspace(0, 1, max(min(spec["n_quantiles"], len(x)), 2))
        params.columns[n] = {"quantiles": sorted_quantile(x, grid).tolist()}


def _c_spline(spec, pooled, params):
    deg, nk = spec["degree"], spec["n_knots"]
    for n in spec.columns:
        x = _present(pooled, n)
        b = np.linspace(x.min(), x.max(), nk) if spec["knots"] == "uniform" else sorted_quantile(x, np.linspace(0, 1, nk))
        b = np.unique(b)
        knots = np.r_[[b[0]] * deg, b, [b[-1]] * deg]
        params.columns[n] = {"breaks": b.tolist(), "knots": knots.tolist()}


def _c_binarizer(spec, pooled, params):
    params.shared["threshold"] = float(spec["threshold"])


def _c_kbins(spec, pooled, params):
    nb = spec["n_bins"]
    for n in spec.columns:
        x = _present(pooled, n)
        if spec["strategy"] == "uniform":
            edges = np.linspace(x.min(), x.max(), nb + 1)
        elif spec["strategy"] == "quantile":
            edges = sorted_quantile(x, np.linspace(0, 1, nb + 1))
        else:
            u = np.linspace(x.min(), x.max(), nb + 1)
            c = np.sort(lloyd(x, 0.5 * (u[1:] + u[:-1]), spec["max_iter"])[-1][:, 0])
            edges = np.r_[x.min(), 0.5 * (c[1:] + c[:-1]), x.max()]
        params.columns[n] = {"edges": np.unique(edges).tolist()}


def _c_simple(spec, pooled, params):
    for n in spec.columns:
        col = pooled[n]
        if spec["strategy"] == "mean":
            params.columns[n] = {"fill": float(np.mean(_present(pooled, n)))}
        elif spec["strategy"] == "median":
            params.columns[n] = {"fill": float(sorted_quantile(_present(pooled, n), 0.5))}
        else:
            counts = Counter(col.present().tolist())
            if not counts:
                raise FitError(f"column {n!r} has no observed values")
            top = max(counts.values())
            params.columns[n] = {"fill": min(v for v, k in counts.items() if k == top)}


def _c_knn(spec, pooled, params):
    cols = list(spec.columns)
    X = pooled.numeric_matrix(cols)
    means = np.nanmean(X, axis=0)
    cells: dict[str, dict] = {}
    for r, j in zip(*np.nonzero(np.isnan(X))):
        donors = ~np.isnan(X[:, j])
        try:
            v = knn_oracle(X[donors], X[donors, j], X[r], spec["k"], spec["weights"])
        except FitError:
            v = float(means[j])
        cell = cells.setdefault(cols[j], {"rows": [], "values": []})
        cell["rows"].append(int(r))
        cell["values"].append(v)
    params.clients[0] = cells


def _c_iterative(spec, pooled, params):
    cols = list(spec.columns)
    X = pooled.numeric_matrix(cols)
    M = np.isnan(X)
    means = np.nanmean(X, axis=0)
    W = np.where(M, means, X)
    miss = M.sum(axis=0)
    order = sorted((j for j in range(len(cols)) if miss[j]), key=lambda j: (miss[j], j))
    for _ in range(spec["max_iter"]):
        before = W.copy()
        for j in order:
            A = np.c_[np.delete(W, j, axis=1), np.ones(len(W))]
            fit = blr_oracle(A[~M[:, j]], X[~M[:, j], j])
            W[M[:, j], j] = A[M[:, j]] @ fit.omega
        if np.max(np.abs(W - before), initial=0.0) < spec["tol"]:
            break
    params.clients[0] = {
        cols[j]: {"rows": np.flatnonzero(M[:, j]).tolist(), "values": W[M[:, j], j].tolist()} for j in order
    }


_CENTRAL = {
    "MaxAbsScaler": _c_maxabs,
    "MinMaxScaler": _c_minmax,
    "StandardScaler": _c_standard,
    "RobustScaler": _c_robust,
    "Normalizer": _c_normalizer,
    "LabelBinarizer": _c_categories,
    "MultiLabelBinarizer": _c_categories,
    "LabelEncoder": _c_categories,
    "OneHotEncoder": _c_categories,
    "OrdinalEncoder": _c_categories,
    "TargetEncoder": _c_target,
    "PowerTransformer": _c_power,
    "QuantileTransformer": _c_quantile,
    "SplineTransformer": _c_spline,
    "Binarizer": _c_binarizer,
    "KBinsDiscretizer": _c_kbins,
    "SimpleImputer": _c_simple,
    "KNNImputer": _c_knn,
    "IterativeImputer": _c_iterative,
}


# ---------------------------------------------------------------------------
# comparison


@dataclass
class Check:
    """One compared quantity; deviations are derived from the stored values on demand."""

    quantity: str
    federated: list
    central: list
    klass: str
    threshold: float
    reference: list | None = None  # sorted pooled sample, for rank errors
    grid: list | None = None  # target quantile fractions

    @property
    def max_abs_dev(self) -> float:
        if self.klass == "set":
            return 0.0 if self.federated == self.central else math.inf
        f, c = np.asarray(self.federated, dtype=np.float64), np.asarray(self.central, dtype=np.float64)
        if f.shape != c.shape:
            return math.inf
        if f.size == 0:
            return 0.0
        both_nan = np.isnan(f) & np.isnan(c)
        return float(np.max(np.where(both_nan, 0.0, np.abs(f - c)), initial=0.0))

    @property
    def max_rel_dev(self) -> float:
        if self.klass == "set":
            return self.max_abs_dev
        f, c = np.asarray(self.federated, dtype=np.float64), np.asarray(self.central, dtype=np.float64)
        if f.shape != c.shape:
            return math.inf
        if f.size == 0:
            return 0.0
        scale = np.maximum(np.abs(c), 1.0) if self.klass == "iterative" else np.maximum(np.abs(c), np.finfo(float).tiny)
        diff = np.where(f == c, 0.0, np.abs(f - c))
        return float(np.max(diff / scale))

    @property
    def rank_error(self) -> float:
        """Worst distance of a federated value's rank interval from its target fraction."""
        ref = np.asarray(self.reference, dtype=np.float64)
        n = len(ref)
        grid = np.asarray(self.grid, dtype=np.float64)
        worst = 0.0
        for i, v in enumerate(np.asarray(self.federated, dtype=np.float64)):
            lo = np.searchsorted(ref, v, side="left") / n
            hi = np.searchsorted(ref, v, side="right") / n
            targets = [grid[i]] if len(grid) == len(self.federated) else grid
            err = min(max(lo - q, q - hi, 0.0) for q in targets)
            worst = max(worst, float(err))
        return worst

    @property
    def deviation(self) -> float:
        if self.klass == "sketch":
            return self.rank_error
        if self.klass == "subset":
            return 0.0 if set(self.federated) <= set(self.central) else math.inf
        return self.max_rel_dev

    @property
    def passed(self) -> bool:
        return self.deviation <= self.threshold

    def to_json(self) -> dict:
        return {
            "quantity": self.quantity,
            "class": self.klass,
            "threshold": self.threshold,
            "deviation": _finite(self.deviation),
            "max_abs_dev": _finite(self.max_abs_dev) if self.klass not in ("sketch", "subset") else None,
            "passed": self.passed,
        }


def _finite(x: float):
    return x if math.isfinite(x) else "inf"


@dataclass
class OracleReport:
    kind: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "checks": [c.to_json() for c in self.checks]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def table(self) -> str:
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"{mark}  {self.kind:<20} {c.quantity:<40} {c.klass:<9} dev={c.deviation:.3g} tol={c.threshold:g}")
        return "\n".join(lines)


def _tolerances(tolerances: dict | None) -> dict:
    out = {"exact": EXACT_REL, "sketch": SKETCH_RANK, "iterative": ITERATIVE_REL}
    out.update(tolerances or {})
    return out


def _sketch_grid(spec: PreprocessorSpec, field_name: str, n_values: int) -> list[float]:
    if spec.kind == "RobustScaler":
        return [{"q1": 0.25, "q2": 0.5, "q3": 0.75}[field_name]]
    if spec.kind == "SimpleImputer":
        return [0.5]
    if spec.kind == "KBinsDiscretizer":
        return np.linspace(0, 1, spec["n_bins"] + 1).tolist()
    if spec.kind == "SplineTransformer":
        return np.linspace(0, 1, spec["n_knots"]).tolist()
    return np.linspace(0, 1, n_values).tolist()


def _klass(spec: PreprocessorSpec) -> str:
    if spec.kind in EXACT_KINDS:
        return "exact"
    if spec.kind == "KBinsDiscretizer":
        return {"uniform": "exact", "quantile": "sketch", "kmeans": "iterative"}[spec["strategy"]]
    if spec.kind == "SplineTransformer":
        return "exact" if spec["knots"] == "uniform" else "sketch"
    if spec.kind == "SimpleImputer":
        return {"mean": "exact", "median": "sketch", "most_frequent": "set"}[spec["strategy"]]
    if spec.kind in ("RobustScaler", "QuantileTransformer"):
        return "sketch"
    if spec.kind == "KNNImputer":
        return "exact"
    return "iterative"


def _pooled_cells(params: FitParameters, plan: PartitionPlan | None) -> dict[str, dict[int, float]]:
    out: dict[str, dict[int, float]] = {}
    for c, cells in params.clients.items():
        if plan is not None and plan.mode == "horizontal":
            rows_of = np.flatnonzero(np.asarray(plan.assignments) == c)
        else:
            rows_of = None
        for name, cell in cells.items():
            for r, v in zip(cell["rows"], cell["values"]):
                out.setdefault(name, {})[int(rows_of[r]) if rows_of is not None else int(r)] = v
    return out


def _replayed_cells(params: FitParameters, pooled: ColumnarDataset) -> dict[str, dict[int, float]]:
    from .preprocessors import transform

    out = transform(params, pooled)
    cells = {}
    for name in params.spec.columns:
        rows = np.flatnonzero(pooled[name].missing)
        if len(rows):
            vals = out[name].values
            cells[name] = {int(r): float(vals[r]) for r in rows}
    return cells


def compare(
    fed: FitParameters,
    central: FitParameters,
    tolerances: dict | None = None,
    pooled: ColumnarDataset | None = None,
    plan: PartitionPlan | None = None,
) -> OracleReport:
    """Field-by-field comparison under the kind's tolerance class.

    ``pooled`` is needed for sketch-class rank errors; ``plan`` maps
    per-client imputed cells back to pooled rows.
    """
    if fed.kind != central.kind:
        raise CompareError(f"cannot compare {fed.kind} with {central.kind}")
    tol = _tolerances(tolerances)
    spec = fed.spec
    klass = _klass(spec)
    report = OracleReport(fed.kind)

    if fed.kind in ("KNNImputer", "IterativeImputer"):
        if "sequence" not in fed.shared:
            f_cells = _pooled_cells(fed, plan)
        elif pooled is not None:
            f_cells = _replayed_cells(fed, pooled)
        else:
            raise CompareError("sequence-form parameters need the pooled data to replay")
        c_cells = _pooled_cells(central, None)
        for name in sorted(set(f_cells) | set(c_cells)):
            rows = sorted(set(f_cells.get(name, {})) | set(c_cells.get(name, {})))
            fv = [f_cells.get(name, {}).get(r, math.nan) for r in rows]
            cv = [c_cells.get(name, {}).get(r, math.nan) for r in rows]
            report.checks.append(Check(f"{name}.imputed", fv, cv, klass, tol[klass]))
        return report

    for name in spec.columns:
        fp, cp = fed.columns.get(name, {}), central.columns.get(name, {})
        for key in sorted(set(fp) | set(cp)):
            if key in ("knots", "iterations", "constant"):
                continue
            fv, cv = fp.get(key), cp.get(key)
            qname = f"{name}.{key}"
            if fv is None or cv is None:
                report.checks.append(Check(qname, [repr(fv)], [repr(cv)], "set", 0.0))
            elif key == "infrequent" and spec.options.get("min_count"):
                # sound sketch filtering marks a subset of the truly rare items
                report.checks.append(Check(qname, list(fv), list(cv), "subset", 0.0))
            elif key == "categories" and spec.options.get("min_count"):
                ok = set(cv) <= set(fv)
                report.checks.append(Check(qname, [ok], [True], "set", 0.0))
            elif isinstance(fv, dict):
                keys = sorted(set(fv) | set(cv))
                if set(fv) != set(cv):
                    report.checks.append(Check(qname + ".keys", sorted(fv), sorted(cv), "set", 0.0))
                else:
                    report.checks.append(Check(qname, [fv[k] for k in keys], [cv[k] for k in keys], klass, tol[klass]))
            elif isinstance(fv, str) or (isinstance(fv, list) and fv and isinstance(fv[0], str)) or klass == "set":
                report.checks.append(Check(qname, fv if isinstance(fv, list) else [fv], cv if isinstance(cv, list) else [cv], "set", 0.0))
            elif klass == "sketch":
                if pooled is None:
                    raise CompareError("sketch-class comparison needs the pooled data")
                ref = np.sort(pooled[name].present())
                fl = fv if isinstance(fv, list) else [fv]
                cl = cv if isinstance(cv, list) else [cv]
                report.checks.append(
                    Check(qname, fl, cl, "sketch", tol["sketch"], ref.tolist(), _sketch_grid(spec, key, len(fl)))
                )
            else:
                fl = fv if isinstance(fv, list) else [fv]
                cl = cv if isinstance(cv, list) else [cv]
                report.checks.append(Check(qname, fl, cl, klass, tol[klass]))

    for key in sorted(set(fed.shared) | set(central.shared)):
        fv, cv = fed.shared.get(key), central.shared.get(key)
        if isinstance(fv, (int, float)) and isinstance(cv, (int, float)) and not isinstance(fv, bool):
            report.checks.append(Check(f"shared.{key}", [fv], [cv], klass, tol[klass]))
        elif isinstance(fv, list) and fv and isinstance(fv[0], (int, float)):
            report.checks.append(Check(f"shared.{key}", fv, cv or [], klass, tol[klass]))
        elif key not in ("sequence", "means", "sweeps", "converged"):
            report.checks.append(Check(f"shared.{key}", [repr(fv)], [repr(cv)], "set", 0.0))
    return report


def corrupt(params: FitParameters, field_path: str, delta: float) -> FitParameters:
    """Copy of ``params`` with one numeric field shifted, for negative tests."""
    doc = json.loads(params.dumps())
    node = doc
    parts = field_path.split(".")
    for p in parts[:-1]:
        node = node[int(p)] if isinstance(node, list) else node[p]
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] += delta
    else:
        node[last] += delta
    return FitParameters.from_json(doc)


def central_datasets(views: Sequence[ColumnarDataset], plan: PartitionPlan) -> ColumnarDataset:
    return plan.reassemble(views)
