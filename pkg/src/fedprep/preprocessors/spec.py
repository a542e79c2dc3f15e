"""Preprocessor specifications and fitted parameter documents."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from ..errors import ConfigError

FORMAT = "fedprep-params"
VERSION = 1

SKETCH_DEFAULTS = {"kll_k": 200, "fi_capacity": 64}

DEFAULTS: dict[str, dict[str, Any]] = {
    "MaxAbsScaler": {},
    "MinMaxScaler": {},
    "StandardScaler": {},
    "RobustScaler": {},
    "Normalizer": {"norm": "l2"},
    "LabelBinarizer": {},
    "MultiLabelBinarizer": {"sep": "|"},
    "LabelEncoder": {},
    "OneHotEncoder": {"min_count": None},
    "OrdinalEncoder": {"min_count": None},
    "TargetEncoder": {"label": None},
    "PowerTransformer": {"method": "yeo-johnson", "standardize": True, "n_iter": 30},
    "QuantileTransformer": {"output": "uniform", "n_quantiles": 1000},
    "SplineTransformer": {"knots": "uniform", "degree": 3, "n_knots": 5},
    "Binarizer": {"threshold": 0.0},
    "KBinsDiscretizer": {"strategy": "quantile", "n_bins": 5, "max_iter": 300},
    "SimpleImputer": {"strategy": "mean"},
    "KNNImputer": {"k": 5, "weights": "uniform"},
    "IterativeImputer": {"max_iter": 10, "tol": 1e-3},
}
KINDS = tuple(DEFAULTS)

NUMERIC_KINDS = {
    "MaxAbsScaler", "MinMaxScaler", "StandardScaler", "RobustScaler", "Normalizer", "PowerTransformer",
    "QuantileTransformer", "SplineTransformer", "Binarizer", "KBinsDiscretizer", "KNNImputer", "IterativeImputer",
}
CATEGORICAL_KINDS = {
    "LabelBinarizer", "MultiLabelBinarizer", "LabelEncoder", "OneHotEncoder", "OrdinalEncoder", "TargetEncoder",
}

_CHOICES = {
    ("Normalizer", "norm"): ("l1", "l2", "max"),
    ("PowerTransformer", "method"): ("yeo-johnson", "box-cox"),
    ("QuantileTransformer", "output"): ("uniform", "normal"),
    ("SplineTransformer", "knots"): ("uniform", "quantile"),
    ("KBinsDiscretizer", "strategy"): ("uniform", "quantile", "kmeans"),
    ("SimpleImputer", "strategy"): ("mean", "median", "most_frequent"),
    ("KNNImputer", "weights"): ("uniform", "distance"),
}
_MINIMUMS = {
    ("KBinsDiscretizer", "n_bins"): 2,
    ("SplineTransformer", "degree"): 1,
    ("SplineTransformer", "n_knots"): 2,
    ("KNNImputer", "k"): 1,
    ("QuantileTransformer", "n_quantiles"): 2,
    ("IterativeImputer", "max_iter"): 1,
    ("PowerTransformer", "n_iter"): 1,
    ("OneHotEncoder", "min_count"): 1,
    ("OrdinalEncoder", "min_count"): 1,
}


@dataclass(frozen=True)
class PreprocessorSpec:
    kind: str
    columns: tuple[str, ...]
    options: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in DEFAULTS:
            raise ConfigError(f"unknown preprocessor kind {self.kind!r}")
        object.__setattr__(self, "columns", tuple(self.columns))
        allowed = {**DEFAULTS[self.kind], **SKETCH_DEFAULTS}
        unknown = set(self.options) - set(allowed)
        if unknown:
            raise ConfigError(f"{self.kind}: unknown options {sorted(unknown)}")
        merged = {k: self.options.get(k, v) for k, v in allowed.items()}
        for (kind, opt), choices in _CHOICES.items():
            if kind == self.kind and merged[opt] not in choices:
                raise ConfigError(f"{kind}.{opt} must be one of {choices}, got {merged[opt]!r}")
        for (kind, opt), lo in _MINIMUMS.items():
            if kind == self.kind and merged[opt] is not None and merged[opt] < lo:
                raise ConfigError(f"{kind}.{opt} must be >= {lo}, got {merged[opt]!r}")
        if self.kind == "TargetEncoder" and not merged["label"]:
            raise ConfigError("TargetEncoder needs a 'label' column option")
        object.__setattr__(self, "options", merged)

    def __getitem__(self, option: str) -> Any:
        return self.options[option]

    @property
    def variant(self) -> str:
        """Sub-row of the round table this configuration belongs to."""
        o = self.options
        if self.kind == "Normalizer":
            return o["norm"]
        if self.kind == "KBinsDiscretizer":
            return o["strategy"]
        if self.kind == "SplineTransformer":
            return o["knots"]
        if self.kind == "SimpleImputer":
            return o["strategy"]
        if self.kind == "PowerTransformer":
            return "standardize" if o["standardize"] else ""
        if self.kind in ("OneHotEncoder", "OrdinalEncoder"):
            return "infrequent" if o["min_count"] else ""
        return ""

    def to_json(self) -> dict:
        return {"kind": self.kind, "columns": list(self.columns), "options": dict(self.options)}

    @classmethod
    def from_json(cls, doc: dict) -> "PreprocessorSpec":
        try:
            return cls(doc["kind"], tuple(doc.get("columns", ())), dict(doc.get("options", {})))
        except KeyError as exc:
            raise ConfigError(f"preprocessor spec is missing field {exc}") from None


@dataclass
class FitParameters:
    """Fitted state of one preprocessor.

    ``columns`` maps each target column to its parameters, ``shared`` holds
    cross-column state and ``clients`` holds per-client state (cells imputed
    in place).  ``delivery`` tells the runner how parameters reach clients:
    ``"broadcast"``, ``"scatter"`` (each client gets its own ``clients`` entry)
    or ``"none"`` (already client-side, or nothing to send).
    """

    spec: PreprocessorSpec
    mode: str = "horizontal"
    columns: dict[str, dict] = field(default_factory=dict)
    shared: dict[str, Any] = field(default_factory=dict)
    clients: dict[int, dict] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    delivery: str = "broadcast"

    @property
    def kind(self) -> str:
        return self.spec.kind

    def to_json(self) -> dict:
        doc = {
            "format": FORMAT,
            "version": VERSION,
            "mode": self.mode,
            "spec": self.spec.to_json(),
            "columns": self.columns,
            "shared": self.shared,
            "warnings": list(self.warnings),
        }
        if self.clients:
            doc["clients"] = {str(c): v for c, v in sorted(self.clients.items())}
        return doc

    def dumps(self) -> str:
        # json writes floats as their shortest round-trip repr
        return json.dumps(self.to_json(), indent=2, sort_keys=True, allow_nan=True)

    @classmethod
    def from_json(cls, doc: dict) -> "FitParameters":
        if doc.get("format") != FORMAT:
            raise ConfigError("not a fitted-parameters document")
        if doc.get("version") != VERSION:
            raise ConfigError(f"unsupported parameters version {doc.get('version')!r}")
        return cls(
            spec=PreprocessorSpec.from_json(doc["spec"]),
            mode=doc.get("mode", "horizontal"),
            columns=dict(doc.get("columns", {})),
            shared=dict(doc.get("shared", {})),
            clients={int(c): v for c, v in doc.get("clients", {}).items()},
            warnings=list(doc.get("warnings", [])),
            delivery="none",
        )

    @classmethod
    def loads(cls, text: str) -> "FitParameters":
        return cls.from_json(json.loads(text))

    def for_client(self, c: int) -> dict:
        """The part of the document client ``c`` needs."""
        doc = self.to_json()
        doc.pop("clients", None)
        if c in self.clients:
            doc["clients"] = {str(c): self.clients[c]}
        return doc
