"""Simulated federation: roles, metered message bus and the fit protocol runner.

One *round* is one synchronous gather (clients to server) or one stand-alone
broadcast.  A broadcast or scatter that answers the gather of the same logical
step is sent with ``reply=True`` and does not open a new round; this is how a
StandardScaler fit (gather moments, send back mu/sigma) counts as one round.

Each round may be labelled with the aggregated statistics it realizes
(``"min_max"``, ``"sum"``, ``"mean"``, ``"variance"``, ``"quantiles"``,
``"set_union"``, ``"freq_items"``); the meter keeps a per-statistic round count
so fits can be checked against the published per-statistic round table.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from . import sketches, wire
from .errors import MergeError, ProtocolError

log = logging.getLogger(__name__)

SERVER = "server"
STATISTICS = ("min_max", "sum", "mean", "variance", "quantiles", "set_union", "freq_items")


def client_id(c: int) -> str:
    return f"client:{c}"


@dataclass(frozen=True)
class Envelope:
    sender: str
    receiver: str
    round: int
    payload: bytes
    tag: str


class CommMeter:
    """Byte and round accounting over every envelope the transport delivers."""

    def __init__(self, n_clients: int) -> None:
        self.n_clients = n_clients
        self.uplink = [0] * n_clients
        self.downlink = [0] * n_clients
        self.rounds = 0
        self.rounds_by_statistic: Counter[str] = Counter()
        self.uplink_by_tag: Counter[str] = Counter()
        self.downlink_by_tag: Counter[str] = Counter()
        self.client_uplink_by_tag: list[Counter[str]] = [Counter() for _ in range(n_clients)]

    def open_round(self, statistics: Iterable[str]) -> None:
        self.rounds += 1
        for s in statistics:
            self.rounds_by_statistic[s] += 1

    def record(self, env: Envelope) -> None:
        size = len(env.payload)
        if env.receiver == SERVER:
            c = int(env.sender.split(":")[1])
            self.uplink[c] += size
            self.uplink_by_tag[env.tag] += size
            self.client_uplink_by_tag[c][env.tag] += size
        else:
            c = int(env.receiver.split(":")[1])
            self.downlink[c] += size
            self.downlink_by_tag[env.tag] += size

    @property
    def total_bytes(self) -> int:
        return sum(self.uplink) + sum(self.downlink)

    def report(self, preprocessor: str, mode: str) -> "CommReport":
        return CommReport(
            preprocessor=preprocessor,
            mode=mode,
            rounds=self.rounds,
            rounds_by_statistic=dict(sorted(self.rounds_by_statistic.items())),
            per_client_uplink_bytes=list(self.uplink),
            per_client_downlink_bytes=list(self.downlink),
            total_bytes=self.total_bytes,
        )


@dataclass
class CommReport:
    preprocessor: str
    mode: str
    rounds: int
    rounds_by_statistic: dict[str, int]
    per_client_uplink_bytes: list[int]
    per_client_downlink_bytes: list[int]
    total_bytes: int

    def to_json(self) -> dict:
        return {
            "preprocessor": self.preprocessor,
            "mode": self.mode,
            "rounds": self.rounds,
            "rounds_by_statistic": self.rounds_by_statistic,
            "per_client_uplink_bytes": self.per_client_uplink_bytes,
            "per_client_downlink_bytes": self.per_client_downlink_bytes,
            "total_bytes": self.total_bytes,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, doc: dict) -> "CommReport":
        return cls(**doc)

    def per_client_bytes(self) -> list[int]:
        return [u + d for u, d in zip(self.per_client_uplink_bytes, self.per_client_downlink_bytes)]


class Transport:
    """In-process bus; delivers in call order and charges the meter."""

    def __init__(self, meter: CommMeter, keep_log: bool = False) -> None:
        self.meter = meter
        self.keep_log = keep_log
        self.log: list[Envelope] = []

    def deliver(self, env: Envelope) -> Any:
        self.meter.record(env)
        if self.keep_log:
            self.log.append(env)
        return wire.decode(env.payload)


@dataclass
class ProtocolContext:
    n_clients: int
    mode: str = "horizontal"
    seed: int = 0
    keep_log: bool = False
    meter: CommMeter = field(init=False)
    transport: Transport = field(init=False)
    round: int = field(init=False, default=0)
    received: dict[int, Any] = field(init=False, default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_clients < 1:
            raise ProtocolError("need at least one client")
        if self.mode not in ("horizontal", "vertical"):
            raise ProtocolError(f"unknown partition mode {self.mode!r}")
        self.reset_meter()

    def reset_meter(self) -> CommMeter:
        self.meter = CommMeter(self.n_clients)
        self.transport = Transport(self.meter, self.keep_log)
        return self.meter

    def _open_round(self, statistics: Iterable[str]) -> None:
        self.round += 1
        self.meter.open_round(statistics)

    def gather(
        self,
        produce: Callable[[int], Any],
        tag: str,
        statistics: Sequence[str] = (),
        clients: Iterable[int] | None = None,
        reply: bool = False,
    ) -> list[Any]:
        """Run ``produce(c)`` on each client (ascending id) and ship results to the server.

        Returns the decoded payloads, ``None`` for clients not asked.  With
        ``reply=True`` the gather answers the preceding broadcast and stays in
        its round.
        """
        if not reply:
            self._open_round(statistics)
        asked = range(self.n_clients) if clients is None else sorted(set(clients))
        out: list[Any] = [None] * self.n_clients
        for c in asked:
            payload = wire.encode(produce(c))
            out[c] = self.transport.deliver(Envelope(client_id(c), SERVER, self.round, payload, tag))
        return out

    def broadcast(self, obj: Any, tag: str, statistics: Sequence[str] = (), reply: bool = False) -> list[Any]:
        """Send one copy of ``obj`` to every client; returns the per-client copies."""
        if not reply:
            self._open_round(statistics)
        payload = wire.encode(obj)
        copies = []
        for c in range(self.n_clients):
            copies.append(self.transport.deliver(Envelope(SERVER, client_id(c), self.round, payload, tag)))
            self.received[c] = copies[-1]
        return copies

    def scatter(
        self, messages: dict[int, Any], tag: str, statistics: Sequence[str] = (), reply: bool = True
    ) -> dict[int, Any]:
        """Send a distinct message to each listed client."""
        if not reply:
            self._open_round(statistics)
        out = {}
        for c in sorted(messages):
            out[c] = self.transport.deliver(Envelope(SERVER, client_id(c), self.round, wire.encode(messages[c]), tag))
        return out


def gather_merge(
    ctx: ProtocolContext,
    local: Callable[[int], Any] | Sequence[Any],
    tag: str = "summary",
    statistics: Sequence[str] = (),
):
    """Gather one summary per client and merge them in client-id order."""
    produce = local if callable(local) else (lambda c: local[c])
    parts = ctx.gather(produce, tag, statistics)
    try:
        return sketches.merge_all(parts)
    except MergeError as exc:
        raise ProtocolError(f"clients sent incompatible summaries: {exc}") from exc


def broadcast(ctx: ProtocolContext, params: Any, tag: str = "params", reply: bool = False) -> None:
    """Send fitted parameters to every client."""
    ctx.broadcast(params, tag, reply=reply)


# ---------------------------------------------------------------------------
# Per-statistic round table. "t" stands for the iteration count of the run.

ROUND_TABLE: dict[tuple[str, str, str], dict[str, int | str]] = {
    ("MaxAbsScaler", "", "horizontal"): {"min_max": 1},
    ("MinMaxScaler", "", "horizontal"): {"min_max": 1},
    ("Normalizer", "max", "vertical"): {"min_max": 1},
    ("Normalizer", "l1", "vertical"): {"sum": 1},
    ("Normalizer", "l2", "vertical"): {"sum": 1},
    ("KBinsDiscretizer", "uniform", "horizontal"): {"min_max": 1},
    ("KBinsDiscretizer", "quantile", "horizontal"): {"quantiles": 1},
    ("KBinsDiscretizer", "kmeans", "horizontal"): {"mean": "t"},
    ("SplineTransformer", "uniform", "horizontal"): {"min_max": 1},
    ("SplineTransformer", "quantile", "horizontal"): {"quantiles": 1},
    ("KNNImputer", "", "horizontal"): {"min_max": 1, "mean": 1},
    ("KNNImputer", "", "vertical"): {"sum": 1},
    ("PowerTransformer", "standardize", "horizontal"): {"sum": 1, "mean": 1, "variance": "t"},
    ("PowerTransformer", "", "horizontal"): {"sum": 1, "variance": "t"},
    ("IterativeImputer", "", "horizontal"): {"sum": "t"},
    ("IterativeImputer", "", "vertical"): {"sum": "t"},
    ("StandardScaler", "", "horizontal"): {"mean": 1, "variance": 1},
    ("SimpleImputer", "mean", "horizontal"): {"mean": 1},
    ("SimpleImputer", "median", "horizontal"): {"quantiles": 1},
    ("SimpleImputer", "most_frequent", "horizontal"): {"freq_items": 1},
    ("TargetEncoder", "", "horizontal"): {"mean": 1, "variance": 1, "set_union": 1},
    ("RobustScaler", "", "horizontal"): {"quantiles": 1},
    ("QuantileTransformer", "", "horizontal"): {"quantiles": 1},
    ("LabelBinarizer", "", "horizontal"): {"set_union": 1},
    ("MultiLabelBinarizer", "", "horizontal"): {"set_union": 1},
    ("LabelEncoder", "", "horizontal"): {"set_union": 1},
    ("OneHotEncoder", "", "horizontal"): {"set_union": 1},
    ("OneHotEncoder", "infrequent", "horizontal"): {"set_union": 1, "freq_items": 1},
    ("OrdinalEncoder", "", "horizontal"): {"set_union": 1},
    ("OrdinalEncoder", "infrequent", "horizontal"): {"set_union": 1, "freq_items": 1},
}

# Combinations outside the table that need no communication at all.
LOCAL_ONLY: set[tuple[str, str, str]] = {
    ("Binarizer", "", "horizontal"),
    ("Binarizer", "", "vertical"),
    ("Normalizer", "l1", "horizontal"),
    ("Normalizer", "l2", "horizontal"),
    ("Normalizer", "max", "horizontal"),
}


def run_fit(ctx: ProtocolContext, spec, data: Sequence) -> tuple[Any, CommReport]:
    """Fit ``spec`` over per-client datasets and broadcast the parameters.

    Resets the context's meter; the returned report covers this fit only.
    """
    from .preprocessors import fit as _fit

    return _fit.run_fit(ctx, spec, data)
