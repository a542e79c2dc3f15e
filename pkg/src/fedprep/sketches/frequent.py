"""Misra–Gries frequent-items sketch with mergeable error accounting.

At most ``capacity`` counters are kept.  Whenever more would be needed, the
``(capacity+1)``-th largest count is subtracted from every counter and
non-positive counters are dropped.  The running total of subtracted amounts,
``offset``, bounds the undercount of every item, so for a tracked item

    count <= true count <= count + offset

and an untracked item has true count <= offset.  Since
``offset <= n / (capacity + 1)``, no item with true count above
``n / capacity`` is ever dropped.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping

from ..errors import MergeError
from . import codec

DEFAULT_CAPACITY = 64


class FrequentItemsSketch:
    def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.counters: dict[str, int] = {}
        self.n = 0
        self.offset = 0

    def update(self, item: str, weight: int = 1) -> "FrequentItemsSketch":
        return self.update_counts({item: weight})

    def update_many(self, items: Iterable[str]) -> "FrequentItemsSketch":
        return self.update_counts(Counter(items))

    def update_counts(self, counts: Mapping[str, int]) -> "FrequentItemsSketch":
        """Fold in exact counts, e.g. a ``Counter`` of a local batch."""
        for item, c in counts.items():
            if c < 0:
                raise ValueError("counts must be non-negative")
            if c:
                self.counters[str(item)] = self.counters.get(str(item), 0) + int(c)
                self.n += int(c)
        self._purge()
        return self

    def _purge(self) -> None:
        if len(self.counters) <= self.capacity:
            return
        ranked = sorted(self.counters.values(), reverse=True)
        cut = ranked[self.capacity]
        self.offset += cut
        self.counters = {item: c - cut for item, c in self.counters.items() if c > cut}

    def merge(self, other: "FrequentItemsSketch") -> "FrequentItemsSketch":
        codec.check_same_type(self, other)
        if other.capacity != self.capacity:
            raise MergeError(f"frequent-items capacity mismatch: {self.capacity} vs {other.capacity}")
        out = FrequentItemsSketch(self.capacity)
        out.counters = dict(self.counters)
        for item, c in other.counters.items():
            out.counters[item] = out.counters.get(item, 0) + c
        out.n = self.n + other.n
        out.offset = self.offset + other.offset
        out._purge()
        return out

    # -- queries -----------------------------------------------------------

    def lower_bound(self, item: str) -> int:
        return self.counters.get(item, 0)

    def upper_bound(self, item: str) -> int:
        return self.counters.get(item, 0) + self.offset

    @property
    def error_bound(self) -> int:
        return self.offset

    def heavy_hitters(self, threshold: int = 0) -> list[tuple[str, int, int]]:
        """Tracked items whose upper bound exceeds ``threshold``.

        Sorted by count descending, then item ascending.  Every item with true
        count above ``threshold + offset`` is tracked, hence reported.
        """
        rows = [(item, c, c + self.offset) for item, c in self.counters.items() if c + self.offset > threshold]
        rows.sort(key=lambda r: (-r[1], r[0]))
        return rows

    def most_frequent(self) -> str | None:
        hits = self.heavy_hitters()
        return hits[0][0] if hits else None

    # -- wire format -------------------------------------------------------

    def to_bytes(self) -> bytes:
        w = codec.Writer(codec.TAG_FREQUENT).u64(self.capacity).u64(self.n).u64(self.offset).u64(len(self.counters))
        for item in sorted(self.counters):
            w.string(item).u64(self.counters[item])
        return w.bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "FrequentItemsSketch":
        r = codec.Reader(data, codec.TAG_FREQUENT)
        out = cls(r.u64())
        out.n = r.u64()
        out.offset = r.u64()
        for _ in range(r.u64()):
            item = r.string()
            out.counters[item] = r.u64()
        r.done()
        return out

    def __repr__(self) -> str:
        return f"FrequentItemsSketch(capacity={self.capacity}, n={self.n}, tracked={len(self.counters)}, offset={self.offset})"


def fi_heavy_hitters(sketch: FrequentItemsSketch, threshold: int) -> list[tuple[str, int, int]]:
    return sketch.heavy_hitters(threshold)
