from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from . import codec


@dataclass(frozen=True)
class CategorySet:
    """Sorted set of distinct category strings; merge is set union."""

    items: tuple[str, ...] = ()

    @classmethod
    def of(cls, values: Iterable[str]) -> "CategorySet":
        return cls(tuple(sorted(set(values))))

    def merge(self, other: "CategorySet") -> "CategorySet":
        codec.check_same_type(self, other)
        return CategorySet(tuple(sorted(set(self.items) | set(other.items))))

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, item: str) -> bool:
        return item in self.items

    def to_bytes(self) -> bytes:
        w = codec.Writer(codec.TAG_CATEGORIES).u64(len(self.items))
        for s in self.items:
            w.string(s)
        return w.bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CategorySet":
        r = codec.Reader(data, codec.TAG_CATEGORIES)
        items = tuple(r.string() for _ in range(r.u64()))
        r.done()
        return cls(items)
