"""Mergeable local summaries: exact moments and category sets, KLL quantiles, frequent items."""

from ..errors import MergeError, ParseError
from . import codec
from .categories import CategorySet
from .frequent import FrequentItemsSketch, fi_heavy_hitters
from .kll import KLLSketch, kll_quantile
from .moments import MomentsSummary

SUMMARY_TYPES = {
    codec.TAG_MOMENTS: MomentsSummary,
    codec.TAG_KLL: KLLSketch,
    codec.TAG_FREQUENT: FrequentItemsSketch,
    codec.TAG_CATEGORIES: CategorySet,
}
Summary = MomentsSummary | KLLSketch | FrequentItemsSketch | CategorySet


def merge(a, b):
    """Merge two summaries of the same type and configuration."""
    if type(a) is not type(b):
        raise MergeError(f"cannot merge {type(a).__name__} with {type(b).__name__}")
    return a.merge(b)


def merge_all(summaries):
    """Left fold of :func:`merge` (client id order)."""
    it = iter(summaries)
    out = next(it)
    for s in it:
        out = merge(out, s)
    return out


def from_bytes(data: bytes):
    """Decode any summary by its type tag."""
    tag = codec.peek_tag(data)
    if tag not in SUMMARY_TYPES:
        raise ParseError(f"unknown summary type tag {tag}")
    return SUMMARY_TYPES[tag].from_bytes(data)


__all__ = [
    "CategorySet",
    "FrequentItemsSketch",
    "KLLSketch",
    "MomentsSummary",
    "Summary",
    "fi_heavy_hitters",
    "from_bytes",
    "kll_quantile",
    "merge",
    "merge_all",
]
