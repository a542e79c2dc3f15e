from collections import Counter
from functools import reduce
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedprep import sketches
from fedprep.errors import EmptySketch, InvalidQuantile, InvalidValue, MergeError, ParseError
from fedprep.sketches import CategorySet, FrequentItemsSketch, KLLSketch, MomentsSummary

GOLDEN = Path(__file__).parent / "golden"


def true_rank_interval(sorted_x, v):
    n = len(sorted_x)
    return np.searchsorted(sorted_x, v, "left") / n, np.searchsorted(sorted_x, v, "right") / n


def rank_error(sorted_x, v, q):
    lo, hi = true_rank_interval(sorted_x, v)
    return max(lo - q, q - hi, 0.0)


# -- moments -----------------------------------------------------------------


def test_moments_update_from_empty():
    s = MomentsSummary().update(3)
    assert (s.n, s.sum, s.sum_sq, s.min, s.max) == (1, 3.0, 9.0, 3.0, 3.0)


def test_moments_mean_variance():
    s = MomentsSummary.of(np.array([1.0, 2.0, 3.0]))
    assert s.mean == 2.0
    assert s.variance == pytest.approx(2 / 3, rel=1e-15)


def test_moments_merge_is_exact():
    a = MomentsSummary.of(np.array([1.0, 2.0]))
    b = MomentsSummary.of(np.array([3.0]))
    assert a.merge(b) == MomentsSummary.of(np.array([1.0, 2.0, 3.0]))


def test_moments_rejects_non_finite():
    with pytest.raises(InvalidValue):
        MomentsSummary().update(float("inf"))


def test_moments_tree_vs_sequential(rng):
    parts = [MomentsSummary.of(rng.normal(size=50) * 1e3) for _ in range(8)]
    seq = reduce(lambda a, b: a.merge(b), parts)
    tree = parts
    while len(tree) > 1:
        tree = [tree[i].merge(tree[i + 1]) for i in range(0, len(tree), 2)]
    tree = tree[0]
    assert seq.n == tree.n
    for f in ("sum", "sum_sq", "min", "max"):
        assert getattr(tree, f) == pytest.approx(getattr(seq, f), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.integers(0, 60))
def test_moments_split_invariance(xs, cut):
    cut = min(cut, len(xs))
    whole = MomentsSummary.of(np.array(xs))
    merged = MomentsSummary.of(np.array(xs[:cut])).merge(MomentsSummary.of(np.array(xs[cut:])))
    assert merged.n == whole.n and merged.min == whole.min and merged.max == whole.max
    assert merged.sum == pytest.approx(whole.sum, rel=1e-9, abs=1e-6)
    assert merged.sum_sq >= merged.sum**2 / merged.n * (1 - 1e-12) - 1e-6


def test_merge_with_empty_is_identity():
    s = MomentsSummary.of(np.array([4.0, 5.0]))
    assert s.merge(MomentsSummary()) == s
    assert MomentsSummary().merge(s) == s


# -- KLL ---------------------------------------------------------------------


def test_kll_single_value():
    assert KLLSketch().update(7).quantile(0.5) == 7


def test_kll_empty_and_bad_q():
    with pytest.raises(EmptySketch):
        KLLSketch().quantile(0.5)
    s = KLLSketch().update(1.0)
    with pytest.raises(InvalidQuantile):
        s.quantile(1.5)
    with pytest.raises(InvalidValue):
        s.update(float("nan"))


def test_kll_median_of_permutation():
    misses = 0
    x = np.arange(1, 10_001, dtype=float)
    for seed in range(100):
        perm = np.random.default_rng(seed).permutation(x)
        v = KLLSketch(200, seed).update_many(perm).quantile(0.5)
        misses += abs(v - 5000) > 200
    assert misses <= 1


def test_kll_merged_halves():
    x = np.arange(1, 10_001, dtype=float)
    errs = []
    for seed in range(30):
        a = KLLSketch(200, seed).update_many(x[:5000])
        b = KLLSketch(200, seed + 1000).update_many(x[5000:])
        m = a.merge(b)
        assert m.n == 10_000
        errs.append(rank_error(x, m.quantile(0.5), 0.5))
    assert max(errs) <= 0.02


def test_kll_extremes_exact(rng):
    x = rng.normal(size=5000)
    s = KLLSketch(200, 3).update_many(x)
    assert s.quantile(0) == x.min() and s.quantile(1) == x.max()


def test_kll_memory_bounded():
    s = KLLSketch(200, 0).update_many(np.arange(200_000, dtype=float))
    assert s.num_retained < 800


def test_kll_config_mismatch():
    with pytest.raises(MergeError):
        KLLSketch(200).merge(KLLSketch(100))


def test_kll_returns_stream_values(rng):
    x = rng.normal(size=3000)
    s = KLLSketch(200, 1).update_many(x)
    assert set(s.quantiles(np.linspace(0, 1, 11))) <= set(x)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=1, max_size=400), st.integers(1, 5), st.integers(0, 10_000))
def test_kll_partition_invariance(xs, parts, seed):
    x = np.array(xs, dtype=float)
    chunks = np.array_split(x, parts)
    merged = sketches.merge_all(KLLSketch(200, seed + i).update_many(c) for i, c in enumerate(chunks))
    assert merged.n == len(x)
    ref = np.sort(x)
    for q in (0.1, 0.5, 0.9):
        assert rank_error(ref, merged.quantile(q), q) <= 0.02


# -- frequent items ------------------------------------------------------------


def test_fi_heavy_item_reported():
    s = FrequentItemsSketch(8).update_many(["a"] * 90 + ["b"] * 10)
    (item, lo, hi), *_ = s.heavy_hitters()
    assert item == "a" and lo <= 90 <= hi


def test_fi_empty():
    assert FrequentItemsSketch(8).heavy_hitters() == []


def test_fi_merged_bounds_contain_truth(rng):
    stream = [f"i{v}" for v in rng.zipf(1.5, size=5000) % 200]
    truth = Counter(stream)
    a = FrequentItemsSketch(16).update_many(stream[:2500])
    b = FrequentItemsSketch(16).update_many(stream[2500:])
    m = a.merge(b)
    for item, count in truth.items():
        assert m.lower_bound(item) <= count <= m.upper_bound(item)
        if count > len(stream) / 16:
            assert item in dict((r[0], r) for r in m.heavy_hitters())


def test_fi_capacity_mismatch():
    with pytest.raises(MergeError):
        FrequentItemsSketch(8).merge(FrequentItemsSketch(4))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from("abcdefghij"), max_size=300), st.integers(1, 6), st.integers(0, 300))
def test_fi_no_false_negatives(stream, cap, cut):
    s = FrequentItemsSketch(cap).update_many(stream[:cut]).merge(FrequentItemsSketch(cap).update_many(stream[cut:]))
    truth = Counter(stream)
    hits = {r[0] for r in s.heavy_hitters()}
    for item, count in truth.items():
        assert s.lower_bound(item) <= count <= s.upper_bound(item)
        if count > len(stream) / cap:
            assert item in hits


def test_fi_ordering_ties_lexicographic():
    s = FrequentItemsSketch(8).update_many(["b", "a", "c", "c"])
    assert [r[0] for r in s.heavy_hitters()] == ["c", "a", "b"]


# -- category sets and merging -------------------------------------------------


def test_category_union():
    assert CategorySet.of("ab").merge(CategorySet.of("bc")).items == ("a", "b", "c")


@given(st.sets(st.text(max_size=3)), st.sets(st.text(max_size=3)), st.sets(st.text(max_size=3)))
def test_category_merge_laws(a, b, c):
    A, B, C = CategorySet.of(a), CategorySet.of(b), CategorySet.of(c)
    assert A.merge(B) == B.merge(A)
    assert A.merge(B).merge(C) == A.merge(B.merge(C))
    assert A.merge(A) == A


def test_merge_type_mismatch():
    with pytest.raises(MergeError):
        sketches.merge(CategorySet.of("a"), MomentsSummary())


# -- wire format -------------------------------------------------------------


def test_golden_moments():
    data = (GOLDEN / "moments_1_2_3.bin").read_bytes()
    assert data == MomentsSummary.of(np.array([1.0, 2.0, 3.0])).to_bytes()
    assert data[:4] == b"FPSK" and data[4] == 1 and data[5] == 1
    assert sketches.from_bytes(data) == MomentsSummary(3, 6.0, 14.0, 1.0, 3.0)


def test_golden_kll():
    data = (GOLDEN / "kll_k200_seed7_1to1000.bin").read_bytes()
    assert KLLSketch(200, 7).update_many(np.arange(1, 1001)).to_bytes() == data
    s = sketches.from_bytes(data)
    assert s.n == 1000
    assert list(s.quantiles([0, 0.25, 0.5, 0.75, 1])) == [1.0, 252.0, 500.0, 752.0, 1000.0]


def test_golden_frequent_items():
    data = (GOLDEN / "fi_cap8.bin").read_bytes()
    stream = list("aaaaabbbcd") + [f"x{i}" for i in range(10)]
    assert FrequentItemsSketch(8).update_many(stream).to_bytes() == data
    s = sketches.from_bytes(data)
    assert s.heavy_hitters() == [("a", 4, 5), ("b", 2, 3)]


def test_golden_categories():
    data = (GOLDEN / "categories_abc.bin").read_bytes()
    assert sketches.from_bytes(data).items == ("a", "b", "c")
    assert CategorySet.of(["c", "a", "b"]).to_bytes() == data


def test_serialization_round_trip(rng):
    k = KLLSketch(64, 2).update_many(rng.normal(size=2000))
    back = KLLSketch.from_bytes(k.to_bytes())
    assert np.array_equal(back.quantiles([0.1, 0.5, 0.9]), k.quantiles([0.1, 0.5, 0.9]))
    assert back.to_bytes() == k.to_bytes()


@pytest.mark.parametrize("blob", [b"XXXX\x01\x01", b"FPSK\x01\x01\x00", b"FPSK\x09\x01", b"FP"])
def test_corrupt_payload_rejected(blob):
    with pytest.raises(ParseError):
        sketches.from_bytes(blob)
