import numpy as np
import pytest

from fedprep.errors import FitError, PredictError
from fedprep.federation import ProtocolContext
from fedprep.fedmodels import (
    BLRState,
    blr_predict,
    h_fed_blr_fit,
    h_fed_kmeans,
    h_fed_knn_predict,
    v_fed_blr_fit,
    v_fed_knn_predict,
)
from fedprep.fedmodels.knn import masked_distance
from fedprep.oracle import blr_oracle, knn_oracle, lloyd


def linear_problem(rng, n=80, m=5, noise=0.1):
    X = rng.normal(size=(n, m))
    w = rng.normal(size=m)
    return X, X @ w + noise * rng.normal(size=n), w


# -- BLR ---------------------------------------------------------------------


def test_blr_recovers_weights(rng):
    X, y, w = linear_problem(rng, n=400)
    st = h_fed_blr_fit(ProtocolContext(1), [(X, y)])
    assert st.converged
    assert np.allclose(st.omega, w, atol=0.02)
    assert st.beta == pytest.approx(100, rel=0.25)  # noise precision 1/0.1²


def test_blr_matches_dense_oracle(rng):
    X, y, _ = linear_problem(rng)
    st = h_fed_blr_fit(ProtocolContext(1), [(X, y)])
    ref = blr_oracle(X, y)
    assert st.iter == ref.iter
    for a, b in zip(st.trace, ref.trace):
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_blr_client_split_equals_single_client(rng):
    X, y, _ = linear_problem(rng, n=90)
    one = h_fed_blr_fit(ProtocolContext(1), [(X, y)])
    parts = np.array_split(np.arange(90), 3)
    three = h_fed_blr_fit(ProtocolContext(3), [(X[p], y[p]) for p in parts])
    assert np.allclose(one.omega, three.omega, rtol=1e-10, atol=1e-12)


def test_vertical_matches_horizontal_each_iteration(rng):
    X, y, _ = linear_problem(rng, n=40, m=7)
    h = h_fed_blr_fit(ProtocolContext(1), [(X, y)])
    blocks = [X[:, :3], X[:, 3:5], X[:, 5:]]
    v = v_fed_blr_fit(ProtocolContext(3, "vertical"), blocks, y, label_holder=1)
    assert h.iter == v.iter
    for a, b in zip(h.trace, v.trace):
        assert np.allclose(a, b, rtol=1e-8, atol=1e-10)
    assert np.allclose(v.fitted, X @ h.omega, rtol=1e-8, atol=1e-10)


def test_vertical_train_mask_predicts_held_out_rows(rng):
    X, y, _ = linear_problem(rng, n=60, m=4)
    mask = np.arange(60) % 5 != 0
    h = h_fed_blr_fit(ProtocolContext(1), [(X[mask], y[mask])])
    v = v_fed_blr_fit(ProtocolContext(2, "vertical"), [X[:, :2], X[:, 2:]], y[mask], 0, train_mask=mask)
    assert np.allclose(v.fitted[~mask], X[~mask] @ h.omega, rtol=1e-8, atol=1e-10)


def test_blr_state_json_round_trip(rng):
    X, y, _ = linear_problem(rng, n=30, m=3)
    st = h_fed_blr_fit(ProtocolContext(2), [(X[:15], y[:15]), (X[15:], y[15:])])
    back = BLRState.from_json(st.to_json())
    assert np.array_equal(back.omega, st.omega) and back.alpha == st.alpha


def test_blr_predict(rng):
    X, y, _ = linear_problem(rng, n=30, m=3)
    st = h_fed_blr_fit(ProtocolContext(1), [(X, y)])
    assert np.allclose(blr_predict(st, X[:4]), X[:4] @ st.omega)
    assert blr_predict(st, np.zeros((0, 3))).shape == (0,)
    with pytest.raises(PredictError):
        blr_predict(st, np.zeros((2, 4)))


def test_blr_feature_count_mismatch():
    with pytest.raises(FitError):
        h_fed_blr_fit(ProtocolContext(2), [(np.ones((3, 2)), np.ones(3)), (np.ones((3, 3)), np.ones(3))])


def test_blr_horizontal_uplink_bytes(rng):
    X, y, _ = linear_problem(rng, n=60, m=4)
    ctx = ProtocolContext(2)
    h_fed_blr_fit(ctx, [(X[:30], y[:30]), (X[30:], y[30:])])
    stats = ctx.meter.client_uplink_by_tag[0]["blr_stats"]
    # m×min(n, m) factor plus the m-vector Xᵀy, and a little framing
    assert 4 * 4 * 8 + 4 * 8 <= stats <= 4 * 4 * 8 + 4 * 8 + 64


# -- k-means -----------------------------------------------------------------


def test_kmeans_two_points():
    st = h_fed_kmeans(ProtocolContext(2), [np.array([0.0]), np.array([10.0])], 2, np.array([1.0, 9.0]))
    assert st.centroids[:, 0].tolist() == [0.0, 10.0]
    assert st.trace[1][:, 0].tolist() == [0.0, 10.0]


def test_kmeans_matches_lloyd(rng):
    X = np.vstack([rng.normal(loc=c, size=(60, 2)) for c in (-4, 0, 4)])
    init = X[[0, 70, 150]]
    parts = np.array_split(rng.permutation(len(X)), 4)
    st = h_fed_kmeans(ProtocolContext(4), [X[p] for p in parts], 3, init)
    ref = lloyd(X, init)
    assert len(st.trace) == len(ref)
    for a, b in zip(st.trace, ref):
        assert np.allclose(a, b, rtol=0, atol=1e-9)


def test_kmeans_empty_cluster_keeps_centroid():
    st = h_fed_kmeans(ProtocolContext(1), [np.array([[0.0], [1.0]])], 2, np.array([0.5, 100.0]))
    assert st.centroids[1, 0] == 100.0


def test_kmeans_k_exceeds_samples():
    with pytest.raises(FitError):
        h_fed_kmeans(ProtocolContext(1), [np.array([[0.0]])], 2, np.array([0.0, 1.0]))


# -- k-NN --------------------------------------------------------------------


def test_masked_distance_rescales():
    q = np.array([[0.0, np.nan, 0.0, 0.0]])
    x = np.array([[3.0, 1.0, 4.0, np.nan]])
    # present in both: coordinates 0 and 2, squared sum 25, scaled by 4/2
    assert masked_distance(q, x)[0, 0] == pytest.approx(np.sqrt(50))


@pytest.mark.parametrize("k", [1, 3, 5])
@pytest.mark.parametrize("weights", ["uniform", "distance"])
def test_knn_horizontal_and_vertical_match_oracle(rng, k, weights):
    X = rng.normal(size=(60, 4))
    X[rng.random(X.shape) < 0.1] = np.nan
    y = rng.normal(size=60)
    Q = rng.normal(size=(7, 4))
    parts = np.array_split(np.arange(60), 3)
    h = h_fed_knn_predict(ProtocolContext(3), [(X[p], y[p]) for p in parts], Q, k, weights)
    v = v_fed_knn_predict(ProtocolContext(2, "vertical"), [X[:, :2], X[:, 2:]], y, 1, [Q[:, :2], Q[:, 2:]], k, weights)
    ref = np.array([knn_oracle(X, y, q, k, weights) for q in Q])
    assert np.array_equal(h, ref) or np.allclose(h, ref, rtol=1e-15, atol=0)
    assert np.allclose(v, ref, rtol=1e-15, atol=0)


def test_knn_exact_duplicate_gets_all_weight():
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.array([10.0, 20.0, 30.0])
    pred = h_fed_knn_predict(ProtocolContext(1), [(X, y)], np.array([[1.0]]), k=3, weights="distance")
    assert pred[0] == 20.0


def test_knn_rejects_bad_k():
    with pytest.raises(PredictError):
        h_fed_knn_predict(ProtocolContext(1), [(np.zeros((2, 1)), np.zeros(2))], np.zeros((1, 1)), k=0)
