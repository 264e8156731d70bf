import numpy as np
from hypothesis import given, strategies as st

from conftest import random_cov, random_gso
from fairgso.graph import Gso
from fairgso.vectorize import (
    StationarityOperators,
    build_lift_operators,
    half_vectorize,
    lift,
    lift_adjoint,
    n_pairs,
    tri_index_sets,
    vec,
)

seeds = st.integers(0, 2**31)


def kron_sigma(c: np.ndarray) -> np.ndarray:
    """Dense oracle (C kron I - I kron C) U."""
    n = c.shape[0]
    u = build_lift_operators(n).dup.toarray()
    return (np.kron(c, np.eye(n)) - np.kron(np.eye(n), c)) @ u


def test_tri_index_sets_examples():
    # 1-based D={1,5,9}, L={2,3,6}, U={4,7,8}
    idx = tri_index_sets(3)
    assert list(idx.d_set) == [0, 4, 8] and list(idx.l_set) == [1, 2, 5] and list(idx.u_set) == [3, 6, 7]
    idx = tri_index_sets(2)
    assert list(idx.d_set) == [0, 3] and list(idx.l_set) == [1] and list(idx.u_set) == [2]


@given(st.integers(2, 15))
def test_tri_index_sets_partition(n):
    idx = tri_index_sets(n)
    allidx = np.concatenate([idx.d_set, idx.l_set, idx.u_set])
    assert len(idx.d_set) == n and len(idx.l_set) == len(idx.u_set) == n_pairs(n)
    np.testing.assert_array_equal(np.sort(allidx), np.arange(n * n))


def test_half_vectorize_examples():
    a, b, c = 0.3, 0.7, 1.1
    g = Gso([[0, a, b], [a, 0, c], [b, c, 0]])
    np.testing.assert_array_equal(half_vectorize(g), [a, b, c])
    np.testing.assert_array_equal(lift(np.ones(3)).mat, np.ones((3, 3)) - np.eye(3))
    lap = lift(np.array([1.0, 0.0, 1.0]), "laplacian")
    np.testing.assert_array_equal(np.diag(lap.mat), [1, 2, 1])
    np.testing.assert_array_equal(lap.mat, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])


def test_lift_operator_examples():
    ops = build_lift_operators(3)
    s = np.array([2.0, 3.0, 5.0])
    np.testing.assert_array_equal(ops.deg @ s, [5, 7, 8])
    dup2 = build_lift_operators(2).dup.toarray()
    np.testing.assert_array_equal(dup2, [[0], [1], [1], [0]])


@given(seeds)
def test_dup_doubles_support(seed):
    rng = np.random.default_rng(seed)
    s = rng.random(10) * (rng.random(10) < 0.5)
    ops = build_lift_operators(5)
    assert np.count_nonzero(ops.dup @ s) == 2 * np.count_nonzero(s)
    assert np.all(np.asarray(ops.dup.sum(axis=0)).ravel() == 2)


@given(st.integers(2, 10), st.sampled_from(["adjacency", "laplacian"]), seeds)
def test_lift_roundtrip_and_adjoint(n, kind, seed):
    rng = np.random.default_rng(seed)
    g = random_gso(rng, n, kind)
    s = half_vectorize(g)
    np.testing.assert_array_equal(lift(s, kind, n).mat, g.mat)
    np.testing.assert_allclose(build_lift_operators(n).deg @ s, g.degrees, atol=1e-12)
    y = rng.standard_normal((n, n))
    t = rng.standard_normal(s.size)
    lhs = np.sum(lift(t, kind, n).mat * y)
    assert np.isclose(lhs, t @ lift_adjoint(y, kind), rtol=1e-12, atol=1e-12)


def test_stationarity_examples():
    ops = StationarityOperators(np.eye(4))
    assert np.all(ops.sigma == 0)
    ops = StationarityOperators(np.diag([2.0, 1.0]))
    assert np.isclose(np.linalg.norm(ops.sigma @ [1.0]), np.sqrt(2), rtol=0, atol=1e-15)


@given(st.integers(2, 9), seeds)
def test_sigma_matches_kron_oracle(n, seed):
    rng = np.random.default_rng(seed)
    c = random_cov(rng, n)
    ops = StationarityOperators(c)
    np.testing.assert_allclose(ops.sigma, kron_sigma(c), atol=1e-12)
    g = random_gso(rng, n)
    s = half_vectorize(g)
    assert np.isclose(np.linalg.norm(ops.sigma @ s), np.linalg.norm(c @ g.mat - g.mat @ c), rtol=1e-10)
    np.testing.assert_allclose(ops.sigma @ s, ops.apply_sigma(s), atol=1e-12)
    lap = lift(s, "laplacian", n)
    np.testing.assert_allclose(ops.sigma_l @ s, vec(lap.mat @ c - c @ lap.mat), atol=1e-10)
    np.testing.assert_allclose(ops.sigma_l @ s, ops.apply_sigma(s, "laplacian"), atol=1e-10)


@given(st.integers(2, 8), seeds)
def test_f_mat_is_eigenbasis_residual(n, seed):
    rng = np.random.default_rng(seed)
    ops = StationarityOperators(random_cov(rng, n))
    j = ops.j_mat
    assert np.linalg.norm(j @ j.T @ j - j) < 1e-8
    assert np.all(np.diag(j.T @ j) >= 0)
    s = half_vectorize(random_gso(rng, n))
    u = build_lift_operators(n).dup.toarray()
    for kind, f in (("adjacency", ops.f_mat), ("laplacian", ops.f_mat_l)):
        us = vec(lift(s, kind, n).mat) if kind == "laplacian" else u @ s
        lam = np.linalg.lstsq(j, us, rcond=None)[0]
        assert np.isclose(np.linalg.norm(f @ s), np.linalg.norm(us - j @ lam), rtol=1e-8, atol=1e-10)
