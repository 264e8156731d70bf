import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_cov
from fairgso import guarantees as gt
from fairgso.bias import bias_value, build_bias_matrices
from fairgso.graph import GroupAssignment, from_weights
from fairgso.signals import default_filter, sample_covariance, sample_stationary, true_covariance
from fairgso.synth import ScenarioSpec, make_scenario
from fairgso.vectorize import StationarityOperators, half_vectorize


def inputs(**kw):
    base = dict(k=1.0, sigma_min=2.0, eps=0.1, tau=0.1, g=2, n=4, n_min=2, n_max=2, ones_norm_sq=8.0)
    base.update(kw)
    return gt.BoundInputs(**base)


def dense_condition(phi, sup, psi):
    """Oracle: invert the full inner matrix and read off the off-support block."""
    p = phi.shape[1]
    comp = np.setdiff1d(np.arange(p), sup)
    inner = phi.T @ phi / psi ** 2
    inner[comp, comp] += 1.0
    inv = np.linalg.inv(inner)
    return np.max(np.abs(inv[np.ix_(comp, sup)]).sum(axis=1))


def test_convexity_examples():
    ops = StationarityOperators(np.eye(5))
    rep = gt.check_convexity_c(ops, None, [0, 3], psi=1.0)
    assert not rep.rank_ok and not rep.verdict
    rep = gt.check_convexity_c(StationarityOperators(random_cov(np.random.default_rng(0), 5)), None, [], psi=1.0)
    assert rep.rank_ok and rep.inf_norm_value == 0.0


@pytest.mark.parametrize("kind", ["adjacency", "laplacian"])
@pytest.mark.parametrize("variant", ["c", "v"])
def test_condition_matches_dense_oracle(kind, variant):
    tgt, data, groups = make_scenario(ScenarioSpec(n=8, kind="across_ratio", param=0.3, p=0.4, seed=2))
    c_hat = sample_covariance(sample_stationary(data, default_filter(data), 500, 0))
    ops = StationarityOperators(c_hat)
    bias = build_bias_matrices(groups).get("group")
    sup = gt.support_of(tgt)
    phi = gt.stacked_operator(ops.constraint_matrix(variant, kind), bias, 8)
    for psi in (0.1, 1.0, 10.0):
        val, diag = gt.condition_ii(phi, sup, psi)
        assert diag is None
        assert val == pytest.approx(dense_condition(phi, sup, psi), rel=1e-8)
    fn = gt.check_convexity_c if variant == "c" else gt.check_convexity_v
    rep = fn(ops, bias, sup, psi=1.0, kind=kind)
    assert rep.inf_norm_value == pytest.approx(dense_condition(phi, sup, 1.0), rel=1e-8)


def test_psi_grid_picks_smallest():
    tgt, data, groups = make_scenario(ScenarioSpec(n=6, kind="across_ratio", param=0.5, p=0.5, seed=1))
    ops = StationarityOperators(sample_covariance(sample_stationary(data, default_filter(data), 300, 0)))
    rep = gt.check_convexity_c(ops, build_bias_matrices(groups), gt.support_of(tgt))
    assert rep.inf_norm_value == min(rep.psi_values.values())
    assert len(rep.psi_values) == len(gt.PSI_GRID)


def test_error_bound_examples():
    assert gt.phis(inputs())["phi1"] == pytest.approx(6.0)
    assert gt.lower_bound(0.25, inputs(tau=0.1), "group") == pytest.approx(math.sqrt(2) * 0.4)
    assert gt.lower_bound(0.005, inputs(tau=0.1), "group") == 0.0
    k4 = from_weights(np.ones((4, 4)))
    out = gt.error_bounds(k4, GroupAssignment.balanced(4), inputs(), "group")
    assert out["lower"] == 0.0 and out["target_feasible"]
    assert out["upper"] == pytest.approx(6.0 * 0.1)


def test_laplacian_bounds_scale_by_degree_operator_norm():
    k4 = from_weights(np.ones((4, 4)))
    adj = gt.error_bounds(k4, GroupAssignment.balanced(4), inputs(), "group")["upper"]
    lap = gt.error_bounds(from_weights(np.ones((4, 4)), "laplacian"), GroupAssignment.balanced(4),
                          inputs(kind="laplacian"), "group")["upper"]
    assert lap == pytest.approx(adj * (2 + math.sqrt(6)) / 2)


def test_bound_inputs_validation():
    with pytest.raises(ValueError):
        inputs(sigma_min=0.0)
    with pytest.raises(ValueError):
        gt.lower_bound(1.0, inputs(n_min=1), "group")


def test_lemma_feasibility_examples():
    tgt, data, _ = make_scenario(ScenarioSpec(n=10, kind="across_ratio", param=0.3, seed=0))
    c = true_covariance(tgt, default_filter(tgt))
    ok, res = gt.lemma_feasibility(tgt, c, 1e-8)
    assert ok and res < 1e-8
    c_hat = sample_covariance(sample_stationary(tgt, default_filter(tgt), 100, 0))
    assert not gt.lemma_feasibility(tgt, c_hat, 0.0)[0]


def test_recommend_eps_formula():
    assert gt.recommend_eps(20, 2.0, 100) == pytest.approx(20 * 2.0 * math.sqrt(math.log(20) / 100))
    with pytest.raises(ValueError):
        gt.recommend_eps(20, 1.0, 0)


def planted_instance(n=10, seed=0, m=1000):
    tgt, data, groups = make_scenario(ScenarioSpec(n=n, kind="across_ratio", param=0.2, seed=seed))
    c_hat = sample_covariance(sample_stationary(data, default_filter(data), m, seed))
    return tgt, groups, StationarityOperators(c_hat)


def test_lemma_l1_examples():
    tgt, groups, ops = planted_instance()
    t = half_vectorize(tgt)
    out = gt.lemma_l1_bounds(np.zeros_like(t), t, ops, groups, eps=0.1, tau=0.01)
    assert out["lhs"] == 0.0 and out["holds"] and out["applicable"]
    big = 2 * math.sqrt(bias_value(tgt, groups, "group"))
    assert not gt.lemma_l1_bounds(np.zeros_like(t), t, ops, groups, 0.1, big)["applicable"]


@given(st.integers(0, 2**31))
def test_lemma_l1_holds_on_feasible_points(seed):
    tgt, groups, ops = planted_instance()
    t = half_vectorize(tgt)
    rng = np.random.default_rng(seed)
    sig = ops.sigma
    r = build_bias_matrices(groups).get("group")
    eps, tau = 0.5, 0.5 * float(np.linalg.norm(r @ t))
    s = rng.random(t.size) * (rng.random(t.size) < 0.3)
    s *= 0.999 * min(eps / max(np.linalg.norm(sig @ s), 1e-300), tau / max(np.linalg.norm(r @ s), 1e-300))
    out = gt.lemma_l1_bounds(s, t, ops, groups, eps, tau)
    assert out["applicable"] and out["holds"]


def test_remark2_examples():
    rng = np.random.default_rng(0)
    groups = GroupAssignment.balanced(8)
    kn = from_weights(np.ones((8, 8)))
    ops = StationarityOperators(random_cov(rng, 8))
    assert gt.remark2_condition(kn, groups, ops, 1e-6)
    match = np.zeros((8, 8))
    for i in (0, 2, 4, 6):
        match[i, i + 1] = match[i + 1, i] = 1.0
    assert not gt.remark2_condition(from_weights(match), groups, ops, 1e-6)
    assert not gt.remark2_condition(kn, groups, ops, 1e9)


def test_assumption_diagnostics_keys():
    tgt, groups, ops = planted_instance()
    d = gt.assumption_diagnostics(tgt, ops, 1000, true_covariance(tgt, default_filter(tgt)))
    assert d["full_column_rank"] and d["sigma_min"] > 0 and d["eps_min"] > 0
