"""Numerical evaluation of the recovery conditions and error bounds.

Everything here is deterministic linear algebra on explicit inputs; the
probabilistic statements (sample-size conditions) are only evaluated for a
given epsilon, never certified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .bias import BiasMatrices, bias_value, build_bias_matrices
from .graph import Gso, GroupAssignment, _check_kind
from .vectorize import (
    StationarityOperators,
    build_lift_operators,
    half_vectorize,
    n_pairs,
    numerical_rank,
)

PSI_GRID = np.logspace(-3, 3, 25)
SINGULAR_RCOND = 1e-13


@dataclass(frozen=True)
class BoundInputs:
    """Scalars entering the error bounds.

    ``k`` is the sparsity proxy (at least the square root of the support
    size), ``sigma_min`` the smallest singular value of the stationarity
    operator, ``omega`` the sample-complexity constant (``None`` when the true
    covariance is unknown).
    """

    k: float
    sigma_min: float
    eps: float
    tau: float
    g: int
    n: int
    n_min: int
    n_max: int
    ones_norm_sq: float
    omega: float | None = None
    kind: str = "adjacency"

    def __post_init__(self):
        if self.k < 0 or self.eps < 0 or self.tau < 0:
            raise ValueError("k, eps and tau must be nonnegative")
        if self.sigma_min <= 0:
            raise ValueError("sigma_min must be positive (stationarity operator must have full column rank)")
        _check_kind(self.kind)

    @property
    def sigma_max_e(self) -> float:
        """Largest singular value of the degree operator E: sqrt(2N - 2)."""
        return math.sqrt(2.0 * self.n - 2.0)


@dataclass(frozen=True)
class ConditionReport:
    rank_ok: bool
    inf_norm_value: float
    psi: float
    support: np.ndarray
    diagnostic: str | None = None
    psi_values: dict = field(default_factory=dict, repr=False)

    @property
    def verdict(self) -> bool:
        return bool(self.rank_ok and self.inf_norm_value < 1.0)


# --- inputs ---------------------------------------------------------------------------

def support_of(gso: Gso, tol: float = 0.0) -> np.ndarray:
    """Half-vector indices of the edges of ``gso``."""
    return np.flatnonzero(np.abs(half_vectorize(gso)) > tol)


def omega(true_cov: np.ndarray, target: Gso) -> float:
    """max(||C^-||_inf, ||(S C S)^-||_inf) where X^- keeps the diagonal."""
    c = np.asarray(true_cov, dtype=float)
    s = target.mat
    return float(max(np.max(np.abs(np.diag(c))), np.max(np.abs(np.diag(s @ c @ s)))))


def recommend_eps(n: int, omega_value: float, m: int, c1: float = 1.0) -> float:
    """c1 * N * omega * sqrt(log N / M). The constant c1 is not computable; 1 by default."""
    if m < 1 or n < 2:
        raise ValueError("need n >= 2 and m >= 1")
    return float(c1 * n * omega_value * math.sqrt(math.log(n) / m))


def sigma_min_of(ops: StationarityOperators, kind: str = "adjacency", variant: str = "c") -> float:
    mat = ops.constraint_matrix(variant, kind)
    return float(np.linalg.svd(mat, compute_uv=False)[-1])


def build_bound_inputs(target: Gso, groups: GroupAssignment, ops: StationarityOperators,
                       eps: float, tau: float, true_cov: np.ndarray | None = None,
                       k: float | None = None) -> BoundInputs:
    kind = target.kind
    k = math.sqrt(support_of(target).size) if k is None else k
    return BoundInputs(
        k=k,
        sigma_min=sigma_min_of(ops, kind),
        eps=eps,
        tau=tau,
        g=groups.g,
        n=groups.n,
        n_min=groups.n_min,
        n_max=groups.n_max,
        ones_norm_sq=groups.ones_norm_sq,
        omega=None if true_cov is None else omega(true_cov, target),
        kind=kind,
    )


def assumption_diagnostics(target: Gso, ops: StationarityOperators, m: int,
                           true_cov: np.ndarray | None = None) -> dict:
    """Checkable parts of the sampling assumptions for one instance."""
    n = target.n
    smin = sigma_min_of(ops, target.kind)
    out = {
        "log_n_over_m_cuberoot": math.log(n) / m ** (1.0 / 3.0),
        "sigma_min": smin,
        "full_column_rank": numerical_rank(ops.constraint_matrix("c", target.kind)) == n_pairs(n),
        "k_min": math.sqrt(support_of(target).size),
        "omega": None,
        "eps_min": None,
    }
    if true_cov is not None:
        w = omega(true_cov, target)
        out["omega"] = w
        out["eps_min"] = recommend_eps(n, w, m)
    return out


# --- convex-relaxation conditions -----------------------------------------------------

def _as_bias_matrix(bias, groups_n: int | None, metric: str) -> np.ndarray | None:
    if bias is None:
        return None
    if isinstance(bias, BiasMatrices):
        return bias.get(metric)
    return np.asarray(bias, dtype=float)


def stacked_operator(constraint: np.ndarray, bias_mat: np.ndarray | None, n: int) -> np.ndarray:
    """[A; R; E] for constraint operator A (stationarity), bias matrix R and degree operator E."""
    blocks = [constraint]
    if bias_mat is not None:
        blocks.append(bias_mat)
    blocks.append(build_lift_operators(n).deg.toarray())
    return np.vstack(blocks)


def condition_ii(phi: np.ndarray, support: np.ndarray, psi: float) -> tuple[float, str | None]:
    """||[(psi^-2 Phi^T Phi + I_{.,Ic} I_{Ic,.})^{-1}]_{Ic, I}||_inf via a Schur complement.

    Returns (value, diagnostic); a singular system gives (inf, message).
    """
    if psi <= 0:
        raise ValueError("psi must be positive")
    p = phi.shape[1]
    sup = np.asarray(support, dtype=int)
    comp = np.setdiff1d(np.arange(p), sup)
    if sup.size == 0 or comp.size == 0:
        return 0.0, None
    a = (phi.T @ phi) / psi ** 2
    b = a[np.ix_(comp, comp)] + np.eye(comp.size)  # positive definite
    cf = sla.cho_factor(b)
    x = sla.cho_solve(cf, a[np.ix_(comp, sup)])
    schur = a[np.ix_(sup, sup)] - a[np.ix_(sup, comp)] @ x
    sv = np.linalg.svd(schur, compute_uv=False)
    if sv[-1] <= SINGULAR_RCOND * max(1.0, sv[0]):
        return math.inf, "inner matrix is singular on the support block"
    block = -x @ np.linalg.inv(schur)
    return float(np.max(np.abs(block).sum(axis=1))), None


def _check_convexity(constraint: np.ndarray, bias_mat, support, psi, n: int) -> ConditionReport:
    p = n_pairs(n)
    sup = np.unique(np.asarray(support, dtype=int))
    if sup.size and (sup.min() < 0 or sup.max() >= p):
        raise ValueError("support indices out of range")
    rank_ok = sup.size == 0 or numerical_rank(constraint[:, sup]) == sup.size
    phi = stacked_operator(constraint, bias_mat, n)
    grid = PSI_GRID if psi is None else np.atleast_1d(np.asarray(psi, dtype=float))
    values, diags = {}, {}
    for ps in grid:
        values[float(ps)], diags[float(ps)] = condition_ii(phi, sup, float(ps))
    best = min(values, key=values.get)
    diag = diags[best]
    if not rank_ok:
        diag = "stationarity operator restricted to the support is rank deficient" + (f"; {diag}" if diag else "")
    return ConditionReport(bool(rank_ok), values[best], best, sup, diag, values)


def check_convexity_c(ops: StationarityOperators, bias, support, psi: float | None = None,
                      kind: str = "adjacency", metric: str = "group") -> ConditionReport:
    """Rank and dual-certificate conditions for the commutator formulation.

    ``bias`` is a bias matrix, a :class:`BiasMatrices` (then ``metric`` picks
    one) or ``None``. ``psi=None`` grid-searches psi over 1e-3..1e3 and keeps
    the smallest value.
    """
    _check_kind(kind)
    return _check_convexity(ops.constraint_matrix("c", kind), _as_bias_matrix(bias, ops.n, metric),
                            support, psi, ops.n)


def check_convexity_v(ops: StationarityOperators, bias, support, psi: float | None = None,
                      kind: str = "adjacency", metric: str = "group") -> ConditionReport:
    """Same conditions for the eigenbasis formulation (F instead of Sigma)."""
    _check_kind(kind)
    return _check_convexity(ops.constraint_matrix("v", kind), _as_bias_matrix(bias, ops.n, metric),
                            support, psi, ops.n)


# --- error bounds ---------------------------------------------------------------------

def _check_groups(inputs: BoundInputs, metric: str) -> None:
    if metric not in ("group", "node"):
        raise ValueError(f"unknown metric {metric!r}")
    if metric == "group" and inputs.n_min < 2:
        raise ValueError("group-wise bounds need every group to have at least 2 nodes")


def phis(inputs: BoundInputs) -> dict:
    k, sm, g = inputs.k, inputs.sigma_min, inputs.g
    z1 = inputs.ones_norm_sq
    return {
        "phi1": 4.0 * k * (2.0 + k) / sm,
        "phi2": 4.0 * (1.0 + k) * z1 / (sm * inputs.n_min),
        "phi3": 2.0 * (1.0 + k) * g * z1,
        "phi4": 2.0 * (1.0 + k) * inputs.n_max ** 2 * math.sqrt(g) / (sm * inputs.n_min),
        "phi5": (1.0 + k) * inputs.n_max ** 2 * math.sqrt(g ** 3),
    }


def lower_bound(r_target: float, inputs: BoundInputs, metric: str) -> float:
    """Deterministic lower bound on ||S_hat - S*||_1 for any S_hat with R(S_hat) <= tau^2."""
    _check_groups(inputs, metric)
    if r_target <= inputs.tau ** 2:
        return 0.0
    scale = math.sqrt(inputs.g) if metric == "group" else math.sqrt(inputs.g * inputs.n)
    return 0.5 * inputs.n_min * scale * (math.sqrt(r_target) - inputs.tau)


def error_bounds(target: Gso, groups: GroupAssignment, inputs: BoundInputs, metric: str = "group") -> dict:
    """Lower and upper l1 error bounds for the target's bias level."""
    _check_groups(inputs, metric)
    if groups.n != target.n:
        raise ValueError("groups do not match the target")
    r = bias_value(target, groups, metric)
    ph = phis(inputs)
    extra_eps, extra_r = (ph["phi2"], ph["phi3"]) if metric == "group" else (ph["phi4"], ph["phi5"])
    if r > inputs.tau ** 2:
        upper = (ph["phi1"] + extra_eps) * inputs.eps + extra_r * math.sqrt(r)
    else:
        upper = ph["phi1"] * inputs.eps
    if inputs.kind == "laplacian":
        upper *= (2.0 + inputs.sigma_max_e) / 2.0
    return {"lower": lower_bound(r, inputs, metric), "upper": upper, "phis": ph,
            "r_target": r, "target_feasible": r <= inputs.tau ** 2}


# --- lemmas and remarks ---------------------------------------------------------------

def lemma_feasibility(target: Gso, c_hat: np.ndarray, eps: float) -> tuple[bool, float]:
    """Whether ||C_hat S* - S* C_hat||_F <= eps, with the residual."""
    c = np.asarray(c_hat, dtype=float)
    res = float(np.linalg.norm(c @ target.mat - target.mat @ c))
    return res <= eps, res


def _bias_mat(groups: GroupAssignment, metric: str) -> np.ndarray:
    return build_bias_matrices(groups).get(metric)


def tradeoff_rhs(r_norm_target: float, inputs_like: dict, eps: float, sigma_min: float, metric: str) -> float:
    g, n_min = inputs_like["g"], inputs_like["n_min"]
    slack = 2.0 * eps / (sigma_min * n_min) if eps > 0 else 0.0
    if metric == "group":
        return inputs_like["ones_norm_sq"] * (g * r_norm_target + slack)
    return 0.5 * inputs_like["n_max"] ** 2 * math.sqrt(g) * (g * r_norm_target + slack)


def lemma_l1_bounds(s: np.ndarray, target_s: np.ndarray, ops: StationarityOperators,
                    groups: GroupAssignment, eps: float, tau: float, metric: str = "group",
                    kind: str = "adjacency") -> dict:
    """||s||_1 against the l1 trade-off bound for a feasible half-vector ``s``.

    The preconditions (s >= 0, ||Sigma s|| <= eps, ||R s|| <= tau < ||R s*||)
    are checked and reported; ``holds`` is only meaningful when
    ``applicable`` is true.
    """
    s = np.asarray(s, dtype=float)
    target_s = np.asarray(target_s, dtype=float)
    sig = ops.constraint_matrix("c", kind)
    r = _bias_mat(groups, metric)
    sigma_min = float(np.linalg.svd(sig, compute_uv=False)[-1])
    r_s = float(np.linalg.norm(r @ s))
    r_t = float(np.linalg.norm(r @ target_s))
    pre = {
        "nonnegative": bool(np.all(s >= 0)),
        "stationarity": float(np.linalg.norm(sig @ s)) <= eps,
        "bias": r_s <= tau,
        "target_unfair": tau < r_t,
        "sigma_min_positive": sigma_min > 0,
    }
    applicable = all(pre.values())
    grp = {"g": groups.g, "n_min": groups.n_min, "n_max": groups.n_max, "ones_norm_sq": groups.ones_norm_sq}
    rhs = tradeoff_rhs(r_t, grp, eps, sigma_min, metric) if sigma_min > 0 else math.inf
    lhs = float(np.sum(np.abs(s)))
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs, "applicable": applicable, "preconditions": pre}


def remark2_sides(target: Gso, groups: GroupAssignment, ops: StationarityOperators, eps: float,
                  metric: str = "group") -> tuple[float, float]:
    """(||S*||_1, 2 * trade-off bound): the fairer-than-sparse comparison."""
    if metric == "group":
        groups.require_min_size(2)
    sigma_min = sigma_min_of(ops, target.kind)
    lhs = float(np.abs(target.offdiag).sum())
    r = math.sqrt(bias_value(target, groups, metric))
    grp = {"g": groups.g, "n_min": groups.n_min, "n_max": groups.n_max, "ones_norm_sq": groups.ones_norm_sq}
    if sigma_min <= 0 and eps > 0:
        return lhs, math.inf
    return lhs, 2.0 * tradeoff_rhs(r, grp, eps, max(sigma_min, 1e-300), metric)


def remark2_condition(target: Gso, groups: GroupAssignment, ops: StationarityOperators, eps: float,
                      metric: str = "group") -> bool:
    """True when the target is sparse relative to its bias, so the phi1*eps bound applies."""
    lhs, rhs = remark2_sides(target, groups, ops, eps, metric)
    return lhs >= rhs
