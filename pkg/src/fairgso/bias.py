"""Dyadic demographic-parity metrics: group-wise and node-wise.

Each metric has three evaluation paths that must agree:

* spatial, straight from the GSO entries;
* spectral, from eigenpairs (lam, V) with the diagonal correction term so that
  any orthonormal V can be used;
* vectorized, as ||R s||^2 with the half-vector s.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Gso, GroupAssignment, DimensionError
from .vectorize import StationarityOperators, half_vectorize, n_pairs, numerical_rank, pair_index

ORTHO_TOL = 1e-8


def _check_dims(gso: Gso, groups: GroupAssignment) -> None:
    if gso.n != groups.n:
        raise DimensionError(f"GSO has {gso.n} nodes but groups cover {groups.n}")


def _check_orthonormal(v: np.ndarray) -> None:
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise DimensionError("eigenvector matrix must be square")
    if np.max(np.abs(v.T @ v - np.eye(v.shape[0]))) > ORTHO_TOL:
        raise ValueError("eigenvector matrix is not orthonormal")


def _node_weights(groups: GroupAssignment) -> np.ndarray:
    """Columns w_g = sum_{h != g} (z_g / N_g - z_h / N_h)."""
    zn = groups.z / groups.sizes
    return groups.g * zn - zn.sum(axis=1, keepdims=True)


# --- spatial ------------------------------------------------------------------------

def bias_group(gso: Gso, groups: GroupAssignment) -> float:
    """Mean squared gap between within-group and across-group average edge weight."""
    _check_dims(gso, groups)
    groups.require_min_size(2)
    z, sizes, g = groups.z, groups.sizes.astype(float), groups.g
    q = z.T @ gso.offdiag @ z
    within = np.diag(q) / (sizes ** 2 - sizes)
    across = q / np.outer(sizes, sizes)
    total = 0.0
    for a in range(g):
        for b in range(g):
            if a != b:
                total += (within[a] - across[a, b]) ** 2
    return float(total / (g * g - g))


def bias_node(gso: Gso, groups: GroupAssignment) -> float:
    """Mean over nodes and groups of the squared gap between a node's average
    connection to one group and its average connection to the other groups."""
    _check_dims(gso, groups)
    g = groups.g
    per = gso.offdiag @ (groups.z / groups.sizes)
    others = (per.sum(axis=1, keepdims=True) - per) / (g - 1)
    return float(np.mean((per - others) ** 2))


# --- spectral -----------------------------------------------------------------------

def bias_group_spectral(lam: np.ndarray, v: np.ndarray, groups: GroupAssignment) -> float:
    """Group-wise bias of S = V diag(lam) V^T; exact for any orthonormal V."""
    lam = np.asarray(lam, dtype=float)
    _check_orthonormal(v)
    if lam.size != v.shape[0] or groups.n != v.shape[0]:
        raise DimensionError("eigenvalue, eigenvector and group dimensions disagree")
    groups.require_min_size(2)
    z, sizes, g = groups.z, groups.sizes.astype(float), groups.g
    zt = v.T @ z
    diag_corr = (v * v).T @ z
    total = 0.0
    for a in range(g):
        pairs_a = sizes[a] ** 2 - sizes[a]
        for b in range(g):
            if a == b:
                continue
            coef = (zt[:, a] ** 2 - diag_corr[:, a]) / pairs_a - zt[:, a] * zt[:, b] / (sizes[a] * sizes[b])
            total += (lam @ coef) ** 2
    return float(total / (g * g - g))


def bias_node_spectral(lam: np.ndarray, v: np.ndarray, groups: GroupAssignment) -> float:
    """Node-wise bias of S = V diag(lam) V^T; exact for any orthonormal V."""
    lam = np.asarray(lam, dtype=float)
    _check_orthonormal(v)
    n = v.shape[0]
    if lam.size != n or groups.n != n:
        raise DimensionError("eigenvalue, eigenvector and group dimensions disagree")
    g = groups.g
    diag_s = (v * v) @ lam
    total = 0.0
    for w in _node_weights(groups).T:
        y = lam * (v.T @ w) - v.T @ (diag_s * w)
        total += y @ y
    return float(total / (g * n * (g - 1) ** 2))


def spectral_bias_matrix(v: np.ndarray, groups: GroupAssignment, metric: str) -> np.ndarray:
    """Matrix A with R(V diag(lam) V^T) = ||A lam||^2 for metric 'group' or 'node'."""
    _check_orthonormal(v)
    n = v.shape[0]
    z, sizes, g = groups.z, groups.sizes.astype(float), groups.g
    vv = v * v
    if metric == "group":
        groups.require_min_size(2)
        zt = v.T @ z
        diag_corr = vv.T @ z
        rows = []
        for a in range(g):
            for b in range(g):
                if a != b:
                    rows.append((zt[:, a] ** 2 - diag_corr[:, a]) / (sizes[a] ** 2 - sizes[a])
                                - zt[:, a] * zt[:, b] / (sizes[a] * sizes[b]))
        return np.array(rows) / np.sqrt(g * g - g)
    if metric == "node":
        blocks = [v * (v.T @ w) - w[:, None] * vv for w in _node_weights(groups).T]
        return np.vstack(blocks) / ((g - 1) * np.sqrt(g * n))
    raise ValueError(f"unknown metric {metric!r}")


# --- vectorized ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BiasMatrices:
    """R_G ((G^2 - G) x P) and R_N (GN x P) acting on half-vectors."""

    r_group: np.ndarray | None
    r_node: np.ndarray

    def get(self, metric: str) -> np.ndarray:
        if metric == "group":
            if self.r_group is None:
                raise ValueError("group bias matrix unavailable: smallest group has fewer than 2 nodes")
            return self.r_group
        if metric == "node":
            return self.r_node
        raise ValueError(f"unknown metric {metric!r}")


def build_bias_matrices(groups: GroupAssignment, n: int | None = None) -> BiasMatrices:
    n = groups.n if n is None else n
    if n != groups.n:
        raise DimensionError("group assignment does not match n")
    z, sizes, g = groups.z, groups.sizes.astype(float), groups.g
    i, j = pair_index(n)
    r_group = None
    if groups.n_min >= 2:
        rows = []
        for a in range(g):
            for b in range(g):
                if a == b:
                    continue
                within = 2.0 * z[i, a] * z[j, a] / (sizes[a] ** 2 - sizes[a])
                across = (z[i, a] * z[j, b] + z[j, a] * z[i, b]) / (sizes[a] * sizes[b])
                rows.append(within - across)
        r_group = np.array(rows) / np.sqrt(g * g - g)
    p = n_pairs(n)
    cols = np.arange(p)
    blocks = []
    for w in _node_weights(groups).T:
        blk = np.zeros((n, p))
        blk[j, cols] += w[i]
        blk[i, cols] += w[j]
        blocks.append(blk)
    r_node = np.vstack(blocks) / ((g - 1) * np.sqrt(g * n))
    return BiasMatrices(r_group, r_node)


def bias_vectorized(gso: Gso, mats: BiasMatrices, metric: str) -> float:
    r = mats.get(metric) @ half_vectorize(gso)
    return float(r @ r)


# --- reporting ----------------------------------------------------------------------

def bias_value(gso: Gso, groups: GroupAssignment, metric: str) -> float:
    if metric == "group":
        return bias_group(gso, groups)
    if metric == "node":
        return bias_node(gso, groups)
    raise ValueError(f"unknown metric {metric!r}")


def normalized_bias(gso: Gso, groups: GroupAssignment, which: str = "group") -> float:
    """sqrt(R) scaled by the average edge weight: (N^2 - N) sqrt(R) / (2 ||S+||_1)."""
    l1 = float(np.abs(gso.offdiag).sum())
    if l1 <= 0:
        raise ValueError("normalized bias is undefined for an empty graph")
    n = gso.n
    return float((n * n - n) * np.sqrt(bias_value(gso, groups, which)) / (2.0 * l1))


def relative_error(est: Gso, target: Gso) -> float:
    """||S_hat - S*||_F^2 / ||S*||_F^2."""
    den = float(np.sum(target.mat ** 2))
    if den <= 0:
        raise ValueError("relative error is undefined for a zero target")
    return float(np.sum((est.mat - target.mat) ** 2) / den)


def data_bias_capacity(bias_mat: np.ndarray, sigma, eps: float) -> float:
    """||R Sigma^+||_2 * eps: the largest sqrt(R) reachable within the stationarity budget."""
    sig = sigma.sigma if isinstance(sigma, StationarityOperators) else np.asarray(sigma)
    if numerical_rank(sig) < sig.shape[1]:
        raise np.linalg.LinAlgError("stationarity operator is rank deficient")
    if eps == 0:
        return 0.0
    return float(np.linalg.norm(bias_mat @ np.linalg.pinv(sig), 2) * eps)
