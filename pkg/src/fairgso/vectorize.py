"""Half-vectorization of symmetric GSOs and the vectorized stationarity operators.

Conventions: ``vec`` is column-major; indices are 0-based. The half-vector ``s``
lists the strictly lower-triangular entries column by column, which is the same
as iterating over node pairs (i, j), i < j, in lexicographic order.

For both kinds ``s`` holds the nonnegative edge weights: an adjacency is
``U s`` and a Laplacian is ``diag(E s) - U s``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .graph import Gso, DimensionError, from_weights, _check_kind
from .signals import eigendecompose

RANK_RTOL = 1e-10


def vec(mat: np.ndarray) -> np.ndarray:
    return np.asarray(mat).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape((n, n), order="F")


def n_pairs(n: int) -> int:
    return n * (n - 1) // 2


def n_from_pairs(p: int) -> int:
    n = int(round((1 + np.sqrt(1 + 8 * p)) / 2))
    if n_pairs(n) != p:
        raise DimensionError(f"{p} is not a triangular number N(N-1)/2")
    return n


def pair_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Node pairs (i, j), i < j, in half-vector order."""
    return np.triu_indices(n, 1)


@dataclass(frozen=True, eq=False)
class TriIndexSets:
    """0-based positions of diagonal, lower and upper entries in vec(S)."""

    d_set: np.ndarray
    l_set: np.ndarray
    u_set: np.ndarray


def tri_index_sets(n: int) -> TriIndexSets:
    if n < 2:
        raise DimensionError("n must be at least 2")
    i, j = pair_index(n)
    d = np.arange(n) * (n + 1)
    return TriIndexSets(d, i * n + j, j * n + i)


def half_vectorize(gso: Gso) -> np.ndarray:
    """Edge weights of the strictly lower triangle in column-major order."""
    i, j = pair_index(gso.n)
    return gso.weights[j, i].copy()


def weights_from_half(s: np.ndarray, n: int | None = None) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    n = n_from_pairs(s.size) if n is None else n
    if s.size != n_pairs(n):
        raise DimensionError(f"half-vector of length {s.size} does not match n={n}")
    w = np.zeros((n, n))
    i, j = pair_index(n)
    w[i, j] = s
    w[j, i] = s
    return w


def lift(s: np.ndarray, kind: str = "adjacency", n: int | None = None) -> Gso:
    """Inverse of :func:`half_vectorize` for the given kind."""
    return from_weights(weights_from_half(s, n), _check_kind(kind))


def pair_sums(y: np.ndarray) -> np.ndarray:
    """U^T vec(Y): Y_ij + Y_ji over pairs i < j."""
    i, j = pair_index(y.shape[0])
    return y[i, j] + y[j, i]


def lift_adjoint(y: np.ndarray, kind: str) -> np.ndarray:
    """Adjoint of s -> lift(s, kind).mat with respect to the Frobenius inner product."""
    i, j = pair_index(y.shape[0])
    out = y[i, j] + y[j, i]
    if kind == "laplacian":
        d = np.diag(y)
        out = d[i] + d[j] - out
    return out


def lift_mat(s: np.ndarray, kind: str, n: int) -> np.ndarray:
    w = weights_from_half(s, n)
    if kind == "laplacian":
        return np.diag(w.sum(axis=1)) - w
    return w


@dataclass(frozen=True, eq=False)
class LiftOperators:
    """Duplication matrix U (N^2 x P) and degree operator E = (1^T kron I) U (N x P)."""

    dup: sp.csr_matrix
    deg: sp.csr_matrix
    idx: TriIndexSets

    @property
    def n(self) -> int:
        return self.deg.shape[0]


def build_lift_operators(n: int) -> LiftOperators:
    idx = tri_index_sets(n)
    p = n_pairs(n)
    cols = np.arange(p)
    dup = sp.csr_matrix(
        (np.ones(2 * p), (np.concatenate([idx.l_set, idx.u_set]), np.concatenate([cols, cols]))),
        shape=(n * n, p),
    )
    i, j = pair_index(n)
    deg = sp.csr_matrix(
        (np.ones(2 * p), (np.concatenate([i, j]), np.concatenate([cols, cols]))), shape=(n, p)
    )
    return LiftOperators(dup, deg, idx)


def numerical_rank(mat: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if mat.size == 0 or min(mat.shape) == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def min_singular_value(mat: np.ndarray) -> float:
    """Smallest of the min(rows, cols) singular values."""
    return float(np.linalg.svd(mat, compute_uv=False)[-1])


class StationarityOperators:
    """Constraint operators built from a covariance estimate C_hat.

    Dense matrices (``sigma``, ``sigma_l``, ``j_mat``, ``f_mat``, ``f_mat_l``)
    are built lazily. The ``apply_*`` methods are the matrix-free paths used
    inside the solver.
    """

    def __init__(self, c_hat: np.ndarray, v_hat: np.ndarray | None = None):
        c_hat = np.asarray(c_hat, dtype=float)
        if c_hat.ndim != 2 or c_hat.shape[0] != c_hat.shape[1]:
            raise DimensionError("covariance must be square")
        scale = max(1.0, float(np.max(np.abs(c_hat))))
        if np.max(np.abs(c_hat - c_hat.T)) > 1e-10 * scale:
            raise ValueError("covariance is not symmetric")
        self.c_hat = 0.5 * (c_hat + c_hat.T)
        self.n = c_hat.shape[0]
        if v_hat is None:
            self.v, self.gamma = eigendecompose(self.c_hat)
        else:
            self.v, self.gamma = np.asarray(v_hat, dtype=float), None

    # ---- matrix-free -------------------------------------------------------------

    def commutator(self, s_mat: np.ndarray) -> np.ndarray:
        """S C_hat - C_hat S, the matrix form of Sigma_hat s."""
        return s_mat @ self.c_hat - self.c_hat @ s_mat

    def apply_sigma(self, s: np.ndarray, kind: str = "adjacency") -> np.ndarray:
        return vec(self.commutator(lift_mat(s, kind, self.n)))

    def eig_residual(self, s_mat: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """S - V diag(lam) V^T, the matrix form of U s - J lam."""
        return s_mat - (self.v * lam) @ self.v.T

    def spectral_projection(self, s_mat: np.ndarray) -> np.ndarray:
        """J^T vec(S) = diag(V^T S V)."""
        return np.einsum("ai,ab,bi->i", self.v, s_mat, self.v)

    # ---- dense ---------------------------------------------------------------------

    @cached_property
    def _pairs(self):
        return pair_index(self.n)

    @cached_property
    def sigma(self) -> np.ndarray:
        """(C_hat kron I - I kron C_hat) U, shape N^2 x P."""
        n, c = self.n, self.c_hat
        i, j = self._pairs
        k = np.arange(i.size)
        m = np.zeros((i.size, n, n))
        m[k, i, :] += c[j, :]
        m[k, j, :] += c[i, :]
        m[k, :, j] -= c[i, :]
        m[k, :, i] -= c[j, :]
        return m.transpose(0, 2, 1).reshape(i.size, n * n).T.copy()

    @cached_property
    def sigma_diag(self) -> np.ndarray:
        """Columns of the Kronecker-sum operator at the diagonal positions D."""
        n, c = self.n, self.c_hat
        r = np.arange(n)
        m = np.zeros((n, n, n))
        m[r, r, :] += c
        m[r, :, r] -= c
        return m.transpose(0, 2, 1).reshape(n, n * n).T.copy()

    @cached_property
    def deg(self) -> np.ndarray:
        return build_lift_operators(self.n).deg.toarray()

    @cached_property
    def sigma_l(self) -> np.ndarray:
        """Laplacian analogue of sigma: sigma_l s = vec(L C_hat - C_hat L) for L = lift(s, laplacian)."""
        return self.sigma_diag @ self.deg - self.sigma

    @cached_property
    def j_mat(self) -> np.ndarray:
        """Khatri-Rao product V kron-columnwise V, shape N^2 x N."""
        v = self.v
        return (v[:, None, :] * v[None, :, :]).reshape(self.n * self.n, self.n)

    @cached_property
    def _dup_dense(self) -> np.ndarray:
        return build_lift_operators(self.n).dup.toarray()

    @cached_property
    def f_mat(self) -> np.ndarray:
        """(I - J J^T) U."""
        u = self._dup_dense
        j = self.j_mat
        return u - j @ (j.T @ u)

    @cached_property
    def f_mat_l(self) -> np.ndarray:
        """Laplacian analogue of f_mat."""
        j = self.j_mat
        d = tri_index_sets(self.n).d_set
        proj_d = -j @ j[d, :].T
        proj_d[d, np.arange(self.n)] += 1.0
        return proj_d @ self.deg - self.f_mat

    def constraint_matrix(self, variant: str = "c", kind: str = "adjacency") -> np.ndarray:
        _check_kind(kind)
        if variant == "c":
            return self.sigma if kind == "adjacency" else self.sigma_l
        if variant == "v":
            return self.f_mat if kind == "adjacency" else self.f_mat_l
        raise ValueError(f"unknown variant {variant!r}")


def build_stationarity_operators(c_hat: np.ndarray) -> StationarityOperators:
    return StationarityOperators(c_hat)
