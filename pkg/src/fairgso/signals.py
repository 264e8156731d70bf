"""Stationary graph signals: polynomial filters, sampling and covariances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Gso

EIG_SYM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GraphFilter:
    """Polynomial graph filter H(S) = sum_k coeffs[k] S^k."""

    coeffs: np.ndarray

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy()
        if h.ndim != 1 or h.size < 1:
            raise ValueError("filter taps must be a nonempty vector")
        if not np.any(h != 0):
            raise ValueError("filter needs at least one nonzero tap")
        h.flags.writeable = False
        object.__setattr__(self, "coeffs", h)

    def matrix(self, gso: Gso) -> np.ndarray:
        return apply_filter(gso, self, np.eye(gso.n))


@dataclass(frozen=True, eq=False)
class SampleSet:
    x: np.ndarray
    m: int
    seed: int | None = None

    def __post_init__(self):
        if self.m < 1 or self.x.shape[1] != self.m:
            raise ValueError("sample count must be >= 1 and match the columns of x")


def apply_filter(gso: Gso, filt: GraphFilter, inp: np.ndarray) -> np.ndarray:
    """H(S) @ inp via Horner's rule."""
    s = gso.mat
    inp = np.asarray(inp, dtype=float)
    h = filt.coeffs
    out = h[-1] * inp
    for hk in h[-2::-1]:
        out = s @ out + hk * inp
    return out


def default_filter(gso: Gso, taps=(1.0, 0.5)) -> GraphFilter:
    """Low-pass filter on the spectrally normalized shift, scaled so ||C||_F = N.

    The taps act on S / rho(S), so H(S) = c (h0 I + h1 S / rho) stays invertible
    for h0 > |h1|; c is chosen so that the covariance H^2 has Frobenius norm N.
    """
    taps = np.asarray(taps, dtype=float)
    rho = float(np.max(np.abs(np.linalg.eigvalsh(gso.mat))))
    rho = rho if rho > 0 else 1.0
    coeffs = taps / rho ** np.arange(taps.size)
    c = np.linalg.norm(true_covariance(gso, GraphFilter(coeffs)), "fro")
    return GraphFilter(coeffs * np.sqrt(gso.n / c))


def sample_stationary(gso: Gso, filt: GraphFilter, m: int, seed) -> SampleSet:
    """Draw M columns x = H(S) w with w ~ N(0, I).

    Uses numpy's PCG64 generator (ziggurat normals). ``seed`` may be an int or a
    ``SeedSequence`` spawned for a parallel stream.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    w = rng.standard_normal((gso.n, m))
    return SampleSet(apply_filter(gso, filt, w), m, seed if isinstance(seed, int) else None)


def sample_covariance(x) -> np.ndarray:
    """C_hat = X X^T / M (symmetrized to remove rounding asymmetry)."""
    arr = x.x if isinstance(x, SampleSet) else np.asarray(x, dtype=float)
    c = arr @ arr.T / arr.shape[1]
    return 0.5 * (c + c.T)


def true_covariance(gso: Gso, filt: GraphFilter) -> np.ndarray:
    h = filt.matrix(gso)
    c = h @ h.T
    return 0.5 * (c + c.T)


def eigendecompose(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition, ascending eigenvalues.

    Each eigenvector is signed so that its largest-magnitude entry is positive.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(c))))
    if np.max(np.abs(c - c.T)) > EIG_SYM_TOL * scale:
        raise ValueError("matrix is not symmetric")
    gamma, v = np.linalg.eigh(0.5 * (c + c.T))
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs, gamma
