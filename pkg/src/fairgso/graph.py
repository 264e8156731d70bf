"""Graph-shift operators, group assignments and their basic conversions."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("adjacency", "laplacian")
SYM_TOL = 1e-12
ROWSUM_TOL = 1e-10
DEGREE_TOL = 1e-9


class KindError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class GroupSizeError(ValueError):
    pass


def _check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise KindError(f"unknown GSO kind {kind!r}; expected one of {KINDS}")
    return kind


def _is_symmetric(mat: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
    return bool(np.all(np.abs(mat - mat.T) <= SYM_TOL * scale))


@dataclass(frozen=True, eq=False)
class Gso:
    """Symmetric graph-shift operator tagged as an adjacency or a Laplacian.

    The matrix is copied and marked read-only. Asymmetric input is rejected;
    sign and degree rules are checked by :func:`validate`, not here, so that
    invalid candidates can still be represented and diagnosed.
    """

    mat: np.ndarray
    kind: str = "adjacency"

    def __post_init__(self):
        mat = np.array(self.mat, dtype=float, copy=True)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"GSO must be square, got shape {mat.shape}")
        if not _is_symmetric(mat):
            raise ValueError("GSO matrix is not symmetric within tolerance")
        _check_kind(self.kind)
        mat.flags.writeable = False
        object.__setattr__(self, "mat", mat)

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    @property
    def offdiag(self) -> np.ndarray:
        """S+ : the matrix with its diagonal removed."""
        out = self.mat.copy()
        np.fill_diagonal(out, 0.0)
        return out

    @property
    def diagpart(self) -> np.ndarray:
        """S- : the diagonal part as a matrix."""
        return np.diag(np.diag(self.mat))

    @property
    def weights(self) -> np.ndarray:
        """Nonnegative edge-weight matrix (A for either kind)."""
        return self.offdiag if self.kind == "adjacency" else -self.offdiag

    @property
    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def with_mat(self, mat: np.ndarray) -> "Gso":
        return Gso(mat, self.kind)


@dataclass(frozen=True, eq=False)
class GroupAssignment:
    """Non-overlapping node groups stored as an N x G indicator matrix."""

    z: np.ndarray
    sizes: np.ndarray = field(init=False)
    n_min: int = field(init=False)
    n_max: int = field(init=False)

    def __post_init__(self):
        z = np.array(self.z, dtype=float, copy=True)
        if z.ndim != 2:
            raise DimensionError("indicator matrix must be 2-D")
        if not np.all((z == 0) | (z == 1)):
            raise ValueError("indicator matrix must be binary")
        if not np.all(z.sum(axis=1) == 1):
            raise ValueError("every node must belong to exactly one group")
        if z.shape[1] < 2:
            raise GroupSizeError("at least two groups are required")
        sizes = z.sum(axis=0).astype(int)
        if sizes.min() < 1:
            raise GroupSizeError("empty group")
        z.flags.writeable = False
        sizes.flags.writeable = False
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "n_min", int(sizes.min()))
        object.__setattr__(self, "n_max", int(sizes.max()))

    @classmethod
    def from_labels(cls, labels, n_groups: int | None = None) -> "GroupAssignment":
        """Build from 0-based integer labels."""
        labels = np.asarray(labels, dtype=int)
        g = int(labels.max()) + 1 if n_groups is None else n_groups
        if labels.min() < 0 or labels.max() >= g:
            raise ValueError("labels out of range")
        z = np.zeros((labels.size, g))
        z[np.arange(labels.size), labels] = 1.0
        return cls(z)

    @classmethod
    def balanced(cls, n: int, g: int = 2) -> "GroupAssignment":
        """Contiguous, as-equal-as-possible groups."""
        return cls.from_labels(np.arange(n) * g // n, g)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def g(self) -> int:
        return self.z.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.z, axis=1)

    @property
    def ones_norm_sq(self) -> float:
        """||Z^T 1||_2^2 = sum of squared group sizes."""
        return float(np.sum(self.sizes.astype(float) ** 2))

    def require_min_size(self, k: int = 2) -> None:
        if self.n_min < k:
            raise GroupSizeError(f"smallest group has {self.n_min} nodes; need at least {k}")


@dataclass(frozen=True)
class ValidationReport:
    symmetric: bool
    sign_pattern: bool
    diagonal: bool
    degree: bool

    @property
    def structural(self) -> bool:
        """All checks except the degree rule."""
        return self.symmetric and self.sign_pattern and self.diagonal

    @property
    def ok(self) -> bool:
        return self.structural and self.degree


def validate(gso, kind: str | None = None) -> ValidationReport:
    """Check membership in the valid adjacency or Laplacian set.

    Accepts a :class:`Gso` or a raw square array (``kind`` required then).
    """
    if isinstance(gso, Gso):
        mat, kind = gso.mat, gso.kind
    else:
        mat = np.asarray(gso, dtype=float)
        kind = _check_kind(kind or "adjacency")
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {mat.shape}")
    off = mat - np.diag(np.diag(mat))
    sym = _is_symmetric(mat)
    if kind == "adjacency":
        sign = bool(np.all(off >= 0))
        diag = bool(np.all(np.diag(mat) == 0))
        degree = bool(np.all(mat.sum(axis=1) >= 1 - DEGREE_TOL))
    else:
        sign = bool(np.all(off <= 0))
        scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
        diag = bool(np.all(np.abs(mat.sum(axis=1)) <= ROWSUM_TOL * scale))
        degree = bool(np.all(np.diag(mat) >= 1 - DEGREE_TOL))
    return ValidationReport(sym, sign, diag, degree)


def adjacency_to_laplacian(gso: Gso) -> Gso:
    if gso.kind != "adjacency":
        raise KindError("expected an adjacency GSO")
    a = gso.mat
    return Gso(np.diag(a.sum(axis=1)) - a, "laplacian")


def laplacian_to_adjacency(gso: Gso) -> Gso:
    if gso.kind != "laplacian":
        raise KindError("expected a Laplacian GSO")
    return Gso(gso.weights, "adjacency")


def from_weights(w: np.ndarray, kind: str = "adjacency") -> Gso:
    """GSO of the given kind built from a nonnegative weight matrix."""
    w = np.array(w, dtype=float)
    np.fill_diagonal(w, 0.0)
    if _check_kind(kind) == "adjacency":
        return Gso(w, kind)
    return Gso(np.diag(w.sum(axis=1)) - w, kind)


def project_feasible(mat, kind: str = "adjacency") -> Gso:
    """Symmetrize and clamp to the sign pattern of ``kind`` (degree rule untouched)."""
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    m = 0.5 * (m + m.T)
    np.fill_diagonal(m, 0.0)
    if _check_kind(kind) == "adjacency":
        return Gso(np.maximum(m, 0.0), kind)
    return from_weights(np.maximum(-m, 0.0), kind)


def normalize_min_degree(gso: Gso) -> Gso:
    """Rescale so that the smallest weighted degree equals one."""
    dmin = gso.degrees.min()
    if dmin <= 0:
        raise ValueError("graph has an isolated node; cannot normalize degrees")
    return gso.with_mat(gso.mat / dmin)


def masked_degrees(gso: Gso, groups: GroupAssignment) -> list[np.ndarray]:
    if gso.n != groups.n:
        raise DimensionError(f"GSO has {gso.n} nodes but groups cover {groups.n}")
    d = gso.degrees
    return [d * groups.z[:, g] for g in range(groups.g)]


def edge_count(gso: Gso) -> int:
    return int(np.count_nonzero(np.triu(gso.weights, 1)))


# --- text formats -------------------------------------------------------------------

def write_edgelist(gso: Gso, path) -> None:
    w = gso.weights
    iu, ju = np.nonzero(np.triu(w, 1))
    lines = [f"n={gso.n} kind={gso.kind}"]
    lines += [f"{i + 1} {j + 1} {float(w[i, j])!r}" for i, j in zip(iu, ju)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path) -> Gso:
    text = Path(path).read_text().split("\n")
    header = dict(tok.split("=", 1) for tok in text[0].split())
    try:
        n = int(header["n"])
        kind = header.get("kind", "adjacency")
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad edge-list header: {text[0]!r}") from exc
    w = np.zeros((n, n))
    for lineno, line in enumerate(text[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'i j w'")
        i, j, val = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"line {lineno}: bad node pair")
        w[i, j] = w[j, i] = val
    return from_weights(w, kind)


def write_groups(groups: GroupAssignment, path) -> None:
    Path(path).write_text("\n".join(str(int(x) + 1) for x in groups.labels) + "\n")


def read_groups(path) -> GroupAssignment:
    ids = [int(tok) for tok in Path(path).read_text().split()]
    if not ids:
        raise ValueError("empty group file")
    labels = np.asarray(ids) - 1
    if labels.min() < 0:
        raise ValueError("group ids must be in [1, G]")
    return GroupAssignment.from_labels(labels)
