"""Ground-truth graphs and bias scenarios for synthetic experiments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Gso, GroupAssignment, from_weights, normalize_min_degree

SCENARIOS = ("across_ratio", "subgroup", "weight_bias", "plain_er")


@dataclass(frozen=True)
class ScenarioSpec:
    n: int
    g: int = 2
    kind: str = "plain_er"
    param: float = 0.0
    p: float | None = None
    seed: int = 0
    sizes: tuple[int, ...] | None = None
    weight_range: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.kind!r}")
        if self.kind in ("across_ratio", "subgroup") and not 0.0 <= self.param <= 1.0:
            raise ValueError("ratio / fraction must lie in [0, 1]")
        if self.kind == "weight_bias" and self.param < 1.0:
            raise ValueError("weight-bias factor must be >= 1")
        if not 0.0 < self.edge_prob <= 1.0:
            raise ValueError("edge probability must lie in (0, 1]")
        if self.sizes is not None and (len(self.sizes) != self.g or sum(self.sizes) != self.n):
            raise ValueError("group sizes must have length g and sum to n")

    @property
    def edge_prob(self) -> float:
        """Defaults to an expected degree of 5."""
        return self.p if self.p is not None else min(1.0, 5.0 / (self.n - 1))

    def groups(self) -> GroupAssignment:
        if self.sizes is None:
            return GroupAssignment.balanced(self.n, self.g)
        return GroupAssignment.from_labels(np.repeat(np.arange(self.g), self.sizes), self.g)


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _ensure_degree(w: np.ndarray) -> np.ndarray:
    """Scale up (never down) so that every weighted degree is at least one."""
    dmin = w.sum(axis=1).min()
    if 0 < dmin < 1:
        return w / dmin
    return w


def er_graph(n: int, p: float, seed, weight_dist=(0.5, 1.5), normalize: bool = True) -> Gso:
    """Erdos-Renyi graph with uniform weights.

    Isolated nodes get one edge to a uniformly random other node. With
    ``normalize`` the weights are rescaled so the smallest degree is exactly one,
    which makes the graph the l1-smallest member of its ray in the valid set.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    rng = _rng(seed)
    lo, hi = weight_dist
    iu, ju = np.triu_indices(n, 1)
    mask = rng.random(iu.size) < p
    w = np.zeros((n, n))
    w[iu[mask], ju[mask]] = rng.uniform(lo, hi, mask.sum())
    w = w + w.T
    for u in range(n):
        if not np.any(w[u] > 0):
            v = int(rng.integers(n - 1))
            v += v >= u
            w[u, v] = w[v, u] = rng.uniform(lo, hi)
    gso = Gso(w)
    return normalize_min_degree(gso) if normalize else gso


class _EdgeSet:
    """Mutable edge bookkeeping for rewiring on a weight matrix."""

    def __init__(self, w: np.ndarray, labels: np.ndarray, rng: np.random.Generator):
        self.w = w.copy()
        self.labels = labels
        self.rng = rng
        self.n = w.shape[0]
        self.iu, self.ju = np.triu_indices(self.n, 1)
        self.across = labels[self.iu] != labels[self.ju]

    def present(self) -> np.ndarray:
        return self.w[self.iu, self.ju] > 0

    def block_density(self) -> np.ndarray:
        """Present-edge density of each group-pair block, indexed per node pair."""
        a, b = self.labels[self.iu], self.labels[self.ju]
        key = np.minimum(a, b) * (self.labels.max() + 1) + np.maximum(a, b)
        counts = np.bincount(key, weights=self.present(), minlength=key.max() + 1)
        sizes = np.bincount(key, minlength=key.max() + 1)
        return (counts / np.maximum(sizes, 1))[key]

    def balanced_mask(self, mask: np.ndarray, densest: bool) -> np.ndarray:
        """Restrict ``mask`` to its densest (or sparsest) group-pair block."""
        dens = self.block_density()
        cand = mask & (self.present() if densest else ~self.present())
        if not cand.any():
            return cand
        best = dens[cand].max() if densest else dens[cand].min()
        return cand & np.isclose(dens, best)

    def pick_edge(self, mask: np.ndarray, keep_connected: bool = True) -> int:
        cand = np.flatnonzero(mask & self.present())
        if cand.size == 0:
            raise ValueError("no edge available in the requested category")
        if keep_connected:
            deg = np.count_nonzero(self.w, axis=1)
            safe = cand[(deg[self.iu[cand]] > 1) & (deg[self.ju[cand]] > 1)]
            cand = safe if safe.size else cand
        return int(self.rng.choice(cand))

    def pick_free(self, mask: np.ndarray) -> int:
        cand = np.flatnonzero(mask & ~self.present())
        if cand.size == 0:
            raise ValueError("no free node pair in the requested category")
        return int(self.rng.choice(cand))

    def set(self, k: int, val: float) -> None:
        i, j = self.iu[k], self.ju[k]
        self.w[i, j] = self.w[j, i] = val

    def move(self, src: int, dst: int) -> None:
        val = self.w[self.iu[src], self.ju[src]]
        self.set(src, 0.0)
        self.set(dst, val)

    def reattach(self) -> None:
        """Give every isolated node an edge moved from elsewhere, same category if possible."""
        for u in range(self.n):
            if np.any(self.w[u] > 0):
                continue
            src = self.pick_edge(np.ones_like(self.across), keep_connected=True)
            near = (self.iu == u) | (self.ju == u)
            same = near & (self.across == self.across[src]) & ~self.present()
            self.move(src, self.pick_free(same if same.any() else near))


def set_across_ratio(gso: Gso, groups: GroupAssignment, ratio: float, seed) -> Gso:
    """Rewire edges until the across-group share of edges equals ``ratio``.

    Each move deletes a random edge of the over-represented category and inserts
    its weight at a random free pair of the other category, so the edge count
    and weight multiset are preserved (up to a final scale-up if some degree
    fell below one).
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must lie in [0, 1]")
    es = _EdgeSet(gso.weights, groups.labels, _rng(seed))
    m = int(es.present().sum())
    target = int(round(ratio * m))
    n_across_pairs = int(es.across.sum())
    if target > n_across_pairs or m - target > es.across.size - n_across_pairs:
        raise ValueError(f"ratio {ratio} is infeasible for {m} edges with these groups")
    while True:
        cur = int((es.present() & es.across).sum())
        if cur == target:
            break
        src, dst = (~es.across, es.across) if cur < target else (es.across, ~es.across)
        es.move(es.pick_edge(es.balanced_mask(src, True)), es.pick_free(es.balanced_mask(dst, False)))
    es.reattach()
    return from_weights(_ensure_degree(es.w), gso.kind)


def subgroup_rewire(gso: Gso, groups: GroupAssignment, fraction: float, seed) -> Gso:
    """Graph whose nodes split into within-preferring and across-preferring halves.

    Each group is split at random into halves A (floor(N_g / 2) nodes) and B.
    Half the edges are within-group pairs among A nodes, the rest are
    across-group pairs among B nodes. Then ``fraction`` of the A edges become
    across pairs among A nodes and ``fraction`` of the B edges become within
    pairs among B nodes. When the preferred pairs run out, pairs with one end
    in the subgroup are used.
    Group-level within/across totals stay balanced for every fraction; per-node
    preferences are strongest at 0 and 1 and balanced at 0.5. The edge count
    and weight multiset of ``gso`` are reused.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    rng = _rng(seed)
    labels = groups.labels
    in_a = np.zeros(groups.n, dtype=bool)
    for g in range(groups.g):
        members = rng.permutation(np.flatnonzero(labels == g))
        in_a[members[: members.size // 2]] = True
    es = _EdgeSet(np.zeros_like(gso.weights), labels, rng)
    wts = gso.weights[es.iu, es.ju]
    wts = rng.permutation(wts[wts > 0])
    m = wts.size
    m_a = m // 2
    m_b = m - m_a
    mv_a = int(round(fraction * m_a))
    mv_b = int(round(fraction * m_b))
    a_i, a_j = in_a[es.iu], in_a[es.ju]
    # (preferred pairs, fallback pairs, count); preferred pairs have both ends in the subgroup
    plan = [
        (~es.across & a_i & a_j, ~es.across & (a_i | a_j), m_a - mv_a),
        (es.across & ~a_i & ~a_j, es.across & ~(a_i & a_j), m_b - mv_b),
        (es.across & a_i & a_j, es.across & (a_i | a_j), mv_a),
        (~es.across & ~a_i & ~a_j, ~es.across & ~(a_i & a_j), mv_b),
    ]
    pos = 0
    for core, wide, count in plan:
        for _ in range(count):
            mask = core if (core & ~es.present()).any() else wide
            es.set(es.pick_free(es.balanced_mask(mask, False)), wts[pos])
            pos += 1
    es.reattach()
    return from_weights(_ensure_degree(es.w), gso.kind)


def bias_weights(gso: Gso, groups: GroupAssignment, factor: float) -> Gso:
    """Multiply within-group weights by ``factor`` and across-group weights by 1/factor."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    same = groups.labels[:, None] == groups.labels[None, :]
    w = gso.weights * np.where(same, factor, 1.0 / factor)
    return from_weights(_ensure_degree(w), gso.kind)


def make_scenario(spec: ScenarioSpec) -> tuple[Gso, Gso, GroupAssignment]:
    """Return (target graph, data-generating graph, groups) for a scenario.

    The target and data graphs coincide except for ``weight_bias``, where the
    signals come from a reweighted copy of a fair target. Both are normalized
    to minimum degree one.
    """
    groups = spec.groups()
    seeds = np.random.SeedSequence(spec.seed).spawn(2)
    base = er_graph(spec.n, spec.edge_prob, seeds[0], spec.weight_range)
    if spec.kind == "plain_er":
        return base, base, groups
    if spec.kind == "across_ratio":
        tgt = normalize_min_degree(set_across_ratio(base, groups, spec.param, seeds[1]))
        return tgt, tgt, groups
    if spec.kind == "subgroup":
        tgt = normalize_min_degree(subgroup_rewire(base, groups, spec.param, seeds[1]))
        return tgt, tgt, groups
    fair = normalize_min_degree(set_across_ratio(base, groups, 0.5, seeds[1]))
    return fair, normalize_min_degree(bias_weights(fair, groups, spec.param)), groups
