import numpy as np
import pytest
from hypothesis import settings

from fairgso.graph import GroupAssignment, from_weights

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def random_weights(rng: np.random.Generator, n: int, p: float = 0.5) -> np.ndarray:
    """Symmetric nonnegative weights with a zero diagonal and every node of degree > 0."""
    w = np.triu(rng.uniform(0.2, 2.0, (n, n)) * (rng.random((n, n)) < p), 1)
    for i in range(n):
        if w[i].sum() + w[:, i].sum() == 0:
            j = (i + 1) % n
            w[min(i, j), max(i, j)] = 1.0
    return w + w.T


def random_gso(rng, n, kind="adjacency", p=0.5):
    return from_weights(random_weights(rng, n, p), kind)


def random_groups(rng, n, g, min_size=2) -> GroupAssignment:
    labels = np.repeat(np.arange(g), min_size)
    labels = np.concatenate([labels, rng.integers(0, g, n - labels.size)])
    return GroupAssignment.from_labels(rng.permutation(labels), g)


def random_cov(rng, n) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return a @ a.T / n


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_groups4() -> GroupAssignment:
    return GroupAssignment.from_labels([0, 0, 1, 1])


def graph4(edges, kind="adjacency"):
    w = np.zeros((4, 4))
    for i, j in edges:
        w[i - 1, j - 1] = w[j - 1, i - 1] = 1.0
    return from_weights(w, kind)


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(k, ok, detail)."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(k: int, ok: bool, detail: str) -> bool:
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((k, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
