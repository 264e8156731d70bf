import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairgso import finance as fin
from fairgso.graph import Gso, GroupAssignment, validate


def write_csvs(tmp_path, rows, tickers=("A", "B", "C"), sectors=("x", "x", "y")):
    ret = tmp_path / "r.csv"
    ret.write_text("date," + ",".join(tickers) + "\n" + "\n".join(rows) + "\n")
    sec = tmp_path / "s.csv"
    sec.write_text("ticker,sector\n" + "\n".join(f"{t},{s}" for t, s in zip(tickers, sectors)) + "\n")
    return ret, sec


def toy_panel(returns, labels=(0, 0, 1, 1)) -> fin.ReturnPanel:
    returns = np.asarray(returns, dtype=float)
    n, t = returns.shape
    return fin.ReturnPanel(tuple(f"T{i}" for i in range(n)), GroupAssignment.from_labels(labels[:n]),
                           ("a", "b"), tuple(str(k) for k in range(t)), returns)


def test_ingest_examples(tmp_path):
    rows = [f"d{k},{0.01 * k},{-0.01 * k},{0.02}" for k in range(5)]
    panel = fin.ingest_returns(*write_csvs(tmp_path, rows))
    assert panel.returns.shape == (3, 5) and panel.dropped_rows == 0
    assert panel.sector_names == ("x", "y") and list(panel.sectors.labels) == [0, 0, 1]
    e = math.e
    rows = ["d0,1,1,1", f"d1,{e},{e},{e}", f"d2,{e * e},{e * e},{e * e}"]
    panel = fin.ingest_returns(*write_csvs(tmp_path, rows), from_prices=True)
    np.testing.assert_allclose(panel.returns, np.ones((3, 2)), rtol=1e-12)


def test_ingest_drops_gaps(tmp_path, caplog):
    rows = ["d0,1,2,3", "d1,,2,3", "d2,1,2,3", "d3,1,nan,3"]
    panel = fin.ingest_returns(*write_csvs(tmp_path, rows))
    assert panel.t == 2 and panel.dropped_rows == 2
    assert "dropped 2 rows" in caplog.text


def test_ingest_errors(tmp_path):
    ret, sec = write_csvs(tmp_path, ["d0,1,2,3", "d1,1,2,3"])
    sec.write_text("ticker,sector\nA,x\nB,x\n")
    with pytest.raises(ValueError, match="missing"):
        fin.ingest_returns(ret, sec)
    ret, sec = write_csvs(tmp_path, ["d0,1,2,3"])
    with pytest.raises(ValueError):
        fin.ingest_returns(ret, sec)


def test_panel_roundtrip(tmp_path):
    panel = fin.crash_panel(sizes=(2, 3), t=30, crash=(10, 5), seed=1)
    fin.write_panel(panel, tmp_path / "r.csv", tmp_path / "s.csv")
    back = fin.ingest_returns(tmp_path / "r.csv", tmp_path / "s.csv")
    assert back.returns.tobytes() == panel.returns.tobytes()
    np.testing.assert_array_equal(back.sectors.z, panel.sectors.z)


def test_window_count():
    assert len(fin.window_ends(100, 60, 2)) == 21
    with pytest.raises(ValueError):
        fin.window_ends(50, 60, 2)


def test_constant_panel_is_flagged_uninformative():
    panel = toy_panel(np.full((4, 30), 0.01))
    reps = fin.rolling_estimate(panel, 20, 10, "st")
    assert len(reps) == 2 and all(not r.feasible["informative"] for r in reps)


def test_correlation_baseline_examples():
    rng = np.random.default_rng(0)
    base = rng.standard_normal(50)
    x = np.vstack([base, 2 * base + 1, rng.standard_normal(50), rng.standard_normal(50)])
    g = fin.correlation_baseline(toy_panel(x), 50, 1)[0]
    assert g.mat[0, 1] == pytest.approx(1.0)
    assert validate(g).structural
    x = rng.standard_normal((4, 5000))
    g = fin.correlation_baseline(toy_panel(x), 5000, 1)[0]
    assert g.mat.max() < 2 / np.sqrt(5000) * 2


def test_strategy_examples():
    panel = toy_panel(np.zeros((4, 40)))
    ests = fin.correlation_baseline(toy_panel(np.random.default_rng(1).standard_normal((4, 40))), 10, 5)
    for thr in ("auto", 0.0, 0.5, -math.inf):
        res = fin.run_strategy(ests, panel, 10, 5, threshold=thr)
        np.testing.assert_array_equal(res.value_series, np.ones(len(ests) + 1))


@given(st.integers(0, 2**31))
def test_minus_infinity_threshold_is_always_invest(seed):
    rng = np.random.default_rng(seed)
    panel = toy_panel(0.01 * rng.standard_normal((4, 60)))
    ests = fin.correlation_baseline(panel, 20, 4)
    res = fin.run_strategy(ests, panel, 20, 4, threshold=-math.inf)
    assert res.decisions.all()
    expected = np.exp(np.cumsum(fin.holding_returns(panel, 20, 4)))
    np.testing.assert_allclose(res.value_series[1:], expected, rtol=1e-12)
    auto = fin.run_strategy(ests, panel, 20, 4)
    assert auto.value_series[-1] >= res.value_series[-1]


@given(st.integers(0, 2**31), st.floats(0.01, 100.0))
def test_decisions_invariant_to_weight_scaling(seed, scale):
    rng = np.random.default_rng(seed)
    panel = toy_panel(0.01 * rng.standard_normal((4, 60)))
    ests = fin.correlation_baseline(panel, 20, 4)
    scaled = [Gso(g.mat * scale) for g in ests]
    a = fin.run_strategy(ests, panel, 20, 4)
    b = fin.run_strategy(scaled, panel, 20, 4)
    np.testing.assert_array_equal(a.decisions, b.decisions)


def test_strategy_is_reproducible():
    panel = fin.crash_panel(sizes=(3, 3), t=80, crash=(40, 15), seed=2)
    a = fin.run_strategy(fin.correlation_baseline(panel, 20, 5), panel, 20, 5)
    b = fin.run_strategy(fin.correlation_baseline(panel, 20, 5), panel, 20, 5)
    assert a.value_series.tobytes() == b.value_series.tobytes()
    assert len(a.value_series) == len(a.decisions) + 1 and a.value_series[0] == 1.0
