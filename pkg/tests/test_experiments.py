import csv
import json

import numpy as np
import pytest

from fairgso import experiments as ex
from fairgso.graph import from_weights
from fairgso.solver import SolverConfig


def small_config(**kw):
    base = dict(scenario=ex.ScenarioGrid("across_ratio", 10, (0.2,)), methods=("st", "fst_cg", "st_rw", "st_ba"),
                m=(500,), seeds=(0,), solver=SolverConfig(outer_rounds=1, max_iter=2000))
    base.update(kw)
    return ex.ExperimentConfig(**base)


def test_single_point_one_row_per_method():
    cfg = small_config()
    rows, meds, timings = ex.run_sweep(cfg)
    assert [r["method"] for r in rows] == list(cfg.methods)
    assert len(meds) == len(cfg.methods) and len(timings) == 1
    ba = next(r for r in rows if r["method"] == "st_ba")
    assert ba["bias_g"] < 1e-6


def test_outputs_are_byte_identical(tmp_path):
    cfg = small_config(seeds=(0, 1))
    for d in ("a", "b"):
        ex.write_outputs(cfg, *ex.run_sweep(cfg), tmp_path / d)
    for name in ("results.csv", "medians.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    with (tmp_path / "a" / "medians.csv").open() as fh:
        header = next(csv.reader(fh))
    assert header == ["ratio", "m", "method", "err_med", "biasg_med", "biasn_med", "feasible_frac"]
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["rows"] == 8 and manifest["seeds"] == [0, 1]
    assert ex.config_from_dict(manifest["config"]) == cfg


def test_lower_median():
    assert ex.lower_median([3.0, 1.0, 2.0, 4.0]) == 2.0
    assert ex.lower_median([5.0]) == 5.0


def test_budget_rule():
    g = from_weights(np.ones((4, 4)))
    cfg = small_config()
    assert ex.budget(cfg, g, "group") == pytest.approx(2 * 0.1 * 12 / 12)
    assert ex.budget(cfg, g, "node") == pytest.approx(2 * 0.25 * 12 / 12)
    assert ex.budget(small_config(tau_b=None, tau=0.3), g, "group") == 0.3


def test_config_validation():
    good = {"version": 1, "scenario": {"kind": "subgroup", "n": 10, "grid": [0.0]}}
    assert ex.config_from_dict(good).param_name == "fraction"
    with pytest.raises(ValueError):
        ex.config_from_dict({**good, "version": 2})
    with pytest.raises(ValueError):
        ex.config_from_dict({**good, "colour": 1})
    with pytest.raises(ValueError):
        ex.config_from_dict({**good, "scenario": {**good["scenario"], "q": 1}})
    with pytest.raises(ValueError):
        ex.config_from_dict({**good, "solver": {"alpah": 1}})
    with pytest.raises(ValueError):
        ex.config_from_dict({**good, "methods": ["magic"]})
    with pytest.raises(ValueError):
        ex.config_from_dict({**good, "tau": 0.1, "tau_b": 0.1})
    assert ex.config_from_dict({**good, "tau": 0.1}).tau == 0.1


def test_plain_er_grid_is_node_count():
    cfg = small_config(scenario=ex.ScenarioGrid("plain_er", 0, (8, 12)), methods=("st",))
    rows, _, _ = ex.run_sweep(cfg)
    assert [r["param"] for r in rows] == [8, 12]
