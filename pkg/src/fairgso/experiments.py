"""Config-driven synthetic sweeps: scenarios x sample counts x seeds x methods."""
from __future__ import annotations

import csv
import json
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .bias import normalized_bias, relative_error
from .graph import edge_count
from .signals import default_filter, sample_covariance, sample_stationary
from .solver import (
    SolverConfig,
    balance_baseline,
    fair_spec_temp_c,
    fair_spec_temp_v,
    rewire_baseline,
    spec_temp,
)
from .synth import SCENARIOS, ScenarioSpec, make_scenario
from .vectorize import StationarityOperators

SCHEMA_VERSION = 1
METHODS = ("st", "fst_cg", "fst_cn", "fst_vg", "fst_vn", "st_rw", "st_ba")
PARAM_NAMES = {"across_ratio": "ratio", "subgroup": "fraction", "weight_bias": "factor", "plain_er": "n"}
RESULT_COLUMNS = ("param", "m", "seed", "method", "err", "bias_g", "bias_n",
                  "residual", "feasible", "iterations")


@dataclass(frozen=True)
class ScenarioGrid:
    kind: str
    n: int
    grid: tuple
    g: int = 2
    sizes: tuple | None = None
    p: float | None = None

    def spec(self, value, seed: int) -> ScenarioSpec:
        sizes = tuple(self.sizes) if self.sizes is not None else None
        if self.kind == "plain_er":
            return ScenarioSpec(n=int(value), g=self.g, kind="plain_er", p=self.p, seed=seed, sizes=sizes)
        return ScenarioSpec(n=self.n, g=self.g, kind=self.kind, param=float(value), p=self.p,
                            seed=seed, sizes=sizes)


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep description.

    ``tau_b`` sets each fair method's budget from the SpecTemp estimate of the
    same data: tau = 2 * tau_b * ||S_st+||_1 / (N^2 - N), i.e. the target is a
    normalized bias of ``tau_b`` at SpecTemp's average edge weight. Node-metric
    methods use ``tau_b_node`` (falls back to ``tau_b``); node-wise bias of a
    sparse random graph is inflated by degree noise, so it gets a looser
    default. Setting ``tau`` instead uses one absolute budget for every run.
    """

    scenario: ScenarioGrid
    methods: tuple = METHODS
    m: tuple = (10_000,)
    seeds: tuple = tuple(range(10))
    solver: SolverConfig = field(default_factory=SolverConfig)
    tau_b: float | None = 0.1
    tau_b_node: float | None = 0.25
    tau: float | None = None
    rewire_fraction: float = 0.1
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if not self.scenario.grid or not self.m or not self.seeds or not self.methods:
            raise ValueError("grids, sample counts, seeds and methods must be nonempty")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods: {sorted(bad)}")
        if self.scenario.kind not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario.kind!r}")
        if (self.tau_b is None) == (self.tau is None):
            raise ValueError("set exactly one of tau_b and tau")

    @property
    def param_name(self) -> str:
        return PARAM_NAMES[self.scenario.kind]


_TOP_KEYS = {"version", "scenario", "methods", "m", "seeds", "solver", "tau_b", "tau_b_node", "tau",
             "rewire_fraction", "workers", "output"}
_SCEN_KEYS = {"kind", "n", "grid", "g", "sizes", "p"}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise ValueError(f"unknown keys in {where}: {sorted(extra)}")


def config_from_dict(d: dict) -> ExperimentConfig:
    _reject_unknown(d, _TOP_KEYS, "config")
    if d.get("version") != SCHEMA_VERSION:
        raise ValueError(f"config version must be {SCHEMA_VERSION}")
    sc = dict(d["scenario"])
    _reject_unknown(sc, _SCEN_KEYS, "scenario")
    sc["grid"] = tuple(sc["grid"])
    if sc.get("sizes") is not None:
        sc["sizes"] = tuple(sc["sizes"])
    solver_keys = {f.name for f in fields(SolverConfig)}
    sol = dict(d.get("solver", {}))
    _reject_unknown(sol, solver_keys, "solver")
    for key in ("epsilon", "tau"):
        if sol.get(key) is None:
            sol.pop(key, None)
    kwargs = {k: d[k] for k in ("tau_b", "tau_b_node", "tau", "rewire_fraction", "workers", "output")
              if k in d}
    if d.get("tau") is not None and "tau_b" not in d:
        kwargs["tau_b"] = None
    return ExperimentConfig(
        scenario=ScenarioGrid(**sc),
        methods=tuple(d.get("methods", METHODS)),
        m=tuple(int(x) for x in d.get("m", (10_000,))),
        seeds=tuple(int(x) for x in d.get("seeds", range(10))),
        solver=SolverConfig(**sol),
        **kwargs,
    )


def load_config(path) -> ExperimentConfig:
    return config_from_dict(json.loads(Path(path).read_text()))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    sol = asdict(cfg.solver)
    for key in ("epsilon", "tau"):
        if math.isinf(sol[key]):
            sol[key] = None
    out = {
        "version": SCHEMA_VERSION,
        "scenario": {k: v for k, v in asdict(cfg.scenario).items()},
        "methods": list(cfg.methods),
        "m": list(cfg.m),
        "seeds": list(cfg.seeds),
        "solver": sol,
        "rewire_fraction": cfg.rewire_fraction,
        "workers": cfg.workers,
        "output": cfg.output,
    }
    out.update(tau_b=cfg.tau_b, tau_b_node=cfg.tau_b_node, tau=cfg.tau)
    return out


def budget(cfg: ExperimentConfig, st_gso, metric: str) -> float:
    """Absolute bias budget tau for one run (see :class:`ExperimentConfig`)."""
    if cfg.tau is not None:
        return cfg.tau
    tb = cfg.tau_b_node if metric == "node" and cfg.tau_b_node is not None else cfg.tau_b
    n = st_gso.n
    l1 = float(np.abs(st_gso.offdiag).sum())
    return 2.0 * tb * l1 / (n * n - n)


def _row(param, m, seed, method, est_gso, target, groups, residual, feasible, iters) -> dict:
    def safe(fn):
        try:
            return fn()
        except ValueError:
            return math.nan
    return {
        "param": param, "m": m, "seed": seed, "method": method,
        "err": safe(lambda: relative_error(est_gso, target)),
        "bias_g": safe(lambda: normalized_bias(est_gso, groups, "group")),
        "bias_n": safe(lambda: normalized_bias(est_gso, groups, "node")),
        "residual": residual, "feasible": int(bool(feasible)), "iterations": iters,
    }


def run_task(cfg: ExperimentConfig, grid_idx: int, m: int, seed: int) -> tuple[list[dict], dict]:
    """All methods on one (grid point, sample count, seed)."""
    param = cfg.scenario.grid[grid_idx]
    spec = cfg.scenario.spec(param, seed)
    target, data_graph, groups = make_scenario(spec)
    filt = default_filter(data_graph)
    samples = sample_stationary(data_graph, filt, m, np.random.SeedSequence([seed, grid_idx, m]))
    c_hat = sample_covariance(samples)
    ops = StationarityOperators(c_hat)
    base = replace(cfg.solver, kind="adjacency")
    rows, timings = [], {}

    def record(method, rep, t0):
        timings[method] = time.perf_counter() - t0
        rows.append(_row(param, m, seed, method, rep.gso, target, groups,
                         rep.commutator_residual, rep.ok, rep.iterations))

    t0 = time.perf_counter()
    st = spec_temp(c_hat, base, ops)
    t_st = time.perf_counter() - t0
    if "st" in cfg.methods:
        record("st", st, t0)
        timings["st"] = t_st
    for method in cfg.methods:
        t0 = time.perf_counter()
        if method in ("fst_cg", "fst_cn", "fst_vg", "fst_vn"):
            metric = "group" if method.endswith("g") else "node"
            mcfg = replace(base, metric=metric, tau=budget(cfg, st.gso, metric))
            if method.startswith("fst_c"):
                rep = fair_spec_temp_c(c_hat, groups, mcfg, ops)
            else:
                rep = fair_spec_temp_v(ops.v, groups, mcfg, bias_on="spectrum")
            record(method, rep, t0)
        elif method == "st_rw":
            k = int(round(cfg.rewire_fraction * edge_count(st.gso)))
            gso = rewire_baseline(st.gso, groups, k, np.random.SeedSequence([seed, grid_idx, m, 7]))
            rows.append(_row(param, m, seed, method, gso, target, groups,
                             float(np.linalg.norm(ops.commutator(gso.mat))), st.ok, st.iterations))
            timings[method] = t_st + time.perf_counter() - t0
        elif method == "st_ba":
            gso = balance_baseline(st.gso, groups)
            rows.append(_row(param, m, seed, method, gso, target, groups,
                             float(np.linalg.norm(ops.commutator(gso.mat))), st.ok, st.iterations))
            timings[method] = t_st + time.perf_counter() - t0
    return rows, {"param": param, "m": m, "seed": seed, "seconds": timings}


def _task_star(args):
    return run_task(*args)


def lower_median(values) -> float:
    vals = sorted(v for v in values if not math.isnan(v))
    if not vals:
        return math.nan
    return vals[(len(vals) - 1) // 2]


def medians(rows: list[dict]) -> list[dict]:
    keys = sorted({(r["param"], r["m"], r["method"]) for r in rows},
                  key=lambda k: (k[0], k[1], METHODS.index(k[2])))
    out = []
    for param, m, method in keys:
        sel = [r for r in rows if (r["param"], r["m"], r["method"]) == (param, m, method)]
        out.append({
            "param": param, "m": m, "method": method,
            "err_med": lower_median([r["err"] for r in sel]),
            "biasg_med": lower_median([r["bias_g"] for r in sel]),
            "biasn_med": lower_median([r["bias_n"] for r in sel]),
            "feasible_frac": sum(r["feasible"] for r in sel) / len(sel),
        })
    return out


def run_sweep(cfg: ExperimentConfig) -> tuple[list[dict], list[dict], list[dict]]:
    """Run every task; returns (per-seed rows, medians, timings)."""
    tasks = [(cfg, gi, m, seed) for gi in range(len(cfg.scenario.grid)) for m in cfg.m for seed in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_task_star, tasks))
    else:
        results = [run_task(*t) for t in tasks]
    rows = [r for res, _ in results for r in res]
    order = {m: i for i, m in enumerate(METHODS)}
    rows.sort(key=lambda r: (cfg.scenario.grid.index(r["param"]), r["m"], r["seed"], order[r["method"]]))
    return rows, medians(rows), [t for _, t in results]


def _version() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             capture_output=True, text=True, cwd=Path(__file__).parent, timeout=10)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    from . import __version__
    return __version__


def _write_csv(path: Path, rows: list[dict], columns, rename=None) -> None:
    rename = rename or {}
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([rename.get(c, c) for c in columns])
        for r in rows:
            wr.writerow([repr(float(r[c])) if isinstance(r[c], float) else r[c] for c in columns])


def write_outputs(cfg: ExperimentConfig, rows, meds, timings, out_dir) -> None:
    """results.csv (per seed), medians.csv, manifest.json and timings.json.

    Wall times live in timings.json so that the CSV files are reproducible byte
    for byte.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pname = cfg.param_name
    _write_csv(out / "results.csv", rows, RESULT_COLUMNS, {"param": pname})
    _write_csv(out / "medians.csv", meds,
               ("param", "m", "method", "err_med", "biasg_med", "biasn_med", "feasible_frac"),
               {"param": pname})
    manifest = {"version": _version(), "config": config_to_dict(cfg), "seeds": list(cfg.seeds),
                "rows": len(rows)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n")
