"""Command-line entry point: ``fairgso <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments, finance, guarantees
from .bias import bias_value, build_bias_matrices, normalized_bias, relative_error
from .graph import read_edgelist, read_groups, write_edgelist, write_groups
from .signals import default_filter, eigendecompose, sample_covariance, sample_stationary, true_covariance
from .solver import SolverConfig, fair_spec_temp_c, fair_spec_temp_v
from .synth import SCENARIOS, ScenarioSpec, make_scenario
from .vectorize import StationarityOperators, lift


def _load_matrix(path) -> np.ndarray:
    """.npy, or text with comma or whitespace separators."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    text = path.read_text()
    return np.loadtxt(path, delimiter="," if "," in text else None, ndmin=2)


def _save_matrix(mat: np.ndarray, path) -> None:
    path = Path(path)
    if path.suffix == ".npy":
        np.save(path, mat)
    else:
        np.savetxt(path, mat, delimiter=",", fmt="%.17g")


def _dump(obj, out) -> None:
    text = json.dumps(obj, indent=2, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _finite(x: float):
    return None if x is None or math.isinf(x) else x


# --- subcommands ----------------------------------------------------------------------

def cmd_metrics(args) -> int:
    gso = read_edgelist(args.graph)
    groups = read_groups(args.groups)
    out = {"R_N": bias_value(gso, groups, "node"), "b_N": normalized_bias(gso, groups, "node")}
    if groups.n_min >= 2:
        out.update(R_G=bias_value(gso, groups, "group"), b_G=normalized_bias(gso, groups, "group"))
    else:
        out.update(R_G=None, b_G=None)
    if args.reference:
        out["d"] = relative_error(gso, read_edgelist(args.reference))
    _dump(out, args.out)
    return 0


def cmd_synth(args) -> int:
    sizes = tuple(args.sizes) if args.sizes else None
    spec = ScenarioSpec(n=args.n, g=args.g, kind=args.scenario, param=args.param, p=args.p,
                        seed=args.seed, sizes=sizes)
    target, data, groups = make_scenario(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edgelist(target, out / "target.edges")
    write_edgelist(data, out / "data.edges")
    write_groups(groups, out / "groups.txt")
    return 0


def cmd_signals_export(args) -> int:
    gso = read_edgelist(args.graph)
    filt = default_filter(gso, tuple(args.taps))
    x = sample_stationary(gso, filt, args.m, args.seed)
    _save_matrix(x.x, args.out)
    if args.cov_out:
        _save_matrix(sample_covariance(x), args.cov_out)
    if args.true_cov_out:
        _save_matrix(true_covariance(gso, filt), args.true_cov_out)
    return 0


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        epsilon=math.inf if args.eps is None else args.eps,
        tau=math.inf if args.tau is None else args.tau,
        metric=args.metric, kind=args.kind, alpha=args.alpha, beta=args.beta, gamma=args.gamma,
        max_iter=args.max_iter, tol=args.tol, outer_rounds=args.outer_rounds,
    )


def cmd_estimate(args) -> int:
    if (args.cov is None) == (args.signals is None):
        raise ValueError("give exactly one of --cov and --signals")
    c = _load_matrix(args.cov) if args.cov else sample_covariance(_load_matrix(args.signals))
    groups = read_groups(args.groups) if args.groups else None
    cfg = _solver_config(args)
    if args.variant == "c":
        rep = fair_spec_temp_c(c, groups, cfg)
    else:
        v, _ = eigendecompose(c)
        rep = fair_spec_temp_v(v, groups, cfg, bias_on=args.bias_on)
    out = rep.to_dict()
    out["config"] = {k: _finite(v) if isinstance(v, float) else v for k, v in vars(cfg).items()}
    out["variant"] = args.variant
    _dump(out, args.out)
    return 0 if rep.ok else 2


def cmd_diagnose(args) -> int:
    est = json.loads(Path(args.estimate).read_text())
    s_hat = np.asarray(est["s"], dtype=float)
    target = read_edgelist(args.target)
    groups = read_groups(args.groups)
    c_hat = _load_matrix(args.cov)
    kind = est.get("kind", target.kind)
    gso = lift(s_hat, kind, target.n)
    ops = StationarityOperators(c_hat)
    eps = args.eps if args.eps is not None else est.get("config", {}).get("epsilon")
    tau = args.tau if args.tau is not None else est.get("config", {}).get("tau")
    true_cov = _load_matrix(args.true_cov) if args.true_cov else None
    metric = args.metric
    _, resid = guarantees.lemma_feasibility(target, c_hat, math.inf)
    if eps is None and true_cov is not None and args.m:
        eps = guarantees.recommend_eps(target.n, guarantees.omega(true_cov, target), args.m)
    if eps is None:
        raise ValueError("no epsilon: pass --eps, or --true-cov with --m")
    tau = math.inf if tau is None else tau
    support = guarantees.support_of(target)
    report = {
        "l1_error": float(np.abs(gso.mat - target.mat).sum()),
        "relative_error": relative_error(gso, target),
        "eps": eps,
        "tau": _finite(tau),
        "target_residual": resid,
        "target_feasible": resid <= eps,
        "assumptions": guarantees.assumption_diagnostics(target, ops, args.m or 1, true_cov),
    }
    inputs = guarantees.build_bound_inputs(target, groups, ops, eps, 0.0 if math.isinf(tau) else tau, true_cov) \
        if guarantees.sigma_min_of(ops, target.kind) > 0 else None
    report["bounds"] = None if inputs is None or math.isinf(tau) else guarantees.error_bounds(target, groups, inputs, metric)
    if metric == "group" and groups.n_min < 2:
        bias = None
    else:
        bias = build_bias_matrices(groups).get(metric)
    for variant, fn in (("c", guarantees.check_convexity_c), ("v", guarantees.check_convexity_v)):
        cr = fn(ops, bias, support, None, kind)
        report[f"condition_{variant}"] = {"rank_ok": cr.rank_ok, "inf_norm_value": _finite(cr.inf_norm_value),
                                          "psi": cr.psi, "verdict": cr.verdict, "diagnostic": cr.diagnostic}
    report["remark2"] = guarantees.remark2_condition(target, groups, ops, eps, metric) if bias is not None else None
    report["estimate_bias"] = bias_value(gso, groups, metric) if bias is not None else None
    _dump(report, args.out)
    return 0


def cmd_bench(args) -> int:
    cfg = experiments.load_config(args.config)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    rows, meds, timings = experiments.run_sweep(cfg)
    experiments.write_outputs(cfg, rows, meds, timings, args.out or cfg.output or ".")
    return 0


def cmd_finance(args) -> int:
    panel = finance.ingest_returns(args.returns, args.sectors, from_prices=args.from_prices)
    if args.method == "corr":
        est = finance.correlation_baseline(panel, args.window, args.step)
    else:
        cfg = SolverConfig(outer_rounds=args.outer_rounds)
        if args.tau is not None:
            cfg = replace(cfg, tau=args.tau)
        est = finance.rolling_estimate(panel, args.window, args.step, args.method, cfg,
                                       tau_fraction=args.tau_fraction, workers=args.workers)
    thr = args.threshold if args.threshold == "auto" else float(args.threshold)
    res = finance.run_strategy(est, panel, args.window, args.step, args.holding, thr)
    out = res.to_dict()
    out["dropped_rows"] = panel.dropped_rows
    _dump(out, args.out)
    return 0


# --- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairgso", description="Fair graph-shift-operator estimation toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("metrics", help="bias metrics of a graph")
    m.add_argument("--graph", required=True)
    m.add_argument("--groups", required=True)
    m.add_argument("--reference")
    m.add_argument("--out")
    m.set_defaults(func=cmd_metrics)

    s = sub.add_parser("synth", help="generate a scenario graph")
    s.add_argument("--scenario", choices=SCENARIOS, default="plain_er")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--g", type=int, default=2)
    s.add_argument("--param", type=float, default=0.0)
    s.add_argument("--p", type=float)
    s.add_argument("--sizes", type=int, nargs="+")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)

    sg = sub.add_parser("signals", help="stationary signal tools")
    sgs = sg.add_subparsers(dest="signals_command", required=True)
    ex = sgs.add_parser("export", help="sample X = H(S) W and write it")
    ex.add_argument("--graph", required=True)
    ex.add_argument("--m", type=int, required=True)
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--taps", type=float, nargs="+", default=[1.0, 0.5])
    ex.add_argument("--out", required=True, help=".npy or .csv")
    ex.add_argument("--cov-out")
    ex.add_argument("--true-cov-out")
    ex.set_defaults(func=cmd_signals_export)

    e = sub.add_parser("estimate", help="estimate a (fair) GSO")
    e.add_argument("--cov")
    e.add_argument("--signals")
    e.add_argument("--groups")
    e.add_argument("--variant", choices=("c", "v"), default="c")
    e.add_argument("--bias-on", choices=("gso", "spectrum"), default="spectrum")
    e.add_argument("--metric", choices=("group", "node", "none"), default="none")
    e.add_argument("--eps", type=float)
    e.add_argument("--tau", type=float)
    e.add_argument("--kind", choices=("adjacency", "laplacian"), default="adjacency")
    e.add_argument("--alpha", type=float, default=SolverConfig.alpha)
    e.add_argument("--beta", type=float, default=SolverConfig.beta)
    e.add_argument("--gamma", type=float, default=SolverConfig.gamma)
    e.add_argument("--max-iter", type=int, default=SolverConfig.max_iter)
    e.add_argument("--tol", type=float, default=SolverConfig.tol)
    e.add_argument("--outer-rounds", type=int, default=4)
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    d = sub.add_parser("diagnose", help="bounds and recovery conditions for an estimate")
    d.add_argument("--estimate", required=True)
    d.add_argument("--target", required=True)
    d.add_argument("--groups", required=True)
    d.add_argument("--cov", required=True)
    d.add_argument("--true-cov")
    d.add_argument("--m", type=int)
    d.add_argument("--eps", type=float)
    d.add_argument("--tau", type=float)
    d.add_argument("--metric", choices=("group", "node"), default="group")
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    b = sub.add_parser("bench", help="run an experiment sweep from a JSON config")
    b.add_argument("--config", required=True)
    b.add_argument("--out")
    b.add_argument("--workers", type=int)
    b.set_defaults(func=cmd_bench)

    f = sub.add_parser("finance", help="bias-thresholded investment backtest")
    f.add_argument("--returns", required=True)
    f.add_argument("--sectors", required=True)
    f.add_argument("--from-prices", action="store_true")
    f.add_argument("--method", choices=finance.FINANCE_METHODS, default="fst_cg")
    f.add_argument("--window", type=int, default=60)
    f.add_argument("--step", type=int, default=2)
    f.add_argument("--holding", type=int)
    f.add_argument("--threshold", default="auto")
    f.add_argument("--tau", type=float)
    f.add_argument("--tau-fraction", type=float, default=0.5)
    f.add_argument("--outer-rounds", type=int, default=4)
    f.add_argument("--workers", type=int, default=1)
    f.add_argument("--out")
    f.set_defaults(func=cmd_finance)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
