"""Sliding-window graph estimation on asset returns and a bias-thresholded strategy."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bias import bias_value, normalized_bias
from .graph import Gso, GroupAssignment, project_feasible
from .solver import EstimateReport, SolverConfig, fair_spec_temp_c, fair_spec_temp_v, spec_temp
from .vectorize import StationarityOperators

log = logging.getLogger(__name__)

FINANCE_METHODS = ("st", "fst_cg", "fst_cn", "fst_vg", "fst_vn", "corr")


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    tickers: tuple
    sectors: GroupAssignment
    sector_names: tuple
    dates: tuple
    returns: np.ndarray  # N x T daily log-returns
    dropped_rows: int = 0

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.shape != (len(self.tickers), len(self.dates)):
            raise ValueError("returns must be N x T with N tickers and T dates")
        if not np.all(np.isfinite(r)):
            raise ValueError("returns contain missing or non-finite values")
        if self.sectors.n != len(self.tickers):
            raise ValueError("sector assignment does not cover the tickers")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)

    @property
    def n(self) -> int:
        return len(self.tickers)

    @property
    def t(self) -> int:
        return len(self.dates)


@dataclass(eq=False)
class StrategyResult:
    bias_series: np.ndarray
    decisions: np.ndarray
    value_series: np.ndarray
    threshold: float

    def to_dict(self) -> dict:
        return {
            "bias_series": self.bias_series.tolist(),
            "decisions": [bool(d) for d in self.decisions],
            "value_series": self.value_series.tolist(),
            "threshold": None if math.isinf(self.threshold) else self.threshold,
        }


# --- ingestion -----------------------------------------------------------------------

def read_sector_map(path) -> dict:
    """CSV with header ``ticker,sector``."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip().lower() for c in rows[0][:2]] != ["ticker", "sector"]:
        raise ValueError("sector map must start with the header 'ticker,sector'")
    out = {}
    for ln, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            raise ValueError(f"sector map line {ln}: expected ticker,sector")
        out[row[0].strip()] = row[1].strip()
    return out


def ingest_returns(csv_path, sector_map_path, from_prices: bool = False) -> ReturnPanel:
    """Read a ``date,<ticker>...`` CSV into a panel.

    Rows with an empty or non-numeric cell are dropped (and counted). With
    ``from_prices`` the values are prices, converted to ln(p_t / p_{t-1})
    after dropping incomplete rows.
    """
    with Path(csv_path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0].strip().lower() != "date":
        raise ValueError("returns CSV must start with a 'date' column header")
    tickers = tuple(c.strip() for c in rows[0][1:])
    if not tickers or len(set(tickers)) != len(tickers):
        raise ValueError("returns CSV needs distinct ticker columns")
    dates, values, dropped = [], [], 0
    for ln, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(tickers) + 1:
            raise ValueError(f"line {ln}: expected {len(tickers) + 1} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row[1:]]
        except ValueError:
            vals = None
        if vals is None or not all(math.isfinite(v) for v in vals):
            dropped += 1
            continue
        dates.append(row[0].strip())
        values.append(vals)
    if dropped:
        log.warning("dropped %d rows with missing values from %s", dropped, csv_path)
    x = np.array(values, dtype=float).T if values else np.zeros((len(tickers), 0))
    if from_prices:
        if np.any(x <= 0):
            raise ValueError("prices must be positive")
        x = np.log(x[:, 1:] / x[:, :-1])
        dates = dates[1:]
    if len(dates) < 2:
        raise ValueError("need at least 2 dates of returns")
    smap = read_sector_map(sector_map_path)
    missing = [t for t in tickers if t not in smap]
    if missing:
        raise ValueError(f"tickers missing from the sector map: {missing}")
    names = tuple(sorted({smap[t] for t in tickers}))
    labels = np.array([names.index(smap[t]) for t in tickers])
    groups = GroupAssignment.from_labels(labels, len(names))
    return ReturnPanel(tickers, groups, names, tuple(dates), x, dropped)


def write_panel(panel: ReturnPanel, returns_path, sectors_path) -> None:
    with Path(returns_path).open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["date", *panel.tickers])
        for k, d in enumerate(panel.dates):
            wr.writerow([d, *(repr(float(v)) for v in panel.returns[:, k])])
    with Path(sectors_path).open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["ticker", "sector"])
        for t, lab in zip(panel.tickers, panel.sectors.labels):
            wr.writerow([t, panel.sector_names[lab]])


# --- windows ------------------------------------------------------------------------

def window_ends(t: int, window_len: int, step: int) -> np.ndarray:
    """Exclusive end index of each window; floor((T - W) / step) + 1 windows."""
    if window_len < 2 or step < 1:
        raise ValueError("window_len must be >= 2 and step >= 1")
    if window_len > t:
        raise ValueError(f"window length {window_len} exceeds the {t} available dates")
    return window_len + step * np.arange((t - window_len) // step + 1)


def window_covariance(x: np.ndarray) -> np.ndarray:
    """Centered covariance scaled to Frobenius norm N (left as is when zero)."""
    xc = x - x.mean(axis=1, keepdims=True)
    c = xc @ xc.T / x.shape[1]
    c = 0.5 * (c + c.T)
    nrm = np.linalg.norm(c)
    return c * (c.shape[0] / nrm) if nrm > 0 else c


def _estimate_window(args) -> EstimateReport:
    c, groups, method, cfg, tau_fraction = args
    ops = StationarityOperators(c)
    base = replace(cfg, metric="none")
    st = spec_temp(c, base, ops)
    if method == "st":
        return st
    metric = "group" if method.endswith("g") else "node"
    tau = cfg.tau
    if math.isinf(tau):
        tau = tau_fraction * math.sqrt(bias_value(st.gso, groups, metric))
    mcfg = replace(cfg, metric=metric, tau=tau)
    if method.startswith("fst_c"):
        return fair_spec_temp_c(c, groups, mcfg, ops)
    return fair_spec_temp_v(ops.v, groups, mcfg, bias_on="spectrum")


def rolling_estimate(panel: ReturnPanel, window_len: int, step: int, method: str = "fst_cg",
                     cfg: SolverConfig | None = None, tau_fraction: float = 0.5,
                     workers: int = 1) -> list[EstimateReport]:
    """One estimate per sliding window.

    Fair methods without an explicit ``cfg.tau`` use tau = ``tau_fraction``
    times the square-root bias of the SpecTemp estimate of the same window.
    """
    if method not in FINANCE_METHODS or method == "corr":
        raise ValueError(f"method must be one of {FINANCE_METHODS[:-1]}; use correlation_baseline for 'corr'")
    cfg = cfg or SolverConfig(outer_rounds=4)
    ends = window_ends(panel.t, window_len, step)
    tasks = [(window_covariance(panel.returns[:, e - window_len:e]), panel.sectors, method, cfg, tau_fraction)
             for e in ends]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_estimate_window, tasks))
    return [_estimate_window(t) for t in tasks]


def correlation_baseline(panel: ReturnPanel, window_len: int, step: int) -> list[Gso]:
    """Absolute off-diagonal correlation per window (zero for constant series)."""
    out = []
    for e in window_ends(panel.t, window_len, step):
        x = panel.returns[:, e - window_len:e]
        xc = x - x.mean(axis=1, keepdims=True)
        sd = np.sqrt(np.sum(xc * xc, axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            r = (xc @ xc.T) / np.outer(sd, sd)
        r = np.nan_to_num(r, nan=0.0, posinf=0.0, neginf=0.0)
        w = np.abs(0.5 * (r + r.T))
        np.fill_diagonal(w, 0.0)
        out.append(project_feasible(np.minimum(w, 1.0), "adjacency"))
    return out


# --- strategy -----------------------------------------------------------------------

def _as_gso(obj) -> Gso:
    return obj.gso if isinstance(obj, EstimateReport) else obj


def holding_returns(panel: ReturnPanel, window_len: int, step: int, holding: int | None = None) -> np.ndarray:
    """Equal-weight log-return of each holding period that starts at a window end."""
    holding = step if holding is None else holding
    if holding < 1:
        raise ValueError("holding must be >= 1")
    ends = window_ends(panel.t, window_len, step)
    daily = panel.returns.mean(axis=0)
    return np.array([daily[e:e + holding].sum() for e in ends])


def _simulate(bias: np.ndarray, period_ret: np.ndarray, threshold: float):
    decisions = bias > threshold
    growth = np.where(decisions, np.exp(period_ret), 1.0)
    return decisions, np.concatenate([[1.0], np.cumprod(growth)])


def auto_threshold_candidates(bias: np.ndarray) -> np.ndarray:
    """-inf, midpoints between distinct observed values, and the maximum (never invest)."""
    u = np.unique(bias)
    return np.concatenate([[-np.inf], 0.5 * (u[:-1] + u[1:]), u[-1:]])


def run_strategy(estimates, panel: ReturnPanel, window_len: int, step: int,
                 holding: int | None = None, threshold="auto") -> StrategyResult:
    """Invest for one holding period after each window whose b_G exceeds the threshold.

    ``threshold='auto'`` picks, in sample, the candidate with the largest final
    value (ties go to the lowest threshold).
    """
    gsos = [_as_gso(e) for e in estimates]
    period_ret = holding_returns(panel, window_len, step, holding)
    if len(gsos) != period_ret.size:
        raise ValueError("estimates are not aligned with the panel windows")
    bias = np.array([_safe_bias(g, panel.sectors) for g in gsos])
    if isinstance(threshold, str):
        if threshold != "auto":
            raise ValueError("threshold must be a number or 'auto'")
        best = None
        for cand in auto_threshold_candidates(bias):
            dec, val = _simulate(bias, period_ret, cand)
            if best is None or val[-1] > best[2][-1]:
                best = (cand, dec, val)
        thr, dec, val = best
    else:
        thr = float(threshold)
        dec, val = _simulate(bias, period_ret, thr)
    return StrategyResult(bias, dec, val, float(thr))


def _safe_bias(gso: Gso, groups: GroupAssignment) -> float:
    try:
        return normalized_bias(gso, groups, "group")
    except ValueError:
        return 0.0


# --- synthetic data -----------------------------------------------------------------

def crash_panel(sizes=(6, 6, 6), t: int = 260, crash: tuple[int, int] = (150, 40), seed=0,
                vol: float = 0.01) -> ReturnPanel:
    """Sector-factor returns with one crash regime.

    Outside the crash each sector follows its own factor with a small positive
    drift. During the crash one market factor drives every ticker with a
    negative drift, so cross-sector correlation is high and the group-wise
    bias of correlation-type graphs collapses.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    g = len(sizes)
    labels = np.repeat(np.arange(g), sizes)
    n = labels.size
    sector_f = rng.standard_normal((g, t))
    market = rng.standard_normal(t)
    idio = rng.standard_normal((n, t))
    calm = 0.8 * sector_f[labels] + 0.1 * market[None, :] + 0.6 * idio
    storm = 0.1 * sector_f[labels] + 1.2 * market[None, :] + 0.4 * idio
    start, length = crash
    in_crash = np.zeros(t, dtype=bool)
    in_crash[start:start + length] = True
    x = np.where(in_crash[None, :], storm, calm) * vol
    x += np.where(in_crash, -0.6 * vol, 0.1 * vol)[None, :]
    tickers = tuple(f"T{i:02d}" for i in range(n))
    names = tuple(f"S{k}" for k in range(g))
    dates = tuple(f"d{k:04d}" for k in range(t))
    return ReturnPanel(tickers, GroupAssignment.from_labels(labels, g), names, dates, x)
