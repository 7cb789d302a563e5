"""Walk-forward backtest of the BL/MPT block portfolios against naive and index benchmarks."""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import blmodel, data, views
from .errors import InsufficientData
from .numerics import child_seed, make_rng
from .qubo import ExhaustiveResult, IsingModel, QuboProblem, Solution, build_qubo, exhaustive_search, \
    make_solution, penalty_report, to_ising
from .simulator import FeatureMapSpec
from .solvers import AnsatzSpec, SolveConfig, solve

log = logging.getLogger(__name__)

STRATEGIES = ("bl_vqe", "bl_qaoa", "bl_exact", "mpt_exact", "naive", "index")
SOLVER_STRATEGIES = ("bl_vqe", "bl_qaoa", "bl_exact", "mpt_exact")
WEEKS = blmodel.WEEKS_PER_YEAR


@dataclass(frozen=True)
class Segment:
    """Half-open windows over return periods."""

    index: int
    train_start: int
    train_end: int
    test_end: int

    @property
    def test_start(self) -> int:
        return self.train_end


def make_segments(n_periods: int, train_len: int = 260, test_len: int = 52, step: int = 52) -> list:
    """All walk-forward segments that fit in ``n_periods`` return periods."""
    if min(train_len, test_len, step) < 1:
        raise ValueError("window lengths must be positive")
    if n_periods < train_len + test_len:
        raise InsufficientData(f"{n_periods} periods < {train_len} + {test_len}")
    segs = []
    start = 0
    while start + train_len + test_len <= n_periods:
        segs.append(Segment(len(segs), start, start + train_len, start + train_len + test_len))
        start += step
    return segs


@dataclass
class BacktestConfig:
    budget: int = 6
    penalty: float = 1.0
    tau: float = 0.05
    train_len: int = 260
    test_len: int = 52
    step: int = 52
    horizon: int = 52
    vqe_reps: int = 4
    vqe_starts: int = 10
    vqe_shots: int = 5
    qaoa_reps: int = 8
    qaoa_starts: int = 500
    qaoa_shots: int = 10
    kernel: str = "qsvm"
    rbf_gamma: float = 1.0
    svm_c: float = 1.0
    test_fraction: float = 0.3
    prune_scale: float = 0.1
    gamma_window: int = 520
    gamma_floor: float = 1.0
    annualize: bool = True
    seed: int = 0
    strategies: tuple = STRATEGIES

    def __post_init__(self):
        self.strategies = tuple(self.strategies)
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.kernel not in ("qsvm", "svm_rbf"):
            raise ValueError("kernel must be qsvm or svm_rbf")

    @property
    def periods_per_year(self) -> float:
        return float(WEEKS) if self.annualize else 1.0


@dataclass
class MarketData:
    prices: data.Table
    caps: data.CapsTable
    indicators: data.Table
    rf_weekly: np.ndarray  # per price row

    @property
    def n_periods(self) -> int:
        return len(self.prices) - 1

    @classmethod
    def from_tables(cls, prices, caps, indicators, rates=None) -> "MarketData":
        tables = [prices, indicators] + ([rates] if rates is not None else [])
        aligned = data.align(tables)
        rf = blmodel.irx_to_weekly(aligned[2].column("IRX")) if rates is not None else np.zeros(len(prices))
        return cls(prices=aligned[0], caps=caps, indicators=aligned[1], rf_weekly=rf)

    @classmethod
    def from_fixture(cls, fx: data.Fixture) -> "MarketData":
        return cls.from_tables(fx.prices, fx.caps, fx.indicators, fx.rates)


@dataclass
class StrategyResult:
    strategy: str
    weights: np.ndarray
    test_returns: np.ndarray
    cer: float
    ar: Optional[float] = None
    selection: Optional[str] = None

    def to_dict(self) -> dict:
        return {"strategy": self.strategy, "weights": [float(w) for w in self.weights],
                "cer": self.cer, "ar": self.ar, "selection": self.selection,
                "log_return": float(self.test_returns.sum())}


@dataclass
class SegmentInstance:
    """Everything a segment's optimizers see, built from the training window only."""

    segment: Segment
    inputs: blmodel.BlInputs
    mu_hist: np.ndarray
    asset_views: list
    bl_problem: QuboProblem
    mpt_problem: QuboProblem


def cer(test_returns, gamma: float, periods_per_year: float = 1.0) -> float:
    """Certainty-equivalent return ``mean - gamma/2 * var`` of log returns, scaled per year."""
    r = np.asarray(test_returns, dtype=float)
    if r.size < 2:
        raise ValueError("need at least 2 returns")
    return float(periods_per_year * r.mean() - 0.5 * gamma * periods_per_year * r.var(ddof=1))


def chain_growth(segment_returns) -> np.ndarray:
    """Capital curve ``[1, e^{r1}, e^{r1+r2}, ...]`` from per-segment total log returns."""
    r = np.asarray(segment_returns, dtype=float)
    if r.size < 1:
        raise ValueError("need at least one segment")
    return np.concatenate([[1.0], np.exp(np.cumsum(r))])


def portfolio_returns(prices, weights) -> np.ndarray:
    """Weekly log returns of a buy-and-hold portfolio started with ``weights``."""
    p = np.asarray(prices, dtype=float)
    value = (p / p[0]) @ np.asarray(weights, dtype=float)
    return np.diff(np.log(value))


def repair_selection(m: IsingModel, counts: dict, budget: int, ex: Optional[ExhaustiveResult]) -> Solution:
    """Lowest-energy feasible sampled state, or a greedy fix of the best sample.

    The greedy fix adds (or drops) one asset at a time, always taking the
    move with the lowest resulting energy, until the budget is met.
    """
    n = m.n
    feas = [int(b, 2) for b in counts if b.count("1") == budget]
    if feas:
        return make_solution(m, min(feas, key=lambda z: (m.energies[z], z)), budget, ex)
    z = min((int(b, 2) for b in counts), key=lambda z: (m.energies[z], z))
    while bin(z).count("1") != budget:
        add = bin(z).count("1") < budget
        moves = [z | (1 << i) for i in range(n) if not (z >> i) & 1] if add else \
                [z & ~(1 << i) for i in range(n) if (z >> i) & 1]
        z = min(moves, key=lambda v: (m.energies[v], v))
    return make_solution(m, z, budget, ex)


def _weights_from_selection(x, budget: int) -> np.ndarray:
    return np.asarray(x, dtype=float) / budget


def _feature_map(cfg: BacktestConfig) -> views.Kernel:
    if cfg.kernel == "qsvm":
        return views.QuantumKernel(FeatureMapSpec(kind="simple", n_features=4, reps=0))
    return views.RBFKernel(cfg.rbf_gamma)


def build_instance(md: MarketData, seg: Segment, cfg: BacktestConfig) -> SegmentInstance:
    """Inputs for one segment; reads price/indicator rows up to ``seg.train_end`` only."""
    ppy = cfg.periods_per_year
    decision_row = seg.train_end  # price row at which the portfolio is formed
    prices = md.prices.values[: decision_row + 1]
    train_r = blmodel.log_returns(prices[seg.train_start:])
    sigma = blmodel.covariance(train_r, ppy)
    mu_hist = blmodel.mean_return(train_r, ppy)
    n = sigma.shape[0]
    if not 1 <= cfg.budget <= n:
        raise ValueError(f"budget {cfg.budget} outside 1..{n}")

    as_of = md.prices.dates[decision_row]
    caps = md.caps.snapshot(md.prices.columns, as_of)
    w_mkt = blmodel.cap_weights(caps)
    g_start = max(0, decision_row - cfg.gamma_window)
    if decision_row - g_start < cfg.gamma_window:
        log.warning("segment %d: only %d weeks available for gamma", seg.index, decision_row - g_start)
    levels = blmodel.index_series(prices[g_start:], caps)
    gamma = blmodel.gamma_from_history(levels, md.rf_weekly[g_start:decision_row], floor=cfg.gamma_floor)
    gamma_eff = blmodel.effective_gamma(gamma, cfg.budget)
    pi = blmodel.implied_return(gamma, sigma, w_mkt)

    # views: features fitted on the training rows, labels only where the horizon fits in the window
    ind = md.indicators.values[seg.train_start: decision_row + 1]
    smoothed = data.moving_average(ind)
    tf = data.fit_transform(smoothed)
    feats = tf.apply(smoothed)
    n_lab = (seg.train_end - seg.train_start) - cfg.horizon + 1
    kernel = _feature_map(cfg)
    asset_views = []
    for k in range(n):
        r_k = train_r[:, k]
        y1, y2 = views.label_points(r_k, cfg.horizon)
        x = feats[:n_lab]
        keep = data.prune_conflicts(x, np.column_stack([y1, y2]), scale=cfg.prune_scale)
        rng = make_rng(child_seed(cfg.seed, seg.index, 7, k))
        tr, te = views.split_indices(keep.size, cfg.test_fraction, rng)
        d = views.LabeledDataset(x[keep], y1[keep], y2[keep], tr, te)
        asset_views.append(views.fit_asset_view(d, feats[-1:], kernel, c=cfg.svm_c))
    eta = np.array([v.eta for v in asset_views])
    vs = views.build_views(eta, pi, sigma, cfg.tau)
    mu_bl = blmodel.combined_return(sigma, pi, vs)

    inputs = blmodel.BlInputs(sigma=sigma, w_mkt=w_mkt, gamma=gamma, gamma_eff=gamma_eff, tau=cfg.tau,
                              budget=cfg.budget, penalty=cfg.penalty, pi=pi, mu_bl=mu_bl)
    return SegmentInstance(
        segment=seg, inputs=inputs, mu_hist=mu_hist, asset_views=asset_views,
        bl_problem=build_qubo(sigma, mu_bl, gamma_eff, cfg.penalty, cfg.budget),
        mpt_problem=build_qubo(sigma, mu_hist, gamma_eff, cfg.penalty, cfg.budget),
    )


def run_segment(md: MarketData, seg: Segment, cfg: BacktestConfig) -> dict:
    """Run every configured strategy on one segment; returns a plain record."""
    inst = build_instance(md, seg, cfg)
    test_prices = md.prices.values[seg.test_start: seg.test_end + 1]
    n = test_prices.shape[1]
    gamma = inst.inputs.gamma
    ppy = cfg.periods_per_year

    bl_ising = to_ising(inst.bl_problem)
    bl_exact = exhaustive_search(bl_ising, cfg.budget)
    results = {}
    extra = {}

    def record(name, weights, ar=None, selection=None):
        rets = portfolio_returns(test_prices, weights)
        results[name] = StrategyResult(name, weights, rets, cer(rets, gamma, ppy), ar, selection)

    for name in cfg.strategies:
        if name == "bl_exact":
            sol = make_solution(bl_ising, _index(bl_exact.x_best), cfg.budget, bl_exact)
            record(name, _weights_from_selection(sol.x, cfg.budget), sol.ar, sol.bitstring)
        elif name == "mpt_exact":
            m = to_ising(inst.mpt_problem)
            ex = exhaustive_search(m, cfg.budget)
            sol = make_solution(m, _index(ex.x_best), cfg.budget, ex)
            record(name, _weights_from_selection(sol.x, cfg.budget), sol.ar, sol.bitstring)
        elif name in ("bl_vqe", "bl_qaoa"):
            if name == "bl_vqe":
                spec = AnsatzSpec("heuristic", cfg.vqe_reps)
                scfg = SolveConfig(starts=cfg.vqe_starts, final_shots=cfg.vqe_shots,
                                   seed=child_seed(cfg.seed, seg.index, 1))
            else:
                spec = AnsatzSpec("qaoa", cfg.qaoa_reps)
                scfg = SolveConfig(starts=cfg.qaoa_starts, final_shots=cfg.qaoa_shots,
                                   seed=child_seed(cfg.seed, seg.index, 2))
            res = solve(bl_ising, spec, scfg, cfg.budget, exact=bl_exact)
            sol = repair_selection(bl_ising, res.samples, cfg.budget, bl_exact)
            record(name, _weights_from_selection(sol.x, cfg.budget), sol.ar, sol.bitstring)
            extra[name] = {"ansatz_ar": res.ansatz_ar, "sampled_ar": res.sampled_solution.ar,
                           "sampled_feasible": res.sampled_solution.feasible, "variance": res.variance}
        elif name == "naive":
            record(name, np.full(n, 1.0 / n))
        elif name == "index":
            record(name, inst.inputs.w_mkt)

    return {
        "segment": seg.index,
        "train": [md.prices.dates[seg.train_start].isoformat(), md.prices.dates[seg.train_end].isoformat()],
        "test": [md.prices.dates[seg.test_start].isoformat(), md.prices.dates[seg.test_end].isoformat()],
        "gamma": gamma,
        "gamma_eff": inst.inputs.gamma_eff,
        "eta": [float(v.eta) for v in inst.asset_views],
        "view_accuracy": [[v.s1, v.s2] for v in inst.asset_views],
        "penalty": penalty_report(inst.bl_problem, bl_ising),
        "solver": extra,
        "results": {k: results[k] for k in cfg.strategies},
    }


def _index(bits) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


def _run_one(args):
    md, seg, cfg = args
    return run_segment(md, seg, cfg)


def run_backtest(md: MarketData, cfg: BacktestConfig, workers: int = 1, segments=None) -> dict:
    """Run all segments (optionally in worker processes); seeds depend only on segment index."""
    segs = make_segments(md.n_periods, cfg.train_len, cfg.test_len, cfg.step)
    if segments is not None:
        segs = [segs[i] for i in segments]
    jobs = [(md, s, cfg) for s in segs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(j) for j in jobs]
    return {"config": _config_dict(cfg), "tickers": list(md.prices.columns), "segments": records}


def _config_dict(cfg: BacktestConfig) -> dict:
    d = asdict(cfg)
    d["strategies"] = list(cfg.strategies)
    return d


def _r(v, nd=12):
    return None if v is None else float(round(float(v), nd))


def summarize(report: dict) -> dict:
    """JSON-ready summary: per-strategy mean CER, capital curve, per-segment details."""
    strategies = report["config"]["strategies"]
    segs = report["segments"]
    out = {"config": report["config"], "tickers": report["tickers"], "strategies": {}, "segments": []}
    for s in strategies:
        cers = [seg["results"][s].cer for seg in segs]
        totals = [float(seg["results"][s].test_returns.sum()) for seg in segs]
        ars = [seg["results"][s].ar for seg in segs if seg["results"][s].ar is not None]
        out["strategies"][s] = {
            "mean_cer": _r(np.mean(cers)),
            "cer": [_r(c) for c in cers],
            "capital": [_r(v) for v in chain_growth(totals)],
            "mean_ar": _r(np.mean(ars)) if ars else None,
        }
    for seg in segs:
        out["segments"].append({
            "segment": seg["segment"],
            "train": seg["train"],
            "test": seg["test"],
            "gamma": _r(seg["gamma"]),
            "gamma_eff": _r(seg["gamma_eff"]),
            "eta": [_r(v) for v in seg["eta"]],
            "penalty_ok": seg["penalty"]["ok"],
            "fraction_feasible_below": _r(seg["penalty"]["fraction_feasible_below"]),
            "solver": {k: {kk: (_r(vv) if isinstance(vv, float) else vv) for kk, vv in v.items()}
                       for k, v in seg["solver"].items()},
            "selection": {s: seg["results"][s].selection for s in strategies},
        })
    return out


def segments_csv(report: dict) -> str:
    """One row per (segment, strategy): weights, AR and CER."""
    tickers = report["tickers"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["segment", "test_start", "test_end", "strategy", "cer", "ar", "log_return", *tickers])
    for seg in report["segments"]:
        for name, res in seg["results"].items():
            w.writerow([seg["segment"], seg["test"][0], seg["test"][1], name, f"{res.cer:.10g}",
                        "" if res.ar is None else f"{res.ar:.10g}", f"{res.test_returns.sum():.10g}",
                        *(f"{x:.10g}" for x in res.weights)])
    return buf.getvalue()


def write_report(report: dict, out_dir) -> dict:
    """Write ``segments.csv``, ``summary.json`` and figures; returns the paths."""
    from . import plotting

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(report)
    paths = {
        "segments": out / "segments.csv",
        "summary": out / "summary.json",
        "capital": out / "capital_growth.svg",
        "cer": out / "cer.svg",
    }
    paths["segments"].write_text(segments_csv(report))
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    curves = {s: v["capital"] for s, v in summary["strategies"].items()}
    plotting.line_chart(curves, paths["capital"], xlabel="segment", ylabel="capital",
                        title="Capital growth")
    plotting.bar_chart({s: v["mean_cer"] for s, v in summary["strategies"].items()}, paths["cer"],
                       ylabel="mean CER", title="Certainty-equivalent return")
    return paths
