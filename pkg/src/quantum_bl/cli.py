"""Command-line entry point: ``quantum-bl <command> [options]``.

Settings are layered: built-in defaults, then ``--profile``, then the
``--config`` file (``key = value`` lines, ``#`` comments), then command-line
flags (``--seed``, ``--workers`` and repeated ``--set key=value``).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Optional


from . import backtest, data, plotting, qubo
from .errors import InvalidProbability, ParseError, QuantumBLError
from .solvers import AnsatzSpec, SolveConfig, solve

log = logging.getLogger("quantum_bl")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


PROFILES = {
    "paper12": {"n_assets": 12, "budget": 6, "vqe_reps": 4, "vqe_starts": 10, "vqe_shots": 5,
                "qaoa_reps": 8, "qaoa_starts": 500, "qaoa_shots": 5},
    "paper16": {"n_assets": 16, "budget": 8, "vqe_reps": 6, "vqe_starts": 20, "vqe_shots": 10,
                "qaoa_reps": 10, "qaoa_starts": 500, "qaoa_shots": 10},
    # fast end-to-end run for checks
    "smoke": {"n_assets": 12, "budget": 6, "vqe_reps": 2, "vqe_starts": 2, "vqe_shots": 5,
              "qaoa_reps": 2, "qaoa_starts": 3, "qaoa_shots": 5},
}


@dataclasses.dataclass
class RunConfig:
    prices: Optional[str] = None
    caps: Optional[str] = None
    indicators: Optional[str] = None
    rates: Optional[str] = None
    data_dir: Optional[str] = None
    tickers: Optional[str] = None  # comma-separated subset of price columns
    n_assets: int = 12
    n_weeks: int = 730
    out: str = "out"
    workers: int = 1
    lambdas: str = "0,0.25,0.5,1,2,4,1000000"
    segments: Optional[str] = None  # comma-separated segment indices
    asset: Optional[str] = None
    segment: int = 0
    backtest: backtest.BacktestConfig = dataclasses.field(default_factory=backtest.BacktestConfig)

    def path(self, kind: str) -> Optional[Path]:
        explicit = getattr(self, kind)
        if explicit:
            return Path(explicit)
        if self.data_dir:
            p = Path(self.data_dir) / f"{kind}.csv"
            return p if p.exists() or kind != "rates" else None
        return None


def _coerce(value: str, current, name: str):
    kind = type(current)
    try:
        if isinstance(current, bool):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(current, tuple):
            return tuple(v.strip() for v in value.split(",") if v.strip())
        if current is None:
            return value
        return kind(value)
    except ValueError:
        raise UsageError(f"invalid value for {name}: {value!r}") from None


def apply_settings(cfg: RunConfig, settings: dict, source: str) -> None:
    bt_fields = {f.name for f in dataclasses.fields(backtest.BacktestConfig)}
    top_fields = {f.name for f in dataclasses.fields(RunConfig)} - {"backtest"}
    for key, value in settings.items():
        key = key.strip().replace("-", "_")
        target = cfg if key in top_fields else cfg.backtest if key in bt_fields else None
        if target is not None:
            cur = getattr(target, key)
            setattr(target, key, _coerce(value, cur, key) if isinstance(value, str) else value)
        else:
            raise UsageError(f"unknown setting {key!r} in {source}")


def parse_config_text(text: str, source: str = "config") -> dict:
    """``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source} line {no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(f"{source} line {no}: empty key")
        out[key] = value
    return out


def build_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "profile", None):
        apply_settings(cfg, PROFILES[args.profile], f"profile {args.profile}")
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file {path} not found")
        apply_settings(cfg, parse_config_text(path.read_text(), str(path)), str(path))
    flags = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        flags[k] = v
    for name in ("seed", "out", "workers", "data_dir"):
        v = getattr(args, name, None)
        if v is not None:
            flags[name] = str(v)
    apply_settings(cfg, flags, "command line")
    try:
        cfg.backtest.__post_init__()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def load_market(cfg: RunConfig) -> backtest.MarketData:
    paths = {k: cfg.path(k) for k in ("prices", "caps", "indicators", "rates")}
    missing = [k for k in ("prices", "caps", "indicators") if paths[k] is None]
    if missing:
        raise UsageError(f"missing data paths: {', '.join(missing)} (set data_dir or the paths)")
    prices = data.load_csv(paths["prices"], "prices")
    if cfg.tickers:
        prices = prices.select([t.strip() for t in cfg.tickers.split(",") if t.strip()])
    caps = data.load_csv(paths["caps"], "caps")
    ind = data.load_csv(paths["indicators"], "indicators")
    rates = data.load_csv(paths["rates"], "rates") if paths["rates"] is not None else None
    return backtest.MarketData.from_tables(prices, caps, ind, rates)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_synth_data(cfg: RunConfig) -> int:
    fx = data.synth_fixture(cfg.backtest.seed, cfg.n_assets, cfg.n_weeks)
    paths = data.write_fixture(fx, cfg.out)
    for kind, p in paths.items():
        print(f"{kind}: {p}")
    return EXIT_OK


def cmd_backtest(cfg: RunConfig) -> int:
    md = load_market(cfg)
    segs = None
    if cfg.segments:
        segs = [int(s) for s in cfg.segments.split(",") if s.strip()]
    report = backtest.run_backtest(md, cfg.backtest, workers=cfg.workers, segments=segs)
    paths = backtest.write_report(report, cfg.out)
    summary = json.loads(paths["summary"].read_text())
    print("strategy,mean_cer,final_capital")
    for name, s in summary["strategies"].items():
        print(f"{name},{s['mean_cer']:.6f},{s['capital'][-1]:.6f}")
    for kind, p in paths.items():
        print(f"# {kind}: {p}", file=sys.stderr)
    return EXIT_OK


def cmd_solve(cfg: RunConfig, instance: str, method: str) -> int:
    path = Path(instance)
    if not path.exists():
        raise UsageError(f"instance file {path} not found")
    q = qubo.QuboProblem.from_json(path.read_text())
    m = qubo.to_ising(q)
    ex = qubo.exhaustive_search(m, q.budget) if q.n <= qubo.MAX_EXACT_QUBITS else None
    bt = cfg.backtest
    out = {"n": q.n, "budget": q.budget, "method": method}
    if method == "exact":
        if ex is None:
            raise UsageError(f"exact search limited to n <= {qubo.MAX_EXACT_QUBITS}")
        z = sum(int(b) << i for i, b in enumerate(ex.x_best))
        sol = qubo.make_solution(m, z, q.budget, ex)
    else:
        if method == "vqe":
            spec = AnsatzSpec("heuristic", bt.vqe_reps)
            scfg = SolveConfig(starts=bt.vqe_starts, final_shots=bt.vqe_shots, seed=bt.seed)
        else:
            spec = AnsatzSpec("qaoa", bt.qaoa_reps)
            scfg = SolveConfig(starts=bt.qaoa_starts, final_shots=bt.qaoa_shots, seed=bt.seed)
        res = solve(m, spec, scfg, q.budget, exact=ex)
        sol = res.sampled_solution
        out["ansatz"] = res.to_dict()
    out["bitstring"] = sol.bitstring
    out["energy"] = sol.energy
    out["ar"] = sol.ar
    out["feasible"] = sol.feasible
    if ex is not None:
        out["exhaustive"] = {"e_best": ex.e_best, "e_worst": ex.e_worst, "n_feasible": ex.n_feasible,
                             "best": "".join(str(b) for b in reversed(ex.x_best))}
    text = json.dumps(out, indent=2, sort_keys=True)
    print(text)
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    (Path(cfg.out) / "solution.json").write_text(text + "\n")
    return EXIT_OK


def cmd_penalty_scan(cfg: RunConfig, instance: str) -> int:
    grid = [s.strip() for s in cfg.lambdas.split(",") if s.strip()]
    if not grid:
        raise UsageError("empty lambda grid")
    try:
        lambdas = [float(s) for s in grid]
    except ValueError:
        raise UsageError(f"invalid lambda grid {cfg.lambdas!r}") from None
    if not Path(instance).exists():
        raise UsageError(f"instance file {instance} not found")
    q0 = qubo.QuboProblem.from_json(Path(instance).read_text())
    if q0.n > qubo.MAX_EXACT_QUBITS:
        raise UsageError(f"n={q0.n} above {qubo.MAX_EXACT_QUBITS}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["lambda,lowest_infeasible,fraction_feasible_below,ok"]
    for lam in lambdas:
        q = qubo.build_qubo(q0.sigma, q0.mu, q0.gamma_eff, lam, q0.budget)
        m = qubo.to_ising(q)
        rep = qubo.penalty_report(q, m)
        low = "" if rep["lowest_infeasible"] is None else f"{rep['lowest_infeasible']:.10g}"
        rows.append(f"{lam:g},{low},{rep['fraction_feasible_below']:.6f},{str(rep['ok']).lower()}")
        feas = m.energies[qubo.feasible_mask(q.n, q.budget)]
        plotting.histogram(feas, out / f"penalty_{lam:g}.svg", xlabel="energy",
                           title=f"Feasible energies, lambda={lam:g}", marker=rep["lowest_infeasible"])
    text = "\n".join(rows) + "\n"
    (out / "penalty_scan.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_sample_bound(p_g: float, g: Optional[float]) -> int:
    k_max = qubo.max_justified_shots(p_g)
    print(f"# P_g={p_g:g}" + (f" g={g:g}" if g is not None else ""))
    print(f"K_max,{k_max}")
    print("K,P^K")
    for k in sorted({1, 5, k_max}):
        print(f"{k},{qubo.prob_reach(p_g, k):.6g}")
    return EXIT_OK


def cmd_views_train(cfg: RunConfig) -> int:
    md = load_market(cfg)
    bt = cfg.backtest
    segs = backtest.make_segments(md.n_periods, bt.train_len, bt.test_len, bt.step)
    if not 0 <= cfg.segment < len(segs):
        raise UsageError(f"segment {cfg.segment} outside 0..{len(segs) - 1}")
    seg = segs[cfg.segment]
    inst = backtest.build_instance(md, seg, bt)
    tickers = list(md.prices.columns)
    wanted = tickers if not cfg.asset else [cfg.asset]
    out = Path(cfg.out)
    rows = ["ticker,y1,y2,s1,s2,eta"]
    for t in wanted:
        if t not in tickers:
            raise UsageError(f"unknown asset {t!r}")
        v = inst.asset_views[tickers.index(t)]
        rows.append(f"{t},{v.y1},{v.y2},{v.s1:.6f},{v.s2:.6f},{v.eta:.6f}")
        _write_json(out / "models" / f"{t}.json",
                    {label: model.to_dict() for label, model in v.models.items()})
    text = "\n".join(rows) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    (out / "views.csv").write_text(text)
    _write_json(out / "instance.json", inst.bl_problem.to_dict())
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int)
    common.add_argument("--profile", choices=sorted(PROFILES))
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any setting")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="quantum-bl", description="Quantum-assisted Black-Litterman toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("backtest", parents=[common], help="walk-forward backtest and report")
    s.add_argument("--data-dir", help="directory with prices/caps/indicators[/rates].csv")

    s = sub.add_parser("solve", parents=[common], help="solve a QUBO instance JSON")
    s.add_argument("instance")
    s.add_argument("--method", choices=("vqe", "qaoa", "exact"), default="vqe")

    s = sub.add_parser("views-train", parents=[common], help="train view classifiers for one segment")
    s.add_argument("--data-dir")

    s = sub.add_parser("penalty-scan", parents=[common], help="penalty report over a lambda grid")
    s.add_argument("instance")
    s.add_argument("--lambdas", help="comma-separated grid")

    s = sub.add_parser("sample-bound", parents=[common], help="random-sampling shot bound")
    s.add_argument("--pg", type=float, required=True, help="probability P_g of a good state")
    s.add_argument("--g", type=float, help="AR threshold the probability refers to")

    sub.add_parser("synth-data", parents=[common], help="write the synthetic market fixture")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        if args.command == "penalty-scan" and args.lambdas is not None:
            cfg.lambdas = args.lambdas
        if args.command == "backtest":
            return cmd_backtest(cfg)
        if args.command == "solve":
            return cmd_solve(cfg, args.instance, args.method)
        if args.command == "penalty-scan":
            return cmd_penalty_scan(cfg, args.instance)
        if args.command == "sample-bound":
            return cmd_sample_bound(args.pg, args.g)
        if args.command == "views-train":
            return cmd_views_train(cfg)
        return cmd_synth_data(cfg)
    except (UsageError, ParseError, InvalidProbability) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuantumBLError, ValueError, RuntimeError, OSError, FloatingPointError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
