"""Variational solvers for Ising models: heuristic hardware-style ansatz and QAOA."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import simulator
from .errors import NonFiniteObjective, UnsupportedSpec
from .numerics import MinimizeConfig, child_seed, make_rng, minimize_local
from .qubo import ExhaustiveResult, IsingModel, Solution, approximation_ratio, exhaustive_search, make_solution
from .simulator import Circuit, CompiledCircuit

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class AnsatzSpec:
    kind: str = "heuristic"
    reps: int = 4

    def __post_init__(self):
        if self.kind not in ("heuristic", "qaoa"):
            raise UnsupportedSpec(f"ansatz kind {self.kind!r}")
        if self.reps < 1:
            raise UnsupportedSpec("reps must be >= 1")

    def n_params(self, n_qubits: int) -> int:
        return 3 * n_qubits * (self.reps + 1) if self.kind == "heuristic" else 2 * self.reps


@dataclass(frozen=True)
class SolveConfig:
    starts: int = 10
    final_shots: int = 5
    seed: int = 0
    optimizer: MinimizeConfig = field(default_factory=lambda: MinimizeConfig(ftol=1e-10, gtol=1e-7, maxiter=2000))

    def __post_init__(self):
        if self.starts < 1 or self.final_shots < 1:
            raise ValueError("starts and final_shots must be >= 1")


@dataclass
class SolveResult:
    best_params: np.ndarray
    ansatz_expectation: float
    ansatz_ar: Optional[float]
    sampled_solution: Solution
    samples: dict
    variance: float
    best_start: int
    start_values: list

    def to_dict(self) -> dict:
        return {
            "best_params": [float(v) for v in self.best_params],
            "ansatz_expectation": self.ansatz_expectation,
            "ansatz_ar": self.ansatz_ar,
            "solution": self.sampled_solution.to_dict(),
            "samples": dict(sorted(self.samples.items())),
            "variance": self.variance,
            "best_start": self.best_start,
            "start_values": [float(v) for v in self.start_values],
        }


def build_heuristic_ansatz(n: int, reps: int) -> Circuit:
    """``reps`` blocks of [RY RZ RY on every qubit, CNOT chain], then a final rotation layer.

    Slots run layer by layer, qubit by qubit, as (theta, phi, lambda);
    total ``3 n (reps + 1)``.
    """
    if n < 2:
        raise UnsupportedSpec("heuristic ansatz needs at least 2 qubits")
    c = Circuit(n)
    slot = 0
    for layer in range(reps + 1):
        for q in range(n):
            for name in ("RY", "RZ", "RY"):
                c.add(name, q, slot=slot)
                slot += 1
        if layer < reps:
            for q in range(n - 1):
                c.add("CNOT", q, q + 1)
    assert c.n_params == 3 * n * (reps + 1)
    return c


def build_qaoa_ansatz(m: IsingModel, reps: int) -> Circuit:
    """Hadamards, then ``reps`` cost/mixer layers; gamma_l is slot 2l, beta_l slot 2l+1.

    The cost layer is exp(-i gamma (H - offset)); the offset only enters
    expectations through the energy table.
    """
    if reps < 1:
        raise UnsupportedSpec("reps must be >= 1")
    n = m.n
    c = Circuit(n)
    for q in range(n):
        c.add("H", q)
    pairs, singles = m.terms()
    for layer in range(reps):
        for i, j, h in pairs:
            c.add("RZZ", i, j, slot=2 * layer, coeff=2.0 * h)
        for i, h in singles:
            c.add("RZ", i, slot=2 * layer, coeff=2.0 * h)
        for q in range(n):
            c.add("RX", q, slot=2 * layer + 1, coeff=2.0)
    assert c.n_params == 2 * reps
    return c


def build_ansatz(m: IsingModel, spec: AnsatzSpec) -> Circuit:
    if spec.kind == "heuristic":
        return build_heuristic_ansatz(m.n, spec.reps)
    return build_qaoa_ansatz(m, spec.reps)


def _optimize_start(compiled: CompiledCircuit, energies: np.ndarray, x0: np.ndarray, cfg: MinimizeConfig):
    def f(x):
        return compiled.expectation(x, energies)

    def vg(x):
        return compiled.value_and_grad(x, energies)

    return minimize_local(f, x0, cfg, value_and_grad=vg)


def best_sampled(m: IsingModel, counts: dict, budget: int, ex: Optional[ExhaustiveResult]) -> Solution:
    """Lowest-energy bitstring among the measured outcomes."""
    best = min((int(b, 2) for b in counts), key=lambda z: (m.energies[z], z))
    return make_solution(m, best, budget, ex)


def solve(m: IsingModel, spec: AnsatzSpec, cfg: SolveConfig, budget: int,
          exact: Optional[ExhaustiveResult] = None) -> SolveResult:
    """Multi-start variational minimization followed by a few final shots.

    Each start draws its initial angles uniformly from [0, 2pi) with a seed
    derived from ``cfg.seed`` and the start index. The start with the lowest
    converged expectation wins (ties broken by start index).
    """
    if m.n > simulator.MAX_QUBITS:
        raise UnsupportedSpec(f"{m.n} qubits exceeds the simulator limit")
    if exact is None and m.n <= 20:
        exact = exhaustive_search(m, budget)
    circuit = build_ansatz(m, spec)
    compiled = CompiledCircuit(circuit)
    n_params = circuit.n_params
    results = []
    failures = 0
    for k in range(cfg.starts):
        x0 = make_rng(child_seed(cfg.seed, k)).uniform(0.0, TWO_PI, size=n_params)
        try:
            res = _optimize_start(compiled, m.energies, x0, cfg.optimizer)
        except (NonFiniteObjective, FloatingPointError) as exc:
            log.warning("start %d failed: %s", k, exc)
            failures += 1
            continue
        results.append((res.fun, k, res.x))
    if not results:
        raise RuntimeError(f"all {failures} optimizer starts failed")
    value, best_k, params = min(results, key=lambda r: (r[0], r[1]))
    state = compiled.state(params)
    counts = simulator.sample(state, cfg.final_shots, make_rng(child_seed(cfg.seed, 1_000_003)))
    solution = best_sampled(m, counts, budget, exact)
    ar = approximation_ratio(value, exact.e_best, exact.e_worst) if exact is not None else None
    return SolveResult(
        best_params=params,
        ansatz_expectation=float(value),
        ansatz_ar=None if ar is None else float(ar),
        sampled_solution=solution,
        samples=counts,
        variance=simulator.variance_diagonal(state, m.energies),
        best_start=best_k,
        start_values=[r[0] for r in sorted(results, key=lambda r: r[1])],
    )


@dataclass(frozen=True)
class VarianceEstimate:
    sampled: float
    analytic: float
    sampled_mean: float
    analytic_mean: float
    shots: int

    def to_dict(self) -> dict:
        return asdict(self)


def ansatz_variance(m: IsingModel, c: Circuit, params, shots: int, rng: np.random.Generator) -> VarianceEstimate:
    """Energy variance of the prepared state from ``shots`` samples and exactly."""
    if shots < 2:
        raise ValueError("need at least 2 shots")
    state = simulator.apply_circuit(simulator.zero_state(c.n_qubits), c, params)
    return state_variance(state, m.energies, shots, rng)


def state_variance(state: np.ndarray, energies: np.ndarray, shots: int, rng: np.random.Generator) -> VarianceEstimate:
    idx = simulator.sample_indices(state, shots, rng)
    e = energies[idx]
    p = simulator.probabilities(state)
    mean = float(p @ energies)
    return VarianceEstimate(
        sampled=float(np.var(e, ddof=1)),
        analytic=float(p @ (energies - mean) ** 2),
        sampled_mean=float(e.mean()),
        analytic_mean=mean,
        shots=int(shots),
    )
