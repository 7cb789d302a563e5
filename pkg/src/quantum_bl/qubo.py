"""Budget-constrained portfolio QUBOs, their Ising form, and exact oracles."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import simulator
from .errors import DegenerateSpectrum, DimensionMismatch, InvalidProbability, NoFeasibleState, ParseError
from .numerics import as_symmetric

MAX_EXACT_QUBITS = 20
VERIFY_QUBITS = 16


@dataclass
class QuboProblem:
    """``value(x) = (gamma_eff/2) x^T Sigma x - mu^T x + penalty (1^T x - budget)^2``.

    ``quadratic`` already holds ``gamma_eff/2 * Sigma`` and ``linear`` holds
    ``-mu``; ``gamma_eff`` and ``mu`` are kept for serialization.
    """

    quadratic: np.ndarray
    linear: np.ndarray
    penalty: float
    budget: int
    sigma: np.ndarray
    mu: np.ndarray
    gamma_eff: float

    @property
    def n(self) -> int:
        return int(self.linear.shape[0])

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        k = x.sum() - self.budget
        return float(x @ self.quadratic @ x + self.linear @ x + self.penalty * k * k)

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma.tolist(),
            "mu": self.mu.tolist(),
            "gamma_eff": self.gamma_eff,
            "penalty": self.penalty,
            "budget": self.budget,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "QuboProblem":
        try:
            return build_qubo(d["sigma"], d["mu"], float(d["gamma_eff"]), float(d["penalty"]), int(d["budget"]))
        except KeyError as exc:
            raise ParseError(f"instance is missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ParseError(f"invalid instance: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "QuboProblem":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(d, dict):
            raise ParseError("instance must be a JSON object")
        return cls.from_dict(d)


def build_qubo(sigma, mu, gamma_eff: float, penalty: float, budget: int) -> QuboProblem:
    sigma = as_symmetric(sigma)
    mu = np.asarray(mu, dtype=float).ravel()
    if sigma.shape[0] != mu.shape[0]:
        raise DimensionMismatch(f"Sigma is {sigma.shape[0]}x{sigma.shape[0]} but mu has {mu.shape[0]} entries")
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    if not 1 <= budget <= mu.shape[0]:
        raise ValueError(f"budget {budget} outside 1..{mu.shape[0]}")
    return QuboProblem(
        quadratic=0.5 * gamma_eff * sigma,
        linear=-mu,
        penalty=float(penalty),
        budget=int(budget),
        sigma=sigma,
        mu=mu,
        gamma_eff=float(gamma_eff),
    )


def qubo_values(q: QuboProblem) -> np.ndarray:
    """Objective on every bitstring index (little-endian), via the bit matrix."""
    x = simulator._bits(q.n).astype(float)
    k = x.sum(axis=1) - q.budget
    return np.einsum("zi,ij,zj->z", x, q.quadratic, x) + x @ q.linear + q.penalty * k * k


@dataclass
class IsingModel:
    """``H = sum_{i<j} J_ij Z_i Z_j + sum_i h_i Z_i + offset`` with its energy table."""

    couplings: np.ndarray  # strictly upper triangular
    fields: np.ndarray
    offset: float
    energies: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.fields.shape[0])

    def energy(self, z: int) -> float:
        spins = 1.0 - 2.0 * np.array(simulator.bits_of(z, self.n))
        return float(spins @ self.couplings @ spins + self.fields @ spins + self.offset)

    def terms(self):
        """Nonzero (i, j, J_ij) couplings and (i, h_i) fields."""
        iu, ju = np.nonzero(self.couplings)
        pairs = [(int(i), int(j), float(self.couplings[i, j])) for i, j in zip(iu, ju)]
        singles = [(int(i), float(h)) for i, h in enumerate(self.fields) if h != 0.0]
        return pairs, singles


def ising_energy_table(couplings: np.ndarray, fields: np.ndarray, offset: float) -> np.ndarray:
    n = fields.shape[0]
    spins = 1.0 - 2.0 * simulator._bits(n)
    return np.einsum("zi,ij,zj->z", spins, couplings, spins) + spins @ fields + offset


def to_ising(q: QuboProblem) -> IsingModel:
    """Substitute ``x = (1 - Z)/2`` and collect coefficients.

    The penalty expands to ``penalty * (x^T 1 1^T x - 2 B 1^T x + B^2)`` and is
    folded into the quadratic/linear/constant parts first.
    """
    n = q.n
    if n > MAX_EXACT_QUBITS:
        raise ValueError(f"n={n} exceeds {MAX_EXACT_QUBITS}")
    quad = q.quadratic + q.penalty * np.ones((n, n))
    lin = q.linear - 2.0 * q.penalty * q.budget
    const = q.penalty * q.budget ** 2
    off = quad - np.diag(np.diag(quad))
    couplings = np.triu(off + off.T, 1) / 4.0
    fields = -off.sum(axis=1) / 2.0 - np.diag(quad) / 2.0 - lin / 2.0
    offset = const + off.sum() / 4.0 + np.trace(quad) / 2.0 + lin.sum() / 2.0
    energies = ising_energy_table(couplings, fields, offset)
    if n <= VERIFY_QUBITS:
        gap = float(np.max(np.abs(energies - qubo_values(q))))
        if gap > 1e-9 * max(1.0, float(np.max(np.abs(energies)))):
            raise ArithmeticError(f"Ising energies deviate from the QUBO by {gap:.3e}")
    return IsingModel(couplings=couplings, fields=fields, offset=float(offset), energies=energies)


@dataclass(frozen=True)
class Solution:
    """A bitstring in asset order (``x[i]`` is qubit/asset ``i``)."""

    x: tuple
    energy: float
    feasible: bool
    ar: Optional[float]

    @property
    def index(self) -> int:
        return sum(int(b) << i for i, b in enumerate(self.x))

    @property
    def bitstring(self) -> str:
        return simulator.bitstring(self.index, len(self.x))

    def to_dict(self) -> dict:
        return {"x": list(self.x), "bitstring": self.bitstring, "energy": self.energy,
                "feasible": self.feasible, "ar": self.ar}


@dataclass(frozen=True)
class ExhaustiveResult:
    e_best: float
    x_best: tuple
    e_worst: float
    x_worst: tuple
    n_feasible: int


def feasible_mask(n: int, budget: int) -> np.ndarray:
    return simulator.popcounts(n) == budget


def exhaustive_search(m: IsingModel, budget: int) -> ExhaustiveResult:
    """Best and worst energies among states with exactly ``budget`` ones."""
    n = m.n
    if n > MAX_EXACT_QUBITS:
        raise ValueError(f"n={n} exceeds {MAX_EXACT_QUBITS}")
    if not 0 <= budget <= n:
        raise NoFeasibleState(f"budget {budget} with {n} assets")
    idx = np.flatnonzero(feasible_mask(n, budget))
    e = m.energies[idx]
    lo, hi = idx[int(np.argmin(e))], idx[int(np.argmax(e))]
    return ExhaustiveResult(
        e_best=float(m.energies[lo]), x_best=simulator.bits_of(lo, n),
        e_worst=float(m.energies[hi]), x_worst=simulator.bits_of(hi, n),
        n_feasible=int(idx.size),
    )


def approximation_ratio(e: float, e_best: float, e_worst: float) -> float:
    """``(E - E_w) / (E* - E_w)``: 1 at the feasible optimum, 0 at the feasible worst."""
    if not e_best < e_worst:
        raise DegenerateSpectrum(f"E*={e_best} is not below E_w={e_worst}")
    return (e - e_worst) / (e_best - e_worst)


def make_solution(m: IsingModel, z: int, budget: int, ex: Optional[ExhaustiveResult] = None) -> Solution:
    x = simulator.bits_of(z, m.n)
    e = float(m.energies[z])
    ar = approximation_ratio(e, ex.e_best, ex.e_worst) if ex is not None else None
    return Solution(x=x, energy=e, feasible=sum(x) == budget, ar=ar)


def penalty_report(q: QuboProblem, m: Optional[IsingModel] = None) -> dict:
    """Where the lowest constraint-violating level sits in the feasible spectrum.

    ``fraction_feasible_below`` is the share of feasible energies strictly
    below the lowest infeasible energy; the penalty is judged adequate when
    that share is at least one half but not all of them.
    """
    m = m or to_ising(q)
    mask = feasible_mask(q.n, q.budget)
    feasible = m.energies[mask]
    infeasible = m.energies[~mask]
    if infeasible.size == 0:
        return {"lowest_infeasible": None, "fraction_feasible_below": 1.0, "ok": False}
    lowest = float(infeasible.min())
    frac = float(np.mean(feasible < lowest))
    return {"lowest_infeasible": lowest, "fraction_feasible_below": frac, "ok": bool(0.5 <= frac < 1.0)}


def random_sampling_p(m: IsingModel, budget: int, g: float, ex: Optional[ExhaustiveResult] = None) -> float:
    """Fraction of all ``2**n`` bitstrings whose AR is at least ``g``."""
    if not 0.0 <= g <= 1.0:
        raise ValueError("g must lie in [0, 1]")
    ex = ex or exhaustive_search(m, budget)
    ar = (m.energies - ex.e_worst) / (ex.e_best - ex.e_worst)
    return float(np.count_nonzero(ar >= g)) / ar.size


def max_justified_shots(p_g: float) -> int:
    """Largest K with ``1 - (1 - p_g)**K <= 2/3``."""
    if not 0.0 < p_g < 1.0:
        raise InvalidProbability(f"P_g={p_g} must lie strictly between 0 and 1")
    k = math.floor(math.log(3.0) / -math.log1p(-p_g))
    # guard the floor against rounding at exact boundaries
    while k > 0 and prob_reach(p_g, k) > 2.0 / 3.0:
        k -= 1
    while prob_reach(p_g, k + 1) <= 2.0 / 3.0:
        k += 1
    return k


def prob_reach(p_g: float, k: int) -> float:
    """Chance that ``k`` uniform random draws hit at least one state with AR >= g."""
    if not 0.0 <= p_g <= 1.0 or k < 0:
        raise InvalidProbability(f"P_g={p_g}, K={k}")
    return 1.0 - (1.0 - p_g) ** k
