"""Exact statevector simulation of small parameterized circuits.

Conventions
-----------
* Amplitudes are little-endian: qubit ``q`` is bit ``q`` of the basis index.
* Bitstrings are printed most-significant first, so qubit 0 is the rightmost
  character (``format(index, "0{n}b")``).
* Rotations carry no global phase: ``RX(t) = exp(-i t X / 2)``, likewise RY,
  RZ, and ``RZZ(t) = exp(-i t Z⊗Z / 2)``.

Internally every kernel works on a 2-D array of shape ``(batch, 2**n)`` so
the same code path serves single states, batches of feature-map states, and
the state/adjoint pair used for gradients.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, UnsupportedSpec

MAX_QUBITS = 20
ROTATIONS = ("RX", "RY", "RZ", "RZZ")
FIXED = ("H", "CNOT", "CZ")
_SQRT_HALF = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class Gate:
    """One gate of a :class:`Circuit`.

    A rotation angle is ``angle`` when ``slot`` is None, ``coeff * p[slot]``
    for a single slot, and ``coeff * (pi - p[slot]) * (pi - p[slot2])`` for
    the pairwise angle of the Pauli feature map.
    """

    name: str
    qubits: tuple
    angle: float = 0.0
    slot: Optional[int] = None
    coeff: float = 1.0
    slot2: Optional[int] = None

    def resolve(self, params: np.ndarray):
        """Angle for ``params`` of shape (P,) -> float, or (B, P) -> (B,)."""
        if self.slot is None:
            return self.angle
        if self.slot2 is None:
            return self.coeff * params[..., self.slot]
        return self.coeff * (np.pi - params[..., self.slot]) * (np.pi - params[..., self.slot2])

    def to_dict(self) -> dict:
        d = {"name": self.name, "qubits": list(self.qubits)}
        if self.slot is None:
            if self.name in ROTATIONS:
                d["angle"] = self.angle
        else:
            d["slot"] = self.slot
            d["coeff"] = self.coeff
            if self.slot2 is not None:
                d["slot2"] = self.slot2
        return d


@dataclass
class Circuit:
    n_qubits: int
    gates: list = field(default_factory=list)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise UnsupportedSpec(f"n_qubits must be in 1..{MAX_QUBITS}")

    @property
    def n_params(self) -> int:
        slots = {s for g in self.gates for s in (g.slot, g.slot2) if s is not None}
        return max(slots) + 1 if slots else 0

    def add(self, name: str, *qubits: int, angle: float = 0.0, slot=None, coeff: float = 1.0, slot2=None):
        if name not in ROTATIONS + FIXED:
            raise UnsupportedSpec(f"unknown gate {name}")
        arity = 2 if name in ("CNOT", "CZ", "RZZ") else 1
        if len(qubits) != arity or len(set(qubits)) != arity:
            raise UnsupportedSpec(f"{name} acts on {arity} distinct qubit(s), got {qubits}")
        if any(not 0 <= q < self.n_qubits for q in qubits):
            raise DimensionMismatch(f"qubit index out of range in {name}{qubits}")
        self.gates.append(Gate(name, tuple(int(q) for q in qubits), float(angle), slot, float(coeff), slot2))
        return self

    def validate(self) -> None:
        slots = {s for g in self.gates for s in (g.slot, g.slot2) if s is not None}
        if slots and slots != set(range(max(slots) + 1)):
            raise UnsupportedSpec("parameter slots are not contiguous from 0")

    def count(self, *names: str) -> int:
        return sum(g.name in names for g in self.gates)

    def to_json(self) -> str:
        return json.dumps(
            {"n_qubits": self.n_qubits, "n_params": self.n_params, "gates": [g.to_dict() for g in self.gates]},
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        d = json.loads(text)
        c = cls(int(d["n_qubits"]))
        for g in d["gates"]:
            c.add(g["name"], *g["qubits"], angle=g.get("angle", 0.0), slot=g.get("slot"),
                  coeff=g.get("coeff", 1.0), slot2=g.get("slot2"))
        return c


# ---------------------------------------------------------------------------
# basis-index helpers

@lru_cache(maxsize=None)
def _bits(n: int) -> np.ndarray:
    """Bit matrix, shape (2**n, n); entry [z, q] is bit q of z."""
    z = np.arange(2 ** n, dtype=np.int64)
    return ((z[:, None] >> np.arange(n)) & 1).astype(np.int8)


@lru_cache(maxsize=None)
def _zsign(n: int, q: int) -> np.ndarray:
    """Eigenvalue of Z_q on each basis state (+1 for bit 0, -1 for bit 1)."""
    return 1.0 - 2.0 * _bits(n)[:, q]


@lru_cache(maxsize=None)
def _flip(n: int, q: int) -> np.ndarray:
    return np.arange(2 ** n, dtype=np.int64) ^ (1 << q)


@lru_cache(maxsize=None)
def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    z = np.arange(2 ** n, dtype=np.int64)
    return np.where((z >> control) & 1, z ^ (1 << target), z)


def popcounts(n: int) -> np.ndarray:
    return _bits(n).sum(axis=1)


def bitstring(z: int, n: int) -> str:
    return format(int(z), f"0{n}b")


def bits_of(z: int, n: int) -> tuple:
    """Bit tuple in qubit order (qubit 0 first)."""
    return tuple((int(z) >> q) & 1 for q in range(n))


# ---------------------------------------------------------------------------
# gate kernels on arrays of shape (batch, 2**n)

def _single(psi: np.ndarray, n: int, q: int, m00, m01, m10, m11) -> np.ndarray:
    b = psi.shape[0]
    v = psi.reshape(b, 2 ** (n - 1 - q), 2, 2 ** q)
    a0 = v[:, :, 0, :]
    a1 = v[:, :, 1, :]
    out = np.empty_like(v)
    out[:, :, 0, :] = m00 * a0 + m01 * a1
    out[:, :, 1, :] = m10 * a0 + m11 * a1
    return out.reshape(b, -1)


def _col(theta):
    """Broadcast a per-batch angle against (batch, a, b) slices."""
    t = np.asarray(theta, dtype=float)
    return t[:, None, None] if t.ndim else t


def _apply_gate(psi: np.ndarray, n: int, name: str, qubits: tuple, theta) -> np.ndarray:
    if name == "H":
        return _single(psi, n, qubits[0], _SQRT_HALF, _SQRT_HALF, _SQRT_HALF, -_SQRT_HALF)
    if name == "CNOT":
        return psi[:, _cnot_perm(n, qubits[0], qubits[1])]
    if name == "CZ":
        sign = np.where(_bits(n)[:, qubits[0]] & _bits(n)[:, qubits[1]], -1.0, 1.0)
        return psi * sign
    if name in ("RZ", "RZZ"):
        z = _zsign(n, qubits[0]) if name == "RZ" else _zsign(n, qubits[0]) * _zsign(n, qubits[1])
        t = np.asarray(theta, dtype=float)
        t = t[:, None] if t.ndim else t
        return psi * np.exp(-0.5j * t * z)
    half = _col(theta) * 0.5
    c, s = np.cos(half), np.sin(half)
    if name == "RX":
        return _single(psi, n, qubits[0], c, -1j * s, -1j * s, c)
    if name == "RY":
        return _single(psi, n, qubits[0], c, -s, s, c)
    raise UnsupportedSpec(f"unknown gate {name}")


def _apply_generator(psi: np.ndarray, n: int, name: str, qubits: tuple) -> np.ndarray:
    """G·psi where the rotation is exp(-i t G / 2)."""
    q = qubits[0]
    if name == "RX":
        return psi[:, _flip(n, q)]
    if name == "RY":
        # (Y psi)[z] = -i * zsign(z) * psi[z ^ bit]
        return -1j * psi[:, _flip(n, q)] * _zsign(n, q)
    if name == "RZ":
        return psi * _zsign(n, q)
    if name == "RZZ":
        return psi * (_zsign(n, q) * _zsign(n, qubits[1]))
    raise UnsupportedSpec(f"{name} has no generator")


# ---------------------------------------------------------------------------
# public API

def zero_state(n_qubits: int, batch: Optional[int] = None) -> np.ndarray:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise UnsupportedSpec(f"n_qubits must be in 1..{MAX_QUBITS}")
    psi = np.zeros((1 if batch is None else batch, 2 ** n_qubits), dtype=complex)
    psi[:, 0] = 1.0
    return psi[0] if batch is None else psi


def n_qubits_of(state: np.ndarray) -> int:
    size = np.asarray(state).shape[-1]
    n = int(size).bit_length() - 1
    if size < 2 or 2 ** n != size:
        raise DimensionMismatch(f"state length {size} is not a power of two")
    return n


def _check_params(c: Circuit, params) -> np.ndarray:
    p = np.asarray(params if params is not None else [], dtype=float)
    if p.shape[-1:] != (c.n_params,) and not (c.n_params == 0 and p.size == 0):
        raise DimensionMismatch(f"circuit has {c.n_params} parameter slots, got shape {p.shape}")
    return p


def apply_circuit(state: np.ndarray, c: Circuit, params=None) -> np.ndarray:
    """Evolve ``state`` through ``c``.

    ``state`` may be a single state (2**n,) or a batch (B, 2**n). ``params``
    may be (P,) shared by all batch entries or (B, P) with one row per state.
    """
    state = np.asarray(state, dtype=complex)
    if n_qubits_of(state) != c.n_qubits:
        raise DimensionMismatch(f"state has {n_qubits_of(state)} qubits, circuit {c.n_qubits}")
    p = _check_params(c, params)
    single = state.ndim == 1
    psi = state.reshape(1, -1) if single else state.copy()
    if p.ndim == 2 and p.shape[0] != psi.shape[0]:
        if psi.shape[0] != 1:
            raise DimensionMismatch("batch size of params and states differ")
        psi = np.repeat(psi, p.shape[0], axis=0)
        single = False
    n = c.n_qubits
    for g in c.gates:
        theta = g.resolve(p) if g.name in ROTATIONS else None
        psi = _apply_gate(psi, n, g.name, g.qubits, theta)
    return psi[0] if single else psi


def probabilities(state: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(state)) ** 2


def expectation_diagonal(state: np.ndarray, energies: np.ndarray) -> float:
    """Expectation of a diagonal operator with entries ``energies``."""
    energies = np.asarray(energies, dtype=float)
    state = np.asarray(state)
    if state.shape[-1] != energies.shape[0]:
        raise DimensionMismatch(f"state length {state.shape[-1]} vs table length {energies.shape[0]}")
    return probabilities(state) @ energies


def variance_diagonal(state: np.ndarray, energies: np.ndarray) -> float:
    p = probabilities(state)
    mean = p @ energies
    return float(p @ (energies - mean) ** 2)


def expectation_and_gradient(c: Circuit, params, energies: np.ndarray, state=None):
    """Exact ``<H>`` and its gradient by reverse-mode (adjoint) propagation.

    Only valid for unbatched parameter vectors. Gates sharing a slot have their
    contributions summed, each scaled by its ``coeff``.
    """
    p = _check_params(c, params)
    if p.ndim != 1:
        raise DimensionMismatch("gradient needs a single parameter vector")
    n = c.n_qubits
    psi = zero_state(n) if state is None else np.asarray(state, dtype=complex)
    psi = apply_circuit(psi, c, p)
    energies = np.asarray(energies, dtype=float)
    value = float(probabilities(psi) @ energies)
    grad = np.zeros(c.n_params)
    pair = np.stack([psi, energies * psi])  # row 0: state, row 1: adjoint
    for g in reversed(c.gates):
        if g.name in ROTATIONS:
            theta = g.resolve(p)
            if g.slot is not None:
                if g.slot2 is not None:
                    raise UnsupportedSpec("no gradient through pairwise feature angles")
                gpsi = _apply_generator(pair[:1], n, g.name, g.qubits)[0]
                grad[g.slot] += g.coeff * float(np.imag(np.vdot(pair[1], gpsi)))
            pair = _apply_gate(pair, n, g.name, g.qubits, -theta)
        else:
            pair = _apply_gate(pair, n, g.name, g.qubits, None)
    return value, grad


def sample(state: np.ndarray, shots: int, rng: np.random.Generator) -> dict:
    """Draw ``shots`` computational-basis measurements; returns bitstring counts."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = n_qubits_of(state)
    p = probabilities(state).astype(float)
    p = p / p.sum()
    counts = rng.multinomial(int(shots), p)
    idx = np.flatnonzero(counts)
    return {bitstring(z, n): int(counts[z]) for z in idx}


def sample_indices(state: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Basis indices of ``shots`` individual measurements, in draw order."""
    p = probabilities(state).astype(float)
    p = p / p.sum()
    return rng.choice(p.size, size=int(shots), p=p)


# ---------------------------------------------------------------------------
# compiled evaluation

_PAULI = {
    "RX": np.array([[0, 1], [1, 0]], dtype=complex),
    "RY": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "RZ": np.array([[1, 0], [0, -1]], dtype=complex),
}
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT_HALF


def _rotation_matrix(name: str, theta: float) -> np.ndarray:
    if name == "H":
        return _HADAMARD
    c, s = math.cos(0.5 * theta), math.sin(0.5 * theta)
    if name == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if name == "RZ":
        return np.array([[complex(c, -s), 0], [0, complex(c, s)]])
    return np.array([[c, -1j * s], [-1j * s, c]])


class CompiledCircuit:
    """Fused form of a :class:`Circuit` for repeated single-vector evaluation.

    Runs of single-qubit gates on one qubit become one 2x2 block, consecutive
    CNOTs one permutation, and consecutive diagonal gates one phase vector.
    Gradients use reverse-mode propagation over the fused blocks; within a
    2x2 block the derivative reduces to a trace against the reduced
    state/adjoint outer product.
    """

    def __init__(self, c: Circuit):
        if any(g.slot2 is not None for g in c.gates):
            raise UnsupportedSpec("pairwise feature angles cannot be compiled")
        self.n = c.n_qubits
        self.n_params = c.n_params
        self.blocks: list = []
        for g in c.gates:
            self._push(g)
        self._finish()

    def _push(self, g: Gate) -> None:
        n = self.n
        last = self.blocks[-1] if self.blocks else None
        if g.name == "CNOT":
            perm = _cnot_perm(n, *g.qubits)
            if last is not None and last[0] == "perm":
                last[1] = last[1][perm]
            else:
                self.blocks.append(["perm", perm])
            return
        if g.name in ("RX", "RY", "RZ", "H") and last is not None and last[0] == "u" and last[1] == g.qubits[0]:
            last[2].append(g)
            return
        if g.name in ("RZZ", "CZ") or (g.name == "RZ" and last is not None and last[0] == "diag"):
            if last is None or last[0] != "diag":
                last = ["diag", np.zeros(2 ** n), {}]
                self.blocks.append(last)
            bits = _bits(n)
            if g.name == "CZ":
                last[1] = last[1] + np.pi * (bits[:, g.qubits[0]] & bits[:, g.qubits[1]])
                return
            z = _zsign(n, g.qubits[0])
            if g.name == "RZZ":
                z = z * _zsign(n, g.qubits[1])
            if g.slot is None:
                last[1] = last[1] - 0.5 * g.angle * z
            else:
                last[2][g.slot] = last[2].get(g.slot, 0.0) + (-0.5 * g.coeff) * z
            return
        self.blocks.append(["u", g.qubits[0], [g]])

    def _finish(self) -> None:
        for b in self.blocks:
            if b[0] == "perm":
                b.append(np.argsort(b[1]))
            elif b[0] == "diag":
                slots = sorted(b[2])
                b[2] = (slots, np.array([b[2][s] for s in slots]).reshape(len(slots), -1))

    def _u_parts(self, comps, p):
        return [_rotation_matrix(g.name, g.resolve(p)) for g in comps]

    def _u(self, comps, p):
        mats = self._u_parts(comps, p)
        u = mats[0]
        for m in mats[1:]:
            u = m @ u
        return mats, u

    def _phase(self, b, p):
        slots, terms = b[2]
        return b[1] + (p[slots] @ terms if slots else 0.0)

    def _unitaries(self, p):
        return [self._u(b[2], p) if b[0] == "u" else None for b in self.blocks]

    def state(self, params, state=None, unitaries=None) -> np.ndarray:
        p = np.asarray(params, dtype=float)
        if p.shape != (self.n_params,):
            raise DimensionMismatch(f"expected {self.n_params} parameters, got {p.shape}")
        unitaries = unitaries or self._unitaries(p)
        psi = zero_state(self.n) if state is None else np.array(state, dtype=complex)
        for b, mu in zip(self.blocks, unitaries):
            if b[0] == "perm":
                psi = psi[b[1]]
            elif b[0] == "diag":
                psi = psi * np.exp(1j * self._phase(b, p))
            else:
                u = mu[1]
                _kernels.apply_u(psi, b[1], u[0, 0], u[0, 1], u[1, 0], u[1, 1])
        return psi

    def expectation(self, params, energies, state=None) -> float:
        return float(probabilities(self.state(params, state)) @ energies)

    def value_and_grad(self, params, energies, state=None):
        p = np.asarray(params, dtype=float)
        unitaries = self._unitaries(p)
        psi = self.state(p, state, unitaries)
        energies = np.asarray(energies, dtype=float)
        value = float(probabilities(psi) @ energies)
        grad = np.zeros(self.n_params)
        lam = energies * psi
        for b, mu in zip(reversed(self.blocks), reversed(unitaries)):
            kind = b[0]
            if kind == "perm":
                psi = psi[b[2]]
                lam = lam[b[2]]
            elif kind == "diag":
                slots, terms = b[2]
                if slots:
                    # d(psi)/d p_s = i * terms[s] * psi
                    grad[slots] += -2.0 * (terms @ (lam.conj() * psi).imag)
                phase = np.exp(-1j * self._phase(b, p))
                psi = psi * phase
                lam = lam * phase
            else:
                q = b[1]
                mats, u = mu
                ud = u.conj().T
                _kernels.apply_u(psi, q, ud[0, 0], ud[0, 1], ud[1, 0], ud[1, 1])
                if any(g.slot is not None for g in b[2]):
                    red = np.array(_kernels.reduce_pair(psi, lam, q)).reshape(2, 2)
                    self._accumulate(grad, b[2], mats, red)
                _kernels.apply_u(lam, q, ud[0, 0], ud[0, 1], ud[1, 0], ud[1, 1])
        return value, grad

    @staticmethod
    def _accumulate(grad, comps, mats, red) -> None:
        suffix = [np.eye(2, dtype=complex)] * (len(mats) + 1)
        for j in range(len(mats) - 1, -1, -1):
            suffix[j] = suffix[j + 1] @ mats[j]
        prefix = np.eye(2, dtype=complex)
        for j, g in enumerate(comps):
            prefix = mats[j] @ prefix
            if g.slot is None:
                continue
            deriv = suffix[j + 1] @ (-0.5j * _PAULI[g.name]) @ prefix
            grad[g.slot] += g.coeff * 2.0 * float(np.real(np.trace(deriv @ red)))


# ---------------------------------------------------------------------------
# feature maps and kernels

_ENTANGLEMENTS = ("none", "linear", "circular", "full")


@dataclass(frozen=True)
class FeatureMapSpec:
    """Data-encoding circuit description.

    ``simple``: one qubit per feature, an RY(x_i) layer, then ``reps``
    further blocks of [CNOT chain (unless entanglement is ``none``), RY layer].
    ``pauli``: ``reps`` blocks of [H layer, then for each Pauli word an
    evolution exp(-i phi P)], with phi(x_i) = x_i and
    phi(x_i, x_j) = (pi - x_i)(pi - x_j).
    """

    kind: str = "simple"
    n_features: int = 4
    reps: int = 0
    entanglement: str = "none"
    paulis: tuple = ("Z", "ZZ")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_features": self.n_features, "reps": self.reps,
                "entanglement": self.entanglement, "paulis": list(self.paulis)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMapSpec":
        return cls(d["kind"], int(d["n_features"]), int(d["reps"]), d["entanglement"], tuple(d["paulis"]))


def entangler_pairs(n: int, entanglement: str) -> list:
    if entanglement == "none" or n < 2:
        return []
    if entanglement == "linear":
        return [(i, i + 1) for i in range(n - 1)]
    if entanglement == "circular":
        pairs = [(i, i + 1) for i in range(n - 1)]
        return pairs + [(n - 1, 0)] if n > 2 else pairs
    if entanglement == "full":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    raise UnsupportedSpec(f"entanglement {entanglement!r}")


def _pauli_rotation(c: Circuit, word: str, qubits: Sequence[int], slot, slot2=None):
    """Append exp(-i phi P_word) with phi taken from the slot(s)."""
    if len(word) == 1:
        c.add("R" + word, qubits[0], slot=slot, coeff=2.0)
        return
    for p, q in zip(word, qubits):
        if p == "X":
            c.add("H", q)
        elif p == "Y":
            c.add("RX", q, angle=np.pi / 2)
    c.add("RZZ", *qubits, slot=slot, coeff=2.0, slot2=slot2)
    for p, q in zip(word, qubits):
        if p == "X":
            c.add("H", q)
        elif p == "Y":
            c.add("RX", q, angle=-np.pi / 2)


def build_feature_map(spec: FeatureMapSpec) -> Circuit:
    n = spec.n_features
    if spec.kind not in ("simple", "pauli"):
        raise UnsupportedSpec(f"feature map kind {spec.kind!r}")
    if spec.entanglement not in _ENTANGLEMENTS:
        raise UnsupportedSpec(f"entanglement {spec.entanglement!r}")
    if spec.reps < 0 or n < 1:
        raise UnsupportedSpec("reps must be >= 0 and n_features >= 1")
    c = Circuit(n)
    pairs = entangler_pairs(n, spec.entanglement)
    if spec.kind == "simple":
        for q in range(n):
            c.add("RY", q, slot=q)
        for _ in range(spec.reps):
            for a, b in pairs:
                c.add("CNOT", a, b)
            for q in range(n):
                c.add("RY", q, slot=q)
        return c
    for word in spec.paulis:
        if len(word) not in (1, 2) or set(word) - set("XYZ"):
            raise UnsupportedSpec(f"Pauli word {word!r}")
    for _ in range(max(spec.reps, 1)):
        for q in range(n):
            c.add("H", q)
        for word in spec.paulis:
            if len(word) == 1:
                for q in range(n):
                    _pauli_rotation(c, word, (q,), q)
            else:
                for a, b in pairs:
                    _pauli_rotation(c, word, (a, b), a, b)
    return c


def feature_states(x, spec: FeatureMapSpec, circuit: Optional[Circuit] = None) -> np.ndarray:
    """Encoded states for the rows of ``x``; shape (len(x), 2**n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.n_features:
        raise DimensionMismatch(f"expected {spec.n_features} features, got {x.shape[1]}")
    c = circuit or build_feature_map(spec)
    return apply_circuit(zero_state(c.n_qubits, batch=len(x)), c, x)


def kernel_entry(x1, x2, spec: FeatureMapSpec) -> float:
    """|<0|U(x1)^† U(x2)|0>|^2."""
    s = feature_states(np.vstack([np.ravel(x1), np.ravel(x2)]), spec)
    return float(abs(np.vdot(s[0], s[1])) ** 2)


def kernel_matrix(xa, xb, spec: FeatureMapSpec) -> np.ndarray:
    sa = feature_states(xa, spec)
    sb = sa if xb is None else feature_states(xb, spec)
    return np.abs(sa.conj() @ sb.T) ** 2


def random_circuit(n_qubits: int, depth: int, rng: np.random.Generator) -> Circuit:
    """Random bound circuit over the full gate set (used by tests and demos)."""
    c = Circuit(n_qubits)
    for _ in range(depth):
        name = str(rng.choice(list(ROTATIONS + FIXED)))
        if name in ("CNOT", "CZ", "RZZ"):
            if n_qubits < 2:
                continue
            a, b = rng.choice(n_qubits, size=2, replace=False)
            c.add(name, int(a), int(b), angle=float(rng.uniform(0, 2 * np.pi)))
        else:
            c.add(name, int(rng.integers(n_qubits)), angle=float(rng.uniform(0, 2 * np.pi)))
    return c
