"""Investor views from binary classifiers: labels, kernel SVMs, a small QNN, and (P, Q, Omega)."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import simulator
from .errors import DimensionMismatch, InsufficientHistory, NonPositiveVariance, SingleClassTraining
from .numerics import MinimizeConfig, make_rng, minimize_local
from .simulator import Circuit, FeatureMapSpec

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# labels

def label_points(returns, t: int = 52, sigma: Optional[float] = None):
    """Direction and strength labels from the mean of the next ``t`` returns.

    ``returns[k]`` is the log return realized right after date ``k``; the label
    for date ``d`` uses ``returns[d:d+t]``. Returns ``(y1, y2)`` for every date
    with a complete horizon: ``y1 = -1`` if the mean is negative else ``+1``;
    ``y2 = 2`` if ``|mean| / (sigma / sqrt(t)) >= 1`` else ``1``. ``sigma``
    defaults to the standard deviation of ``returns``.
    """
    r = np.asarray(returns, dtype=float).ravel()
    count = r.size - t + 1
    if t < 1 or count < 1:
        raise InsufficientHistory(f"{r.size} returns cannot cover a {t}-step horizon")
    if sigma is None:
        sigma = float(np.std(r, ddof=1))
    csum = np.concatenate([[0.0], np.cumsum(r)])
    mean = (csum[t:] - csum[:-t]) / t
    y1 = np.where(mean < 0, -1, 1)
    strength = np.abs(mean) / (sigma / np.sqrt(t)) if sigma > 0 else np.full(count, np.inf)
    y2 = np.where(strength >= 1.0, 2, 1)
    return y1.astype(int), y2.astype(int)


@dataclass
class LabeledDataset:
    features: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.y1 = np.asarray(self.y1, dtype=int)
        self.y2 = np.asarray(self.y2, dtype=int)
        if not (len(self.features) == len(self.y1) == len(self.y2)):
            raise DimensionMismatch("features and labels differ in length")
        self.train_idx = np.asarray(self.train_idx, dtype=int)
        self.test_idx = np.asarray(self.test_idx, dtype=int)

    def labels(self, which: str) -> np.ndarray:
        """Labels mapped to +/-1 (for ``y2``: 2 -> +1, 1 -> -1)."""
        if which == "y1":
            return self.y1
        if which == "y2":
            return np.where(self.y2 == 2, 1, -1)
        raise ValueError(f"unknown label {which!r}")


def split_indices(n: int, test_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_test = max(1, int(round(test_fraction * n))) if n > 1 else 0
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


# ---------------------------------------------------------------------------
# kernels

@dataclass(frozen=True)
class QuantumKernel:
    feature_map: FeatureMapSpec = FeatureMapSpec()
    kind: str = field(default="qsvm", init=False)

    def matrix(self, a, b=None) -> np.ndarray:
        return simulator.kernel_matrix(a, b, self.feature_map)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "feature_map": self.feature_map.to_dict()}


@dataclass(frozen=True)
class RBFKernel:
    gamma: float = 1.0
    kind: str = field(default="svm_rbf", init=False)

    def matrix(self, a, b=None) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = a if b is None else np.atleast_2d(np.asarray(b, dtype=float))
        d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
        return np.exp(-self.gamma * np.maximum(d2, 0.0))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma}


Kernel = Union[QuantumKernel, RBFKernel]


def kernel_from_dict(d: dict) -> Kernel:
    if d["kind"] == "qsvm":
        return QuantumKernel(FeatureMapSpec.from_dict(d["feature_map"]))
    return RBFKernel(float(d["gamma"]))


# ---------------------------------------------------------------------------
# SMO dual solver

@dataclass
class SMOResult:
    alpha: np.ndarray
    rho: float
    iterations: int
    gap: float


def smo(kernel_matrix: np.ndarray, y: np.ndarray, c: float = 1.0, tol: float = 1e-3,
        max_iter: int = 100_000) -> SMOResult:
    """Soft-margin SVM dual by pairwise (SMO) updates with second-order pair selection.

    Minimizes ``0.5 a'Qa - 1'a`` with ``Q_ij = y_i y_j K_ij``, ``0 <= a <= c``
    and ``y'a = 0``; stops when the maximal KKT violation drops below ``tol``.
    The decision function is ``sum_i a_i y_i K(x_i, x) - rho``.
    """
    k = np.asarray(kernel_matrix, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(k).copy()
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        yg = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        m_up = yg[i]
        m_low = yg[low].min()
        gap = m_up - m_low
        if gap < tol:
            break
        cand = low & (yg < m_up)
        b = m_up - yg
        a = np.maximum(diag[i] + diag - 2.0 * k[i], 1e-12)
        score = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        step = b[j] / a[j]
        step = min(step, c - alpha[i] if y[i] > 0 else alpha[i])
        step = min(step, c - alpha[j] if y[j] < 0 else alpha[j])
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        alpha[i] = min(max(alpha[i], 0.0), c)
        alpha[j] = min(max(alpha[j], 0.0), c)
        grad += y * (k[:, i] - k[:, j]) * step
    else:
        log.warning("SMO hit the iteration cap with KKT gap %.3e", gap)
    yg = y * grad
    free = (alpha > 1e-12) & (alpha < c - 1e-12)
    if free.any():
        rho = float(yg[free].mean())
    else:
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
        ub = yg[up].max() if up.any() else 0.0
        lb = yg[low].min() if low.any() else 0.0
        rho = float(0.5 * (ub + lb))
    return SMOResult(alpha=alpha, rho=rho, iterations=it, gap=float(gap))


@dataclass
class TrainedClassifier:
    """A fitted binary classifier predicting +/-1."""

    kind: str
    kernel: Optional[Kernel]
    support_vectors: np.ndarray
    coef: np.ndarray
    bias: float
    test_accuracy: float
    label: str = "y1"
    qnn_params: Optional[np.ndarray] = None
    qnn_reps: int = 0
    constant: Optional[int] = None

    def decision_function(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.constant is not None:
            return np.full(len(x), float(self.constant))
        if self.kind == "qnn":
            return qnn_parity_probability(x, self.kernel.feature_map, self.qnn_params, self.qnn_reps) - 0.5
        return self.kernel.matrix(x, self.support_vectors) @ self.coef + self.bias

    def predict(self, x) -> np.ndarray:
        # a decision value of exactly 0 goes to +1
        return np.where(self.decision_function(x) >= 0.0, 1, -1)

    def predict_label(self, x) -> np.ndarray:
        """Predictions in the original label alphabet ({-1,1} or {1,2})."""
        p = self.predict(x)
        return np.where(p > 0, 2, 1) if self.label == "y2" else p

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "label": self.label,
            "kernel": self.kernel.to_dict() if self.kernel is not None else None,
            "support_vectors": self.support_vectors.tolist(),
            "coefficients": self.coef.tolist(),
            "bias": self.bias,
            "test_accuracy": self.test_accuracy,
            "constant": self.constant,
        }
        if self.kind == "qnn":
            d["qnn_params"] = self.qnn_params.tolist()
            d["qnn_reps"] = self.qnn_reps
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedClassifier":
        return cls(
            kind=d["kind"],
            kernel=kernel_from_dict(d["kernel"]) if d.get("kernel") else None,
            support_vectors=np.asarray(d["support_vectors"], dtype=float),
            coef=np.asarray(d["coefficients"], dtype=float),
            bias=float(d["bias"]),
            test_accuracy=float(d["test_accuracy"]),
            label=d.get("label", "y1"),
            qnn_params=np.asarray(d["qnn_params"]) if "qnn_params" in d else None,
            qnn_reps=int(d.get("qnn_reps", 0)),
            constant=d.get("constant"),
        )


def _accuracy(model: TrainedClassifier, x, y) -> float:
    if len(y) == 0:
        return 0.0
    return float(np.mean(model.predict(x) == y))


def train_kernel_svm(d: LabeledDataset, kernel: Kernel, label: str = "y1", c: float = 1.0,
                     tol: float = 1e-3, max_iter: int = 100_000) -> TrainedClassifier:
    y = d.labels(label)
    xtr, ytr = d.features[d.train_idx], y[d.train_idx]
    if np.unique(ytr).size < 2:
        raise SingleClassTraining(f"training split for {label} holds a single class")
    res = smo(kernel.matrix(xtr), ytr, c=c, tol=tol, max_iter=max_iter)
    sv = res.alpha > 1e-10
    model = TrainedClassifier(
        kind=kernel.kind,
        kernel=kernel,
        support_vectors=xtr[sv],
        coef=(res.alpha * ytr)[sv],
        bias=-res.rho,
        test_accuracy=0.0,
        label=label,
    )
    model.test_accuracy = _accuracy(model, d.features[d.test_idx], y[d.test_idx])
    return model


def constant_classifier(d: LabeledDataset, label: str) -> TrainedClassifier:
    """Fallback when the training split holds one class: always predict it."""
    y = d.labels(label)
    value = int(y[d.train_idx][0]) if d.train_idx.size else 1
    model = TrainedClassifier(kind="constant", kernel=None, support_vectors=np.zeros((0, d.features.shape[1])),
                              coef=np.zeros(0), bias=float(value), test_accuracy=0.0, label=label,
                              constant=value)
    model.test_accuracy = _accuracy(model, d.features[d.test_idx], y[d.test_idx])
    return model


# ---------------------------------------------------------------------------
# QNN

def build_qnn_ansatz(n: int, reps: int) -> Circuit:
    """RY layer, then ``reps`` blocks of [CNOT on every pair i<j, RY layer].

    Parameter count is ``n * (reps + 1)``.
    """
    c = Circuit(n)
    slot = 0
    for q in range(n):
        c.add("RY", q, slot=slot)
        slot += 1
    for _ in range(reps):
        for i in range(n):
            for j in range(i + 1, n):
                c.add("CNOT", i, j)
        for q in range(n):
            c.add("RY", q, slot=slot)
            slot += 1
    return c


def _odd_parity(n: int) -> np.ndarray:
    return (simulator.popcounts(n) % 2).astype(bool)


def qnn_parity_probability(x, fm: FeatureMapSpec, params, reps: int, states=None) -> np.ndarray:
    """Probability of odd measured parity after feature map and trainable ansatz."""
    if states is None:
        states = simulator.feature_states(x, fm)
    ansatz = build_qnn_ansatz(fm.n_features, reps)
    out = simulator.apply_circuit(states, ansatz, params)
    return (np.abs(out) ** 2)[:, _odd_parity(fm.n_features)].sum(axis=1)


def train_qnn(d: LabeledDataset, fm: FeatureMapSpec, reps: int = 2, label: str = "y1", seed: int = 0,
              cfg: MinimizeConfig = MinimizeConfig(maxiter=200)) -> TrainedClassifier:
    """Fit a parity-readout QNN by minimizing the mean squared error.

    Labels are encoded as 1 for +1 and 0 for -1; prediction is +1 when the odd
    parity probability is at least 0.5.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    y = d.labels(label)
    xtr = d.features[d.train_idx]
    target = (y[d.train_idx] > 0).astype(float)
    states = simulator.feature_states(xtr, fm)
    n_params = fm.n_features * (reps + 1)

    def loss(theta):
        prob = qnn_parity_probability(None, fm, theta, reps, states=states)
        return float(np.mean((prob - target) ** 2))

    x0 = make_rng(seed).uniform(0.0, 2.0 * np.pi, size=n_params)
    res = minimize_local(loss, x0, cfg)
    model = TrainedClassifier(
        kind="qnn", kernel=QuantumKernel(fm), support_vectors=np.zeros((0, fm.n_features)),
        coef=np.zeros(0), bias=0.0, test_accuracy=0.0, label=label, qnn_params=res.x, qnn_reps=reps,
    )
    model.test_accuracy = _accuracy(model, d.features[d.test_idx], y[d.test_idx])
    model.loss_history = [res.fun] if not res.history else res.history
    return model


# ---------------------------------------------------------------------------
# views

def build_eta(y1: int, y2: int, s1: float, s2: float) -> float:
    """Accuracy-scaled view strength ``s1 * s2 * y1 * y2`` in [-2, 2]."""
    if not (0.0 <= s1 <= 1.0 and 0.0 <= s2 <= 1.0):
        raise ValueError("accuracies must lie in [0, 1]")
    return float(s1 * s2 * y1 * y2)


@dataclass
class ViewSet:
    P: np.ndarray
    Q: np.ndarray
    omega: np.ndarray  # diagonal entries
    eta: np.ndarray
    tau: float

    @property
    def omega_matrix(self) -> np.ndarray:
        return np.diag(self.omega)

    def to_dict(self) -> dict:
        return {"Q": self.Q.tolist(), "omega": self.omega.tolist(), "eta": self.eta.tolist(), "tau": self.tau}


def build_views(eta, pi, sigma, tau: float) -> ViewSet:
    """Absolute views on every asset: ``Q_k = pi_k + eta_k sqrt(S_kk)``, ``omega_k = tau S_kk``."""
    eta = np.asarray(eta, dtype=float).ravel()
    pi = np.asarray(pi, dtype=float).ravel()
    var = np.diag(np.asarray(sigma, dtype=float))
    if not (eta.size == pi.size == var.size):
        raise DimensionMismatch("eta, pi and Sigma disagree in size")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if np.any(var <= 0):
        raise NonPositiveVariance("Sigma has a nonpositive diagonal entry")
    return ViewSet(P=np.eye(eta.size), Q=pi + eta * np.sqrt(var), omega=tau * var, eta=eta, tau=float(tau))


@dataclass
class AssetView:
    y1: int
    y2: int
    s1: float
    s2: float
    eta: float
    models: dict

    def to_dict(self) -> dict:
        return {"y1": self.y1, "y2": self.y2, "s1": self.s1, "s2": self.s2, "eta": self.eta}


def fit_asset_view(d: LabeledDataset, x_latest, kernel: Kernel, c: float = 1.0) -> AssetView:
    """Train both classifiers on ``d`` and turn their predictions at ``x_latest`` into eta."""
    models = {}
    preds = {}
    for label in ("y1", "y2"):
        try:
            model = train_kernel_svm(d, kernel, label=label, c=c)
        except SingleClassTraining:
            log.info("single-class training split for %s; using a constant classifier", label)
            model = constant_classifier(d, label)
        models[label] = model
        preds[label] = int(model.predict_label(x_latest)[0])
    s1, s2 = models["y1"].test_accuracy, models["y2"].test_accuracy
    eta = build_eta(preds["y1"], preds["y2"], s1, s2)
    return AssetView(y1=preds["y1"], y2=preds["y2"], s1=s1, s2=s2, eta=eta, models=models)
