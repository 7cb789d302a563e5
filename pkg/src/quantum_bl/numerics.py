"""Small dense linear algebra and local optimization helpers.

Matrices handled here are tiny (at most a few dozen rows), so the routines
favour clarity and predictable numerics over raw speed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg, optimize

from .errors import NoConvergence, NonFiniteObjective, NotPositiveDefinite

CHOLESKY_PIVOT_FLOOR = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Return the package-wide deterministic generator (numpy PCG64).

    PCG64 output is specified bit-for-bit, so a given seed yields the same
    stream on every platform.
    """
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def child_seed(seed: int, *keys: int) -> int:
    """Derive a 64-bit seed from ``seed`` and a path of integer keys."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def as_symmetric(m) -> np.ndarray:
    """Validate ``m`` as a square symmetric matrix and return it as float array."""
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.T)) > 1e-12 * scale:
            raise ValueError("matrix is not symmetric")
        a = 0.5 * (a + a.T)
    return a


def cholesky(m) -> np.ndarray:
    """Lower-triangular Cholesky factor; raises on a pivot below the floor."""
    a = as_symmetric(m)
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if not pivot > CHOLESKY_PIVOT_FLOOR:
            raise NotPositiveDefinite(f"Cholesky pivot {pivot:.3e} at index {j}")
        low[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def invert_spd(m) -> np.ndarray:
    """Invert a symmetric positive-definite matrix through its Cholesky factor."""
    low = cholesky(m)
    n = low.shape[0]
    # L^-1 by forward substitution, then A^-1 = L^-T L^-1
    linv = linalg.solve_triangular(low, np.eye(n), lower=True)
    inv = linv.T @ linv
    return 0.5 * (inv + inv.T)


def eigh(m, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns
    -------
    eigenvalues : ndarray, shape (n,)
        Sorted ascending.
    eigenvectors : ndarray, shape (n, n)
        Orthonormal columns, ``m @ v[:, k] == w[k] * v[:, k]``.
    """
    a = as_symmetric(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    else:
        raise NoConvergence(f"Jacobi sweeps did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


@dataclass(frozen=True)
class MinimizeConfig:
    """Tolerances for :func:`minimize_local`.

    ``fd_step`` is the central-difference step used when no gradient is given.
    """

    ftol: float = 1e-8
    gtol: float = 1e-6
    maxiter: int = 1000
    fd_step: float = 1e-6
    method: str = "L-BFGS-B"


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    converged: bool
    history: list


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    g = np.empty_like(x)
    e = np.zeros_like(x)
    for i in range(x.size):
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
        e[i] = 0.0
    return g


def minimize_local(
    f: Callable[[np.ndarray], float],
    x0,
    cfg: MinimizeConfig = MinimizeConfig(),
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    value_and_grad: Optional[Callable[[np.ndarray], tuple]] = None,
) -> MinimizeResult:
    """Unconstrained quasi-Newton minimization.

    ``grad`` may return the exact gradient, or ``value_and_grad`` both at
    once; otherwise central differences with ``cfg.fd_step`` are used. The
    returned value never exceeds ``f(x0)``. ``history`` holds the objective
    after each accepted iteration.
    """
    x0 = np.asarray(x0, dtype=float).ravel().copy()
    if x0.size > 10_000:
        raise ValueError("dimension above 10000")
    nfev = 0

    last = {}

    def fun(x):
        nonlocal nfev
        nfev += 1
        val = float(f(x))
        if not np.isfinite(val):
            raise NonFiniteObjective(f"objective returned {val}")
        last["x"], last["f"] = x.copy(), val
        return val

    def jac(x):
        g = grad(x) if grad is not None else central_difference(fun, x, cfg.fd_step)
        g = np.asarray(g, dtype=float)
        if not np.all(np.isfinite(g)):
            raise NonFiniteObjective("non-finite gradient")
        return g

    f0 = fun(x0)
    history: list[float] = []

    def record(state):
        # some methods pass only the current point
        if hasattr(state, "fun"):
            history.append(float(state.fun))
        elif "x" in last and np.array_equal(last["x"], state):
            history.append(last["f"])
        else:
            history.append(float(f(state)))

    if cfg.method == "BFGS":
        options = {"gtol": cfg.gtol, "maxiter": cfg.maxiter}
    elif cfg.method == "L-BFGS-B":
        options = {"ftol": cfg.ftol, "gtol": cfg.gtol, "maxiter": cfg.maxiter}
    elif cfg.method == "SLSQP":
        options = {"ftol": cfg.ftol, "maxiter": cfg.maxiter}
    else:
        raise ValueError(f"unsupported method {cfg.method!r}")
    if value_and_grad is not None:
        def fun_jac(x):
            nonlocal nfev
            nfev += 1
            val, g = value_and_grad(x)
            val, g = float(val), np.asarray(g, dtype=float)
            if not (np.isfinite(val) and np.all(np.isfinite(g))):
                raise NonFiniteObjective(f"objective returned {val}")
            last["x"], last["f"] = x.copy(), val
            return val, g

        res = optimize.minimize(fun_jac, x0, jac=True, method=cfg.method, options=options, callback=record)
    else:
        res = optimize.minimize(fun, x0, jac=jac, method=cfg.method, options=options, callback=record)
    x, val = np.asarray(res.x, dtype=float), float(res.fun)
    if not val <= f0:
        x, val = x0, f0
    return MinimizeResult(x=x, fun=val, nit=int(res.nit), nfev=nfev, converged=bool(res.success), history=history)
