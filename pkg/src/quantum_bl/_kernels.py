"""Hot loops for single-vector 2x2 updates; numba-compiled when available."""
from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None


def _apply_u_py(psi, q, u00, u01, u10, u11):
    v = psi.reshape(-1, 2, 1 << q)
    a0 = v[:, 0, :].copy()
    a1 = v[:, 1, :]
    v[:, 0, :] = u00 * a0 + u01 * a1
    v[:, 1, :] = u10 * a0 + u11 * a1


def _reduce_pair_py(psi, lam, q):
    shape = (-1, 2, 1 << q)
    m = np.einsum("xay,xby->ab", psi.reshape(shape), lam.reshape(shape).conj())
    return m[0, 0], m[0, 1], m[1, 0], m[1, 1]


if numba is not None:

    @numba.njit(cache=True)
    def apply_u(psi, q, u00, u01, u10, u11):
        """In-place 2x2 unitary on qubit ``q`` of a 1-D state."""
        step = 1 << q
        for base in range(0, psi.shape[0], 2 * step):
            for i in range(base, base + step):
                a0 = psi[i]
                a1 = psi[i + step]
                psi[i] = u00 * a0 + u01 * a1
                psi[i + step] = u10 * a0 + u11 * a1

    @numba.njit(cache=True)
    def reduce_pair(psi, lam, q):
        """Entries of sum_rest psi[rest, a] * conj(lam[rest, b]) on qubit ``q``."""
        step = 1 << q
        m00 = 0j
        m01 = 0j
        m10 = 0j
        m11 = 0j
        for base in range(0, psi.shape[0], 2 * step):
            for i in range(base, base + step):
                p0 = psi[i]
                p1 = psi[i + step]
                l0 = lam[i].conjugate()
                l1 = lam[i + step].conjugate()
                m00 += p0 * l0
                m01 += p0 * l1
                m10 += p1 * l0
                m11 += p1 * l1
        return m00, m01, m10, m11

else:  # pragma: no cover
    apply_u = _apply_u_py
    reduce_pair = _reduce_pair_py
