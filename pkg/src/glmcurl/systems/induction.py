"""Maxwell-type induction baseline with GLM divergence cleaning.

State ``(E_k, B_k, phi)``::

    dE/dt = c^2 curl B
    dB/dt = -curl E - grad phi
    dphi/dt = -a_d^2 div B - eps_d phi

The electric-field equation closes the system so plane waves are exact
solutions.
"""
from __future__ import annotations

import numpy as np

from ..state import GLMParams
from .toy import _curl

E, B, PHI = 0, 3, 6
NVAR = 7


def rhs_induction_glm(q, dq, params: GLMParams | None = None):
    """dQ/dt for ``q`` ``(7, ...)`` and raw gradients ``dq`` ``(3, 7, ...)``."""
    params = params or GLMParams()
    q = np.asarray(q, dtype=float)
    dq = np.asarray(dq, dtype=float)
    dE, dB = dq[:, E:E + 3], dq[:, B:B + 3]
    out = np.empty_like(q)
    out[E:E + 3] = params.c ** 2 * _curl(dB)
    out[B:B + 3] = -_curl(dE) - dq[:, PHI]
    out[PHI] = -params.a_d ** 2 * (dB[0, 0] + dB[1, 1] + dB[2, 2]) - params.eps_d * q[PHI]
    return out


def max_speed_induction(q, params: GLMParams) -> np.ndarray:
    return np.full(np.shape(q)[1:], max(params.c, params.a_d))


def plane_wave(x, y, z, t, k, amp_t=1.0, amp_l=0.0, params: GLMParams | None = None):
    """Exact plane-wave solution with wave vector ``k``.

    ``amp_t`` scales a transverse light-speed mode, ``amp_l`` a longitudinal
    cleaning mode moving at ``a_d``.
    """
    params = params or GLMParams()
    k = np.asarray(k, dtype=float)
    kn = np.linalg.norm(k)
    n = k / kn
    # a unit vector orthogonal to n
    trial = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(n, trial)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    kx = k[0] * x + k[1] * y + k[2] * z
    th_t = kx - params.c * kn * t
    th_l = kx - params.a_d * kn * t
    q = np.zeros((NVAR,) + np.shape(x))
    # B along e2 with E = -c (n x B) gives dB/dt = -curl E
    Bt = amp_t * np.cos(th_t)
    for i in range(3):
        q[B + i] = Bt * e2[i] + amp_l * np.cos(th_l) * n[i]
        q[E + i] = params.c * Bt * e1[i]
    q[PHI] = params.a_d * amp_l * np.cos(th_l)
    return q
