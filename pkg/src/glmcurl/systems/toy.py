"""Toy involution system (rho, rho v, J) with GLM curl cleaning.

State layout: ``rho, rho v_k, J_k, psi_k, phi`` and, for the non-homogeneous
variant, the Burgers vector ``B_k`` and its divergence cleaner ``chi``.
Flux divergences are expanded with the product rule onto point gradients.
All functions accept a trailing point axis, so a single point is just
``npts = 1``.
"""
from __future__ import annotations

import numpy as np

from ..state import StateError, ToyParams

RHO, M, J, PSI, PHI, BV, CHI = 0, 1, 4, 7, 10, 11, 14
N_HOMOGENEOUS = 11
N_NONHOMOGENEOUS = 15


def _curl(dv):
    """``(curl v)_k = eps_klm d_l v_m`` for ``dv[l, m, ...]``."""
    return np.stack([dv[1, 2] - dv[2, 1], dv[2, 0] - dv[0, 2], dv[0, 1] - dv[1, 0]])


def source_terms(q, dq, params: ToyParams, coords=None, t: float = 0.0):
    """``(S_k, d_l S_k)`` with ``dS[l, k] = d_l S_k`` for the configured source."""
    shape = q.shape[1:]
    if params.source == "none":
        return np.zeros((3,) + shape), np.zeros((3, 3) + shape)
    if params.source == "linear_relaxation":
        return -q[J:J + 3] / params.tau_relax, -dq[:, J:J + 3] / params.tau_relax
    if coords is None:
        raise StateError("custom toy source needs point coordinates")
    S, dS = params.source_fn(*coords, t)
    return np.broadcast_to(S, (3,) + shape), np.broadcast_to(dS, (3, 3) + shape)


def rhs_toy(q, dq, params: ToyParams, nonhomogeneous: bool = False, coords=None, t: float = 0.0):
    """dQ/dt for ``q`` of shape ``(ncomp, ...)`` and raw gradients ``dq`` ``(3, ncomp, ...)``."""
    q = np.asarray(q, dtype=float)
    dq = np.asarray(dq, dtype=float)
    rho = q[RHO]
    if not np.all(rho > 0):
        raise StateError("toy system needs rho > 0")
    m, Jv, psi, phi = q[M:M + 3], q[J:J + 3], q[PSI:PSI + 3], q[PHI]
    drho, dm, dJ, dpsi, dphi = dq[:, RHO], dq[:, M:M + 3], dq[:, J:J + 3], dq[:, PSI:PSI + 3], dq[:, PHI]
    v = m / rho
    # d_i v_k = (d_i m_k - v_k d_i rho) / rho
    dv = (dm - v[None] * drho[:, None]) / rho
    divm = dm[0, 0] + dm[1, 1] + dm[2, 2]
    divJ = dJ[0, 0] + dJ[1, 1] + dJ[2, 2]
    c2 = params.c0 ** 2
    out = np.zeros_like(q)
    out[RHO] = -divm
    v_grad_m = np.einsum("i...,ik...->k...", v, dm)
    v_grad_rho = np.einsum("i...,i...->...", v, drho)
    J_grad_rho = np.einsum("i...,i...->...", Jv, drho)
    J_grad_J = np.einsum("i...,ik...->k...", Jv, dJ)
    out[M:M + 3] = -(divm * v + v_grad_m - v * v_grad_rho
                     + c2 * (Jv * J_grad_rho + rho * divJ * Jv + rho * J_grad_J))
    # d_k (v_m J_m) + v_m (d_m J_k - d_k J_m) = J_m d_k v_m + v_m d_m J_k
    out[J:J + 3] = -(np.einsum("m...,km...->k...", Jv, dv) + np.einsum("m...,mk...->k...", v, dJ))
    out[J:J + 3] -= _curl(dpsi)
    out[PSI:PSI + 3] = params.a_c ** 2 * _curl(dJ) - dphi - params.eps_c * psi
    out[PHI] = -params.a_d ** 2 * (dpsi[0, 0] + dpsi[1, 1] + dpsi[2, 2]) - params.eps_d * phi
    if not nonhomogeneous:
        return out
    Bv, chi = q[BV:BV + 3], q[CHI]
    dB, dchi = dq[:, BV:BV + 3], dq[:, CHI]
    S, dS = source_terms(q, dq, params, coords, t)
    out[J:J + 3] += S
    divv = dv[0, 0] + dv[1, 1] + dv[2, 2]
    # -d_k(B_i v_k - v_i B_k - eps_ikj S_j) - v_i d_k B_k, expanded
    out[BV:BV + 3] = (-np.einsum("k...,ki...->i...", v, dB) - Bv * divv
                      + np.einsum("k...,ki...->i...", Bv, dv) + _curl(dS) - dchi)
    out[PSI:PSI + 3] -= params.a_c ** 2 * Bv
    out[CHI] = -params.a_b ** 2 * (dB[0, 0] + dB[1, 1] + dB[2, 2]) - params.eps_b * chi
    return out


def rhs_toy_homogeneous(q, dq, params: ToyParams | None = None):
    """Homogeneous toy system, 11 components."""
    return rhs_toy(q, dq, params or ToyParams(), nonhomogeneous=False)


def rhs_toy_nonhomogeneous(q, dq, params: ToyParams | None = None, coords=None, t: float = 0.0):
    """Toy system with a prescribed (Burgers-vector) curl, 15 components."""
    return rhs_toy(q, dq, params or ToyParams(), nonhomogeneous=True, coords=coords, t=t)


def max_speed_toy(q, params: ToyParams) -> np.ndarray:
    """Pointwise speed bound: flow speed plus the larger of the Alfven-like and cleaning speeds."""
    q = np.asarray(q, dtype=float)
    rho = q[RHO]
    vmag = np.sqrt(np.sum((q[M:M + 3] / rho) ** 2, axis=0))
    jmag = np.sqrt(np.sum(q[J:J + 3] ** 2, axis=0))
    clean = max(params.a_c, params.a_d, params.a_b)
    return vmag + np.maximum(params.c0 * jmag, clean)
