"""Tensor algebra for the FO-CCZ4 helper terms.

Compiled kernels are batched: every array carries a trailing point axis of
length ``n`` and the point loop is innermost, so a chunk of grid points is
processed with contiguous vector loops. Index conventions (0-based, point
axis omitted):

* ``g[i, j]``, ``gu[i, j]``           conformal metric and its inverse
* ``D[k, i, j]``                      D_kij, ``Dup[k, i, j]`` = D_k^ij
* ``Gt[k, i, j]``, ``G[k, i, j]``     Christoffels Gamma^k_ij
* ``dDs[k, l, i, j]``                 symmetrised d_(k D_l)ij
* ``dPs[k, i]``, ``dAs[k, i]``        symmetrised d_(k P_i), d_(k A_i)
* ``dGt[k, m, i, j]``                 d_k Gamma~^m_ij (same for ``dG``)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .state import StateError

SINGULAR_DET = 1e-10
# fused multiply-add only; no reassociation, so NaN checks and summation order survive
FASTMATH = {"contract"}


# --------------------------------------------------------------------------
# compiled batched kernels

@njit(cache=True, fastmath=FASTMATH)
def inverse_metric_into(g, gu, det):
    """Adjugate inverse; the determinant is not assumed to be one."""
    n = g.shape[-1]
    for p in range(n):
        c00 = g[1, 1, p] * g[2, 2, p] - g[1, 2, p] * g[2, 1, p]
        c01 = g[1, 2, p] * g[2, 0, p] - g[1, 0, p] * g[2, 2, p]
        c02 = g[1, 0, p] * g[2, 1, p] - g[1, 1, p] * g[2, 0, p]
        d = g[0, 0, p] * c00 + g[0, 1, p] * c01 + g[0, 2, p] * c02
        inv = 1.0 / d
        det[p] = d
        gu[0, 0, p] = c00 * inv
        gu[0, 1, p] = (g[0, 2, p] * g[2, 1, p] - g[0, 1, p] * g[2, 2, p]) * inv
        gu[0, 2, p] = (g[0, 1, p] * g[1, 2, p] - g[0, 2, p] * g[1, 1, p]) * inv
        gu[1, 1, p] = (g[0, 0, p] * g[2, 2, p] - g[0, 2, p] * g[2, 0, p]) * inv
        gu[1, 2, p] = (g[0, 2, p] * g[1, 0, p] - g[0, 0, p] * g[1, 2, p]) * inv
        gu[2, 2, p] = (g[0, 0, p] * g[1, 1, p] - g[0, 1, p] * g[1, 0, p]) * inv
        gu[1, 0, p] = gu[0, 1, p]
        gu[2, 0, p] = gu[0, 2, p]
        gu[2, 1, p] = gu[1, 2, p]


@njit(cache=True, fastmath=FASTMATH)
def raise_D_into(gu, D, Dup):
    """D_k^ij = gu^in gu^mj D_knm."""
    n = gu.shape[-1]
    for k in range(3):
        for i in range(3):
            for j in range(i, 3):
                for p in range(n):
                    Dup[k, i, j, p] = 0.0
                for a in range(3):
                    for b in range(3):
                        for p in range(n):
                            Dup[k, i, j, p] += gu[i, a, p] * gu[b, j, p] * D[k, a, b, p]
                for p in range(n):
                    Dup[k, j, i, p] = Dup[k, i, j, p]


@njit(cache=True, fastmath=FASTMATH)
def christoffel_combos_into(g, D, P, cd, Y):
    """cd_ijl = D_ijl + D_jil - D_lij and Y_ijl = cd_ijl - (g_jl P_i + g_il P_j - g_ij P_l)."""
    n = g.shape[-1]
    for i in range(3):
        for j in range(3):
            for l in range(3):
                for p in range(n):
                    c = D[i, j, l, p] + D[j, i, l, p] - D[l, i, j, p]
                    cd[i, j, l, p] = c
                    Y[i, j, l, p] = c - (g[j, l, p] * P[i, p] + g[i, l, p] * P[j, p]
                                         - g[i, j, p] * P[l, p])


@njit(cache=True, fastmath=FASTMATH)
def christoffels_into(gu, cd, Y, Gt, G):
    """Gamma~^k_ij = gu^kl cd_ijl and Gamma^k_ij = gu^kl Y_ijl (symmetric by construction)."""
    n = gu.shape[-1]
    for k in range(3):
        for i in range(3):
            for j in range(i, 3):
                for p in range(n):
                    Gt[k, i, j, p] = 0.0
                    G[k, i, j, p] = 0.0
                for l in range(3):
                    for p in range(n):
                        Gt[k, i, j, p] += gu[k, l, p] * cd[i, j, l, p]
                        G[k, i, j, p] += gu[k, l, p] * Y[i, j, l, p]
                for p in range(n):
                    Gt[k, j, i, p] = Gt[k, i, j, p]
                    G[k, j, i, p] = G[k, i, j, p]


@njit(cache=True, fastmath=FASTMATH)
def derivative_combos_into(g, D, P, dDs, dPs, sd, X):
    """Symmetrised-derivative combinations entering d_k Gamma.

    sd_kijl = d_(k D_i)jl + d_(k D_j)il - d_(k D_l)ij and X_kijl = sd_kijl plus
    the P-dependent terms that are contracted with gu^ml.
    """
    n = g.shape[-1]
    for k in range(3):
        for i in range(3):
            for j in range(i, 3):
                for l in range(3):
                    for p in range(n):
                        s = dDs[k, i, j, l, p] + dDs[k, j, i, l, p] - dDs[k, l, i, j, p]
                        x = (s - 2.0 * (D[k, j, l, p] * P[i, p] + D[k, i, l, p] * P[j, p]
                                        - D[k, i, j, p] * P[l, p])
                             - (g[j, l, p] * dPs[k, i, p] + g[i, l, p] * dPs[k, j, p]
                                - g[i, j, p] * dPs[k, l, p]))
                        sd[k, i, j, l, p] = s
                        sd[k, j, i, l, p] = s
                        X[k, i, j, l, p] = x
                        X[k, j, i, l, p] = x


@njit(cache=True, fastmath=FASTMATH)
def christoffel_derivatives_into(gu, Dup, cd, Y, sd, X, dGt, dG):
    """Full d_k Gamma~^m_ij and d_k Gamma^m_ij."""
    n = gu.shape[-1]
    for k in range(3):
        for m in range(3):
            for i in range(3):
                for j in range(i, 3):
                    for p in range(n):
                        dGt[k, m, i, j, p] = 0.0
                        dG[k, m, i, j, p] = 0.0
                    for l in range(3):
                        for p in range(n):
                            dGt[k, m, i, j, p] += (-2.0 * Dup[k, m, l, p] * cd[i, j, l, p]
                                                   + gu[m, l, p] * sd[k, i, j, l, p])
                            dG[k, m, i, j, p] += (-2.0 * Dup[k, m, l, p] * Y[i, j, l, p]
                                                  + gu[m, l, p] * X[k, i, j, l, p])
                    for p in range(n):
                        dGt[k, m, j, i, p] = dGt[k, m, i, j, p]
                        dG[k, m, j, i, p] = dG[k, m, i, j, p]


@njit(cache=True, fastmath=FASTMATH)
def riemann_into(G, dG, Riem):
    """Riem[m, i, k, j] = R^m_ikj."""
    n = G.shape[-1]
    for m in range(3):
        for i in range(3):
            for k in range(3):
                for j in range(3):
                    for p in range(n):
                        Riem[m, i, k, j, p] = dG[k, m, i, j, p] - dG[j, m, i, k, p]
                    for l in range(3):
                        for p in range(n):
                            Riem[m, i, k, j, p] += (G[l, i, j, p] * G[m, l, k, p]
                                                    - G[l, i, k, p] * G[m, l, j, p])


@njit(cache=True, fastmath=FASTMATH)
def ricci_quadratic_into(G, Ric):
    """Ric_ij += Gamma^l_ij Gamma^m_lm - Gamma^l_im Gamma^m_lj."""
    n = G.shape[-1]
    for i in range(3):
        for j in range(3):
            for l in range(3):
                for m in range(3):
                    for p in range(n):
                        Ric[i, j, p] += G[l, i, j, p] * G[m, l, m, p] - G[l, i, m, p] * G[m, l, j, p]


@njit(cache=True, fastmath=FASTMATH)
def ricci_from_dG_into(G, dG, Ric):
    """R_ij = R^m_imj from the full Christoffel derivative."""
    n = G.shape[-1]
    for i in range(3):
        for j in range(3):
            for p in range(n):
                Ric[i, j, p] = 0.0
            for m in range(3):
                for p in range(n):
                    Ric[i, j, p] += dG[m, m, i, j, p] - dG[j, m, i, m, p]
    ricci_quadratic_into(G, Ric)


@njit(cache=True, fastmath=FASTMATH)
def ricci_contracted_into(gu, Dup, Y, X, G, u, Ric):
    """R_ij without forming d_k Gamma^m_ij; ``u`` is scratch of shape (3, n)."""
    n = gu.shape[-1]
    for l in range(3):
        for p in range(n):
            u[l, p] = Dup[0, 0, l, p] + Dup[1, 1, l, p] + Dup[2, 2, l, p]
    for i in range(3):
        for j in range(3):
            for p in range(n):
                Ric[i, j, p] = 0.0
            for l in range(3):
                for p in range(n):
                    Ric[i, j, p] -= 2.0 * u[l, p] * Y[i, j, l, p]
                for m in range(3):
                    for p in range(n):
                        Ric[i, j, p] += (gu[m, l, p] * (X[m, i, j, l, p] - X[j, i, m, l, p])
                                         + 2.0 * Dup[j, m, l, p] * Y[i, m, l, p])
    ricci_quadratic_into(G, Ric)


@njit(cache=True, fastmath=FASTMATH)
def contracted_christoffel_into(gu, Dup, cd, sd, Gt, Gtc, dGtc, w):
    """Gamma~^i and d_k Gamma~^i; ``w`` is scratch of shape (12, n)."""
    n = gu.shape[-1]
    for i in range(3):
        for p in range(n):
            Gtc[i, p] = 0.0
            w[i, p] = 0.0
        for j in range(3):
            for l in range(3):
                for p in range(n):
                    Gtc[i, p] += gu[j, l, p] * Gt[i, j, l, p]
                    w[i, p] += gu[j, l, p] * cd[j, l, i, p]  # gu^jl cd_jli
    for k in range(3):
        for a in range(3):
            for p in range(n):
                w[3 + 3 * k + a, p] = 0.0
            for j in range(3):
                for l in range(3):
                    for p in range(n):
                        w[3 + 3 * k + a, p] += gu[j, l, p] * sd[k, j, l, a, p]
    for k in range(3):
        for i in range(3):
            for p in range(n):
                dGtc[k, i, p] = 0.0
            for a in range(3):
                for p in range(n):
                    dGtc[k, i, p] += (-2.0 * Dup[k, i, a, p] * w[a, p]
                                      + gu[i, a, p] * w[3 + 3 * k + a, p])
            for j in range(3):
                for l in range(3):
                    for p in range(n):
                        dGtc[k, i, p] -= 2.0 * Dup[k, j, l, p] * Gt[i, j, l, p]


@njit(cache=True, fastmath=FASTMATH)
def z_block_into(Ghat, dGhat, Gtc, dGtc, g, gu, phi2, D, G, Ric, Zl, Zu, DZ, RZ):
    """Z_i, Z^i, nabla_i Z_j and R + 2 nabla_k Z^k."""
    n = g.shape[-1]
    for i in range(3):
        for p in range(n):
            Zl[i, p] = 0.0
            Zu[i, p] = 0.5 * phi2[p] * (Ghat[i, p] - Gtc[i, p])
        for j in range(3):
            for p in range(n):
                Zl[i, p] += 0.5 * g[i, j, p] * (Ghat[j, p] - Gtc[j, p])
    for i in range(3):
        for j in range(3):
            for p in range(n):
                DZ[i, j, p] = 0.0
            for l in range(3):
                for p in range(n):
                    DZ[i, j, p] += (D[i, j, l, p] * (Ghat[l, p] - Gtc[l, p])
                                    + 0.5 * g[j, l, p] * (dGhat[i, l, p] - dGtc[i, l, p])
                                    - G[l, i, j, p] * Zl[l, p])
    for p in range(n):
        RZ[p] = 0.0
    for i in range(3):
        for j in range(3):
            for p in range(n):
                RZ[p] += gu[i, j, p] * (Ric[i, j, p] + DZ[i, j, p] + DZ[j, i, p])
    for p in range(n):
        RZ[p] *= phi2[p]


@njit(cache=True, fastmath=FASTMATH)
def lapse_hessian_into(alpha, A, dAs, G, phi2, gu, DDa, lap):
    """nabla_i nabla_j alpha and its trace with the physical inverse metric."""
    n = gu.shape[-1]
    for i in range(3):
        for j in range(i, 3):
            for p in range(n):
                DDa[i, j, p] = A[i, p] * A[j, p] + dAs[i, j, p]
            for k in range(3):
                for p in range(n):
                    DDa[i, j, p] -= G[k, i, j, p] * A[k, p]
            for p in range(n):
                DDa[i, j, p] *= alpha[p]
                DDa[j, i, p] = DDa[i, j, p]
    for p in range(n):
        lap[p] = 0.0
    for i in range(3):
        for j in range(3):
            for p in range(n):
                lap[p] += gu[i, j, p] * DDa[i, j, p]
    for p in range(n):
        lap[p] *= phi2[p]


@njit(cache=True, fastmath=FASTMATH)
def gauge_g(alpha, slicing):
    if slicing == 0:
        return 1.0
    return 2.0 / alpha


@njit(cache=True, fastmath=FASTMATH)
def gauge_h(alpha, slicing):
    # g + alpha dg/dalpha
    if slicing == 0:
        return 1.0
    return 2.0 / alpha - alpha * 2.0 / (alpha * alpha)


# --------------------------------------------------------------------------
# Python-level pointwise wrappers (single point, no trailing axis)

_SLICING_CODE = {"harmonic": 0, "one_plus_log": 1}


def _b(a):
    return np.ascontiguousarray(np.asarray(a, dtype=float)[..., None])


def inverse_unit_det_metric(gt) -> np.ndarray:
    gu = np.empty((3, 3, 1))
    det = np.empty(1)
    inverse_metric_into(_b(gt), gu, det)
    if not det[0] > SINGULAR_DET:
        raise StateError(f"singular conformal metric (det = {det[0]:.3e})")
    return gu[..., 0]


def raise_D(gu, D) -> np.ndarray:
    out = np.empty((3, 3, 3, 1))
    raise_D_into(_b(gu), _b(D), out)
    return out[..., 0]


def _christoffels(gu, g, D, P):
    cd = np.empty((3, 3, 3, 1))
    Y = np.empty((3, 3, 3, 1))
    christoffel_combos_into(_b(g), _b(D), _b(P), cd, Y)
    Gt = np.empty((3, 3, 3, 1))
    G = np.empty((3, 3, 3, 1))
    christoffels_into(_b(gu), cd, Y, Gt, G)
    return cd, Y, Gt, G


def christoffel_tilde(gu, D) -> np.ndarray:
    return _christoffels(gu, np.eye(3), D, np.zeros(3))[2][..., 0]


def christoffel_full(gu, g, D, P) -> np.ndarray:
    return _christoffels(gu, g, D, P)[3][..., 0]


def christoffel_derivatives(gu, g, D, P, dDs, dPs):
    """Return ``(dGt, dG)`` from symmetrised derivatives of D and P."""
    cd, Y, _, _ = _christoffels(gu, g, D, P)
    sd = np.empty((3, 3, 3, 3, 1))
    X = np.empty((3, 3, 3, 3, 1))
    derivative_combos_into(_b(g), _b(D), _b(P), _b(dDs), _b(dPs), sd, X)
    dGt = np.empty((3, 3, 3, 3, 1))
    dG = np.empty((3, 3, 3, 3, 1))
    christoffel_derivatives_into(_b(gu), _b(raise_D(gu, D)), cd, Y, sd, X, dGt, dG)
    return dGt[..., 0], dG[..., 0]


def riemann_ricci(dG, G):
    """Return ``(Riem, Ric)`` with ``Riem[m, i, k, j] = R^m_ikj``."""
    Riem = np.empty((3, 3, 3, 3, 1))
    Ric = np.empty((3, 3, 1))
    riemann_into(_b(G), _b(dG), Riem)
    ricci_from_dG_into(_b(G), _b(dG), Ric)
    return Riem[..., 0], Ric[..., 0]


def z_vector_block(Ghat, dGhat, gt, phi, D, G, Ric, Gtc, dGtc):
    """Return ``(Z_i, Z^i, nabla_i Z_j, R + 2 nabla_k Z^k)``; ``dGhat[k, i]`` = d_k Ghat^i."""
    gu = inverse_unit_det_metric(gt)
    Zl, Zu = np.empty((3, 1)), np.empty((3, 1))
    DZ, RZ = np.empty((3, 3, 1)), np.empty(1)
    z_block_into(_b(Ghat), _b(dGhat), _b(Gtc), _b(dGtc), _b(gt), _b(gu), np.array([phi ** 2]),
                 _b(D), _b(G), _b(Ric), Zl, Zu, DZ, RZ)
    return Zl[:, 0], Zu[:, 0], DZ[..., 0], float(RZ[0])


def lapse_hessian(alpha, A, dAs, G, phi, gu):
    """Return ``(nabla_i nabla_j alpha, nabla^i nabla_i alpha)``."""
    DDa = np.empty((3, 3, 1))
    lap = np.empty(1)
    lapse_hessian_into(np.array([alpha], float), _b(A), _b(dAs), _b(G), np.array([phi ** 2]),
                       _b(gu), DDa, lap)
    return DDa[..., 0], float(lap[0])


def gauge_functions(alpha: float, slicing: str) -> tuple[float, float]:
    code = _SLICING_CODE[slicing]
    return float(gauge_g(alpha, code)), float(gauge_h(alpha, code))


def symmetrize_gradients(dA, dP, dB, dD):
    """Symmetrised auxiliary derivatives from raw ones.

    Raw inputs put the derivative direction first: ``dA[d, k] = d_d A_k``,
    ``dB[d, k, i] = d_d B_k^i``, ``dD[d, k, i, j] = d_d D_kij``. Returns
    ``dAs[k, i]``, ``dPs[k, i]``, ``dBs[k, j, i]`` = d_(k B^i_j) and
    ``dDs[k, l, i, j]`` = d_(k D_l)ij.
    """
    dA, dP, dB, dD = (np.asarray(a, float) for a in (dA, dP, dB, dD))
    dAs = 0.5 * (dA + np.swapaxes(dA, 0, 1))
    dPs = 0.5 * (dP + np.swapaxes(dP, 0, 1))
    dBs = 0.5 * (dB + np.swapaxes(dB, 0, 1))
    dDs = 0.5 * (dD + np.swapaxes(dD, 0, 1))
    return dAs, dPs, dBs, dDs


@dataclass
class CurvatureBundle:
    """Helper terms of the FO-CCZ4 right-hand side at one point."""

    gu: np.ndarray
    det: float
    Dup: np.ndarray
    Gt: np.ndarray
    G: np.ndarray
    dGt: np.ndarray
    dG: np.ndarray
    Riem: np.ndarray
    Ric: np.ndarray
    Gtc: np.ndarray
    dGtc: np.ndarray
    Zl: np.ndarray
    Zu: np.ndarray
    DZ: np.ndarray
    R_plus_2divZ: float
    DDalpha: np.ndarray
    lap_alpha: float
    trAt: float
    g_alpha: float
    h_alpha: float


def curvature_bundle(point, grads, slicing: str = "harmonic") -> CurvatureBundle:
    """Evaluate the helper block at one point.

    ``point`` is a :class:`~glmcurl.systems.foccz4.PointState` and ``grads`` a
    :class:`~glmcurl.systems.foccz4.PointGradients`. Kernels run in the fixed
    order inverse metric, raised D, Christoffels, their derivatives,
    Riemann/Ricci, Z block, lapse Hessian.
    """
    gu = inverse_unit_det_metric(point.gt)
    det = float(np.linalg.det(point.gt))
    Dup = raise_D(gu, point.D)
    cd, Y, Gt, G = _christoffels(gu, point.gt, point.D, point.P)
    dAs, dPs, _, dDs = symmetrize_gradients(grads.A, grads.P, grads.B, grads.D)
    sd = np.empty((3, 3, 3, 3, 1))
    X = np.empty((3, 3, 3, 3, 1))
    derivative_combos_into(_b(point.gt), _b(point.D), _b(point.P), _b(dDs), _b(dPs), sd, X)
    dGt = np.empty((3, 3, 3, 3, 1))
    dG = np.empty((3, 3, 3, 3, 1))
    christoffel_derivatives_into(_b(gu), _b(Dup), cd, Y, sd, X, dGt, dG)
    Riem, Ric = riemann_ricci(dG[..., 0], G[..., 0])
    Gtc = np.empty((3, 1))
    dGtc = np.empty((3, 3, 1))
    contracted_christoffel_into(_b(gu), _b(Dup), cd, sd, Gt, Gtc, dGtc, np.empty((12, 1)))
    Zl, Zu, DZ, rz = z_vector_block(point.Ghat, grads.Ghat, point.gt, point.phi, point.D,
                                    G[..., 0], Ric, Gtc[:, 0], dGtc[..., 0])
    DDa, lap = lapse_hessian(point.alpha, point.A, dAs, G[..., 0], point.phi, gu)
    g_a, h_a = gauge_functions(point.alpha, slicing)
    return CurvatureBundle(gu=gu, det=det, Dup=Dup, Gt=Gt[..., 0], G=G[..., 0], dGt=dGt[..., 0],
                           dG=dG[..., 0], Riem=Riem, Ric=Ric, Gtc=Gtc[:, 0], dGtc=dGtc[..., 0],
                           Zl=Zl, Zu=Zu, DZ=DZ, R_plus_2divZ=rz, DDalpha=DDa, lap_alpha=lap,
                           trAt=float(np.sum(gu * point.At)), g_alpha=g_a, h_alpha=h_a)
