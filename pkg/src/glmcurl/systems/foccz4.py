"""Augmented FO-CCZ4 right-hand side (103 components, optionally + advected tau).

``dQ/dt`` is assembled pointwise from the stored state ``q`` (logs of lapse
and conformal factor) and the raw centred gradients ``dq[d, c]`` of every
stored component. Auxiliary derivatives are symmetrised before they enter
curvature terms; the curl-cleaning terms use raw derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from ..curvature import (FASTMATH, SINGULAR_DET, christoffel_combos_into, christoffels_into,
                         contracted_christoffel_into, derivative_combos_into, gauge_g, gauge_h,
                         inverse_metric_into, lapse_hessian_into, raise_D_into,
                         ricci_contracted_into, z_block_into)
from ..state import (CLEANING_INDICES, P_C, P_CLEAN, P_E, P_ETA, P_F, P_GLM, P_K1, P_K2, P_K3, P_MU, P_S,
                     P_SLICING, SYM, CCZ4Params, StateError)

PI = np.pi
NVAR = 103
N_MATTER = 10  # tau, S_i, S_ij packed
N_CHUNKS = 64

# group offsets (see state.FOCCZ4_GROUPS)
I_LNA, I_BETA, I_G, I_LNPHI, I_K0, I_AT, I_K, I_TH, I_GH, I_BB = 0, 1, 4, 10, 11, 12, 18, 19, 20, 23
I_A, I_PSIA, I_PHIA, I_B, I_PSIB, I_PHIB = 26, 29, 32, 33, 42, 51
I_D, I_PSID, I_PHID, I_P, I_PSIP, I_PHIP = 54, 72, 90, 96, 99, 102

_SYM = SYM.copy()
CLEANING_MASK = np.zeros(NVAR, dtype=np.bool_)
CLEANING_MASK[CLEANING_INDICES] = True


BLOCK = 64  # points per vectorised block


@njit(cache=True, fastmath=FASTMATH)
def make_workspace(nv, n):
    """Scratch arrays for :func:`block_rhs` on blocks of ``n`` points."""
    m2 = [np.empty((3, 3, n)) for _ in range(13)]
    m3 = [np.empty((3, 3, 3, n)) for _ in range(7)]
    m4 = [np.empty((3, 3, 3, 3, n)) for _ in range(3)]
    v = [np.empty((3, n)) for _ in range(11)]
    return (m2[0], m2[1], m2[2], m2[3], m2[4], m2[5], m2[6], m2[7], m2[8], m2[9], m2[10],
            m2[11], m2[12],
            m3[0], m3[1], m3[2], m3[3], m3[4], m3[5], m3[6],
            m4[0], m4[1], m4[2],
            v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10],
            np.empty((12, n)), np.empty((24, n)), np.empty((3, 3, n)))


@njit(cache=True, fastmath=FASTMATH)
def block_rhs(q, dq, matter, vel, par, w, out):
    """Evaluate dQ/dt for a block of points.

    ``q`` is ``(nv, n)``, ``dq`` ``(3, nv, n)``, ``matter`` ``(10, n)``,
    ``vel`` ``(3, n)``; ``out`` receives ``(nv, n)``. Points are independent,
    so an invalid point only spoils its own column.
    """
    nv = q.shape[0]
    n = q.shape[1]
    sym = _SYM
    slicing = int(par[P_SLICING])
    s = par[P_S]
    f = par[P_F]
    mu = par[P_MU]
    eta = par[P_ETA]
    cc = par[P_C]
    e2 = par[P_E] * par[P_E]
    k1 = par[P_K1]
    k2 = par[P_K2]
    k3 = par[P_K3]
    glm = par[P_GLM]

    (g, gu, At, Atu, B, Sij, dAs, dPs, Ric, DZ, DDa, dGtc, dGhat,
     D, Dup, cd, Y, Gt, G, dBs,
     dDs, sd, X,
     beta, A, P, Ghat, Gtc, Zl, Zu, Si, DAt, trdAt, u,
     wct, sc, cD) = w
    alpha = sc[0]
    phi2 = sc[1]
    det = sc[2]
    RZ = sc[3]
    lap = sc[4]
    ga = sc[5]
    ha = sc[6]
    trAt = sc[7]
    trB = sc[8]
    S = sc[9]
    AtAt = sc[10]
    tht = sc[11]
    acc = sc[12]
    acc2 = sc[13]
    tmp = sc[14]
    K = q[I_K]
    Th = q[I_TH]
    tau = matter[0]

    for p in range(n):
        alpha[p] = np.exp(q[I_LNA, p])
        phi2[p] = np.exp(2.0 * q[I_LNPHI, p])
        ga[p] = gauge_g(alpha[p], slicing)
        ha[p] = gauge_h(alpha[p], slicing)
    for i in range(3):
        for p in range(n):
            beta[i, p] = q[I_BETA + i, p]
            A[i, p] = q[I_A + i, p]
            P[i, p] = q[I_P + i, p]
            Ghat[i, p] = q[I_GH + i, p]
            Si[i, p] = matter[1 + i, p]
        for j in range(3):
            for p in range(n):
                g[i, j, p] = q[I_G + sym[i, j], p]
                At[i, j, p] = q[I_AT + sym[i, j], p]
                B[i, j, p] = q[I_B + 3 * i + j, p]
                Sij[i, j, p] = matter[4 + sym[i, j], p]
                dAs[i, j, p] = 0.5 * (dq[i, I_A + j, p] + dq[j, I_A + i, p])
                dPs[i, j, p] = 0.5 * (dq[i, I_P + j, p] + dq[j, I_P + i, p])
                dGhat[i, j, p] = dq[i, I_GH + j, p]
            for k in range(3):
                for p in range(n):
                    D[i, j, k, p] = q[I_D + 6 * i + sym[j, k], p]
                    # d_(i B^k_j) stored as dBs[i, j, k]
                    dBs[i, j, k, p] = 0.5 * (dq[i, I_B + 3 * j + k, p] + dq[j, I_B + 3 * i + k, p])
                for l in range(3):
                    for p in range(n):
                        dDs[i, j, k, l, p] = 0.5 * (dq[i, I_D + 6 * j + sym[k, l], p]
                                                    + dq[j, I_D + 6 * i + sym[k, l], p])

    inverse_metric_into(g, gu, det)
    raise_D_into(gu, D, Dup)
    christoffel_combos_into(g, D, P, cd, Y)
    christoffels_into(gu, cd, Y, Gt, G)
    derivative_combos_into(g, D, P, dDs, dPs, sd, X)
    ricci_contracted_into(gu, Dup, Y, X, G, u, Ric)
    contracted_christoffel_into(gu, Dup, cd, sd, Gt, Gtc, dGtc, wct)
    z_block_into(Ghat, dGhat, Gtc, dGtc, g, gu, phi2, D, G, Ric, Zl, Zu, DZ, RZ)
    lapse_hessian_into(alpha, A, dAs, G, phi2, gu, DDa, lap)

    for p in range(n):
        trAt[p] = 0.0
        trB[p] = B[0, 0, p] + B[1, 1, p] + B[2, 2, p]
        S[p] = 0.0
        AtAt[p] = 0.0
        tht[p] = K[p] - q[I_K0, p] - 2.0 * Th[p] * cc
    for i in range(3):
        for j in range(3):
            for p in range(n):
                trAt[p] += gu[i, j, p] * At[i, j, p]
                S[p] += gu[i, j, p] * Sij[i, j, p]
    for p in range(n):
        S[p] *= phi2[p]
    # Atu via cD as scratch: cD[k, j] = gu^kl At_lj
    for k in range(3):
        for j in range(3):
            for p in range(n):
                cD[k, j, p] = 0.0
            for l in range(3):
                for p in range(n):
                    cD[k, j, p] += gu[k, l, p] * At[l, j, p]
    for i in range(3):
        for j in range(3):
            for p in range(n):
                Atu[i, j, p] = 0.0
            for l in range(3):
                for p in range(n):
                    Atu[i, j, p] += cD[i, l, p] * gu[l, j, p]
            for p in range(n):
                AtAt[p] += At[i, j, p] * Atu[i, j, p]
    for k in range(3):
        for p in range(n):
            DAt[k, p] = 0.0
            trdAt[k, p] = 0.0
        for a in range(3):
            for b in range(3):
                for p in range(n):
                    DAt[k, p] += Dup[k, a, b, p] * At[a, b, p]
                    trdAt[k, p] += gu[a, b, p] * dq[k, I_AT + sym[a, b], p]

    # ---------------------------------------------------------------- ODE sector
    for i in range(3):
        for j in range(i, 3):
            c = I_G + sym[i, j]
            for p in range(n):
                out[c, p] = (-2.0 / 3.0 * g[i, j, p] * trB[p]
                             - 2.0 * alpha[p] * (At[i, j, p] - g[i, j, p] * trAt[p] / 3.0))
            for k in range(3):
                for p in range(n):
                    out[c, p] += (2.0 * beta[k, p] * D[k, i, j, p] + g[k, i, p] * B[j, k, p]
                                  + g[k, j, p] * B[i, k, p])

    for p in range(n):
        acc[p] = 0.0
        acc2[p] = 0.0
    for k in range(3):
        for p in range(n):
            acc[p] += beta[k, p] * A[k, p]
            acc2[p] += beta[k, p] * P[k, p]
    for p in range(n):
        out[I_LNA, p] = acc[p] - alpha[p] * ga[p] * tht[p]
        out[I_K0, p] = 0.0
        out[I_LNPHI, p] = acc2[p] + (alpha[p] * K[p] - trB[p]) / 3.0
    for i in range(3):
        for p in range(n):
            out[I_BETA + i, p] = s * f * q[I_BB + i, p]
        for k in range(3):
            for p in range(n):
                out[I_BETA + i, p] += s * beta[k, p] * B[k, i, p]

    # --------------------------------------------------------- evolution sector
    for i in range(3):
        for j in range(i, 3):
            c = I_AT + sym[i, j]
            for p in range(n):
                out[c, p] = (-phi2[p] * (DDa[i, j, p] - alpha[p] * (Ric[i, j, p] + DZ[i, j, p]
                                                                     + DZ[j, i, p]
                                                                     - 8.0 * PI * Sij[i, j, p]))
                             + g[i, j, p] / 3.0 * (lap[p] - alpha[p] * (RZ[p] - 8.0 * PI * S[p]))
                             - 2.0 / 3.0 * At[i, j, p] * trB[p]
                             + alpha[p] * At[i, j, p] * (K[p] - 2.0 * Th[p] * cc))
            for k in range(3):
                for p in range(n):
                    out[c, p] += (beta[k, p] * dq[k, c, p] + At[k, i, p] * B[j, k, p]
                                  + At[k, j, p] * B[i, k, p]
                                  - 2.0 * alpha[p] * At[i, k, p] * cD[k, j, p])

    for p in range(n):
        acc[p] = 0.0
        acc2[p] = 0.0
        tmp[p] = 0.0
    for k in range(3):
        for p in range(n):
            acc[p] += beta[k, p] * dq[k, I_K, p]
            acc2[p] += beta[k, p] * dq[k, I_TH, p]
            tmp[p] += Zu[k, p] * alpha[p] * A[k, p]
    for p in range(n):
        out[I_K, p] = (acc[p] - lap[p] + alpha[p] * RZ[p] + alpha[p] * K[p] * (K[p] - 2.0 * Th[p] * cc)
                       - 3.0 * alpha[p] * k1 * (1.0 + k2) * Th[p]
                       + 4.0 * PI * alpha[p] * (S[p] - 3.0 * tau[p]))
        out[I_TH, p] = (acc2[p] + 0.5 * alpha[p] * e2 * RZ[p]
                        + alpha[p] * e2 * (K[p] * K[p] / 3.0 - 0.5 * AtAt[p] - 8.0 * PI * tau[p])
                        - alpha[p] * Th[p] * K[p] * cc - tmp[p] - alpha[p] * k1 * (2.0 + k2) * Th[p])

    # gu^jk Z_j, reused below
    for k in range(3):
        for p in range(n):
            u[k, p] = 0.0
        for j in range(3):
            for p in range(n):
                u[k, p] += gu[j, k, p] * Zl[j, p]
    for i in range(3):
        for p in range(n):
            acc[p] = 2.0 / 3.0 * Gtc[i, p] * trB[p]
            acc2[p] = 0.0
            tmp[p] = 0.0
        for j in range(3):
            for p in range(n):
                acc2[p] += beta[j, p] * dq[j, I_BB + i, p]
                tmp[p] += beta[j, p] * dq[j, I_GH + i, p]
                acc[p] += (-4.0 / 3.0 * alpha[p] * gu[i, j, p] * dq[j, I_K, p]
                           + 2.0 * alpha[p] * gu[j, i, p] * dq[j, I_TH, p]
                           + 2.0 * s * alpha[p] * gu[i, j, p] * trdAt[j, p]
                           - Gtc[j, p] * B[j, i, p]
                           - 6.0 * alpha[p] * Atu[i, j, p] * P[j, p]
                           - 2.0 * alpha[p] * gu[j, i, p] * (Th[p] * A[j, p] + 2.0 / 3.0 * K[p] * Zl[j, p])
                           - 2.0 * alpha[p] * Atu[i, j, p] * A[j, p]
                           - 4.0 * s * alpha[p] * gu[i, j, p] * DAt[j, p]
                           + 2.0 * k3 * (2.0 / 3.0 * gu[i, j, p] * Zl[j, p] * trB[p])
                           - 2.0 * k3 * u[j, p] * B[j, i, p]
                           - 2.0 * alpha[p] * k1 * gu[i, j, p] * Zl[j, p]
                           - 16.0 * PI * alpha[p] * gu[i, j, p] * Si[j, p])
            for l in range(3):
                for p in range(n):
                    acc[p] += (gu[j, l, p] * dBs[j, l, i, p] + gu[i, j, p] * dBs[j, l, l, p] / 3.0
                               + 2.0 * alpha[p] * Gt[i, j, l, p] * Atu[j, l, p])
        for p in range(n):
            out[I_GH + i, p] = tmp[p] + acc[p]
            out[I_BB + i, p] = s * acc2[p] + s * (acc[p] - eta * q[I_BB + i, p])

    # ---------------------------------------------------------- auxiliary sector
    for k in range(3):
        l1 = (k + 1) % 3
        l2 = (k + 2) % 3
        cA = I_A + k
        cP = I_P + k
        for p in range(n):
            out[cA, p] = (-glm * (dq[l1, I_PSIA + l2, p] - dq[l2, I_PSIA + l1, p])
                          - alpha[p] * ga[p] * (dq[k, I_K, p] - dq[k, I_K0, p] - 2.0 * cc * dq[k, I_TH, p])
                          - s * alpha[p] * ga[p] * trdAt[k, p]
                          + 2.0 * s * alpha[p] * ga[p] * DAt[k, p]
                          - alpha[p] * A[k, p] * tht[p] * ha[p])
            out[cP, p] = (-glm * (dq[l1, I_PSIP + l2, p] - dq[l2, I_PSIP + l1, p])
                          + alpha[p] * dq[k, I_K, p] / 3.0
                          + s * alpha[p] * trdAt[k, p] / 3.0
                          + alpha[p] * A[k, p] * K[p] / 3.0
                          - 2.0 / 3.0 * s * alpha[p] * DAt[k, p])
        for l in range(3):
            for p in range(n):
                out[cA, p] += beta[l, p] * dq[l, cA, p] + B[k, l, p] * A[l, p]
                out[cP, p] += beta[l, p] * dq[l, cP, p] + B[k, l, p] * P[l, p] - dBs[k, l, l, p] / 3.0

        if s != 0.0:
            # cD[k, j] = sum_nl gu^nl (d_k D_ljn - d_l D_kjn)
            for j in range(3):
                for p in range(n):
                    cD[k, j, p] = 0.0
                for nn in range(3):
                    for l in range(3):
                        for p in range(n):
                            cD[k, j, p] += gu[nn, l, p] * (dq[k, I_D + 6 * l + sym[j, nn], p]
                                                           - dq[l, I_D + 6 * k + sym[j, nn], p])
        for i in range(3):
            c = I_B + 3 * k + i
            for p in range(n):
                out[c, p] = -glm * (dq[l1, I_PSIB + 3 * l2 + i, p] - dq[l2, I_PSIB + 3 * l1 + i, p])
            if s != 0.0:
                for p in range(n):
                    out[c, p] += s * f * dq[k, I_BB + i, p]
                for l in range(3):
                    for p in range(n):
                        out[c, p] += s * (beta[l, p] * dq[l, c, p] + B[k, l, p] * B[l, i, p])
                for j in range(3):
                    for p in range(n):
                        out[c, p] += s * alpha[p] * alpha[p] * mu * gu[i, j, p] * (
                            cD[k, j, p] - (dq[k, I_P + j, p] - dq[j, I_P + k, p]))

        for i in range(3):
            for j in range(i, 3):
                ij = sym[i, j]
                c = I_D + 6 * k + ij
                for p in range(n):
                    out[c, p] = (-glm * (dq[l1, I_PSID + 6 * l2 + ij, p] - dq[l2, I_PSID + 6 * l1 + ij, p])
                                 - alpha[p] * dq[k, I_AT + ij, p]
                                 + alpha[p] * g[i, j, p] * trdAt[k, p] / 3.0
                                 - 2.0 / 3.0 * trB[p] * D[k, i, j, p]
                                 - 2.0 / 3.0 * alpha[p] * g[i, j, p] * DAt[k, p]
                                 - alpha[p] * A[k, p] * (At[i, j, p] - g[i, j, p] * trAt[p] / 3.0))
                for m in range(3):
                    for p in range(n):
                        out[c, p] += (beta[m, p] * dq[m, c, p]
                                      + B[k, m, p] * D[m, i, j, p] + B[j, m, p] * D[k, m, i, p]
                                      + B[i, m, p] * D[k, m, j, p]
                                      - s * (-0.5 * g[m, i, p] * dBs[k, j, m, p]
                                             - 0.5 * g[m, j, p] * dBs[k, i, m, p]
                                             + g[i, j, p] * dBs[k, m, m, p] / 3.0))

    # cleaning fields
    if glm != 0.0:
        for fam in range(4):
            if fam == 0:
                base, psi, phc, ncomp = I_A, I_PSIA, I_PHIA, 1
            elif fam == 1:
                base, psi, phc, ncomp = I_B, I_PSIB, I_PHIB, 3
            elif fam == 2:
                base, psi, phc, ncomp = I_D, I_PSID, I_PHID, 6
            else:
                base, psi, phc, ncomp = I_P, I_PSIP, I_PHIP, 1
            a_c = par[P_CLEAN + 4 * fam]
            a_d = par[P_CLEAN + 4 * fam + 1]
            e_c = par[P_CLEAN + 4 * fam + 2]
            e_d = par[P_CLEAN + 4 * fam + 3]
            for a in range(ncomp):
                for k in range(3):
                    l1 = (k + 1) % 3
                    l2 = (k + 2) % 3
                    c = psi + ncomp * k + a
                    for p in range(n):
                        out[c, p] = (a_c * a_c * (dq[l1, base + ncomp * l2 + a, p]
                                                  - dq[l2, base + ncomp * l1 + a, p])
                                     - dq[k, phc + a, p] - e_c * q[c, p])
                for p in range(n):
                    out[phc + a, p] = -(a_d * a_d * (dq[0, psi + a, p] + dq[1, psi + ncomp + a, p]
                                                     + dq[2, psi + 2 * ncomp + a, p])
                                        + e_d * q[phc + a, p])
    else:
        for c in range(NVAR):
            if CLEANING_MASK[c]:
                for p in range(n):
                    out[c, p] = 0.0

    # prescribed-motion matter density
    if nv > NVAR:
        for p in range(n):
            out[NVAR, p] = -(vel[0, p] * dq[0, NVAR, p] + vel[1, p] * dq[1, NVAR, p]
                             + vel[2, p] * dq[2, NVAR, p])


@njit(cache=True, fastmath=FASTMATH)
def _det3(g, p):
    return (g[0, 0, p] * (g[1, 1, p] * g[2, 2, p] - g[1, 2, p] * g[2, 1, p])
            - g[0, 1, p] * (g[1, 0, p] * g[2, 2, p] - g[1, 2, p] * g[2, 0, p])
            + g[0, 2, p] * (g[1, 0, p] * g[2, 1, p] - g[1, 1, p] * g[2, 0, p]))


@njit(parallel=True, cache=True, fastmath=FASTMATH)
def _grid_rhs(q, dqb, matter, vel, par, out, status):
    nv, npts = q.shape
    nblocks = dqb.shape[0]
    ngroups = min(N_CHUNKS, nblocks)
    have_matter = matter.shape[1] == npts
    for grp in prange(ngroups):
        b0 = grp * nblocks // ngroups
        b1 = (grp + 1) * nblocks // ngroups
        w = make_workspace(nv, BLOCK)
        qb = np.empty((nv, BLOCK))
        mb = np.zeros((N_MATTER, BLOCK))
        vb = np.zeros((3, BLOCK))
        ob = np.empty((nv, BLOCK))
        probe = np.empty(BLOCK)
        for blk in range(b0, b1):
            lo = blk * BLOCK
            m = min(BLOCK, npts - lo)
            # short final block: pad with copies of its first point
            for c in range(nv):
                src = q[c, lo:lo + m]
                dst = qb[c]
                for p in range(m):
                    dst[p] = src[p]
                for p in range(m, BLOCK):
                    dst[p] = src[0]
            if have_matter:
                for c in range(N_MATTER):
                    for p in range(BLOCK):
                        mb[c, p] = matter[c, lo + min(p, m - 1)]
            if nv > NVAR:
                for p in range(BLOCK):
                    mb[0, p] = qb[NVAR, p]
                    for k in range(3):
                        vb[k, p] = vel[k, lo + min(p, m - 1)]
            # any inf or nan turns the probe into nan
            for p in range(BLOCK):
                probe[p] = 0.0
            for c in range(nv):
                for p in range(BLOCK):
                    probe[p] += 0.0 * qb[c, p]
            block_rhs(qb, dqb[blk], mb, vb, par, w, ob)
            for c in range(nv):
                dst = out[c, lo:lo + m]
                src = ob[c]
                for p in range(m):
                    dst[p] = src[p]
            gmat = w[0]
            for p in range(m):
                code = 0
                if probe[p] != 0.0:
                    code = 3
                elif not (np.exp(qb[I_LNA, p]) > 0.0 and np.exp(qb[I_LNPHI, p]) > 0.0):
                    code = 1
                elif not _det3(gmat, p) > SINGULAR_DET:
                    code = 2
                if code != 0:
                    status[lo + p] = code
                    for c in range(nv):
                        out[c, lo + p] = np.nan


@njit(parallel=True, cache=True, fastmath=FASTMATH)
def _grid_speed(q, par, speeds):
    nv, npts = q.shape
    nchunks = min(N_CHUNKS, npts)
    for ch in prange(nchunks):
        lo = ch * npts // nchunks
        hi = (ch + 1) * npts // nchunks
        g = np.empty((3, 3))
        for p in range(lo, hi):
            for i in range(3):
                for j in range(3):
                    g[i, j] = q[I_G + _SYM[i, j], p]
            speeds[p] = _point_speed(q[I_LNA, p], q[I_BETA, p], q[I_BETA + 1, p], q[I_BETA + 2, p],
                                     q[I_LNPHI, p], g, par)


@njit(cache=True, fastmath=FASTMATH)
def _point_speed(lna, b1, b2, b3, lnphi, g, par):
    alpha = np.exp(lna)
    phi2 = np.exp(2.0 * lnphi)
    # Gershgorin bound on the largest eigenvalue of the inverse metric
    c00 = g[1, 1] * g[2, 2] - g[1, 2] * g[2, 1]
    c01 = g[1, 2] * g[2, 0] - g[1, 0] * g[2, 2]
    c02 = g[1, 0] * g[2, 1] - g[1, 1] * g[2, 0]
    det = g[0, 0] * c00 + g[0, 1] * c01 + g[0, 2] * c02
    u01 = (g[0, 2] * g[2, 1] - g[0, 1] * g[2, 2]) / det
    u02 = (g[0, 1] * g[1, 2] - g[0, 2] * g[1, 1]) / det
    u12 = (g[0, 2] * g[1, 0] - g[0, 0] * g[1, 2]) / det
    u00 = c00 / det
    u11 = (g[0, 0] * g[2, 2] - g[0, 2] * g[2, 0]) / det
    u22 = (g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]) / det
    lam = max(abs(u00) + abs(u01) + abs(u02), abs(u01) + abs(u11) + abs(u12),
              abs(u02) + abs(u12) + abs(u22)) * phi2
    if not lam > 0.0:
        lam = 0.0
    root = np.sqrt(lam)
    bnorm = np.sqrt(b1 * b1 + b2 * b2 + b3 * b3)
    ga = gauge_g(alpha, int(par[P_SLICING]))
    v = alpha * np.sqrt(max(1.0, ga)) * root
    v = max(v, alpha * par[P_E] * root)
    if par[P_GLM] != 0.0:
        for fam in range(4):
            v = max(v, par[P_CLEAN + 4 * fam], par[P_CLEAN + 4 * fam + 1])
    if par[P_S] != 0.0:
        # gamma-driver and mu-coupled shift modes
        v = max(v, np.sqrt(4.0 / 3.0 * par[P_F] + alpha * alpha * par[P_MU]) * root
                * max(1.0, 1.0 / np.sqrt(phi2)))
    return bnorm + v


# --------------------------------------------------------------------------
# Python-level API

@dataclass
class PointState:
    """Base FO-CCZ4 variables at one point, lapse and conformal factor exponentiated."""

    alpha: float
    beta: np.ndarray
    gt: np.ndarray
    phi: float
    K0: float
    At: np.ndarray
    K: float
    Theta: float
    Ghat: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray      # B[k, i] = B_k^i
    D: np.ndarray      # D[k, i, j]
    P: np.ndarray

    @classmethod
    def from_vector(cls, q) -> "PointState":
        q = np.asarray(q, float)
        sym = SYM
        return cls(alpha=float(np.exp(q[I_LNA])), beta=q[I_BETA:I_BETA + 3].copy(),
                   gt=q[I_G:I_G + 6][sym], phi=float(np.exp(q[I_LNPHI])), K0=float(q[I_K0]),
                   At=q[I_AT:I_AT + 6][sym], K=float(q[I_K]), Theta=float(q[I_TH]),
                   Ghat=q[I_GH:I_GH + 3].copy(), b=q[I_BB:I_BB + 3].copy(),
                   A=q[I_A:I_A + 3].copy(), B=q[I_B:I_B + 9].reshape(3, 3).copy(),
                   D=q[I_D:I_D + 18].reshape(3, 6)[:, sym], P=q[I_P:I_P + 3].copy())


@dataclass
class PointGradients:
    """Raw first derivatives at one point; ``X[d, ...] = d_d X``."""

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    P: np.ndarray
    Ghat: np.ndarray
    all: np.ndarray  # (3, ncomp) raw gradients of every stored component

    @classmethod
    def from_array(cls, dq) -> "PointGradients":
        dq = np.asarray(dq, float)
        return cls(A=dq[:, I_A:I_A + 3].copy(), B=dq[:, I_B:I_B + 9].reshape(3, 3, 3).copy(),
                   D=dq[:, I_D:I_D + 18].reshape(3, 3, 6)[..., SYM],
                   P=dq[:, I_P:I_P + 3].copy(), Ghat=dq[:, I_GH:I_GH + 3].copy(), all=dq)


@dataclass
class MatterRecord:
    """Energy-momentum projections at one point; all zero in vacuum."""

    tau: float = 0.0
    S_i: tuple = (0.0, 0.0, 0.0)
    S_ij: tuple = (0.0,) * 6  # packed Sym3

    def to_array(self) -> np.ndarray:
        return np.concatenate([[self.tau], np.asarray(self.S_i, float), np.asarray(self.S_ij, float)])


_ERRORS = {1: "non-positive lapse or conformal factor", 2: "singular conformal metric",
           3: "non-finite input"}


def rhs_foccz4(q, dq, matter: MatterRecord | None = None, params: CCZ4Params | None = None,
               velocity=None) -> np.ndarray:
    """dQ/dt at one point from the stored vector ``q`` and raw gradients ``dq`` (3, ncomp)."""
    params = params or CCZ4Params()
    q = np.ascontiguousarray(q, float)
    dq = np.ascontiguousarray(dq, float)
    m = (matter or MatterRecord()).to_array()
    vel = np.zeros(3) if velocity is None else np.asarray(velocity, float)
    if not np.all(np.isfinite(dq)):
        raise StateError(_ERRORS[3])
    out, status = grid_rhs(q[:, None], dq[:, :, None], params.to_array(), m[:, None], vel[:, None])
    if status[0]:
        raise StateError(_ERRORS[int(status[0])])
    return out[:, 0]


def max_signal_speed(q, params: CCZ4Params | None = None) -> float:
    """Conservative characteristic-speed bound at one point (used for the time step)."""
    params = params or CCZ4Params()
    q = np.asarray(q, float)
    g = q[I_G:I_G + 6][SYM].copy()
    return float(_point_speed(q[I_LNA], q[I_BETA], q[I_BETA + 1], q[I_BETA + 2], q[I_LNPHI], g,
                              params.to_array()))


def blocked_shape(nv: int, npts: int) -> tuple:
    """Shape of the blocked gradient buffer for ``npts`` points."""
    return ((npts + BLOCK - 1) // BLOCK, 3, nv, BLOCK)


def to_blocked(dq) -> np.ndarray:
    """Rearrange raw gradients ``(3, ncomp, npts)`` into the blocked layout."""
    _, nv, npts = dq.shape
    out = np.zeros(blocked_shape(nv, npts))
    flat = np.zeros((3, nv, out.shape[0] * BLOCK))
    flat[:, :, :npts] = dq
    out[...] = flat.reshape(3, nv, out.shape[0], BLOCK).transpose(2, 0, 1, 3)
    return out


def grid_rhs(q, dq, params_array, matter=None, velocity=None, blocked=False):
    """Right-hand side over a grid.

    ``q`` is ``(ncomp, npts)``. ``dq`` is ``(3, ncomp, npts)``, or already in
    the blocked layout of :func:`blocked_shape` when ``blocked`` is set (the
    padding tail of the last block must hold finite values).
    """
    q = np.ascontiguousarray(q, dtype=np.float64)
    nv, npts = q.shape
    dqb = dq if blocked else to_blocked(np.asarray(dq, dtype=np.float64))
    out = np.empty_like(q)
    status = np.zeros(npts, dtype=np.int64)
    mat = np.zeros((N_MATTER, 0)) if matter is None else np.ascontiguousarray(matter)
    vel = np.zeros((3, 0)) if velocity is None else np.ascontiguousarray(velocity)
    if nv > NVAR and vel.shape[1] != npts:
        vel = np.zeros((3, npts))
    _grid_rhs(q, dqb, mat, vel, params_array, out, status)
    return out, status


def grid_max_speed(q, params_array) -> float:
    speeds = np.empty(q.shape[1])
    _grid_speed(q, params_array, speeds)
    return float(speeds.max())


def error_message(code: int) -> str:
    return _ERRORS.get(int(code), "unknown error")
