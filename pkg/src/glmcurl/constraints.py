"""Discrete constraint monitors and grid norms.

Residuals are computed from the same stencil gradients the evolution uses.
Physical extrinsic curvature is rebuilt analytically from the conformal
variables, ``K_ij = phi^-2 (At_ij + K gt_ij / 3)``, and its derivative by the
chain rule, so no reconstructed field is differentiated twice.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import curvature as cv
from .state import FOCCZ4_GROUPS, SYM, GridSpec

I_LNA = FOCCZ4_GROUPS["ln_alpha"][0]
I_G = FOCCZ4_GROUPS["gt"][0]
I_LNPHI = FOCCZ4_GROUPS["ln_phi"][0]
I_AT = FOCCZ4_GROUPS["At"][0]
I_K = FOCCZ4_GROUPS["K"][0]
I_A = FOCCZ4_GROUPS["A"][0]
I_PSIA = FOCCZ4_GROUPS["psiA"][0]
I_B = FOCCZ4_GROUPS["B"][0]
I_PSIB = FOCCZ4_GROUPS["psiB"][0]
I_D = FOCCZ4_GROUPS["D"][0]
I_PSID = FOCCZ4_GROUPS["psiD"][0]
I_P = FOCCZ4_GROUPS["P"][0]
I_PSIP = FOCCZ4_GROUPS["psiP"][0]

PAIRS = ((0, 1), (0, 2), (1, 2))
FOCCZ4_FAMILIES = ("H", "M", "A", "P", "B", "D", "divpsiA", "divpsiB", "divpsiD", "divpsiP")
FAMILIES = {
    "foccz4": FOCCZ4_FAMILIES,
    "toy_homogeneous": ("curlJ", "divpsi"),
    "toy_nonhomogeneous": ("curlJ_minus_B", "divB", "divpsi"),
    "induction_glm": ("divB",),
}
EIGHT_PI = 8.0 * np.pi


# --------------------------------------------------------------------------
# generic residuals

def curl_pairs(dv):
    """``d_l v_k - d_k v_l`` for the pairs (l, k) = (1,2), (1,3), (2,3).

    ``dv[d, k, ...]`` is the raw gradient of a field whose first stored index
    is the differentiated slot ``k``; trailing slots are carried along.
    """
    return np.stack([dv[l, k] - dv[k, l] for l, k in PAIRS])


def divergence(dv):
    """``d_m v_m`` for ``dv[d, m, ...]``."""
    return dv[0, 0] + dv[1, 1] + dv[2, 2]


def curl_involutions(dq):
    """Residual families A, P, B, D from raw FO-CCZ4 gradients ``dq[d, c, ...]``.

    Only independent (l < k) components are returned: shapes ``(3, ...)``,
    ``(3, ...)``, ``(9, ...)`` and ``(18, ...)``.
    """
    tail = dq.shape[2:]
    dA = dq[:, I_A:I_A + 3]
    dP = dq[:, I_P:I_P + 3]
    dB = dq[:, I_B:I_B + 9].reshape((3, 3, 3) + tail)
    dD = dq[:, I_D:I_D + 18].reshape((3, 3, 6) + tail)
    return {"A": curl_pairs(dA), "P": curl_pairs(dP),
            "B": curl_pairs(dB).reshape((9,) + tail), "D": curl_pairs(dD).reshape((18,) + tail)}


def cleaning_divergences(dq):
    """Divergence of each cleaning vector (per free slot for psiB and psiD)."""
    tail = dq.shape[2:]
    return {
        "divpsiA": divergence(dq[:, I_PSIA:I_PSIA + 3])[None],
        "divpsiB": divergence(dq[:, I_PSIB:I_PSIB + 9].reshape((3, 3, 3) + tail)),
        "divpsiD": divergence(dq[:, I_PSID:I_PSID + 18].reshape((3, 3, 6) + tail)),
        "divpsiP": divergence(dq[:, I_PSIP:I_PSIP + 3])[None],
    }


# --------------------------------------------------------------------------
# Hamiltonian and momentum constraints

def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def ricci_grid(q, dq):
    """``(gu, Gamma, R_ij)`` for flattened ``q (ncomp, n)`` and ``dq (3, ncomp, n)``."""
    n = q.shape[1]
    g = _c(q[I_G:I_G + 6][SYM])
    D = _c(q[I_D:I_D + 18].reshape(3, 6, n)[:, SYM])
    P = _c(q[I_P:I_P + 3])
    dD = dq[:, I_D:I_D + 18].reshape(3, 3, 6, n)[:, :, SYM]
    dP = dq[:, I_P:I_P + 3]
    dDs = _c(0.5 * (dD + dD.swapaxes(0, 1)))
    dPs = _c(0.5 * (dP + dP.swapaxes(0, 1)))
    gu = np.empty((3, 3, n))
    cv.inverse_metric_into(g, gu, np.empty(n))
    Dup = np.empty((3, 3, 3, n))
    cv.raise_D_into(gu, D, Dup)
    cd = np.empty((3, 3, 3, n))
    Y = np.empty((3, 3, 3, n))
    cv.christoffel_combos_into(g, D, P, cd, Y)
    Gt = np.empty((3, 3, 3, n))
    G = np.empty((3, 3, 3, n))
    cv.christoffels_into(gu, cd, Y, Gt, G)
    sd = np.empty((3, 3, 3, 3, n))
    X = np.empty((3, 3, 3, 3, n))
    cv.derivative_combos_into(g, D, P, dDs, dPs, sd, X)
    Ric = np.empty((3, 3, n))
    cv.ricci_contracted_into(gu, Dup, Y, X, G, np.empty((3, n)), Ric)
    return gu, G, Ric


def _physical_K(At, K, g, phi2):
    return (At + g * (K / 3.0)) / phi2


def hamiltonian_from(gu, Ric, At, K, phi2, tau):
    """``H = R_ij g^ij - K_ij K^ij + K^2 - 16 pi tau`` in conformal variables.

    With ``g^ij = phi^2 gt^ij`` and ``K_ij = phi^-2 (At_ij + K gt_ij / 3)``,
    ``K_ij K^ij = At_ij At^ij + 2 K trAt / 3 + K^2 / 3`` (tilde raising).
    """
    R = phi2 * np.einsum("ij...,ij...->...", gu, Ric)
    Atu = np.einsum("ia...,jb...,ab...->ij...", gu, gu, At)
    AA = np.einsum("ij...,ij...->...", At, Atu)
    trA = np.einsum("ij...,ij...->...", gu, At)
    return R - AA - 2.0 * K * trA / 3.0 + 2.0 * K * K / 3.0 - 2.0 * EIGHT_PI * tau


def momentum_from(gu, G, At, K, g, phi2, dAt, dK, dg, dlnphi, Si):
    """``M_i = g^jl (d_l K_ij - d_i K_jl - Gamma^m_jl K_mi + Gamma^m_ji K_ml) - 8 pi S_i``.

    Derivative arrays carry the derivative index first: ``dAt[l, i, j]``,
    ``dK[l]``, ``dg[l, i, j]``, ``dlnphi[l]``.
    """
    Kij = _physical_K(At, K, g, phi2)
    dKij = ((dAt + dK[:, None, None] * g[None] / 3.0 + K * dg / 3.0) / phi2
            - 2.0 * dlnphi[:, None, None] * Kij[None])
    gup = phi2 * gu
    t1 = np.einsum("jl...,lij...->i...", gup, dKij)
    t2 = np.einsum("jl...,ijl...->i...", gup, dKij)
    t3 = np.einsum("jl...,mjl...,mi...->i...", gup, G, Kij)
    t4 = np.einsum("jl...,mji...,ml...->i...", gup, G, Kij)
    return t1 - t2 - t3 + t4 - EIGHT_PI * Si


def _conformal_fields(q, dq):
    n = q.shape[1]
    phi2 = np.exp(2.0 * q[I_LNPHI])
    g = q[I_G:I_G + 6][SYM]
    At = q[I_AT:I_AT + 6][SYM]
    dAt = dq[:, I_AT:I_AT + 6][:, SYM]
    dg = dq[:, I_G:I_G + 6][:, SYM]
    return phi2, g, At, q[I_K], dAt, dq[:, I_K], dg, dq[:, I_LNPHI], n


def hamiltonian_momentum_grid(q, dq, matter=None):
    """``(H (1, n), M (3, n))`` for flattened FO-CCZ4 data.

    ``matter`` is ``(10, n)`` with rows (tau, S_i, S_ij) or None.
    """
    phi2, g, At, K, dAt, dK, dg, dlnphi, n = _conformal_fields(q, dq)
    gu, G, Ric = ricci_grid(q, dq)
    tau = np.zeros(n) if matter is None else matter[0]
    Si = np.zeros((3, n)) if matter is None else matter[1:4]
    H = hamiltonian_from(gu, Ric, At, K, phi2, tau)
    M = momentum_from(gu, G, At, K, g, phi2, dAt, dK, dg, dlnphi, Si)
    return H[None], M


def hamiltonian(point, bundle, matter=None) -> float:
    """Pointwise Hamiltonian residual from a :class:`CurvatureBundle`."""
    tau = 0.0 if matter is None else matter.tau
    return float(hamiltonian_from(bundle.gu, bundle.Ric, point.At, point.K, point.phi ** 2, tau))


def momentum(point, grads, bundle, matter=None) -> np.ndarray:
    """Pointwise momentum residual; ``grads.all`` holds the raw gradients."""
    dq = grads.all
    Si = np.zeros(3) if matter is None else np.asarray(matter.S_i, float)
    dAt = dq[:, I_AT:I_AT + 6][:, SYM]
    dg = dq[:, I_G:I_G + 6][:, SYM]
    return momentum_from(bundle.gu, bundle.G, point.At, point.K, point.gt, point.phi ** 2, dAt,
                         dq[:, I_K], dg, dq[:, I_LNPHI], Si)


# --------------------------------------------------------------------------
# norms and reports

def norms(residual, grid: GridSpec, mask=None) -> tuple[float, float, float]:
    """``(L1, L2, Linf)`` of ``residual (ncomp, nx, ny, nz)`` over interior points.

    Components are summed for L1, in quadrature for L2 and maxed for Linf.
    """
    r = np.asarray(residual, dtype=float)
    if r.ndim == 3:
        r = r[None]
    if mask is None:
        mask = grid.interior_mask()
    vals = r[:, mask]
    if vals.size == 0:
        return 0.0, 0.0, 0.0
    vol = grid.cell_volume
    return (float(vol * np.sum(np.abs(vals))), float(np.sqrt(vol * np.sum(vals * vals))),
            float(np.max(np.abs(vals))))


@dataclass
class ConstraintReport:
    """Per-family ``(L1, L2, Linf)`` at one time."""

    time: float
    values: dict = field(default_factory=dict)

    def header(self) -> list[str]:
        cols = ["t"]
        for fam in self.values:
            cols += [f"{fam}_L1", f"{fam}_L2", f"{fam}_Linf"]
        return cols

    def row(self) -> list[float]:
        out = [self.time]
        for fam in self.values:
            out += list(self.values[fam])
        return out

    def max_linf(self) -> float:
        return max((v[2] for v in self.values.values()), default=0.0)


def residuals(system, q, dq, matter=None) -> dict:
    """Pointwise residual grids ``family -> (ncomp, nx, ny, nz)`` for ``system``."""
    kind = system.kind
    shape = q.shape[1:]
    if kind == "foccz4":
        n = int(np.prod(shape))
        nv = q.shape[0]
        flat_m = None if matter is None else np.reshape(matter, (10, n))
        if system.with_tau:
            flat_m = np.zeros((10, n)) if flat_m is None else flat_m.copy()
            flat_m[0] = q[nv - 1].reshape(n)
        H, M = hamiltonian_momentum_grid(q.reshape(nv, n), dq.reshape(3, nv, n), flat_m)
        out = {"H": H.reshape((1,) + shape), "M": M.reshape((3,) + shape)}
        out.update(curl_involutions(dq))
        out.update(cleaning_divergences(dq))
        return out
    if kind == "induction_glm":
        return {"divB": divergence(dq[:, 3:6])[None]}
    dJ = dq[:, 4:7]
    curl = np.stack([dJ[1, 2] - dJ[2, 1], dJ[2, 0] - dJ[0, 2], dJ[0, 1] - dJ[1, 0]])
    divpsi = divergence(dq[:, 7:10])[None]
    if kind == "toy_homogeneous":
        return {"curlJ": curl, "divpsi": divpsi}
    return {"curlJ_minus_B": curl - q[11:14], "divB": divergence(dq[:, 11:14])[None],
            "divpsi": divpsi}


def monitor(system, grid: GridSpec, q, t: float, dq=None, matter=None) -> ConstraintReport:
    """Constraint report of the grid state ``q`` at time ``t``."""
    if dq is None:
        from .stencils import GridStencils
        dq = GridStencils(grid).gradient(q)
    res = residuals(system, q, dq, matter)
    mask = grid.interior_mask()
    return ConstraintReport(t, {fam: norms(res[fam], grid, mask) for fam in FAMILIES[system.kind]})
