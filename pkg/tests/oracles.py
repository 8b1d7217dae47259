"""Literal-transcription reference implementations used as test oracles.

Everything here is written directly from the governing equations with
``numpy.einsum`` over a leading batch axis. Nothing is shared with the
compiled kernels apart from the storage layout of the state vector.
"""
import numpy as np

from glmcurl.state import FOCCZ4_GROUPS, SYM

EPS = np.zeros((3, 3, 3))
EPS[0, 1, 2] = EPS[1, 2, 0] = EPS[2, 0, 1] = 1.0
EPS[0, 2, 1] = EPS[2, 1, 0] = EPS[1, 0, 2] = -1.0


def _grp(v, name):
    o, n = FOCCZ4_GROUPS[name]
    return v[..., o:o + n]


def _sym(v6):
    return v6[..., SYM]


def _pack(m):
    iu = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    return np.stack([m[..., i, j] for i, j in iu], axis=-1)


def split_state(q):
    """Batch ``(N, nv)`` -> dict of tensors with the batch axis first."""
    return dict(
        lna=_grp(q, "ln_alpha")[:, 0], beta=_grp(q, "beta"), g=_sym(_grp(q, "gt")),
        lnphi=_grp(q, "ln_phi")[:, 0], K0=_grp(q, "K0")[:, 0], At=_sym(_grp(q, "At")),
        K=_grp(q, "K")[:, 0], Th=_grp(q, "Theta")[:, 0], Gh=_grp(q, "Ghat"), b=_grp(q, "b"),
        A=_grp(q, "A"), psiA=_grp(q, "psiA"), phiA=_grp(q, "phiA")[:, 0],
        B=_grp(q, "B").reshape(-1, 3, 3), psiB=_grp(q, "psiB").reshape(-1, 3, 3),
        phiB=_grp(q, "phiB"),
        D=_sym(_grp(q, "D").reshape(-1, 3, 6)), psiD=_sym(_grp(q, "psiD").reshape(-1, 3, 6)),
        phiD=_sym(_grp(q, "phiD")), P=_grp(q, "P"), psiP=_grp(q, "psiP"),
        phiP=_grp(q, "phiP")[:, 0])


def split_grad(dq):
    """Batch ``(N, 3, nv)`` of raw derivatives; the derivative axis stays second."""
    return dict(
        lna=dq[..., 0], K0=_grp(dq, "K0")[..., 0], At=_sym(_grp(dq, "At")),
        K=_grp(dq, "K")[..., 0], Th=_grp(dq, "Theta")[..., 0], Gh=_grp(dq, "Ghat"),
        b=_grp(dq, "b"), A=_grp(dq, "A"), psiA=_grp(dq, "psiA"), phiA=_grp(dq, "phiA")[..., 0],
        B=_grp(dq, "B").reshape(dq.shape[0], 3, 3, 3),
        psiB=_grp(dq, "psiB").reshape(dq.shape[0], 3, 3, 3), phiB=_grp(dq, "phiB"),
        D=_sym(_grp(dq, "D").reshape(dq.shape[0], 3, 3, 6)),
        psiD=_sym(_grp(dq, "psiD").reshape(dq.shape[0], 3, 3, 6)), phiD=_sym(_grp(dq, "phiD")),
        P=_grp(dq, "P"), psiP=_grp(dq, "psiP"), phiP=_grp(dq, "phiP")[..., 0])


def curvature_oracle(g, D, P, A, alpha, phi, Gh, dA, dP, dD, dGh):
    """All helper-block quantities; raw gradients have the derivative axis second.

    ``dD[n, d, k, i, j]`` = d_d D_kij, ``dGh[n, d, i]`` = d_d Ghat^i.
    """
    e = np.einsum
    gu = np.linalg.inv(g)
    Dup = e("Nia,Njb,Nkab->Nkij", gu, gu, D)
    # symmetrised auxiliaries: d_(k A_i), d_(k P_i), d_(k D_l)ij
    dAs = 0.5 * (dA + dA.transpose(0, 2, 1))
    dPs = 0.5 * (dP + dP.transpose(0, 2, 1))
    dDs = 0.5 * (dD + dD.transpose(0, 2, 1, 3, 4))
    # comb[n, i, j, l] = D_ijl + D_jil - D_lij
    comb = np.einsum("Nijl->Nijl", D) + np.einsum("Njil->Nijl", D) - np.einsum("Nlij->Nijl", D)
    Gt = e("Nkl,Nijl->Nkij", gu, comb)
    Pt = (e("Njl,Ni->Nijl", g, P) + e("Nil,Nj->Nijl", g, P) - e("Nij,Nl->Nijl", g, P))
    G = Gt - e("Nkl,Nijl->Nkij", gu, Pt)
    dcomb = (e("Nkijl->Nkijl", dDs) + e("Nkjil->Nkijl", dDs) - e("Nklij->Nkijl", dDs))
    dGt = -2 * e("Nkml,Nijl->Nkmij", Dup, comb) + e("Nml,Nkijl->Nkmij", gu, dcomb)
    DP = (e("Nkjl,Ni->Nkijl", D, P) + e("Nkil,Nj->Nkijl", D, P) - e("Nkij,Nl->Nkijl", D, P))
    gdP = (e("Njl,Nki->Nkijl", g, dPs) + e("Nil,Nkj->Nkijl", g, dPs) - e("Nij,Nkl->Nkijl", g, dPs))
    dG = (-2 * e("Nkml,Nijl->Nkmij", Dup, comb) + 2 * e("Nkml,Nijl->Nkmij", Dup, Pt)
          - 2 * e("Nml,Nkijl->Nkmij", gu, DP) + e("Nml,Nkijl->Nkmij", gu, dcomb)
          - e("Nml,Nkijl->Nkmij", gu, gdP))
    # Riem[n, m, i, k, j] = R^m_ikj
    Riem = (e("Nkmij->Nmikj", dG) - e("Njmik->Nmikj", dG)
            + e("Nlij,Nmlk->Nmikj", G, G) - e("Nlik,Nmlj->Nmikj", G, G))
    Ric = e("Nmimj->Nij", Riem)
    Gtc = e("Njl,Nijl->Ni", gu, Gt)
    dGtc = -2 * e("Nkjl,Nijl->Nki", Dup, Gt) + e("Njl,Nkijl->Nki", gu, dGt)
    phi2 = phi ** 2
    Zl = 0.5 * e("Nij,Nj->Ni", g, Gh - Gtc)
    Zu = 0.5 * phi2[:, None] * (Gh - Gtc)
    DZ = (e("Nijl,Nl->Nij", D, Gh - Gtc) + 0.5 * e("Njl,Nil->Nij", g, dGh - dGtc)
          - e("Nlij,Nl->Nij", G, Zl))
    RZ = phi2 * e("Nij,Nij->N", gu, Ric + DZ + DZ.transpose(0, 2, 1))
    DDa = alpha[:, None, None] * (e("Ni,Nj->Nij", A, A) - e("Nkij,Nk->Nij", G, A) + dAs)
    lap = phi2 * e("Nij,Nij->N", gu, DDa)
    return dict(gu=gu, Dup=Dup, Gt=Gt, G=G, dGt=dGt, dG=dG, Riem=Riem, Ric=Ric, Gtc=Gtc,
                dGtc=dGtc, Zl=Zl, Zu=Zu, DZ=DZ, RZ=RZ, DDa=DDa, lap=lap, dAs=dAs, dPs=dPs,
                dDs=dDs)


def foccz4_rhs_oracle(q, dq, matter, par):
    """Right-hand side for a batch: ``q`` (N, 103), ``dq`` (N, 3, 103), ``matter`` (N, 10).

    ``par`` is a dict with keys slicing, s, f, mu, eta, c, e, kappa1..3, glm and
    ``clean[fam] = (a_c, a_d, eps_c, eps_d)``.
    """
    e = np.einsum
    st = split_state(q)
    dv = split_grad(dq)
    alpha = np.exp(st["lna"])
    phi = np.exp(st["lnphi"])
    phi2 = phi ** 2
    g, At, B, D, A, P = st["g"], st["At"], st["B"], st["D"], st["A"], st["P"]
    K, Th, K0, beta = st["K"], st["Th"], st["K0"], st["beta"]
    tau = matter[:, 0]
    Si = matter[:, 1:4]
    Sij = _sym(matter[:, 4:10])
    s, f, mu, eta, c, ee = par["s"], par["f"], par["mu"], par["eta"], par["c"], par["e"]
    k1, k2, k3 = par["kappa1"], par["kappa2"], par["kappa3"]
    if par["slicing"] == "harmonic":
        ga = np.ones_like(alpha)
        ha = np.ones_like(alpha)
    else:
        ga = 2.0 / alpha
        ha = ga + alpha * (-2.0 / alpha ** 2)

    cv = curvature_oracle(g, D, P, A, alpha, phi, st["Gh"], dv["A"], dv["P"], dv["D"], dv["Gh"])
    gu, Dup, Gt, Ric, DZ, RZ = cv["gu"], cv["Dup"], cv["Gt"], cv["Ric"], cv["DZ"], cv["RZ"]
    Gtc, Zl, Zu, DDa, lap = cv["Gtc"], cv["Zl"], cv["Zu"], cv["DDa"], cv["lap"]

    trA = e("Nij,Nij->N", gu, At)
    trB = e("Nkk->N", B)
    S = phi2 * e("Nij,Nij->N", gu, Sij)
    Atu = e("Nik,Njl,Nkl->Nij", gu, gu, At)
    # d_(k B_l)^i with B[n, k, i] = B_k^i; dB[n, d, k, i]
    dBs = 0.5 * (dv["B"] + dv["B"].transpose(0, 2, 1, 3))   # [n, k, l, i]
    adv = lambda x: e("Nk,Nk...->N...", beta, x)  # noqa: E731
    trdA = e("Nm,Nkm->Nk", gu.reshape(-1, 9), dv["At"].reshape(-1, 3, 9))
    DA = e("Nkij,Nij->Nk", Dup, At)

    out = {}
    out["gt"] = (2 * e("Nk,Nkij->Nij", beta, D) + e("Nki,Njk->Nij", g, B) + e("Nkj,Nik->Nij", g, B)
                 - 2 / 3 * g * trB[:, None, None]
                 - 2 * alpha[:, None, None] * (At - g * trA[:, None, None] / 3))
    out["ln_alpha"] = e("Nk,Nk->N", beta, A) - alpha * ga * (K - K0 - 2 * Th * c)
    out["K0"] = np.zeros_like(K)
    out["beta"] = s * e("Nk,Nki->Ni", beta, B) + s * f * st["b"]
    out["ln_phi"] = e("Nk,Nk->N", beta, P) + (alpha * K - trB) / 3

    a3 = alpha[:, None, None]
    out["At"] = (adv(dv["At"])
                 - phi2[:, None, None] * (DDa - a3 * (Ric + DZ + DZ.transpose(0, 2, 1) - 8 * np.pi * Sij))
                 + g / 3 * (lap - alpha * (RZ - 8 * np.pi * S))[:, None, None]
                 + e("Nki,Njk->Nij", At, B) + e("Nkj,Nik->Nij", At, B)
                 - 2 / 3 * At * trB[:, None, None] + a3 * At * (K - 2 * Th * c)[:, None, None]
                 - 2 * a3 * e("Nil,Nlm,Nmj->Nij", At, gu, At))
    out["K"] = (adv(dv["K"]) - lap + alpha * RZ + alpha * K * (K - 2 * Th * c)
                - 3 * alpha * k1 * (1 + k2) * Th + 4 * np.pi * alpha * (S - 3 * tau))
    out["Theta"] = (adv(dv["Th"]) + 0.5 * alpha * ee ** 2 * RZ
                    + alpha * ee ** 2 * (K ** 2 / 3 - 0.5 * e("Nij,Nij->N", At, Atu) - 8 * np.pi * tau)
                    - alpha * Th * K * c - alpha * e("Ni,Ni->N", Zu, A) - alpha * k1 * (2 + k2) * Th)
    a1 = alpha[:, None]
    src_G = (-4 / 3 * a1 * e("Nij,Nj->Ni", gu, dv["K"]) + 2 * a1 * e("Nki,Nk->Ni", gu, dv["Th"])
             + e("Nkl,Nkli->Ni", gu, dBs) + 1 / 3 * e("Nik,Nkll->Ni", gu, dBs)
             + 2 * s * a1 * e("Nik,Nk->Ni", gu, trdA)
             + 2 / 3 * Gtc * trB[:, None] - e("Nk,Nki->Ni", Gtc, B)
             + 2 * a1 * (e("Nijk,Njk->Ni", Gt, Atu) - 3 * e("Nij,Nj->Ni", Atu, P))
             - 2 * a1 * e("Nki,Nk->Ni", gu, Th[:, None] * A + 2 / 3 * K[:, None] * Zl)
             - 2 * a1 * e("Nij,Nj->Ni", Atu, A)
             - 4 * s * a1 * e("Nik,Nk->Ni", gu, DA)
             + 2 * k3 * (2 / 3 * e("Nij,Nj->Ni", gu, Zl) * trB[:, None] - e("Njk,Nj,Nki->Ni", gu, Zl, B))
             - 2 * a1 * k1 * e("Nij,Nj->Ni", gu, Zl) - 16 * np.pi * a1 * e("Nij,Nj->Ni", gu, Si))
    out["Ghat"] = adv(dv["Gh"]) + src_G
    out["b"] = s * adv(dv["b"]) + s * (src_G - eta * st["b"])

    glm = 1.0 if par["glm"] else 0.0
    curl = lambda dpsi: e("klm,Nlm...->Nk...", EPS, dpsi)  # noqa: E731
    tht = (K - K0 - 2 * Th * c)
    out["A"] = (adv(dv["A"]) - glm * curl(dv["psiA"])
                - a1 * ga[:, None] * (dv["K"] - dv["K0"] - 2 * c * dv["Th"])
                - s * a1 * ga[:, None] * trdA + 2 * s * a1 * ga[:, None] * DA
                - a1 * A * (tht * ha)[:, None] + e("Nkl,Nl->Nk", B, A))
    out["B"] = (s * adv(dv["B"]) - glm * curl(dv["psiB"])
                + s * (f * dv["b"]
                       - (alpha ** 2 * mu)[:, None, None] * e("Nij,Nkj->Nki", gu, dv["P"] - dv["P"].transpose(0, 2, 1))
                       + (alpha ** 2 * mu)[:, None, None] * e("Nij,Nzl,Nkljz->Nki", gu, gu,
                                                            dv["D"] - dv["D"].transpose(0, 2, 1, 3, 4)))
                + s * e("Nkl,Nli->Nki", B, B))
    dD_raw = dv["D"]  # [n, d, k, i, j]
    dBsym = dBs  # [n, k, j, m] = d_(k B_j)^m
    shift = (-0.5 * e("Nmi,Nkjm->Nkij", g, dBsym) - 0.5 * e("Nmj,Nkim->Nkij", g, dBsym)
             + 1 / 3 * e("Nij,Nkmm->Nkij", g, dBsym))
    dAt = dv["At"]  # [n, k, i, j]
    out["D"] = (adv(dD_raw) - glm * curl(dv["psiD"]) - s * shift - alpha[:, None, None, None] * dAt
                + alpha[:, None, None, None] * e("Nij,Nk->Nkij", g, trdA) / 3
                + e("Nkl,Nlij->Nkij", B, D) + e("Njl,Nkli->Nkij", B, D) + e("Nil,Nklj->Nkij", B, D)
                - 2 / 3 * trB[:, None, None, None] * D
                - 2 / 3 * alpha[:, None, None, None] * e("Nij,Nk->Nkij", g, DA)
                - alpha[:, None, None, None] * e("Nk,Nij->Nkij", A, At - g * trA[:, None, None] / 3))
    out["P"] = (adv(dv["P"]) - glm * curl(dv["psiP"]) + a1 * dv["K"] / 3
                - e("Nkii->Nk", dBs) / 3 + s * a1 * trdA / 3 + a1 * A * K[:, None] / 3
                + e("Nkl,Nl->Nk", B, P) - 2 / 3 * s * a1 * DA)

    for fam, var, psi, phin in (("A", "A", "psiA", "phiA"), ("B", "B", "psiB", "phiB"),
                                ("D", "D", "psiD", "phiD"), ("P", "P", "psiP", "phiP")):
        a_c, a_d, e_c, e_d = par["clean"][fam]
        if glm:
            out[psi] = (a_c ** 2 * curl(dv[var]) - dv[phin] - e_c * st[psi])
            out[phin] = -a_d ** 2 * e("Nmm...->N...", dv[psi]) - e_d * st[phin]
        else:
            out[psi] = np.zeros_like(st[psi])
            out[phin] = np.zeros_like(st[phin])

    # flatten back to the storage layout
    res = np.zeros_like(q)
    flat = {
        "ln_alpha": out["ln_alpha"][:, None], "beta": out["beta"], "gt": _pack(out["gt"]),
        "ln_phi": out["ln_phi"][:, None], "K0": out["K0"][:, None], "At": _pack(out["At"]),
        "K": out["K"][:, None], "Theta": out["Theta"][:, None], "Ghat": out["Ghat"], "b": out["b"],
        "A": out["A"], "psiA": out["psiA"], "phiA": np.reshape(out["phiA"], (-1, 1)),
        "B": out["B"].reshape(-1, 9), "psiB": out["psiB"].reshape(-1, 9), "phiB": out["phiB"],
        "D": _pack(out["D"]).reshape(-1, 18), "psiD": _pack(out["psiD"]).reshape(-1, 18),
        "phiD": _pack(out["phiD"]), "P": out["P"], "psiP": out["psiP"],
        "phiP": np.reshape(out["phiP"], (-1, 1)),
    }
    for name, val in flat.items():
        o, n = FOCCZ4_GROUPS[name]
        res[:, o:o + n] = val
    return res


# --------------------------------------------------------------------------
# flux-form oracles for the small systems
#
# Each system is written as d_t Q + d_l F_l(Q) + NCP(Q, dQ) = S(Q). The flux
# divergence d_l F_l(Q) = F_l'(Q) . d_l Q is evaluated by complex-step
# differentiation, which is exact to rounding and shares nothing with the
# hand-expanded product rule in the package.

CSTEP = 1e-40


def _flux_divergence(flux, q, dq):
    """sum_l F_l'(q) d_l q for one point: ``q`` (nc,), ``dq`` (3, nc)."""
    total = 0.0
    for l in range(3):
        total = total + flux(q + 1j * CSTEP * dq[l], l).imag / CSTEP
    return total


def toy_rhs_oracle(q, dq, p, nonhomogeneous=False, S=None, dS=None):
    """One point of the toy system; ``S`` (3,) and ``dS[l, k]`` = d_l S_k are the source."""
    nc = len(q)

    def flux(u, l):
        F = np.zeros(nc, dtype=complex)
        rho, m, J, psi, phi = u[0], u[1:4], u[4:7], u[7:10], u[10]
        v = m / rho
        F[0] = m[l]
        for i in range(3):
            F[1 + i] = rho * v[i] * v[l] + rho * p.c0 ** 2 * J[i] * J[l]
        # d_k (v_m J_m) is a gradient: flux in direction l only for component l
        F[4 + l] += sum(v[m_] * J[m_] for m_ in range(3))
        for k in range(3):
            for m_ in range(3):
                F[4 + k] += EPS[k, l, m_] * psi[m_]
                F[7 + k] -= p.a_c ** 2 * EPS[k, l, m_] * J[m_]
        F[7 + l] += phi
        F[10] = p.a_d ** 2 * psi[l]
        if nonhomogeneous:
            B, chi = u[11:14], u[14]
            for i in range(3):
                F[11 + i] = B[i] * v[l] - v[i] * B[l]
            F[11 + l] += chi
            F[14] = p.a_b ** 2 * B[l]
        return F

    out = -_flux_divergence(flux, q.astype(complex), dq)
    rho = q[0]
    v = q[1:4] / rho
    dJ = dq[:, 4:7]
    for k in range(3):
        for m_ in range(3):
            out[4 + k] -= v[m_] * (dJ[m_, k] - dJ[k, m_])
    out[7:10] -= p.eps_c * q[7:10]
    out[10] -= p.eps_d * q[10]
    if nonhomogeneous:
        dB = dq[:, 11:14]
        divB = dB[0, 0] + dB[1, 1] + dB[2, 2]
        out[4:7] += S
        out[7:10] -= p.a_c ** 2 * q[11:14]
        for i in range(3):
            out[11 + i] -= v[i] * divB
            for k in range(3):
                for j in range(3):
                    # -d_k(-eps_ikj S_j)
                    out[11 + i] += EPS[i, k, j] * dS[k, j]
        out[14] -= p.eps_b * q[14]
    return out


def induction_rhs_oracle(q, dq, p):
    def flux(u, l):
        F = np.zeros(7, dtype=complex)
        E, B, phi = u[0:3], u[3:6], u[6]
        for k in range(3):
            for m_ in range(3):
                F[k] -= p.c ** 2 * EPS[k, l, m_] * B[m_]
                F[3 + k] += EPS[k, l, m_] * E[m_]
        F[3 + l] += phi
        F[6] = p.a_d ** 2 * B[l]
        return F

    out = -_flux_divergence(flux, q.astype(complex), dq)
    out[6] -= p.eps_d * q[6]
    return out


# --------------------------------------------------------------------------
# ADM constraints

def _physical_extrinsic(qv):
    """K_ij = phi^-2 (At_ij + K gt_ij / 3) for one point; works on complex input."""
    o_a, _ = FOCCZ4_GROUPS["At"]
    o_g, _ = FOCCZ4_GROUPS["gt"]
    o_k, _ = FOCCZ4_GROUPS["K"]
    o_p, _ = FOCCZ4_GROUPS["ln_phi"]
    At = qv[o_a:o_a + 6][SYM]
    g = qv[o_g:o_g + 6][SYM]
    return np.exp(-2 * qv[o_p]) * (At + qv[o_k] * g / 3)


def adm_constraints_oracle(q, dq, matter):
    """``(H, M_i)`` for a batch ``q`` (N, nv), ``dq`` (N, 3, nv), ``matter`` (N, 10).

    K in the K^2 term is the evolved trace variable. Physical-metric
    quantities are formed explicitly and covariant derivatives written out
    term by term.
    """
    st = split_state(q)
    dv = split_grad(dq)
    alpha = np.exp(st["lna"])
    phi = np.exp(st["lnphi"])
    cv = curvature_oracle(st["g"], st["D"], st["P"], st["A"], alpha, phi, st["Gh"], dv["A"], dv["P"],
                          dv["D"], dv["Gh"])
    N = q.shape[0]
    H = np.empty(N)
    M = np.empty((N, 3))
    for n in range(N):
        gam_up = phi[n] ** 2 * cv["gu"][n]
        Kij = _physical_extrinsic(q[n])
        Kup = gam_up @ Kij @ gam_up
        R = np.sum(gam_up * cv["Ric"][n])
        H[n] = R - np.sum(Kij * Kup) + st["K"][n] ** 2 - 16 * np.pi * matter[n, 0]
        dK = np.array([_physical_extrinsic(q[n] + 1j * CSTEP * dq[n, l]).imag / CSTEP for l in range(3)])
        G = cv["G"][n]
        # nabla_l K_ij
        cov = np.zeros((3, 3, 3))
        for l in range(3):
            for i in range(3):
                for j in range(3):
                    cov[l, i, j] = dK[l, i, j]
                    for m_ in range(3):
                        cov[l, i, j] -= G[m_, l, i] * Kij[m_, j] + G[m_, l, j] * Kij[i, m_]
        for i in range(3):
            acc = 0.0
            for j in range(3):
                for l in range(3):
                    acc += gam_up[j, l] * (cov[l, i, j] - cov[i, j, l])
            M[n, i] = acc - 8 * np.pi * matter[n, 1 + i]
    return H, M
