"""Grid geometry, variable layouts and parameter records shared by all systems.

Component ordering for FO-CCZ4 follows the state vector listing

    (alpha, beta^i, gt_ij, phi, K0, At_ij, K, Theta, Ghat^i, b^i,
     A_k, psiA_k, phiA, B_k^i, psiB^i_k, phiB^i,
     D_kij, psiD_kij, phiD_ij, P_k, psiP_k, phiP)

with alpha and phi stored as their logarithms. Symmetric 3x3 tensors are
packed as (11, 12, 13, 22, 23, 33). Rank-2 objects with one derivative index
(B_k^i, psiB) are stored derivative-index major: slot ``3*k + i``. Rank-3
objects with a leading derivative index and a symmetric pair (D_kij, psiD_kij)
are stored as ``6*k + sym(i, j)``. This ordering is a choice of this package.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

PERIODIC = "periodic"
EXTRAPOLATE = "extrapolate"
BOUNDARIES = (PERIODIC, EXTRAPOLATE)

# packed index of (i, j) in a Sym3 6-vector
SYM = np.array([[0, 1, 2], [1, 3, 4], [2, 4, 5]], dtype=np.int64)
SYM_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
SYM_LABELS = ("11", "12", "13", "22", "23", "33")


class ConfigurationError(ValueError):
    """Invalid grid, parameters or run configuration."""


class StateError(ValueError):
    """A state violates a physical invariant (positivity, finiteness)."""


# --------------------------------------------------------------------------
# Sym3 packing

def pack_sym3(matrix, tol: float = 1e-12) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.shape[-2:] != (3, 3):
        raise ValueError(f"expected (..., 3, 3) matrix, got shape {m.shape}")
    asym = np.abs(m - np.swapaxes(m, -1, -2))
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if np.any(asym > tol * scale):
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym.max():.3e})")
    return np.stack([m[..., i, j] for i, j in SYM_PAIRS], axis=-1)


def unpack_sym3(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=float)
    if v.shape[-1] != 6:
        raise ValueError(f"expected (..., 6) vector, got shape {v.shape}")
    return v[..., SYM]


# --------------------------------------------------------------------------
# grid

@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centred Cartesian grid.

    Node ``(i, j, k)`` sits at ``lower + (index + 1/2) * spacing``.
    """

    shape: tuple[int, int, int]
    lower: tuple[float, float, float] = (0.0, 0.0, 0.0)
    upper: tuple[float, float, float] = (1.0, 1.0, 1.0)
    boundary: tuple[str, str, str] = (PERIODIC, PERIODIC, PERIODIC)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "lower", tuple(float(x) for x in self.lower))
        object.__setattr__(self, "upper", tuple(float(x) for x in self.upper))
        if isinstance(self.boundary, str):
            object.__setattr__(self, "boundary", (self.boundary,) * 3)
        object.__setattr__(self, "boundary", tuple(self.boundary))
        if len(self.shape) != 3 or len(self.lower) != 3 or len(self.upper) != 3:
            raise ConfigurationError("grid needs exactly three axes")
        for d in range(3):
            if self.shape[d] < 1:
                raise ConfigurationError(f"axis {d}: cell count must be positive")
            if not self.upper[d] > self.lower[d]:
                raise ConfigurationError(f"axis {d}: upper bound must exceed lower bound")
            if self.boundary[d] not in BOUNDARIES:
                raise ConfigurationError(f"axis {d}: unknown boundary {self.boundary[d]!r}")

    @classmethod
    def cube(cls, n: int, lower: float = 0.0, upper: float = 1.0, boundary: str = PERIODIC):
        return cls((n, n, n), (lower,) * 3, (upper,) * 3, (boundary,) * 3)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / np.array(self.shape)

    @property
    def h_min(self) -> float:
        active = [self.spacing[d] for d in range(3) if self.shape[d] > 1]
        return float(min(active)) if active else float(self.spacing.min())

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def npoints(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, d: int) -> np.ndarray:
        h = (self.upper[d] - self.lower[d]) / self.shape[d]
        return self.lower[d] + (np.arange(self.shape[d]) + 0.5) * h

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij")

    def interior_mask(self, width: int = 2) -> np.ndarray:
        """All points on periodic axes; drops ``width`` layers on extrapolate axes."""
        mask = np.ones(self.shape, dtype=bool)
        for d in range(3):
            if self.boundary[d] == EXTRAPOLATE and self.shape[d] > 2 * width:
                sl = [slice(None)] * 3
                sl[d] = slice(0, width)
                mask[tuple(sl)] = False
                sl[d] = slice(self.shape[d] - width, None)
                mask[tuple(sl)] = False
        return mask


# --------------------------------------------------------------------------
# parameter records

@dataclass(frozen=True)
class CleaningParams:
    a_c: float = 0.0
    a_d: float = 0.0
    eps_c: float = 0.0
    eps_d: float = 0.0

    def __post_init__(self):
        for name in ("a_c", "a_d", "eps_c", "eps_d"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"cleaning parameter {name} must be nonnegative")


GLM_FAMILIES = ("A", "B", "D", "P")
SLICINGS = ("harmonic", "one_plus_log")


@dataclass(frozen=True)
class CCZ4Params:
    """Gauge, damping and cleaning constants of the augmented FO-CCZ4 system.

    ``f = 0.75`` and ``mu = 0.2`` are conventional gamma-driver values; they
    only matter when ``s = 1``.
    """

    slicing: str = "harmonic"
    s: int = 0
    f: float = 0.75
    mu: float = 0.2
    eta: float = 0.0
    c: float = 0.0
    e: float = 1.0
    kappa1: float = 0.0
    kappa2: float = 0.0
    kappa3: float = 0.0
    glm_enabled: bool = True
    cleaning: dict = field(default_factory=lambda: {k: CleaningParams() for k in GLM_FAMILIES})

    def __post_init__(self):
        if self.slicing not in SLICINGS:
            raise ConfigurationError(f"unknown slicing {self.slicing!r}")
        if self.s not in (0, 1):
            raise ConfigurationError("shift toggle s must be 0 or 1")
        if self.e < 0:
            raise ConfigurationError("cleaning speed e must be nonnegative")
        cl = dict(self.cleaning)
        for fam in GLM_FAMILIES:
            cl.setdefault(fam, CleaningParams())
        unknown = set(cl) - set(GLM_FAMILIES)
        if unknown:
            raise ConfigurationError(f"unknown cleaning families {sorted(unknown)}")
        object.__setattr__(self, "cleaning", cl)

    @classmethod
    def uniform_cleaning(cls, a_c: float, a_d: float, eps_c: float, eps_d: float, **kw):
        rec = CleaningParams(a_c, a_d, eps_c, eps_d)
        return cls(cleaning={fam: rec for fam in GLM_FAMILIES}, **kw)

    def with_glm(self, enabled: bool) -> "CCZ4Params":
        return replace(self, glm_enabled=bool(enabled))

    def effective_cleaning(self, fam: str) -> CleaningParams:
        return self.cleaning[fam] if self.glm_enabled else CleaningParams()

    def to_array(self) -> np.ndarray:
        """Flat float64 record consumed by the compiled kernels (see PARAM_* indices)."""
        out = np.zeros(N_PARAMS)
        out[P_SLICING] = SLICINGS.index(self.slicing)
        out[P_S] = self.s
        out[P_F] = self.f
        out[P_MU] = self.mu
        out[P_ETA] = self.eta
        out[P_C] = self.c
        out[P_E] = self.e
        out[P_K1] = self.kappa1
        out[P_K2] = self.kappa2
        out[P_K3] = self.kappa3
        out[P_GLM] = 1.0 if self.glm_enabled else 0.0
        for n, fam in enumerate(GLM_FAMILIES):
            rec = self.effective_cleaning(fam)
            out[P_CLEAN + 4 * n: P_CLEAN + 4 * n + 4] = (rec.a_c, rec.a_d, rec.eps_c, rec.eps_d)
        return out


(P_SLICING, P_S, P_F, P_MU, P_ETA, P_C, P_E, P_K1, P_K2, P_K3, P_GLM) = range(11)
P_CLEAN = 11  # then (a_c, a_d, eps_c, eps_d) for A, B, D, P
N_PARAMS = P_CLEAN + 16


@dataclass(frozen=True)
class GLMParams:
    """Induction baseline: light speed plus divergence-cleaning speed/damping."""

    c: float = 1.0
    a_d: float = 1.0
    eps_d: float = 0.0

    def __post_init__(self):
        if self.c < 0 or self.a_d < 0 or self.eps_d < 0:
            raise ConfigurationError("induction parameters must be nonnegative")


TOY_SOURCES = ("none", "linear_relaxation", "custom")


@dataclass(frozen=True)
class ToyParams:
    """Toy involution system: stiffness ``c0`` and cleaning speeds/damping.

    ``source`` applies to the non-homogeneous variant only. For
    ``linear_relaxation`` the source is ``-J / tau_relax``; for ``custom``,
    ``source_fn(x, y, z, t)`` must return ``(S, dS)`` with shapes ``(3, ...)``
    and ``(3, 3, ...)`` where ``dS[d, k] = d_d S_k``.
    """

    c0: float = 1.0
    a_c: float = 0.0
    a_d: float = 0.0
    a_b: float = 0.0
    eps_c: float = 0.0
    eps_d: float = 0.0
    eps_b: float = 0.0
    source: str = "none"
    tau_relax: float = 1.0
    source_fn: Optional[Callable] = None

    def __post_init__(self):
        for name in ("a_c", "a_d", "a_b", "eps_c", "eps_d", "eps_b"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be nonnegative")
        if self.source not in TOY_SOURCES:
            raise ConfigurationError(f"unknown toy source {self.source!r}")
        if self.source == "linear_relaxation" and not self.tau_relax > 0:
            raise ConfigurationError("relaxation time must be positive")
        if self.source == "custom" and self.source_fn is None:
            raise ConfigurationError("custom source needs source_fn")

    def without_cleaning(self) -> "ToyParams":
        return replace(self, a_c=0.0, a_d=0.0, a_b=0.0, eps_c=0.0, eps_d=0.0, eps_b=0.0)


# --------------------------------------------------------------------------
# layouts

def _foccz4_names() -> list[str]:
    names = ["ln_alpha"] + [f"beta{i + 1}" for i in range(3)]
    names += [f"gt{s}" for s in SYM_LABELS]
    names += ["ln_phi", "K0"]
    names += [f"At{s}" for s in SYM_LABELS]
    names += ["K", "Theta"] + [f"Ghat{i + 1}" for i in range(3)] + [f"b{i + 1}" for i in range(3)]
    names += [f"A{k + 1}" for k in range(3)] + [f"psiA{k + 1}" for k in range(3)] + ["phiA"]
    names += [f"B{k + 1}{i + 1}" for k in range(3) for i in range(3)]
    names += [f"psiB{k + 1}{i + 1}" for k in range(3) for i in range(3)]
    names += [f"phiB{i + 1}" for i in range(3)]
    names += [f"D{k + 1}{s}" for k in range(3) for s in SYM_LABELS]
    names += [f"psiD{k + 1}{s}" for k in range(3) for s in SYM_LABELS]
    names += [f"phiD{s}" for s in SYM_LABELS]
    names += [f"P{k + 1}" for k in range(3)] + [f"psiP{k + 1}" for k in range(3)] + ["phiP"]
    return names


FOCCZ4_NAMES = tuple(_foccz4_names())

# group -> (start, length); one entry per symbol of the state vector
FOCCZ4_GROUPS = {}
_offset = 0
for _group, _len in (("ln_alpha", 1), ("beta", 3), ("gt", 6), ("ln_phi", 1), ("K0", 1),
                     ("At", 6), ("K", 1), ("Theta", 1), ("Ghat", 3), ("b", 3),
                     ("A", 3), ("psiA", 3), ("phiA", 1), ("B", 9), ("psiB", 9), ("phiB", 3),
                     ("D", 18), ("psiD", 18), ("phiD", 6), ("P", 3), ("psiP", 3), ("phiP", 1)):
    FOCCZ4_GROUPS[_group] = (_offset, _len)
    _offset += _len
assert _offset == 103 == len(FOCCZ4_NAMES)
del _offset, _group, _len

CLEANING_GROUPS = ("psiA", "phiA", "psiB", "phiB", "psiD", "phiD", "psiP", "phiP")
CLEANING_INDICES = np.concatenate(
    [np.arange(FOCCZ4_GROUPS[g][0], sum(FOCCZ4_GROUPS[g])) for g in CLEANING_GROUPS])
TAU_INDEX = 103  # extra advected matter component in the rotating-masses scenario

TOY_HOMOGENEOUS_NAMES = ("rho", "rhov1", "rhov2", "rhov3", "J1", "J2", "J3",
                         "psi1", "psi2", "psi3", "phi")
TOY_NONHOMOGENEOUS_NAMES = TOY_HOMOGENEOUS_NAMES + ("Bv1", "Bv2", "Bv3", "chi")
INDUCTION_NAMES = ("E1", "E2", "E3", "B1", "B2", "B3", "phi")

SYSTEM_KINDS = ("toy_homogeneous", "toy_nonhomogeneous", "induction_glm", "foccz4")

_NAMES = {
    "foccz4": FOCCZ4_NAMES,
    "toy_homogeneous": TOY_HOMOGENEOUS_NAMES,
    "toy_nonhomogeneous": TOY_NONHOMOGENEOUS_NAMES,
    "induction_glm": INDUCTION_NAMES,
}


def component_names(kind: str, with_tau: bool = False) -> tuple[str, ...]:
    if kind not in _NAMES:
        raise ConfigurationError(f"unknown system kind {kind!r}; expected one of {SYSTEM_KINDS}")
    names = _NAMES[kind]
    if with_tau:
        if kind != "foccz4":
            raise ConfigurationError("only FO-CCZ4 carries an advected tau component")
        names = names + ("tau",)
    return tuple(names)


def layout_for(kind: str, params=None, with_tau: bool = False):
    """Return the :class:`~glmcurl.systems.SystemDescriptor` for ``kind``."""
    from .systems import make_system

    return make_system(kind, params, with_tau=with_tau)


# --------------------------------------------------------------------------
# snapshots

@dataclass
class FieldSnapshot:
    """All evolved variables of one system on one grid at one time.

    ``data`` has shape ``(ncomp, nx, ny, nz)``; the integrator is its only
    writer.
    """

    layout: object
    grid: GridSpec
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        expected = (self.layout.nvar,) + tuple(self.grid.shape)
        if self.data.shape != expected:
            raise ConfigurationError(
                f"snapshot data shape {self.data.shape} does not match {expected}")

    def copy(self) -> "FieldSnapshot":
        return FieldSnapshot(self.layout, self.grid, self.data.copy(), self.time)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[self.layout.index(name)]

    def check_finite(self) -> None:
        bad = ~np.isfinite(self.data)
        if bad.any():
            c, i, j, k = np.argwhere(bad)[0]
            raise StateError(
                f"non-finite value in component {self.layout.names[c]!r} at point "
                f"({i}, {j}, {k}), t = {self.time}")
