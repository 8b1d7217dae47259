"""Initial data, matter sources and the binary initial-data format."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .state import (FOCCZ4_GROUPS, SYM, TAU_INDEX, CCZ4Params, ConfigurationError, FieldSnapshot,
                    GLMParams, GridSpec, StateError, ToyParams)
from .systems import make_system
from .systems import induction as _induction
from .systems import toy as _toy

SCENARIOS = ("robust_stability", "toy_curl_free", "toy_pure_curl_error", "induction_wave",
             "rotating_masses", "external_file")

I_LNA = FOCCZ4_GROUPS["ln_alpha"][0]
I_G = FOCCZ4_GROUPS["gt"][0]
I_LNPHI = FOCCZ4_GROUPS["ln_phi"][0]
_DIAG = (0, 3, 5)


# --------------------------------------------------------------------------
# FO-CCZ4 data

def minkowski_init(grid: GridSpec, params: CCZ4Params | None = None, with_tau: bool = False) -> FieldSnapshot:
    """Flat space: alpha = phi = 1, gt = identity, everything else zero."""
    system = make_system("foccz4", params, with_tau=with_tau)
    data = np.zeros((system.nvar,) + grid.shape)
    for d in _DIAG:
        data[I_G + d] = 1.0
    return FieldSnapshot(system, grid, data)


def perturb(snapshot: FieldSnapshot, seed: int, amplitude: float) -> FieldSnapshot:
    """Add uniform(-amplitude, amplitude) noise to every component.

    Each component draws from its own Philox stream keyed by ``(seed,
    component)``; values are taken in x-fastest order, so the field depends on
    neither the worker count nor how the caller traverses the grid.
    """
    if amplitude < 0:
        raise ConfigurationError("perturbation amplitude must be nonnegative")
    out = snapshot.copy()
    if amplitude == 0:
        return out
    n = snapshot.grid.npoints
    nx, ny, nz = snapshot.grid.shape
    for c in range(snapshot.data.shape[0]):
        gen = np.random.Generator(np.random.Philox(key=[int(seed), c]))
        noise = gen.uniform(-amplitude, amplitude, n).reshape(nz, ny, nx).transpose(2, 1, 0)
        out.data[c] += noise
    return out


def robust_stability_init(grid: GridSpec, params: CCZ4Params, seed: int, amplitude: float) -> FieldSnapshot:
    """Randomly perturbed Minkowski data."""
    return perturb(minkowski_init(grid, params), seed, amplitude)


@dataclass(frozen=True)
class RotatingMassesParams:
    A_L: float = 5e-4
    A_R: float = 5e-4
    sigma_L: float = 1.0
    sigma_R: float = 1.0
    x_L: tuple = (-2.0, 0.0, 0.0)
    x_R: tuple = (2.0, 0.0, 0.0)
    omega: tuple = (0.0, 0.0, 0.2)
    r_cut: float = 5.0

    def __post_init__(self):
        if not (self.sigma_L > 0 and self.sigma_R > 0):
            raise ConfigurationError("Gaussian widths must be positive")
        if not self.r_cut > 0:
            raise ConfigurationError("cutoff radius must be positive")
        for name in ("x_L", "x_R", "omega"):
            if len(getattr(self, name)) != 3:
                raise ConfigurationError(f"{name} needs three components")


def rotating_masses_tau(x, y, z, p: RotatingMassesParams = RotatingMassesParams()):
    """Double-Gaussian energy density."""
    def blob(A, s, c):
        r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        return A * np.exp(-r2 / (2.0 * s * s))
    return blob(p.A_L, p.sigma_L, p.x_L) + blob(p.A_R, p.sigma_R, p.x_R)


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def rotating_masses_velocity(x, y, z, p: RotatingMassesParams, h_smooth: float):
    """Rigid rotation Omega x r, switched off smoothly over ``h_smooth`` inside ``r_cut``."""
    r = np.sqrt(x * x + y * y + z * z)
    w = _smoothstep((p.r_cut - r) / h_smooth) if h_smooth > 0 else (r < p.r_cut).astype(float)
    o = p.omega
    return np.stack([(o[1] * z - o[2] * y) * w, (o[2] * x - o[0] * z) * w, (o[0] * y - o[1] * x) * w])


def rotating_masses_matter(grid: GridSpec, p: RotatingMassesParams = RotatingMassesParams(),
                           smooth_cells: float = 2.0):
    """``(matter, velocity)`` arrays for the anti-Cowling rotating-masses run.

    ``matter`` holds (tau, S_i, S_ij) with zero momentum and stress; its tau
    slot is overwritten by the evolved tau component at every stage.
    """
    x, y, z = grid.coordinates()
    matter = np.zeros((10,) + grid.shape)
    matter[0] = rotating_masses_tau(x, y, z, p)
    velocity = rotating_masses_velocity(x, y, z, p, smooth_cells * grid.h_min)
    return matter, velocity


def rotating_masses_init(grid: GridSpec, params: CCZ4Params,
                         p: RotatingMassesParams = RotatingMassesParams(), smooth_cells: float = 2.0):
    """Minkowski spacetime with tau appended; returns ``(snapshot, matter, velocity)``."""
    snap = minkowski_init(grid, params, with_tau=True)
    matter, velocity = rotating_masses_matter(grid, p, smooth_cells)
    snap.data[TAU_INDEX] = matter[0]
    return snap, matter, velocity


def advance_tau(tau, velocity, grid: GridSpec, dt: float, sigma_ko: float = 0.05):
    """Advect tau alone by one RK4 step with ``d_t tau + v . grad tau = 0``."""
    from .discretization import rk4_update
    from .stencils import GridStencils

    st = GridStencils(grid)
    q = np.asarray(tau, dtype=float)[None]

    def f(y, t, out):
        d = st.gradient(y)
        out[0] = -(velocity[0] * d[0, 0] + velocity[1] * d[1, 0] + velocity[2] * d[2, 0])
        st.add_dissipation(y, out, sigma_ko)
        return out
    return rk4_update(q, 0.0, dt, f)[0]


# --------------------------------------------------------------------------
# toy and induction data

def toy_init(grid: GridSpec, variant: str = "curl_free", params: ToyParams | None = None,
             amplitude: float = 1e-2, width: float | None = None, nonhomogeneous: bool = False) -> FieldSnapshot:
    """Toy-system initial data.

    ``curl_free``: rho = 1 + 0.1 sin(2 pi x/Lx), a small divergence-free flow
    and J = grad(cos(2 pi x/Lx) cos(2 pi y/Ly)).
    ``pure_curl_error``: a Gaussian vortex of J with amplitude ``amplitude``
    about the domain centre, everything else quiescent.
    """
    kind = "toy_nonhomogeneous" if nonhomogeneous else "toy_homogeneous"
    system = make_system(kind, params)
    x, y, z = grid.coordinates()
    L = np.array(grid.upper) - np.array(grid.lower)
    q = np.zeros((system.nvar,) + grid.shape)
    kx, ky, kz = 2 * np.pi / L
    if variant == "curl_free":
        rho = 1.0 + 0.1 * np.sin(kx * x)
        q[_toy.RHO] = rho
        # v = 0.05 (sin(ky y), sin(kz z), sin(kx x)) has zero divergence
        v = 0.05 * np.stack([np.sin(ky * y), np.sin(kz * z), np.sin(kx * x)])
        q[_toy.M:_toy.M + 3] = rho * v
        q[_toy.J] = -kx * np.sin(kx * x) * np.cos(ky * y)
        q[_toy.J + 1] = -ky * np.cos(kx * x) * np.sin(ky * y)
    elif variant == "pure_curl_error":
        c = 0.5 * (np.array(grid.lower) + np.array(grid.upper))
        s = width if width is not None else 0.1 * float(min(L[:2]))
        r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2
        if grid.shape[2] > 1:
            r2 = r2 + (z - c[2]) ** 2
        g = amplitude * np.exp(-r2 / (2 * s * s))
        q[_toy.RHO] = 1.0
        q[_toy.J] = -(y - c[1]) * g
        q[_toy.J + 1] = (x - c[0]) * g
    else:
        raise ConfigurationError(f"unknown toy variant {variant!r}")
    return FieldSnapshot(system, grid, q)


def induction_wave_init(grid: GridSpec, params: GLMParams | None = None, mode=(1, 0, 0),
                        amp_t: float = 1.0, amp_l: float = 0.0, t: float = 0.0) -> FieldSnapshot:
    """Plane wave with integer mode numbers ``mode`` on a periodic box."""
    params = params or GLMParams()
    system = make_system("induction_glm", params)
    L = np.array(grid.upper) - np.array(grid.lower)
    k = 2 * np.pi * np.asarray(mode, dtype=float) / L
    x, y, z = grid.coordinates()
    q = _induction.plane_wave(x, y, z, t, k, amp_t, amp_l, params)
    return FieldSnapshot(system, grid, q, t)


# --------------------------------------------------------------------------
# binary initial data
#
# header: 8-byte magic, then little-endian uint32 version, nx, ny, nz, ncomp
# body:   ncomp * nx * ny * nz little-endian float64, component-major, x fastest
# FO-CCZ4 files carry alpha and phi themselves, not their logarithms.

MAGIC = b"GLMCURL\0"
VERSION = 1
_HEADER = struct.Struct("<8s5I")


def _physical(q, system):
    out = np.array(q, copy=True)
    if system.kind == "foccz4":
        out[I_LNA] = np.exp(out[I_LNA])
        out[I_LNPHI] = np.exp(out[I_LNPHI])
    return out


def save_initial_data(path, snapshot: FieldSnapshot) -> None:
    q = _physical(snapshot.data, snapshot.layout)
    nx, ny, nz = snapshot.grid.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, nx, ny, nz, q.shape[0]))
        fh.write(np.ascontiguousarray(q.transpose(0, 3, 2, 1)).astype("<f8").tobytes())


def load_initial_data(path, system, grid: GridSpec) -> tuple[FieldSnapshot, float]:
    """Read a snapshot; returns ``(snapshot, det_drift)``.

    ``det_drift`` is max |det gt - 1| for FO-CCZ4 data (0 otherwise); a
    drift above 1e-3 is not an error but should be reported by the caller.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise StateError(f"{path}: file too short for header")
    magic, version, nx, ny, nz, ncomp = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise StateError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise StateError(f"{path}: unsupported version {version}")
    if (nx, ny, nz) != grid.shape:
        raise StateError(f"{path}: grid {(nx, ny, nz)} does not match configured {grid.shape}")
    if ncomp != system.nvar:
        raise StateError(f"{path}: {ncomp} components, {system.kind} needs {system.nvar}")
    nbytes = 8 * ncomp * nx * ny * nz
    body = raw[_HEADER.size:]
    if len(body) != nbytes:
        raise StateError(f"{path}: body has {len(body)} bytes, expected {nbytes}")
    q = np.frombuffer(body, dtype="<f8").reshape(ncomp, nz, ny, nx).transpose(0, 3, 2, 1).astype(float)
    bad = ~np.isfinite(q)
    if bad.any():
        c, i, j, k = np.argwhere(bad)[0]
        raise StateError(f"{path}: non-finite {system.names[c]!r} at ({i}, {j}, {k})")
    drift = 0.0
    if system.kind == "foccz4":
        for idx, label in ((I_LNA, "alpha"), (I_LNPHI, "phi")):
            if not np.all(q[idx] > 0):
                i, j, k = np.argwhere(q[idx] <= 0)[0]
                raise StateError(f"{path}: {label} must be positive, found {q[idx][i, j, k]} at ({i}, {j}, {k})")
            q[idx] = np.log(q[idx])
        g = np.moveaxis(q[I_G:I_G + 6][SYM], (0, 1), (-2, -1))
        det = np.linalg.det(g)
        if not np.all(det > 0):
            raise StateError(f"{path}: conformal metric is not positive definite")
        drift = float(np.max(np.abs(det - 1.0)))
    return FieldSnapshot(system, grid, q), drift
