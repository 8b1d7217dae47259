"""Finite-difference stencil tables and compiled grid sweeps.

Every axis is described by an ``(n, width)`` table of neighbour indices and
coefficients, so periodic wrapping and one-sided closures share one kernel.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

from .state import EXTRAPOLATE, PERIODIC, ConfigurationError, GridSpec

FD4_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
KO_COEFFS = np.array([1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0]) / 64.0
MIN_POINTS = 5


def fd_weights(offsets, deriv: int = 1) -> np.ndarray:
    """Weights for the ``deriv``-th derivative on unit-spaced ``offsets``."""
    x = np.asarray(offsets, dtype=float)
    n = len(x)
    vander = np.vander(x, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    return np.linalg.solve(vander, rhs)


def derivative_table(n: int, boundary: str):
    """Neighbour indices and unscaled weights of the 4th-order first derivative."""
    idx = np.zeros((n, 5), dtype=np.int64)
    coef = np.zeros((n, 5))
    if n == 1:
        return idx, coef
    if n < MIN_POINTS:
        raise ConfigurationError(
            f"axis with {n} points is too small for the 5-point stencil (need >= {MIN_POINTS} or 1)")
    offs = np.arange(-2, 3)
    for i in range(n):
        if boundary == PERIODIC:
            idx[i] = (i + offs) % n
            coef[i] = FD4_CENTRAL
        elif boundary == EXTRAPOLATE:
            start = min(max(i - 2, 0), n - 5)
            pts = np.arange(start, start + 5)
            idx[i] = pts
            coef[i] = FD4_CENTRAL if start == i - 2 else fd_weights(pts - i, 1)
        else:
            raise ConfigurationError(f"unknown boundary {boundary!r}")
    return idx, coef


def dissipation_table(n: int, boundary: str):
    """7-point Kreiss-Oliger table; zero within 3 layers of an extrapolate edge."""
    idx = np.zeros((n, 7), dtype=np.int64)
    coef = np.zeros((n, 7))
    if n < 7:
        return idx, coef
    offs = np.arange(-3, 4)
    for i in range(n):
        if boundary == PERIODIC:
            idx[i] = (i + offs) % n
            coef[i] = KO_COEFFS
        elif 3 <= i < n - 3:
            idx[i] = i + offs
            coef[i] = KO_COEFFS
    return idx, coef


class GridStencils:
    """Stencil tables for one grid, scaled by the grid spacing."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        h = grid.spacing
        tabs = [derivative_table(grid.shape[d], grid.boundary[d]) for d in range(3)]
        self.didx = tuple(t[0] for t in tabs)
        self.dcoef = tuple(t[1] / h[d] for d, t in enumerate(tabs))
        kos = [dissipation_table(grid.shape[d], grid.boundary[d]) for d in range(3)]
        self.kidx = tuple(t[0] for t in kos)
        self.kcoef = tuple(t[1] / h[d] for d, t in enumerate(kos))
        self.yperiodic = grid.boundary[1] == PERIODIC and grid.shape[1] >= 7
        self.zperiodic = grid.boundary[2] == PERIODIC

    def _args(self, ko: bool):
        idx, coef = (self.kidx, self.kcoef) if ko else (self.didx, self.dcoef)
        return idx[0], idx[1], idx[2], coef[0], coef[1], coef[2], self.yperiodic, self.zperiodic

    def gradient(self, q: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Gradient of every component: ``(ncomp, nx, ny, nz) -> (3, ncomp, nx, ny, nz)``."""
        q = np.ascontiguousarray(q, dtype=np.float64)
        squeeze = q.ndim == 3
        if squeeze:
            q = q[None]
        if out is None:
            out = np.empty((3,) + q.shape)
        nv, nx, ny, nz = q.shape
        _gradient_kernel(q.reshape(nv, nx, ny * nz), out.reshape(1, 3, nv, nx * ny * nz), ny, nz,
                         *self._args(False))
        return out[:, 0] if squeeze else out

    def gradient_blocked(self, q: np.ndarray, out: np.ndarray) -> np.ndarray:
        """Gradient written as ``out[b, d, c, p]`` for flat point ``b * block + p``."""
        nv, nx, ny, nz = q.shape
        _gradient_kernel(q.reshape(nv, nx, ny * nz), out, ny, nz, *self._args(False))
        return out

    def add_dissipation(self, q: np.ndarray, rhs: np.ndarray, sigma: float) -> None:
        """``rhs += sigma * KO(q)``; both arrays are C-contiguous ``(ncomp, nx, ny, nz)``."""
        if sigma == 0.0:
            return
        if not (rhs.flags.c_contiguous and q.flags.c_contiguous):
            raise ValueError("dissipation needs C-contiguous arrays")
        nv, nx, ny, nz = q.shape
        _dissipation_kernel(q.reshape(nv, nx, ny * nz), rhs.reshape(nv, nx, ny * nz), sigma, ny, nz,
                            *self._args(True))


@njit(cache=True)
def _store(out, d, c, i, o):
    """Write plane ``i`` of ``o`` into ``out[b, d, c, p]`` (flat point ``b * block + p``)."""
    npl = o.shape[0]
    block = out.shape[3]
    m = 0
    while m < npl:
        flat = i * npl + m
        b = flat // block
        p0 = flat - b * block
        run = min(block - p0, npl - m)
        dst = out[b, d, c, p0:p0 + run]
        src = o[m:m + run]
        for t in range(run):
            dst[t] = src[t]
        m += run


@njit(parallel=True, cache=True)
def _grad_x(q, out, ix, cx):
    nv, nx, npl = q.shape
    for job in prange(nv * nx):
        c = job // nx
        i = job % nx
        o = np.empty(npl)
        q0 = q[c, ix[i, 0]]
        q1 = q[c, ix[i, 1]]
        q2 = q[c, ix[i, 2]]
        q3 = q[c, ix[i, 3]]
        q4 = q[c, ix[i, 4]]
        w0, w1, w2, w3, w4 = cx[i, 0], cx[i, 1], cx[i, 2], cx[i, 3], cx[i, 4]
        for m in range(npl):
            o[m] = w0 * q0[m] + w1 * q1[m] + w2 * q2[m] + w3 * q3[m] + w4 * q4[m]
        _store(out, 0, c, i, o)


@njit(parallel=True, cache=True)
def _grad_y(q, out, ny, nz, iy, cy, yper):
    nv, nx, npl = q.shape
    w0, w1, w3, w4 = cy[2, 0], cy[2, 1], cy[2, 3], cy[2, 4]
    for job in prange(nv * nx):
        c = job // nx
        i = job % nx
        qp = q[c, i]
        o = np.empty(npl)
        pad = np.empty(npl + 4 * nz)
        if yper:
            pad[2 * nz:2 * nz + npl] = qp
            pad[:2 * nz] = qp[npl - 2 * nz:]
            pad[2 * nz + npl:] = qp[:2 * nz]
            j0, j1, off = 0, ny, 2 * nz
        else:
            pad[:npl] = qp
            j0, j1, off = 2, ny - 2, 0
        a = off + j0 * nz
        L = (j1 - j0) * nz
        v0 = pad[a - 2 * nz:a - 2 * nz + L]
        v1 = pad[a - nz:a - nz + L]
        v3 = pad[a + nz:a + nz + L]
        v4 = pad[a + 2 * nz:a + 2 * nz + L]
        oy = o[j0 * nz:j0 * nz + L]
        for m in range(L):
            oy[m] = w0 * v0[m] + w1 * v1[m] + w3 * v3[m] + w4 * v4[m]
        if not yper:
            for j in (0, 1, ny - 2, ny - 1):
                r0, r1, r2 = iy[j, 0] * nz, iy[j, 1] * nz, iy[j, 2] * nz
                r3, r4 = iy[j, 3] * nz, iy[j, 4] * nz
                u0, u1, u2, u3, u4 = cy[j, 0], cy[j, 1], cy[j, 2], cy[j, 3], cy[j, 4]
                base = j * nz
                for k in range(nz):
                    o[base + k] = (u0 * qp[r0 + k] + u1 * qp[r1 + k] + u2 * qp[r2 + k]
                                   + u3 * qp[r3 + k] + u4 * qp[r4 + k])
        _store(out, 1, c, i, o)


@njit(parallel=True, cache=True)
def _grad_z(q, out, ny, nz, iz, cz, zper):
    nv, nx, npl = q.shape
    w0, w1, w3, w4 = cz[2, 0], cz[2, 1], cz[2, 3], cz[2, 4]
    for job in prange(nv * nx):
        c = job // nx
        i = job % nx
        qp = q[c, i]
        o = np.empty(npl)
        buf = np.empty(nz + 4)
        for j in range(ny):
            base = j * nz
            for k in range(nz):
                buf[k + 2] = qp[base + k]
            if zper:
                for k in range(2):
                    buf[k] = qp[base + nz - 2 + k]
                    buf[nz + 2 + k] = qp[base + k]
                for k in range(nz):
                    o[base + k] = w0 * buf[k] + w1 * buf[k + 1] + w3 * buf[k + 3] + w4 * buf[k + 4]
            else:
                for k in range(2, nz - 2):
                    o[base + k] = w0 * buf[k] + w1 * buf[k + 1] + w3 * buf[k + 3] + w4 * buf[k + 4]
                for k in (0, 1, nz - 2, nz - 1):
                    o[base + k] = (cz[k, 0] * qp[base + iz[k, 0]] + cz[k, 1] * qp[base + iz[k, 1]]
                                   + cz[k, 2] * qp[base + iz[k, 2]] + cz[k, 3] * qp[base + iz[k, 3]]
                                   + cz[k, 4] * qp[base + iz[k, 4]])
        _store(out, 2, c, i, o)


@njit(parallel=True, cache=True)
def _zero_axis(out, d):
    nb, _, nv, block = out.shape
    for b in prange(nb):
        for c in range(nv):
            for p in range(block):
                out[b, d, c, p] = 0.0


def _gradient_kernel(q, out, ny, nz, ix, iy, iz, cx, cy, cz, yper, zper):
    """Gradient sweeps, one compiled pass per axis, into a blocked ``out``."""
    _grad_x(q, out, ix, cx)
    if ny == 1:
        _zero_axis(out, 1)
    else:
        _grad_y(q, out, ny, nz, iy, cy, yper)
    if nz == 1:
        _zero_axis(out, 2)
    else:
        _grad_z(q, out, ny, nz, iz, cz, zper)


@njit(parallel=True, cache=True)
def _ko_x(q, rhs, sigma, ix, cx):
    nv, nx, npl = q.shape
    for job in prange(nv * nx):
        c = job // nx
        i = job % nx
        if cx[i, 0] == 0.0:
            continue
        r = rhs[c, i]
        q0 = q[c, ix[i, 0]]
        q1 = q[c, ix[i, 1]]
        q2 = q[c, ix[i, 2]]
        q3 = q[c, ix[i, 3]]
        q4 = q[c, ix[i, 4]]
        q5 = q[c, ix[i, 5]]
        q6 = q[c, ix[i, 6]]
        w0, w1, w2, w3 = sigma * cx[i, 0], sigma * cx[i, 1], sigma * cx[i, 2], sigma * cx[i, 3]
        for m in range(npl):
            r[m] += w0 * (q0[m] + q6[m]) + w1 * (q1[m] + q5[m]) + w2 * (q2[m] + q4[m]) + w3 * q3[m]


@njit(parallel=True, cache=True)
def _ko_y(q, rhs, sigma, ny, nz, cy, yper):
    nv, nx, npl = q.shape
    w0, w1, w2, w3 = sigma * cy[3, 0], sigma * cy[3, 1], sigma * cy[3, 2], sigma * cy[3, 3]
    for job in prange(nv * nx):
        c = job // nx
        i = job % nx
        qp = q[c, i]
        pad = np.empty(npl + 6 * nz)
        if yper:
            pad[3 * nz:3 * nz + npl] = qp
            pad[:3 * nz] = qp[npl - 3 * nz:]
            pad[3 * nz + npl:] = qp[:3 * nz]
            j0, j1, off = 0, ny, 3 * nz
        else:
            pad[:npl] = qp
            j0, j1, off = 3, ny - 3, 0
        a = off + j0 * nz
        L = (j1 - j0) * nz
        v0 = pad[a - 3 * nz:a - 3 * nz + L]
        v1 = pad[a - 2 * nz:a - 2 * nz + L]
        v2 = pad[a - nz:a - nz + L]
        v3 = pad[a:a + L]
        v4 = pad[a + nz:a + nz + L]
        v5 = pad[a + 2 * nz:a + 2 * nz + L]
        v6 = pad[a + 3 * nz:a + 3 * nz + L]
        r = rhs[c, i, j0 * nz:j0 * nz + L]
        for m in range(L):
            r[m] += w0 * (v0[m] + v6[m]) + w1 * (v1[m] + v5[m]) + w2 * (v2[m] + v4[m]) + w3 * v3[m]


@njit(parallel=True, cache=True)
def _ko_z(q, rhs, sigma, ny, nz, cz, zper):
    nv, nx, npl = q.shape
    w0, w1, w2, w3 = sigma * cz[3, 0], sigma * cz[3, 1], sigma * cz[3, 2], sigma * cz[3, 3]
    for job in prange(nv * nx):
        c = job // nx
        i = job % nx
        qp = q[c, i]
        r = rhs[c, i]
        buf = np.empty(nz + 6)
        for j in range(ny):
            base = j * nz
            for k in range(nz):
                buf[k + 3] = qp[base + k]
            if zper:
                for k in range(3):
                    buf[k] = qp[base + nz - 3 + k]
                    buf[nz + 3 + k] = qp[base + k]
                for k in range(nz):
                    r[base + k] += (w0 * (buf[k] + buf[k + 6]) + w1 * (buf[k + 1] + buf[k + 5])
                                    + w2 * (buf[k + 2] + buf[k + 4]) + w3 * buf[k + 3])
            else:
                for k in range(3, nz - 3):
                    r[base + k] += (w0 * (buf[k] + buf[k + 6]) + w1 * (buf[k + 1] + buf[k + 5])
                                    + w2 * (buf[k + 2] + buf[k + 4]) + w3 * buf[k + 3])


def _dissipation_kernel(q, rhs, sigma, ny, nz, ix, iy, iz, cx, cy, cz, yper, zper):
    """Kreiss-Oliger sweeps, one compiled pass per axis."""
    _ko_x(q, rhs, sigma, ix, cx)
    if ny >= 7:
        _ko_y(q, rhs, sigma, ny, nz, cy, yper)
    if nz >= 7:
        _ko_z(q, rhs, sigma, ny, nz, cz, zper)
