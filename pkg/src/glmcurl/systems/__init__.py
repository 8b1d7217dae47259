"""Built-in systems and their grid evaluators.

A :class:`SystemDescriptor` bundles the layout of a system with pointwise
evaluators. ``descriptor.evaluator(grid)`` returns an object with

* ``rhs(q, t, out)``: spatial right-hand side (no dissipation) of the grid state,
* ``max_speed(q)``: grid maximum of the signal-speed bound,
* ``gradient(q)``: raw centred gradients ``(3, ncomp, nx, ny, nz)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..state import (FOCCZ4_GROUPS, SYSTEM_KINDS, CCZ4Params, ConfigurationError, GLMParams,
                     GridSpec, StateError, ToyParams, component_names)
from ..stencils import GridStencils
from . import foccz4, induction, toy

_GROUPS = {
    "toy_homogeneous": {"rho": (0, 1), "rhov": (1, 3), "J": (4, 3), "psi": (7, 3), "phi": (10, 1)},
    "induction_glm": {"E": (0, 3), "B": (3, 3), "phi": (6, 1)},
}
_GROUPS["toy_nonhomogeneous"] = dict(_GROUPS["toy_homogeneous"], Bv=(11, 3), chi=(14, 1))
_GROUPS["foccz4"] = dict(FOCCZ4_GROUPS)
_DEFAULT_PARAMS = {"toy_homogeneous": ToyParams, "toy_nonhomogeneous": ToyParams,
                   "induction_glm": GLMParams, "foccz4": CCZ4Params}


@dataclass(frozen=True)
class SystemDescriptor:
    """Layout, parameters and evaluators of one system."""

    kind: str
    names: tuple
    params: object
    point_rhs: Callable
    point_speed: Callable
    groups: dict = field(default_factory=dict)
    with_tau: bool = False

    @property
    def nvar(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"{self.kind} has no component {name!r}") from None

    def group(self, name: str) -> slice:
        start, length = self.groups[name]
        return slice(start, start + length)

    def evaluator(self, grid: GridSpec, stencils: GridStencils | None = None):
        stencils = stencils or GridStencils(grid)
        if self.kind == "foccz4":
            return FOCCZ4Evaluator(self, grid, stencils)
        return PointwiseEvaluator(self, grid, stencils)


def make_system(kind: str, params=None, with_tau: bool = False) -> SystemDescriptor:
    if kind not in SYSTEM_KINDS:
        raise ConfigurationError(f"unknown system kind {kind!r}; expected one of {SYSTEM_KINDS}")
    params = params if params is not None else _DEFAULT_PARAMS[kind]()
    if not isinstance(params, _DEFAULT_PARAMS[kind]):
        raise ConfigurationError(f"{kind} needs {_DEFAULT_PARAMS[kind].__name__}")
    names = component_names(kind, with_tau)
    groups = dict(_GROUPS[kind])
    if with_tau:
        groups["tau"] = (len(names) - 1, 1)
    if kind == "foccz4":
        def point_rhs(q, dq, matter=None, velocity=None):
            return foccz4.rhs_foccz4(q, dq, matter, params, velocity)

        def point_speed(q):
            return foccz4.max_signal_speed(q, params)
    elif kind == "induction_glm":
        def point_rhs(q, dq):
            return induction.rhs_induction_glm(q, dq, params)

        def point_speed(q):
            return float(np.max(induction.max_speed_induction(np.asarray(q)[:, None], params)))
    else:
        nonhom = kind == "toy_nonhomogeneous"

        def point_rhs(q, dq, coords=None, t=0.0):
            return toy.rhs_toy(q, dq, params, nonhom, coords, t)

        def point_speed(q):
            return float(np.max(toy.max_speed_toy(np.asarray(q)[:, None], params)))
    return SystemDescriptor(kind, names, params, point_rhs, point_speed, groups, with_tau)


class PointwiseEvaluator:
    """Grid driver for the small systems: gradients, then a vectorised pointwise RHS."""

    def __init__(self, system: SystemDescriptor, grid: GridSpec, stencils: GridStencils):
        self.system = system
        self.grid = grid
        self.stencils = stencils
        self.coords = grid.coordinates()

    def gradient(self, q):
        return self.stencils.gradient(q)

    def rhs(self, q, t, out):
        dq = self.gradient(q)
        sys = self.system
        if sys.kind == "induction_glm":
            out[...] = induction.rhs_induction_glm(q, dq, sys.params)
        else:
            out[...] = toy.rhs_toy(q, dq, sys.params, sys.kind == "toy_nonhomogeneous",
                                   self.coords, t)
        return out

    def max_speed(self, q) -> float:
        sys = self.system
        if sys.kind == "induction_glm":
            return max(sys.params.c, sys.params.a_d)
        return float(np.max(toy.max_speed_toy(q, sys.params)))


class FOCCZ4Evaluator:
    """Grid driver for FO-CCZ4 using the blocked compiled kernels.

    ``matter`` is a ``(10, nx, ny, nz)`` array of (tau, S_i, S_ij) or None for
    vacuum; with an advected tau component its value replaces ``matter[0]``.
    ``velocity`` ``(3, nx, ny, nz)`` advects tau.
    """

    def __init__(self, system: SystemDescriptor, grid: GridSpec, stencils: GridStencils):
        self.system = system
        self.grid = grid
        self.stencils = stencils
        n = grid.npoints
        self.params_array = system.params.to_array()
        # the padding tail of the last block stays zero
        self.dqb = np.zeros(foccz4.blocked_shape(system.nvar, n))
        self.status = np.zeros(n, dtype=np.int64)
        self.matter = np.zeros((foccz4.N_MATTER, 0))
        self.velocity = np.zeros((3, n)) if system.with_tau else np.zeros((3, 0))

    def set_matter(self, matter=None, velocity=None):
        n = self.grid.npoints
        self.matter = (np.zeros((foccz4.N_MATTER, 0)) if matter is None
                       else np.ascontiguousarray(np.reshape(matter, (foccz4.N_MATTER, n)), dtype=float))
        if velocity is not None:
            self.velocity = np.ascontiguousarray(np.reshape(velocity, (3, n)), dtype=float)

    def gradient(self, q):
        return self.stencils.gradient(q)

    def rhs(self, q, t, out):
        nv = q.shape[0]
        n = self.grid.npoints
        self.stencils.gradient_blocked(q, self.dqb)
        self.status[:] = 0
        foccz4._grid_rhs(q.reshape(nv, n), self.dqb, self.matter, self.velocity, self.params_array,
                         out.reshape(nv, n), self.status)
        if self.status.any():
            p = int(np.flatnonzero(self.status)[0])
            i, j, k = np.unravel_index(p, self.grid.shape)
            raise StateError(f"{foccz4.error_message(self.status[p])} at grid point ({i}, {j}, {k})")
        return out

    def max_speed(self, q) -> float:
        nv = q.shape[0]
        return foccz4.grid_max_speed(q.reshape(nv, -1), self.params_array)


__all__ = ["SystemDescriptor", "make_system", "FOCCZ4Evaluator", "PointwiseEvaluator"]
