"""Method-of-lines time integration: classical RK4 over the stencil RHS.

The full right-hand side of one stage is the system's spatial operator plus
Kreiss-Oliger dissipation. Extrapolate boundaries are handled by one-sided
stencils, so there are no ghost layers to refill between stages.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numba import njit

from .constraints import ConstraintReport, monitor
from .state import FOCCZ4_GROUPS, SYM, ConfigurationError, FieldSnapshot, GridSpec, StateError
from .stencils import GridStencils

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6
SIGMA_KO = 0.05
# Kreiss-Oliger dissipation needs a bounded step even where nothing propagates
SPEED_FLOOR = 1.0


@njit(cache=True)
def _combine(y, k, acc, stage, a_acc, a_stage, first, last):
    # acc (+)= a_acc k and stage = y + a_stage k in a single sweep
    for i in range(y.size):
        ki = k[i]
        if first:
            acc[i] = ki * a_acc + y[i]
        else:
            acc[i] += ki * a_acc
        if not last:
            stage[i] = ki * a_stage + y[i]


def rk4_update(y, t: float, dt: float, f: Callable, acc=None, stage=None, k=None):
    """One classical RK4 step of ``dy/dt = f(y, t, out)``; returns the new state.

    ``acc``, ``stage`` and ``k`` are optional contiguous scratch arrays shaped
    like ``y``.
    """
    y = np.ascontiguousarray(y, dtype=float)
    acc = np.empty_like(y) if acc is None else acc
    stage = np.empty_like(y) if stage is None else stage
    k = np.empty_like(y) if k is None else k
    flat = y.reshape(-1), k.reshape(-1), acc.reshape(-1), stage.reshape(-1)
    f(y, t, k)
    _combine(*flat, dt / 6.0, 0.5 * dt, True, False)
    for n, (c_now, c_acc, c_next) in enumerate(((0.5, 1.0 / 3.0, 0.5), (0.5, 1.0 / 3.0, 1.0),
                                                 (1.0, 1.0 / 6.0, 0.0))):
        f(stage, t + c_now * dt, k)
        _combine(*flat, c_acc * dt, c_next * dt, False, n == 2)
    return acc


def project_constraints(q: np.ndarray) -> None:
    """Rescale gt to unit determinant and remove the gt-trace of At, in place."""
    g0 = FOCCZ4_GROUPS["gt"][0]
    a0 = FOCCZ4_GROUPS["At"][0]
    g = q[g0:g0 + 6][SYM]
    At = q[a0:a0 + 6][SYM]
    det = np.linalg.det(np.moveaxis(g, (0, 1), (-2, -1)))
    if not np.all(det > 0):
        raise StateError("projection needs a positive conformal determinant")
    q[g0:g0 + 6] *= det ** (-1.0 / 3.0)
    g = q[g0:g0 + 6][SYM]
    gu = np.moveaxis(np.linalg.inv(np.moveaxis(g, (0, 1), (-2, -1))), (-2, -1), (0, 1))
    tr = np.einsum("ij...,ij...->...", gu, At)
    q[a0:a0 + 6] -= q[g0:g0 + 6] * (tr / 3.0)


class Integrator:
    """RK4 driver for one system on one grid, with preallocated stage buffers."""

    def __init__(self, system, grid: GridSpec, sigma_ko: float = SIGMA_KO, projection: bool = False,
                 matter=None, velocity=None):
        if projection and system.kind != "foccz4":
            raise ConfigurationError("algebraic projection applies to FO-CCZ4 only")
        self.system = system
        self.grid = grid
        self.sigma_ko = float(sigma_ko)
        self.projection = projection
        self.stencils = GridStencils(grid)
        self.evaluator = system.evaluator(grid, self.stencils)
        self.matter = matter
        if system.kind == "foccz4":
            self.evaluator.set_matter(matter, velocity)
        shape = (system.nvar,) + tuple(grid.shape)
        self._acc = np.empty(shape)
        self._stage = np.empty(shape)
        self._k = np.empty(shape)

    def rhs(self, q, t, out):
        self.evaluator.rhs(q, t, out)
        self.stencils.add_dissipation(q, out, self.sigma_ko)
        return out

    def max_speed(self, q) -> float:
        return self.evaluator.max_speed(q)

    def stable_dt(self, q, cfl: float) -> float:
        v = self.max_speed(q)
        if not math.isfinite(v) or v < 0:
            raise StateError(f"invalid signal speed {v!r}")
        return cfl * self.grid.h_min / max(v, SPEED_FLOOR)

    def step(self, q, t: float, dt: float) -> np.ndarray:
        """Advance ``q`` in place by ``dt``; raises :class:`StateError` on NaN."""
        new = rk4_update(q, t, dt, self.rhs, self._acc, self._stage, self._k)
        if self.projection:
            project_constraints(new)
        if not np.all(np.isfinite(new)):
            c, i, j, k = np.argwhere(~np.isfinite(new))[0]
            raise StateError(f"non-finite value in {self.system.names[c]!r} at grid point "
                             f"({i}, {j}, {k}) after step to t = {t + dt:.6g}")
        q[...] = new
        return q

    def report(self, q, t: float) -> ConstraintReport:
        return monitor(self.system, self.grid, q, t, self.evaluator.gradient(q), self.matter)


def rk4_step(snapshot: FieldSnapshot, dt: float, system, matter_provider=None,
             sigma_ko: float = SIGMA_KO) -> FieldSnapshot:
    """Return a new snapshot advanced by one RK4 step.

    ``matter_provider`` is None or a ``(matter, velocity)`` pair of grid arrays.
    """
    matter, velocity = matter_provider if matter_provider is not None else (None, None)
    integ = Integrator(system, snapshot.grid, sigma_ko, matter=matter, velocity=velocity)
    out = snapshot.copy()
    integ.step(out.data, snapshot.time, dt)
    out.time = snapshot.time + dt
    return out


@dataclass
class TimeController:
    """CFL-limited stepping that lands exactly on output times."""

    t_end: float
    cfl: float = 0.25
    dt_fixed: Optional[float] = None
    output_every: Optional[float] = None
    snapshot_every: Optional[float] = None

    def __post_init__(self):
        if not self.t_end >= 0:
            raise ConfigurationError("t_end must be nonnegative")
        if not self.cfl > 0:
            raise ConfigurationError("CFL number must be positive")
        if self.dt_fixed is not None and not self.dt_fixed > 0:
            raise ConfigurationError("fixed dt must be positive")
        for name in ("output_every", "snapshot_every"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigurationError(f"{name} must be positive")

    def next_event(self, t: float, counters: dict) -> float:
        times = [self.t_end]
        for key in ("output_every", "snapshot_every"):
            every = getattr(self, key)
            if every:
                times.append(min(self.t_end, (counters[key] + 1) * every))
        return min(times)


@dataclass
class RunResult:
    snapshot: FieldSnapshot
    reports: list = field(default_factory=list)
    diverged: bool = False
    message: str = ""
    steps: int = 0


def evolve(snapshot: FieldSnapshot, system, controller: TimeController, *, sigma_ko: float = SIGMA_KO,
           projection: bool = False, matter=None, velocity=None,
           divergence_limit: float = DIVERGENCE_LIMIT,
           on_report: Callable | None = None, on_snapshot: Callable | None = None) -> RunResult:
    """Advance ``snapshot`` to ``controller.t_end``.

    Constraint reports are taken at t = 0 and every ``output_every``; a
    report is also taken at the final time. The run stops early, flagged
    diverged, if any field exceeds ``divergence_limit`` in magnitude or an
    evaluation fails.
    """
    integ = Integrator(system, snapshot.grid, sigma_ko, projection, matter, velocity)
    snap = snapshot.copy()
    q = snap.data
    t = snap.time
    counters = {"output_every": 0, "snapshot_every": 0}
    result = RunResult(snap)

    def emit(t_now):
        rep = integ.report(q, t_now)
        result.reports.append(rep)
        if on_report:
            on_report(rep)

    emit(t)
    if on_snapshot:
        on_snapshot(t, q)
    eps = 1e-12 * max(1.0, controller.t_end)
    while t < controller.t_end - eps:
        target = controller.next_event(t, counters)
        remaining = target - t
        try:
            dt_max = controller.dt_fixed or integ.stable_dt(q, controller.cfl)
            dt = remaining / math.ceil(remaining / dt_max - 1e-9)
            integ.step(q, t, dt)
        except StateError as exc:
            result.diverged, result.message = True, str(exc)
            break
        result.steps += 1
        t = target if abs(target - (t + dt)) <= eps else t + dt
        snap.time = t
        peak = float(np.max(np.abs(q)))
        if peak > divergence_limit:
            result.diverged = True
            result.message = f"field magnitude {peak:.3e} exceeds {divergence_limit:g} at t = {t:.6g}"
            break
        if t >= target - eps:
            for key in ("output_every", "snapshot_every"):
                every = getattr(controller, key)
                if every and t >= (counters[key] + 1) * every - eps:
                    counters[key] += 1
                    if key == "output_every":
                        emit(t)
                    elif on_snapshot:
                        on_snapshot(t, q)
    if result.diverged:
        log.warning("run diverged: %s", result.message)
        try:
            emit(t)
        except (StateError, FloatingPointError, ValueError):
            pass
    elif not result.reports or result.reports[-1].time != t:
        emit(t)
    return result
