"""Strang-split time stepping for i u_t - P_c u = lambda |x|^-b |u|^sigma u.

One step is: exact nonlinear phase rotation over dt/2, Crank-Nicolson for the
linear part over dt, then the nonlinear rotation again.  The nonlinear flow
keeps |u| pointwise and CN is unitary for the self-adjoint discrete P_c, so
mass is conserved to round-off.
"""
from __future__ import annotations

import logging
import statistics
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from . import functionals as fn
from .grid import RadialField
from .params import ParamSet
from .tridiag import SingularSystemError, TridiagonalSolver

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The implicit linear solve failed or missed its tolerance."""


class Status(str, Enum):
    RUNNING = "running"
    FINISHED = "finished"
    BLOWUP = "blowup_detected"
    BOUNDARY = "boundary_contaminated"


@dataclass
class SolverConfig:
    dt0: float = 1e-3
    t_end: float = 1.0
    dt_min: float = 1e-10
    cn_tol: float = 1e-12
    blowup_grad_factor: float = 1e3
    blowup_abs: float = 1e12
    boundary_mass_limit: float = 1e-8
    safety: float = 0.9
    output_interval: float | None = None   # None: every step
    adaptive: bool = True
    nonlinear: bool = True
    jump_factor: float = 10.0
    calm_steps: int = 20
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not 0 < self.dt_min < self.dt0:
            raise ValueError("need 0 < dt_min < dt0")
        for name in ("cn_tol", "blowup_grad_factor", "blowup_abs", "boundary_mass_limit", "safety"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.output_interval is not None and not self.output_interval > 0:
            raise ValueError("output_interval must be positive")


@dataclass
class TimeSeries:
    rows: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def append(self, diag: fn.Diagnostics, extras: dict | None = None) -> None:
        self.rows.append(diag)
        for k, v in (extras or {}).items():
            self.extra.setdefault(k, []).append(v)

    def column(self, name: str) -> np.ndarray:
        if name in self.extra:
            return np.asarray(self.extra[name], dtype=float)
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path) -> None:
        fn.write_diagnostics_csv(path, self.rows, self.extra)


@dataclass
class SimState:
    field: RadialField
    t: float = 0.0
    dt: float = 1e-3
    n_steps: int = 0
    history: TimeSeries = field(default_factory=TimeSeries)
    status: Status = Status.RUNNING
    reason: str = ""
    # controller bookkeeping
    kinetic0: float = float("nan")
    shell_fraction0: float = float("nan")
    last: fn.Diagnostics | None = None
    jumps: deque = field(default_factory=lambda: deque(maxlen=50))
    calm: int = 0
    rejected: int = 0

    def finish(self, status: Status, reason: str = "") -> None:
        if self.status is not Status.RUNNING:
            raise RuntimeError(f"status already {self.status.value}")
        self.status = status
        self.reason = reason


def nonlinear_halfstep(u: RadialField, params: ParamSet, dt: float) -> RadialField:
    """Exact flow of i u_t = lambda |x|^-b |u|^sigma u over dt/2."""
    rb = u.grid.nodes ** -float(params.b)
    return RadialField(u.grid, _rotate(u.values, rb, params, 0.5 * dt))


def _rotate(v, rb, params, tau):
    """u_j exp(-i lambda tau r_j^-b |u_j|^sigma); ``rb`` holds r_j^-b."""
    a2 = v.real ** 2 + v.imag ** 2
    phase = (-params.lam * tau) * rb * fn.abs_power(a2, float(params.sigma))
    return v * (np.cos(phase) + 1j * np.sin(phase))


class CrankNicolson:
    """(I + i dt/2 L) u+ = (I - i dt/2 L) u with L the discrete P_c; factored once per dt."""

    def __init__(self, grid, c: float, cache_size: int = 64):
        self.grid = grid
        self.coeffs = grid.laplacian_coefficients(float(c))
        self._cache: dict[float, tuple] = {}
        self._cache_size = cache_size

    def _system(self, dt: float):
        sysm = self._cache.get(dt)
        if sysm is None:
            lower, diag, upper = self.coeffs
            k = 0.5j * dt
            try:
                solver = TridiagonalSolver(k * lower, 1.0 + k * diag, k * upper)
            except SingularSystemError as exc:
                raise SolverError(f"Crank-Nicolson matrix singular for dt={dt}") from exc
            explicit = (-k * lower, 1.0 - k * diag, -k * upper)
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            sysm = self._cache[dt] = (solver, explicit)
        return sysm

    def __call__(self, v, dt: float, tol: float):
        solver, explicit = self._system(dt)
        rhs = self.grid.apply_tridiag(explicit, v)
        out = solver.solve(rhs)
        res = solver.matvec(out) - rhs
        scale = np.linalg.norm(rhs)
        if scale > 0 and np.linalg.norm(res) > tol * scale:
            raise SolverError(f"linear residual {np.linalg.norm(res) / scale:.3e} exceeds cn_tol={tol}")
        return out


def linear_step(u: RadialField, c, dt: float, cfg: SolverConfig | None = None) -> RadialField:
    cfg = cfg or SolverConfig()
    cn = CrankNicolson(u.grid, float(c))
    return RadialField(u.grid, cn(u.values, dt, cfg.cn_tol))


def shell_fraction(u: RadialField, fraction: float = 0.05) -> float:
    a2 = u.abs2
    w = u.grid.weights
    total = float(np.sum(w * a2))
    if total == 0.0:
        return 0.0
    s = u.grid.outer_shell(fraction)
    return float(np.sum(w[s] * a2[s])) / total


class Stepper:
    """Owns the cached linear solver for one (grid, params) pair."""

    def __init__(self, params: ParamSet, cfg: SolverConfig, grid):
        self.params = params
        self.cfg = cfg
        self.cn = CrankNicolson(grid, float(params.c))
        self._rb = grid.nodes ** -float(params.b)

    def advance(self, v, dt: float):
        if self.cfg.nonlinear:
            v = _rotate(v, self._rb, self.params, 0.5 * dt)
        v = self.cn(v, dt, self.cfg.cn_tol)
        if self.cfg.nonlinear:
            v = _rotate(v, self._rb, self.params, 0.5 * dt)
        return v

    def diagnostics(self, u: RadialField, t: float, dt: float) -> fn.Diagnostics:
        # the discrete quadratic form, so energy is what the scheme conserves
        if self.cfg.nonlinear:
            return fn.diagnostics(u, self.params, t, dt, gradient="form")
        kin = fn.kinetic_c(u, self.params.c, "form")
        return fn.Diagnostics(t, fn.mass(u), kin, 0.0, 0.5 * kin, fn.variance(u), dt)


def init_state(u0: RadialField, params: ParamSet, cfg: SolverConfig, stepper: Stepper | None = None) -> SimState:
    stepper = stepper or Stepper(params, cfg, u0.grid)
    st = SimState(field=u0.copy(), dt=cfg.dt0)
    st.last = stepper.diagnostics(st.field, 0.0, cfg.dt0)
    st.kinetic0 = st.last.kinetic_c
    st.shell_fraction0 = shell_fraction(u0)
    return st


def step(state: SimState, params: ParamSet, cfg: SolverConfig, stepper: Stepper | None = None,
         dt: float | None = None) -> SimState:
    """Advance ``state`` in place by one accepted step and return it.

    ``dt`` caps the step (used to land on output times); the controller may
    shrink it further.
    """
    if state.status is not Status.RUNNING:
        raise RuntimeError(f"cannot step a state with status {state.status.value}")
    stepper = stepper or Stepper(params, cfg, state.field.grid)
    if state.last is None:
        state.last = stepper.diagnostics(state.field, state.t, state.dt)
        state.kinetic0 = state.last.kinetic_c
        state.shell_fraction0 = shell_fraction(state.field)
    grid = state.field.grid

    while True:
        h = state.dt if dt is None else min(state.dt, dt)
        if state.dt < cfg.dt_min:
            state.finish(Status.BLOWUP, f"dt={state.dt:.3e} below dt_min={cfg.dt_min:.1e}")
            return state
        v = stepper.advance(state.field.values, h)
        if not np.all(np.isfinite(v)):
            state.dt *= 0.5
            state.rejected += 1
            continue
        trial = RadialField(grid, v)
        diag = stepper.diagnostics(trial, state.t + h, h)
        jump = abs(diag.energy - state.last.energy)
        if cfg.adaptive and _too_big(jump, state, diag, cfg):
            state.dt *= 0.5
            state.rejected += 1
            state.calm = 0
            continue
        break

    state.field = trial
    state.t += h
    state.n_steps += 1
    state.last = diag
    state.jumps.append(jump)
    if cfg.adaptive:
        state.calm += 1
        if state.calm >= cfg.calm_steps and state.dt < cfg.dt0:
            state.dt = min(cfg.dt0, 2.0 * cfg.safety * state.dt)
            state.calm = 0

    if diag.kinetic_c > cfg.blowup_grad_factor * state.kinetic0:
        state.finish(Status.BLOWUP, f"kinetic_c={diag.kinetic_c:.6e} exceeds "
                     f"{cfg.blowup_grad_factor:g} x initial {state.kinetic0:.6e}")
    elif diag.kinetic_c > cfg.blowup_abs:
        state.finish(Status.BLOWUP, f"kinetic_c={diag.kinetic_c:.6e} exceeds {cfg.blowup_abs:g}")
    else:
        excess = shell_fraction(trial) - state.shell_fraction0
        if excess > cfg.boundary_mass_limit:
            state.finish(Status.BOUNDARY, f"outer-shell mass fraction grew by {excess:.3e}")
    return state


def _too_big(jump: float, state: SimState, diag: fn.Diagnostics, cfg: SolverConfig) -> bool:
    if len(state.jumps) < 10:
        return False
    # round-off floor: relative to the size of the energy terms
    floor = 1e-9 * (abs(diag.kinetic_c) + abs(diag.potential))
    return jump > max(cfg.jump_factor * statistics.median(state.jumps), floor)


Probe = Callable[[RadialField], float]


def evolve(u0: RadialField, params: ParamSet, cfg: SolverConfig,
           probes: dict[str, Probe] | None = None) -> tuple[SimState, TimeSeries]:
    """Run to ``cfg.t_end`` or a terminal status, sampling diagnostics on a uniform time grid."""
    probes = probes or {}
    stepper = Stepper(params, cfg, u0.grid)
    state = init_state(u0, params, cfg, stepper)
    series = state.history

    def record():
        series.append(state.last, {k: f(state.field) for k, f in probes.items()})

    record()
    interval = cfg.output_interval
    k_out = 1
    eps_t = 1e-12 * max(cfg.t_end, 1.0)
    while state.t < cfg.t_end - eps_t and state.status is Status.RUNNING:
        if state.n_steps >= cfg.max_steps:
            state.finish(Status.FINISHED, f"max_steps={cfg.max_steps} reached at t={state.t:.6g}")
            break
        target = cfg.t_end if interval is None else min(cfg.t_end, k_out * interval)
        step(state, params, cfg, stepper, dt=target - state.t)
        if state.status is not Status.RUNNING:
            record()
            break
        if interval is None:
            record()
        elif abs(state.t - target) <= eps_t:
            state.t = target
            state.last.t = target
            record()
            k_out += 1
    if state.status is Status.RUNNING:
        if series.rows[-1].t != state.t:
            record()
        state.finish(Status.FINISHED)
    log.info("evolve: status=%s t=%.6g steps=%d rejected=%d", state.status.value,
             state.t, state.n_steps, state.rejected)
    return state, series
