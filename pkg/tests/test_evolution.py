import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inlsc import functionals as fn
from inlsc.evolution import (
    SimState, SolverConfig, Status, Stepper, evolve, init_state, linear_step,
    nonlinear_halfstep, step,
)
from inlsc.grid import RadialGrid
from inlsc.params import ParamSet

GAUSS_VAR = 1.4765259324114770     # (3/4)(pi/2)^{3/2}
GAUSS_GRAD = 5.906103729645908     # 3 (pi/2)^{3/2}
P = ParamSet(3, 1)
DEFOC = ParamSet(3, 1, lam=1)


@pytest.fixture(scope="module")
def grid():
    return RadialGrid.from_rmax(3, 20.0, 0.02)


def smooth(grid, seed=0):
    rng = np.random.default_rng(seed)
    r = grid.nodes
    coef = rng.normal(size=(3, 2))
    return grid.field(sum((a + 1j * b) * np.exp(-(r - k) ** 2) for k, (a, b) in enumerate(coef)))


def test_config_validation():
    for kw in (dict(dt_min=1.0), dict(cn_tol=0), dict(t_end=-1), dict(output_interval=0)):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


def test_nonlinear_halfstep_modulus_and_phase(grid):
    u = smooth(grid)
    v = nonlinear_halfstep(u, P, 0.1)
    assert np.allclose(np.abs(v.values), np.abs(u.values), rtol=1e-15, atol=0)
    zero = grid.field(np.zeros(grid.n))
    assert np.array_equal(nonlinear_halfstep(zero, P, 0.1).values, zero.values)


@pytest.mark.parametrize("lam", [-1, 1])
def test_ring_phase_after_two_halfsteps(grid, lam):
    r = grid.nodes
    u = grid.field(0.7 * np.ones(grid.n))
    p = P.replace(lam=lam)
    dt = 0.03
    v = nonlinear_halfstep(nonlinear_halfstep(u, p, dt), p, dt)
    expect = -lam * r ** -1.0 * 0.7 ** 2 * dt
    # compare as unit complex numbers to avoid branch cuts
    assert np.allclose(v.values / 0.7, np.exp(1j * expect), atol=1e-13)


def test_linear_step_is_unitary(grid):
    u = smooth(grid, 3)
    m0 = fn.mass(u)
    v = linear_step(u, -0.1, 1e-2)
    assert abs(fn.mass(v) - m0) / m0 <= 1e-12


def test_linear_step_consistency(grid):
    u = smooth(grid, 4)
    d1 = (linear_step(u, 0, 2e-4) - u).norm()
    d2 = (linear_step(u, 0, 1e-4) - u).norm()
    assert d1 / d2 == pytest.approx(2.0, rel=1e-2)


def test_free_gaussian_variance_growth():
    # free flow: V(t) = V(0) + 4 t^2 int |grad u0|^2 for real data
    g = RadialGrid.from_rmax(3, 30.0, 0.01)
    u = g.sample(lambda r: np.exp(-r ** 2))
    free = Stepper(P, SolverConfig(nonlinear=False), g)
    v = u.values
    for _ in range(200):
        v = free.advance(v, 1e-3)
    expect = GAUSS_VAR + 4 * GAUSS_GRAD * 0.2 ** 2
    assert fn.variance(g.field(v)) == pytest.approx(expect, rel=1e-2)


def test_time_reversal(grid):
    cfg = SolverConfig(cn_tol=1e-12)
    stepper = Stepper(P.replace(c=0.1), cfg, grid)
    u = smooth(grid, 5).values
    back = stepper.advance(stepper.advance(u, 1e-3), -1e-3)
    assert np.linalg.norm(back - u) <= 10 * cfg.cn_tol * np.linalg.norm(u)


def test_evolve_zero_time(grid):
    u = grid.sample(lambda r: np.exp(-r ** 2))
    state, series = evolve(u, DEFOC, SolverConfig(t_end=0.0))
    assert len(series) == 1 and state.status is Status.FINISHED
    assert series.rows[0].t == 0.0


def test_evolve_is_deterministic(grid):
    u = grid.sample(lambda r: np.exp(-r ** 2))
    cfg = SolverConfig(t_end=0.05, output_interval=0.01)
    a = evolve(u, P, cfg)[1]
    b = evolve(u, P, cfg)[1]
    assert [r.row() for r in a.rows] == [r.row() for r in b.rows]


def test_output_times_are_uniform(grid):
    u = grid.sample(lambda r: np.exp(-r ** 2))
    _, series = evolve(u, DEFOC, SolverConfig(t_end=0.1, output_interval=0.02))
    t = series.column("t")
    assert np.allclose(t, np.arange(6) * 0.02, atol=1e-12)
    assert np.all(np.diff(t) > 0)


def test_gauge_covariance(grid):
    u = smooth(grid, 6)
    cfg = SolverConfig(t_end=0.02, adaptive=False)
    phase = np.exp(0.7j)
    s1, _ = evolve(u, P, cfg)
    s2, _ = evolve(u.scaled(phase), P, cfg)
    assert np.allclose(s2.field.values, phase * s1.field.values, rtol=0, atol=1e-12)


def test_defocusing_runs_to_end():
    g = RadialGrid.from_rmax(3, 30.0, 0.01)
    u = g.sample(lambda r: 0.25 * np.exp(-r ** 2))
    state, series = evolve(u, DEFOC, SolverConfig(t_end=1.0, output_interval=0.1))
    assert state.status is Status.FINISHED and state.t == pytest.approx(1.0)
    m = series.column("mass")
    assert np.max(np.abs(m - m[0])) / m[0] <= 1e-10


@pytest.mark.xfail(strict=True, reason="grid-scale waves from the first-cell mode reach r_max "
                   "before t=1 at unit amplitude; see notes on the node-0 resonance")
def test_defocusing_unit_gaussian_runs_to_end():
    g = RadialGrid.from_rmax(3, 30.0, 0.01)
    u = g.sample(lambda r: np.exp(-r ** 2))
    state, _ = evolve(u, DEFOC, SolverConfig(t_end=1.0, output_interval=0.1))
    assert state.status is Status.FINISHED


def test_focusing_negative_energy_blows_up():
    g = RadialGrid.from_rmax(3, 20.0, 0.01)
    u = g.sample(lambda r: 3 * np.exp(-r ** 2))
    state, _ = evolve(u, P, SolverConfig(t_end=1.0, output_interval=0.01))
    assert state.status is Status.BLOWUP and "kinetic_c" in state.reason


def test_boundary_guard_fires():
    g = RadialGrid.from_rmax(3, 10.0, 0.02)
    u = g.sample(lambda r: np.exp(-(r - 7) ** 2 * 4) * np.exp(3j * r))
    state, _ = evolve(u, DEFOC, SolverConfig(t_end=2.0))
    assert state.status is Status.BOUNDARY


def test_status_is_one_way(grid):
    u = grid.sample(lambda r: np.exp(-r ** 2))
    cfg = SolverConfig(t_end=0.01)
    state = init_state(u, DEFOC, cfg)
    step(state, DEFOC, cfg)
    assert state.n_steps == 1 and state.t == pytest.approx(1e-3)
    state.finish(Status.FINISHED)
    with pytest.raises(RuntimeError):
        state.finish(Status.BLOWUP)
    with pytest.raises(RuntimeError):
        step(state, DEFOC, cfg)


def test_step_caps_dt(grid):
    u = grid.sample(lambda r: np.exp(-r ** 2))
    cfg = SolverConfig()
    state = step(SimState(field=u, dt=cfg.dt0), DEFOC, cfg, dt=2.5e-4)
    assert state.t == pytest.approx(2.5e-4)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.2, 1.5), st.floats(-0.2, 0.5), st.sampled_from([-1, 1]))
def test_mass_conserved_over_many_steps(amp, c, lam):
    g = RadialGrid.from_rmax(3, 10.0, 0.05)
    p = ParamSet(3, 1, lam=lam, c=c)
    u = g.sample(lambda r: amp * np.exp(-r ** 2))
    stepper = Stepper(p, SolverConfig(), g)
    v = u.values
    for _ in range(1000):
        v = stepper.advance(v, 1e-3)
    m0 = fn.mass(u)
    assert abs(fn.mass(g.field(v)) - m0) / m0 <= 1e-10
