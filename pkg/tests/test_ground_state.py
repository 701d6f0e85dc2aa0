import math
from fractions import Fraction

import numpy as np
import pytest

from inlsc import functionals as fn
from inlsc.grid import RadialGrid
from inlsc.ground_state import (
    GroundStateSpec, W_field, el_residual, energy_factor, eval_W, identities_report,
    minimize_quotient, power_law_tail,
)
from inlsc.params import ParamSet

W_INTEGRAL = 8 * math.pi / 3
# scipy quad of the closed form at d=3, b=1, c=-3/16 (rho = 1/4):
# W = sqrt(1/2) / ((1 + sqrt r) r^{1/4}), potential = pi/3, energy ~ pi/12
POT_NEG_C = 1.0471975511965976
SPEC = GroundStateSpec(3, 1)


def test_spec_validation():
    for kw in (dict(c=1), dict(epsilon=0), dict(c=Fraction(-1, 4)), dict(b=2)):
        with pytest.raises(ValueError):
            GroundStateSpec(**{"d": 3, "b": 1, **kw})
    assert GroundStateSpec(3, 1, "-3/16") == GroundStateSpec(3, 1, Fraction(-3, 16))


def test_W_closed_form():
    assert eval_W(SPEC, 1.0) == pytest.approx(math.sqrt(2) / 2, rel=1e-15)
    r = np.geomspace(1e-3, 1e3, 50)
    for eps in (0.5, 1.0, 2.0):
        expect = math.sqrt(2) * (eps / (eps + r)) * eps ** -0.5
        assert np.allclose(eval_W(GroundStateSpec(3, 1, 0, eps), r), expect, rtol=1e-14)
    with pytest.raises(ValueError):
        eval_W(SPEC, 0.0)


def test_W_negative_c_closed_form():
    spec = GroundStateSpec(3, 1, Fraction(-3, 16))
    assert spec.rho == pytest.approx(0.25) and spec.beta == pytest.approx(0.5)
    r = np.geomspace(1e-4, 1e4, 40)
    assert np.allclose(eval_W(spec, r), math.sqrt(0.5) / ((1 + np.sqrt(r)) * r ** 0.25), rtol=1e-13)


def _slope(spec, r1, r2):
    return math.log(eval_W(spec, r2) / eval_W(spec, r1)) / math.log(r2 / r1)


@pytest.mark.parametrize("c", [Fraction(-3, 16), Fraction(-1, 8), Fraction(-1, 100)])
def test_W_power_laws(c):
    spec = GroundStateSpec(3, 1, c)
    rho = spec.rho
    assert _slope(spec, 1e-10, 1e-8) == pytest.approx(-rho, rel=2e-2)
    assert _slope(spec, 1e8, 1e10) == pytest.approx(-(3 - 2) + rho, rel=2e-2)


def test_W_field_dimension_check():
    with pytest.raises(ValueError):
        W_field(SPEC, RadialGrid(4, 10, 0.1))


def test_power_law_tail_exact_for_its_basis():
    r = np.linspace(50, 100, 200)
    f = r ** -3.0 * (2 + 5 / r + 7 / r ** 2)
    exact = 2 / (2 * 100 ** 2) + 5 / (3 * 100 ** 3) + 7 / (4 * 100 ** 4)
    assert power_law_tail(r, f, 3.0, 1.0, 100.0) == pytest.approx(exact, rel=1e-9)
    with pytest.raises(ValueError):
        power_law_tail(r, f, 1.0, 1.0, 100.0)


def test_energy_factor_exact():
    assert energy_factor(3, 1) == Fraction(1, 4)
    assert energy_factor(5, Fraction(1, 2)) == Fraction(3, 18)


def test_identities_d3_b1():
    g = RadialGrid.from_rmax(3, 100.0, 0.005)
    rep = identities_report(SPEC, g)
    assert rep.kinetic == pytest.approx(W_INTEGRAL, rel=1e-3)
    assert rep.potential == pytest.approx(W_INTEGRAL, rel=1e-3)
    assert rep.energy == pytest.approx(2 * math.pi / 3, rel=1e-3)
    assert rep.kp_discrepancy < 2e-3
    assert rep.energy_factor == Fraction(1, 4)
    assert rep.quotient == pytest.approx((8 * math.pi / 3) ** 0.25, rel=1e-4)
    # ||W||^s = C^{-(s+2)} with s = 2
    assert math.sqrt(rep.kinetic) ** 2 == pytest.approx(rep.C_HS ** -4, rel=1e-12)
    assert rep.tails.kinetic > 0 and rep.kinetic_raw < rep.kinetic
    assert set(rep.as_dict()) >= {"kinetic_tail", "potential_tail", "kp_discrepancy"}


def test_identities_converge_at_second_order():
    gaps = [identities_report(SPEC, RadialGrid.from_rmax(3, 100.0, h)).kp_discrepancy
            for h in (0.02, 0.01, 0.005)]
    for a, b in zip(gaps, gaps[1:]):
        assert 3 < a / b < 5


def test_negative_c_identities():
    g = RadialGrid.from_rmax(3, 100.0, 0.005)
    rep = identities_report(GroundStateSpec(3, 1, Fraction(-3, 16)), g)
    assert rep.potential == pytest.approx(POT_NEG_C, rel=2e-3)
    assert math.isfinite(rep.energy) and rep.energy > 0


def test_el_residual_fixed_window_second_order():
    window = (0.2, 50.0)
    coarse = el_residual(SPEC, RadialGrid.from_rmax(3, 100.0, 0.01), window)
    fine = el_residual(SPEC, RadialGrid.from_rmax(3, 100.0, 0.005), window)
    assert fine < 5e-3 and 3 <= coarse / fine <= 5


def test_el_residual_negative_c_converges():
    spec = GroundStateSpec(3, 1, Fraction(-3, 16))
    window = (0.2, 50.0)
    coarse = el_residual(spec, RadialGrid.from_rmax(3, 100.0, 0.01), window)
    fine = el_residual(spec, RadialGrid.from_rmax(3, 100.0, 0.005), window)
    assert math.isfinite(fine) and 3 <= coarse / fine <= 5


def test_minimizer_stationary_at_tapered_W():
    g = RadialGrid.from_rmax(3, 1000.0, 0.01)
    seed = g.field(W_field(SPEC, g).values * g.edge_taper())
    res = minimize_quotient(ParamSet(3, 1), g, seed, max_iters=1)
    assert abs(res.trace[1] - res.trace[0]) / res.trace[0] <= 1e-3


def test_minimizer_trace_is_monotone():
    g = RadialGrid.from_rmax(3, 20.0, 0.02)
    res = minimize_quotient(ParamSet(3, 1), g, g.sample(lambda r: np.exp(-r ** 2)), max_iters=100)
    tr = np.array(res.trace)
    assert np.all(np.diff(tr) <= 0)
    assert tr[-1] < tr[0]
    # the returned field keeps the seed's mass
    assert fn.mass(res.field) == pytest.approx(fn.mass(g.sample(lambda r: np.exp(-r ** 2))), rel=1e-10)


def test_minimizer_rejects_bad_input():
    g = RadialGrid.from_rmax(3, 5.0, 0.05)
    with pytest.raises(ValueError):
        minimize_quotient(ParamSet(3, 1), g, g.field(np.zeros(g.n)))
    with pytest.raises(ValueError):
        minimize_quotient(ParamSet(3, 1, sigma=1), g, g.sample(lambda r: np.exp(-r ** 2)))
