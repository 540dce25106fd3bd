import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wolffpot import discretize as dz
from wolffpot.measures import Measure, RadialSegment, lebesgue, zero_measure
from wolffpot.potentials import ParameterError, PotentialParams
from wolffpot.radial import (
    ExistenceError,
    ModelOperator,
    certify_radial,
    make_counterexample,
    make_powerlaw_example,
    model_kernel,
    radial_envelope,
    radial_solve,
    radial_study,
    STUDY_HEADER,
)
from wolffpot.solver import solve

OMEGA = 4.0 * math.pi


@pytest.fixture(scope="module")
def powerlaw_radial(powerlaw, frac_params):
    return radial_solve(powerlaw, frac_params)


@pytest.fixture(scope="module")
def counterexample_radial(counterexample, frac_params):
    return radial_solve(counterexample, frac_params)


def test_model_kernel_values():
    assert model_kernel(1.0, 1.0, 3, 1.0) == 1.0
    # exponent n - 2 alpha = 2
    assert model_kernel(2.0, 0.5, 3, 1.0) == 0.25
    assert model_kernel(2.0, 0.5, 3, 2.0) == 0.5
    with pytest.raises(ParameterError):
        model_kernel(1.0, 1.0, 3, 3.0)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.integers(2, 6), st.floats(0.1, 1.9))
def test_model_kernel_symmetric(rho, tau, n, ta):
    assert model_kernel(rho, tau, n, ta) == model_kernel(tau, rho, n, ta)


def test_make_counterexample():
    mu = make_counterexample(3, 1.0, 0.5, 2.0)
    assert mu.radial_segments[0].s == 2.0
    assert make_counterexample(4, 2.0, 0.5, 2.0).radial_segments[0].s == 3.0
    with pytest.raises(ParameterError):
        make_counterexample(3, 1.0, 0.5, 1.0)


def test_make_powerlaw_example_bounds():
    assert make_powerlaw_example(3, 1.0, 0.5, 1.5).radial_segments[0].s == 1.5
    for s in (1.0, 2.0):
        with pytest.raises(ParameterError):
            make_powerlaw_example(3, 1.0, 0.5, s)


def test_powerlaw_envelope_closed_form(powerlaw, frac_params):
    rho = np.array([1e-5, 1e-3, 0.1, 0.5])
    env = radial_envelope(powerlaw, frac_params, rho)
    np.testing.assert_allclose(env.k_term, 4.0 * OMEGA**2 / rho, rtol=1e-10)
    np.testing.assert_allclose(env.tail_term, (2.0 * OMEGA * (rho**-0.5 - 1.0)) ** 2, rtol=1e-10)


def test_annulus_envelope(frac_params):
    mu = Measure(3, (RadialSegment(1.0, 0.0, 0.0, 1.0, 2.0),))
    env = radial_envelope(mu, frac_params, [0.1, 0.5])
    assert np.all(env.k_term == 0.0)
    assert env.tail_term[0] == pytest.approx(env.tail_term[1], rel=1e-12)


def test_envelope_needs_existence(frac_params):
    with pytest.raises(ExistenceError):
        radial_envelope(lebesgue(3), frac_params, [1.0])


def test_kernel_consistency(counterexample, frac_params):
    knots = dz.measure_knots(counterexample, 24)
    eng = dz.engine_for(counterexample, knots)
    radii = np.array([1e-4, 1e-2, 0.3, 2.0])
    got = ModelOperator(eng, 3, 1.0, radii)(np.zeros(len(knots)))
    k = 2.0
    want = [counterexample.radial_moment_below(r, 0.0) / r**k + counterexample.radial_moment_above(r, k)
            for r in radii]
    np.testing.assert_allclose(got, want, rtol=1e-8)


def test_zero_measure_radial(frac_params):
    sol = radial_solve(zero_measure(3), frac_params.with_(r=1.0))
    assert np.all(sol.values == 1.0)


def test_powerlaw_radial_solution(powerlaw_radial):
    sol = powerlaw_radial
    assert sol.converged and sol.residual < 1e-6
    sel = (sol.radii >= 1e-5) & (sol.radii <= 1e-2)
    urho = sol.values[sel] * sol.radii[sel]
    assert urho.max() / urho.min() < 1.1


def test_counterexample_radial_sandwich(counterexample_radial):
    lo, hi = certify_radial(counterexample_radial, 1e-5, 1e-1)
    assert 0.0 < lo <= hi and hi / lo < 100.0


def test_radial_and_general_solvers_agree_up_to_constants(powerlaw, counterexample, frac_params,
                                                         powerlaw_radial, counterexample_radial):
    # both solve on the same measure-adapted knots; the ratio band is reported
    for mu, rad in ((powerlaw, powerlaw_radial), (counterexample, counterexample_radial)):
        gen = solve(mu, frac_params)
        assert np.array_equal(gen.radii, rad.radii)
        sel = (rad.radii >= 1e-5) & (rad.radii <= 10.0)
        ratio = gen.values[sel] / rad.values[sel]
        print(f"general/radial ratio band: [{ratio.min():.4f}, {ratio.max():.4f}]")
        assert 0.25 <= ratio.min() and ratio.max() <= 4.0


def test_radial_needs_p2(powerlaw):
    with pytest.raises(ParameterError):
        radial_solve(powerlaw, PotentialParams(3, 0.5, 2.5, 0.5))


def test_radial_study_columns(powerlaw, frac_params):
    sol, rows = radial_study(powerlaw, frac_params)
    assert rows.shape == (len(sol.radii), len(STUDY_HEADER))
    np.testing.assert_allclose(rows[:, 4], rows[:, 2] + rows[:, 3])
    assert np.all(rows[:, 6] > 0.0)
