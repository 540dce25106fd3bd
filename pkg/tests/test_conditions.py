import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wolffpot.conditions import (
    ConditionReport,
    decade_points,
    dyadic_balls,
    energy_ball_ratio,
    pointwise_kappa,
    radial_existence,
    radial_ratio,
    radial_ratio_report,
    verdict,
    weaker_ball_condition,
)
from wolffpot.measures import Measure, RadialSegment, lebesgue, point_mass, zero_measure
from wolffpot.potentials import PotentialParams

# mpmath (30 digits) oracle for the counterexample: ratio / log(1/rho)
CE_NORMALIZED = {3: 0.604204145581032, 4: 0.726586609484736, 5: 0.797715187445141, 8: 0.883595499754403}

NEWTON = PotentialParams(3, 1.0, 2.0)


def test_verdict_rules():
    assert verdict([1.0, 2.0, 4.0]) == "fails"
    assert verdict([5.0, 4.0, 4.5, 4.2]) == "holds"
    assert verdict([100.0, 10.0, 1.0]) == "holds"
    assert verdict([1.0, 10.0, 5.0, 1.0, 3.0]) == "inconclusive"
    assert verdict([1.0, math.inf]) == "fails"


def test_uniform_ball_energy_closed_form():
    # unit-mass uniform ball: I_2 = (3 - r^2)/2 inside, average 6/5; density 1 has mass 4 pi/3
    rep = energy_ball_ratio(lebesgue(3, 1.0), NEWTON, 1.0, [((0, 0, 0), 1.0)])
    assert rep.supremum == pytest.approx(1.2 * 4.0 * math.pi / 3.0, rel=1e-3)


def test_concentric_atom_energy():
    c = (0.5, 0.0, 0.0)
    rep = energy_ball_ratio(point_mass(3, 1.0, 0.1, center=c), NEWTON, 1.0, [(c, 0.2)])
    assert rep.supremum == pytest.approx(12.0, rel=1e-3)


def test_energy_mass_scaling():
    mu = lebesgue(3, 1.0)
    prm = PotentialParams(3, 0.5, 2.0)
    probes = [((0, 0, 0), 0.5), ((0, 0, 0), 0.1)]
    a = energy_ball_ratio(mu, prm, 2.0, probes).values
    b = energy_ball_ratio(mu.scaled(3.0), prm, 2.0, probes).values
    np.testing.assert_allclose(b, 9.0 * a, rtol=1e-10)


def test_energy_skips_empty_probe():
    mu = Measure(3, (RadialSegment(1.0, 0.0, 0.0, 1.0, 2.0),))
    rep = energy_ball_ratio(mu, NEWTON, 1.0, [((0, 0, 0), 0.5)])
    assert rep.samples == [] and rep.notes


def test_pointwise_zero_measure():
    rep = pointwise_kappa(zero_measure(3), PotentialParams(3, 0.5, 2.0, 0.5), decade_points(3, 0, 2))
    assert rep.verdict == "holds" and rep.supremum == 0.0


def test_radial_existence_examples(counterexample, frac_params):
    assert radial_existence(counterexample, frac_params).verdict == "holds"
    assert radial_existence(point_mass(3, 1.0, 0.01), frac_params).verdict == "holds"
    rep = radial_existence(lebesgue(3), frac_params)
    assert rep.verdict == "fails" and "above_1 diverges" in rep.notes


def test_counterexample_radial_ratio_oracle(counterexample, frac_params):
    for k, want in CE_NORMALIZED.items():
        rho = 10.0**-k
        got = radial_ratio(counterexample, frac_params, rho) / math.log(1.0 / rho)
        assert got == pytest.approx(want, rel=1e-6)


@pytest.mark.xfail(strict=True, reason="normalized ratio is 0.604, 0.727, 0.798: 1/log corrections exceed 20%")
def test_counterexample_growth_law_within_20_percent(counterexample, frac_params):
    vals = [radial_ratio(counterexample, frac_params, 10.0**-k) / (k * math.log(10.0)) for k in (3, 4, 5)]
    assert max(vals) <= 1.2 * min(vals)


def test_counterexample_normalized_ratio_increases_to_limit(counterexample, frac_params):
    vals = [radial_ratio(counterexample, frac_params, 10.0**-k) / (k * math.log(10.0)) for k in range(2, 13)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1.0


def test_powerlaw_radial_ratio_closed_form(powerlaw, frac_params):
    for rho in (1e-6, 1e-3, 0.2):
        assert radial_ratio(powerlaw, frac_params, rho) == pytest.approx(rho**-0.5 / (rho**-0.5 - 1.0), rel=1e-10)


def test_annulus_radial_ratio_zero(frac_params):
    mu = Measure(3, (RadialSegment(1.0, 0.0, 0.0, 1.0, 2.0),))
    assert radial_ratio(mu, frac_params, 0.5) == 0.0


@given(st.floats(1e-3, 1e3), st.floats(1e-6, 0.4))
def test_radial_ratio_mass_invariant(lam, rho):
    mu = make = Measure(3, (RadialSegment(1.0, 2.0, 2.0, 0.0, 0.5, 1.0 / math.e),))
    prm = PotentialParams(3, 0.5, 2.0, 0.5)
    assert radial_ratio(mu.scaled(lam), prm, rho) == pytest.approx(radial_ratio(make, prm, rho), rel=1e-9)


def test_ratio_coherence_with_pointwise(powerlaw, counterexample, frac_params):
    # bounded radial ratio <=> pointwise condition holds, on the built-in radial examples
    for mu, bounded in ((powerlaw, True), (counterexample, False)):
        rr = radial_ratio_report(mu, frac_params, [10.0**-k for k in range(1, 9)])
        pk = pointwise_kappa(mu, frac_params, decade_points(3, 1, 8))
        assert (rr.verdict == "holds") == bounded
        assert (pk.verdict == "holds") == bounded
        assert (pk.verdict == "fails") == (not bounded)


def test_implication_chain_on_bounded_density():
    mu = lebesgue(3, 1.0)
    prm = PotentialParams(3, 0.5, 2.0, 0.5)
    energy = energy_ball_ratio(mu, prm, 1.0, dyadic_balls(3, 1, 8))
    assert energy.verdict == "holds"
    kappa = pointwise_kappa(mu, prm, decade_points(3, 0, 5))
    assert math.isfinite(kappa.supremum) and kappa.verdict != "fails"
    weak = weaker_ball_condition(mu, prm, dyadic_balls(3, 1, 8))
    assert weak.verdict == "holds"


def test_report_json_fields(powerlaw, frac_params):
    rep = radial_ratio_report(powerlaw, frac_params, [0.1, 0.01])
    data = json.loads(rep.to_json())
    assert {"condition_id", "samples", "supremum", "verdict"} <= set(data)
    assert rep.supremum == max(rep.values)
    assert isinstance(rep, ConditionReport)
