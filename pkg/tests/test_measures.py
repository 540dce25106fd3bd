import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wolffpot.measures import (
    Measure,
    MeasureError,
    MollifiedAtom,
    RadialSegment,
    cap_fraction,
    lebesgue,
    point_mass,
    sphere_area,
    zero_measure,
)

OMEGA2 = 4.0 * math.pi

# Monte-Carlo oracle: 1e7 uniform samples in B((0.3,0,0), 0.2), seed 12345
MC_MASS, MC_SE = 0.21199381854393806, 3.637836415793481e-05


def test_sphere_area_n3():
    assert sphere_area(3) == pytest.approx(OMEGA2, rel=1e-15)


def test_concentric_atom_masses():
    mu = point_mass(3, 1.0, 1.0)
    assert mu.ball_mass([0, 0, 0], 0.5) == pytest.approx(0.125, rel=1e-12)
    assert mu.ball_mass([0, 0, 0], 2.0) == pytest.approx(1.0, rel=1e-12)


def test_powerlaw_ball_mass_monte_carlo(powerlaw):
    val = powerlaw.ball_mass([0.3, 0.0, 0.0], 0.2)
    assert abs(val - MC_MASS) < 3.0 * MC_SE


def test_counterexample_moment_below(counterexample):
    # s = 2 and e = 1: the integrand is 4 pi / (rho log^2(1/rho))
    val = counterexample.radial_moment_below(math.exp(-10.0), 1.0)
    assert val == pytest.approx(OMEGA2 / 10.0, rel=1e-8)


def test_powerlaw_moments(powerlaw):
    assert powerlaw.radial_moment_below(0.25, 1.0) == pytest.approx(OMEGA2, rel=1e-10)
    assert powerlaw.radial_moment_above(0.01, 2.0) == pytest.approx(OMEGA2 * 18.0, rel=1e-10)
    assert powerlaw.radial_moment_above(1.0, 2.0) == 0.0


def test_divergent_moments():
    mu = Measure(3, (RadialSegment(1.0, 1.5, 0.0, 0.0, 1.0),))
    assert math.isinf(mu.radial_moment_below(0.5, 1.5))
    assert math.isinf(lebesgue(3).radial_moment_above(1.0, 2.0))


def test_log_segment_needs_beta_above_one_for_exponent_minus_one():
    seg = RadialSegment(1.0, 3.0, 1.0, 0.0, 0.5, 1.0 / math.e)
    with pytest.raises(MeasureError):
        Measure(3, (seg,))


def test_moments_add_to_total(powerlaw, counterexample):
    for mu, rel in ((powerlaw, 1e-10), (counterexample, 1e-6)):
        for rho in (1e-3, 0.1, 0.3):
            tot = mu.radial_moment_below(rho, 0.0) + mu.radial_moment_above(rho, 0.0)
            assert tot == pytest.approx(mu.total_mass(), rel=rel)


def test_cap_fraction_half_at_right_angle():
    for n in (2, 3, 5):
        rho, d = 0.7, 1.3
        t = math.hypot(rho, d)
        assert float(cap_fraction(n, rho, d, t)) == pytest.approx(0.5, abs=1e-12)


@given(st.integers(2, 6), st.floats(0.05, 2.0), st.floats(0.05, 2.0), st.lists(st.floats(0.0, 4.0), min_size=2, max_size=6))
def test_cap_fraction_bounded_monotone(n, rho, d, ts):
    ts = np.sort(np.asarray(ts))
    vals = np.asarray(cap_fraction(n, rho, d, ts), dtype=float)
    assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
    assert np.all(np.diff(vals) >= -1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.5), st.lists(st.floats(1e-3, 5.0), min_size=2, max_size=5))
def test_ball_mass_monotone_in_t(d, ts):
    mu = Measure(3, (RadialSegment(1.0, 1.5, 0.0, 0.0, 1.0),), (MollifiedAtom((0.5, 0.0, 0.0), 2.0, 0.2),))
    ts = sorted(ts)
    vals = [mu.ball_mass([d, 0.0, 0.0], t) for t in ts]
    assert all(b >= a - 1e-12 * max(1.0, abs(a)) for a, b in zip(vals, vals[1:]))
    assert mu.ball_mass([d, 0.0, 0.0], 100.0) == pytest.approx(mu.total_mass(), rel=1e-9)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-2, 2), min_size=3, max_size=3),
       st.floats(0.01, 3.0))
def test_atom_translation_consistent(shift, x, t):
    mu = Measure(3, (), (MollifiedAtom((0.1, -0.2, 0.3), 1.5, 0.4),))
    moved = mu.translated(shift)
    a = mu.ball_mass(x, t)
    b = moved.ball_mass(np.asarray(x) + np.asarray(shift), t)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-14)


def test_open_closed_perturbation_is_continuous(powerlaw):
    x = [0.3, 0.0, 0.0]
    base = powerlaw.ball_mass(x, 0.2)
    for dt in (-1e-12, 1e-12):
        assert powerlaw.ball_mass(x, 0.2 + dt) == pytest.approx(base, rel=1e-9)


def test_origin_ball_mass_matches_moment(counterexample):
    assert counterexample.ball_mass([0, 0, 0], 0.01) == pytest.approx(
        counterexample.radial_moment_below(0.01, 0.0), rel=1e-12)


def test_input_errors(powerlaw):
    with pytest.raises(MeasureError):
        powerlaw.ball_mass([0.0, 0.0], 0.5)
    with pytest.raises(MeasureError):
        powerlaw.ball_mass([0.0, 0.0, 0.0], math.inf)
    with pytest.raises(MeasureError):
        powerlaw.ball_mass([math.nan, 0.0, 0.0], 0.5)
    with pytest.raises(MeasureError):
        point_mass(3).translated([1, 0, 0]).radial_moment_below(1.0, 0.0)


def test_json_roundtrip(tmp_path, counterexample):
    mu = Measure(3, counterexample.radial_segments + (RadialSegment(0.5, 0.0, 0.0, 2.0, math.inf),),
                 (MollifiedAtom((1.0, 2.0, 3.0), 0.5, 0.25),))
    path = tmp_path / "mu.json"
    mu.dump(path)
    data = json.loads(path.read_text())
    assert set(data) == {"n", "radial_segments", "atoms"}
    assert data["radial_segments"][1]["r_hi"] == "inf"
    assert Measure.load(path) == mu


def test_zero_measure():
    z = zero_measure(4)
    assert z.is_zero and z.total_mass() == 0.0
    assert z.ball_mass([0, 0, 0, 0], 1.0) == 0.0
