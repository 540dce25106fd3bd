import json
import math

import numpy as np
import pytest

from wolffpot.measures import point_mass, zero_measure
from wolffpot.potentials import PotentialParams
from wolffpot.solver import GridSpec, SolverError, _dyadic_search, certify, iterate, solve, trend_fails

ATOM_PARAMS = PotentialParams(3, 1.0, 2.0, 0.5, 1.0)


@pytest.fixture(scope="module")
def atom_solution():
    return solve(point_mass(3, 1.0, 0.1), ATOM_PARAMS)


@pytest.fixture(scope="module")
def powerlaw_solution(powerlaw, frac_params):
    return solve(powerlaw, frac_params)


def test_zero_measure_constant_solution():
    sol = solve(zero_measure(3), ATOM_PARAMS.with_(r=2.0))
    assert np.all(sol.values == 2.0) and sol.iterations == 1 and sol.converged
    sol1 = solve(zero_measure(3), ATOM_PARAMS)
    assert sol1.sandwich == (1.0, 1.0)
    assert sol1.envelope.c_sub == sol1.envelope.c_super == 1.0


def test_zero_measure_homogeneous_is_trivial():
    sol = solve(zero_measure(3), ATOM_PARAMS.with_(r=0.0))
    assert sol.status == "trivial" and np.all(sol.values == 0.0)


def test_atom_inhomogeneous(atom_solution):
    sol = atom_solution
    assert sol.converged and sol.residual < 1e-6 and sol.residual_off < 1e-5
    lo, hi = sol.sandwich
    assert 0.0 < lo <= hi and hi / lo < 50.0
    assert sol.lower_law > 0.0
    assert np.all(sol.values > 0.0)
    env = sol.envelope
    assert np.all(env.lower() <= env.upper())


def test_downward_trace_agrees(atom_solution):
    down = solve(point_mass(3, 1.0, 0.1), ATOM_PARAMS, start="super")
    assert down.converged
    np.testing.assert_allclose(down.values, atom_solution.values, rtol=10 * 1e-8)


def test_powerlaw_homogeneous(powerlaw_solution):
    sol = powerlaw_solution
    env = sol.envelope
    assert env.kind == "homogeneous" and env.super_ok and env.c_super is not None
    assert sol.residual < 1e-6 and sol.residual_off < 1e-5
    assert sol.lower_law > 0.0


def test_counterexample_supersolution_fails(counterexample, frac_params):
    sol = solve(counterexample, frac_params)
    assert sol.converged
    assert not sol.envelope.super_ok
    assert "grows" in sol.envelope.reason


def test_mass_scaling(powerlaw, frac_params, powerlaw_solution):
    big = solve(powerlaw.scaled(4.0), frac_params)
    np.testing.assert_allclose(big.values, 16.0 * powerlaw_solution.values, rtol=1e-5)


def test_certify_window(powerlaw_solution):
    (lo, hi), law = certify(powerlaw_solution, powerlaw_solution.envelope, 1e-4, 1e2)
    full, _ = certify(powerlaw_solution, powerlaw_solution.envelope)
    assert full[0] <= lo <= hi <= full[1]
    assert law > 0.0


def test_iterate_detects_nonmonotone_sweep():
    with pytest.raises(SolverError):
        iterate(lambda u: 0.5 * u, np.ones(3), 0.0, 1e-12, 10, 1)


def test_trend_and_dyadic_helpers():
    assert trend_fails([1.0, 1.5, 2.5])
    assert not trend_fails([1.0, 1.5, 1.9])
    assert not trend_fails([3.0, 2.0, 1.0])
    assert trend_fails([1.0, math.inf, 2.0])
    assert _dyadic_search(lambda c: c <= 8.0, want="max") == 3
    assert _dyadic_search(lambda c: c >= 0.25, want="min") == -2
    assert _dyadic_search(lambda c: False, want="min") is None


def test_outputs(atom_solution):
    rows = list(atom_solution.to_rows())
    assert len(rows) == len(atom_solution.values) and len(rows[0]) == 5
    data = json.loads(atom_solution.to_json())
    assert {"sandwich", "residual", "iterations", "envelope", "nodes"} <= set(data)
    assert set(data["nodes"][0]) == set(atom_solution.CSV_HEADER)


def test_off_probes_seeded(powerlaw, frac_params):
    a = solve(powerlaw, frac_params, GridSpec(per_decade=16, seed=3))
    b = solve(powerlaw, frac_params, GridSpec(per_decade=16, seed=3))
    assert np.array_equal(a.off_nodes, b.off_nodes) and np.array_equal(a.values, b.values)
