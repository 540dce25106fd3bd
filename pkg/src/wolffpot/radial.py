"""Radial fractional problem with the max-kernel model of the Riesz potential.

For radial ``sigma`` the Riesz potential is comparable to

    sigma(B(0,|x|)) / |x|^{n-2alpha} + ∫_{|y|>=|x|} |y|^{-(n-2alpha)} dsigma(y),

which is exactly the integral operator with kernel ``max(rho, tau)^{-(n-2alpha)}``
against the radial marginal.  This module solves ``u = K(u^q dsigma) + r``
for that kernel, evaluates the two-term envelope, and builds the standard
example measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import discretize as dz
from .measures import Measure, MeasureError, RadialSegment
from .potentials import ParameterError, PotentialParams
from .solver import Envelope, GridSpec, SolutionField, _dyadic_search, iterate


class ExistenceError(MeasureError):
    """A radial existence predicate fails."""


def model_kernel(rho, tau, n: int, two_alpha: float):
    """``max(rho, tau)^{-(n - 2 alpha)}``."""
    if not 0.0 < two_alpha < n:
        raise ParameterError("two_alpha must lie in (0, n)")
    return np.maximum(rho, tau) ** (-(n - two_alpha))


def _check_radial(mu: Measure, params: PotentialParams):
    if mu.n != params.n:
        raise MeasureError("measure and parameters disagree on n")
    if params.q is None or not 0.0 < params.q < 1.0:
        raise ParameterError("the radial problem needs 0 < q < 1")
    mu.radial_view()


def existence_moments(mu: Measure, params: PotentialParams) -> tuple[float, float]:
    """``(∫_{|y|<1} |y|^{-(n-2a)q} dsigma, ∫_{|y|>=1} |y|^{-(n-2a)} dsigma)``."""
    _check_radial(mu, params)
    k = params.n - params.two_alpha
    return mu.radial_moment_below(1.0, k * params.q), mu.radial_moment_above(1.0, k)


def _require_existence(mu, params):
    below, above = existence_moments(mu, params)
    if not math.isfinite(below):
        raise ExistenceError("∫_{|y|<1} |y|^{-(n-2alpha)q} dsigma diverges")
    if not math.isfinite(above):
        raise ExistenceError("∫_{|y|>=1} |y|^{-(n-2alpha)} dsigma diverges")


@dataclass(frozen=True)
class RadialEnvelope:
    radii: np.ndarray
    k_term: np.ndarray
    tail_term: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.k_term + self.tail_term


def _moments(mu: Measure, params: PotentialParams, rho):
    k = params.n - params.two_alpha
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho <= 0.0):
        raise MeasureError("radii must be positive")
    M = np.array([mu.radial_moment_below(r, k * params.q) for r in rho])
    T = np.array([mu.radial_moment_above(r, k) for r in rho])
    return rho, M, T


def radial_envelope(mu: Measure, params: PotentialParams, rho) -> RadialEnvelope:
    """``k_term = rho^{-(n-2a)} M_q(rho)^{1/(1-q)}`` and ``tail_term = T(rho)^{1/(1-q)}``."""
    _check_radial(mu, params)
    _require_existence(mu, params)
    rho, M, T = _moments(mu, params, rho)
    g = 1.0 / (1.0 - params.q)
    k = params.n - params.two_alpha
    return RadialEnvelope(rho, rho ** (-k) * M**g, T**g)


def ratio_5_2(mu: Measure, params: PotentialParams, rho) -> np.ndarray:
    """``rho^{-(n-2a)(1-q)} M_q(rho) / T(rho)``; ``inf`` where ``T = 0`` and ``M > 0``."""
    _check_radial(mu, params)
    rho, M, T = _moments(mu, params, rho)
    k = params.n - params.two_alpha
    num = rho ** (-k * (1.0 - params.q)) * M
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(T > 0.0, num / np.where(T > 0.0, T, 1.0), np.where(num > 0.0, np.inf, 0.0))
    return out


class ModelOperator:
    """``g -> rho^{-k} ∫_0^rho g dsigma~ + ∫_rho^∞ tau^{-k} g dsigma~`` at the knots."""

    def __init__(self, engine: dz.RadialEngine, n: int, two_alpha: float, radii):
        self.engine = engine
        self.k = n - two_alpha
        self.radii = np.asarray(radii, dtype=float)
        self.inner = engine.interval_rows(0.0, self.radii)
        self.outer = engine.interval_rows(self.radii, max(engine.r_sup, self.radii.max()))
        self.shift = -self.k * engine.lk

    def __call__(self, lg) -> np.ndarray:
        lg = np.asarray(lg, dtype=float)
        a = self.inner.apply(lg)
        b = self.outer.apply(lg + self.shift)
        return self.radii ** (-self.k) * a + b


def radial_solve(mu: Measure, params: PotentialParams, grid: GridSpec | None = None, tol: float = 1e-8,
                 max_iter: int = 500) -> SolutionField:
    """Solve ``u = K(u^q dsigma) + r`` on a radial grid by monotone iteration."""
    _check_radial(mu, params)
    if params.p != 2.0:
        raise ParameterError("the radial model is the Riesz case p = 2")
    grid = grid or GridSpec()
    q, r = params.q, params.r
    if mu.is_zero:
        radii = dz.log_grid(10.0**-grid.lo_decades, 10.0**grid.hi_decades, grid.per_decade)
        u = np.full(len(radii), r)
        z = np.zeros(len(radii))
        return SolutionField(radii, radii, u, 0.0, z, 0.0, np.zeros(0), 1, True,
                             "converged" if r > 0 else "trivial", [0.0], None, z)
    _require_existence(mu, params)
    R = mu.support_radius
    decades = dz.decade_radii(R * 10.0**-grid.lo_decades, R * 10.0**grid.hi_decades)
    knots = dz.measure_knots(mu, grid.per_decade, grid.lo_decades, grid.hi_decades, extra=decades)
    eng = dz.engine_for(mu, knots)
    op = ModelOperator(eng, params.n, params.two_alpha, knots)
    P = op(np.zeros(len(knots)))
    gamma = 1.0 / (1.0 - q)
    L0 = r + P**gamma
    env_vals = radial_envelope(mu, params, knots)
    U0 = r + env_vals.total
    B = op(q * np.log(L0))
    A = op(q * np.log(U0))
    k_sub = _dyadic_search(lambda c: bool(np.all(c**q * B + r >= c * L0 * (1.0 - 1e-12))), want="max")
    k_sup = _dyadic_search(lambda c: bool(np.all(c**q * A + r <= c * U0 * (1.0 + 1e-12))), want="min")
    env = Envelope("radial", r, gamma, 2.0 ** (k_sub if k_sub is not None else -80),
                   2.0**k_sup if k_sup is not None else None, k_sup is not None,
                   "verified on nodes" if k_sup is not None else "no supersolution constant found",
                   knots, P)
    env.lower_values, env.upper_values = L0, U0

    def apply(u):
        return op(q * np.log(u))

    u, its, conv, trace = iterate(apply, env.lower(), r, tol, max_iter, 1)
    F = apply(u) + r
    res = np.abs(u - F) / np.maximum(u, r + 1e-300)
    rng = np.random.default_rng(grid.seed)
    off = np.sort(np.exp(rng.uniform(math.log(R * 10.0 ** -(grid.lo_decades - 1)),
                                     math.log(R * 10.0 ** (grid.hi_decades - 1)), grid.off_probes)))
    from scipy.interpolate import CubicSpline

    u_off = np.exp(CubicSpline(np.log(knots), np.log(u))(np.log(off)))
    F_off = ModelOperator(eng, params.n, params.two_alpha, off)(q * np.log(u)) + r
    res_off = float(np.max(np.abs(u_off - F_off) / np.maximum(u_off, r + 1e-300)))
    field_ = SolutionField(knots, knots, u, float(res.max()), res, res_off, off, its, conv,
                           "converged" if conv else "non-converged", trace, env, P)
    E = env_vals.total + r
    field_.sandwich = (float(np.min(u / E)), float(np.max(u / E)))
    field_.lower_law = float(np.min(u / P**gamma))
    field_.radial_envelope = env_vals
    return field_


def certify_radial(u: SolutionField, r_min: float, r_max: float) -> tuple[float, float]:
    """``(c_lower, c_upper)`` with ``c_lower E <= u <= c_upper E`` on ``[r_min, r_max]``."""
    sel = (u.radii >= r_min) & (u.radii <= r_max)
    E = u.radial_envelope.total[sel] + u.envelope.r
    v = u.values[sel]
    return float(np.min(v / E)), float(np.max(v / E))


def make_counterexample(n: int, two_alpha: float, q: float, beta: float) -> Measure:
    """``|y|^{-s} log^{-beta}(1/|y|)`` on ``|y| < 1/2`` with ``s = (1-q) n + 2 alpha q``."""
    if not 0.0 < q < 1.0:
        raise ParameterError("q must lie in (0, 1)")
    if not 0.0 < two_alpha < n:
        raise ParameterError("two_alpha must lie in (0, n)")
    if not beta > 1.0:
        raise ParameterError("beta must exceed 1 (otherwise the mass near 0 is infinite)")
    s = (1.0 - q) * n + two_alpha * q
    assert two_alpha < s < n
    return Measure(n, (RadialSegment(1.0, s, beta, 0.0, 0.5, 1.0 / math.e),))


def make_powerlaw_example(n: int, two_alpha: float, q: float, s: float) -> Measure:
    """``|y|^{-s}`` on the unit ball, ``2 alpha < s < n - (n - 2 alpha) q``."""
    if not 0.0 < two_alpha < n:
        raise ParameterError("two_alpha must lie in (0, n)")
    if not 0.0 < q < 1.0:
        raise ParameterError("q must lie in (0, 1)")
    hi = n - (n - two_alpha) * q
    if not two_alpha < s < hi:
        raise ParameterError(f"s must lie in the open interval ({two_alpha:g}, {hi:g})")
    return Measure(n, (RadialSegment(1.0, s, 0.0, 0.0, 1.0),))


STUDY_HEADER = ["rho", "u", "k_term", "tail_term", "envelope", "ratio_5_2", "riesz_potential"]


def radial_study(mu: Measure, params: PotentialParams, grid: GridSpec | None = None, tol: float = 1e-8,
                 max_iter: int = 500):
    """Solve and tabulate ``(rho, u, k_term, tail_term, envelope, ratio_5_2, riesz_potential)``."""
    sol = radial_solve(mu, params, grid, tol, max_iter)
    rho = sol.radii
    env = sol.radial_envelope
    ratio = ratio_5_2(mu, params, rho)
    eng = dz.engine_for(mu, rho)
    riesz = dz.WolffOperator(eng, params.two_alpha / 2.0, 2.0, rho)(np.zeros(len(rho)))
    rows = np.column_stack([rho, sol.values, env.k_term, env.tail_term, env.total, ratio, riesz])
    return sol, rows
