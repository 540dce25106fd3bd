"""Monotone iteration for ``u = W_{alpha,p}(u^q dsigma) + r``.

Radial measures (atoms at the origin included) are collocated on a
log-spaced radial grid and use the vectorised quadrature of
:mod:`wolffpot.discretize`; purely atomic measures carry one value per atom.
Iteration starts from the subsolution ``c_sub (r + (W sigma)^gamma)`` and is
monotone nondecreasing; every sweep is checked.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import discretize as dz
from .measures import Measure, MeasureError, MollifiedAtom
from .potentials import ParameterError, PotentialParams, finiteness_check, wolff

K_MIN, K_MAX = -80, 40
MONOTONE_SLACK = 1e-12


class SolverError(RuntimeError):
    """Internal consistency violated (monotone trace or sandwich)."""


@dataclass(frozen=True)
class GridSpec:
    per_decade: int = 48
    lo_decades: float = 6.0
    hi_decades: float = 3.0
    off_probes: int = 20
    seed: int = 0


# -- discrete problems ------------------------------------------------------


class RadialProblem:
    """Collocation on radii; ``g`` between knots is a piecewise power."""

    kind = "radial"

    def __init__(self, mu: Measure, params: PotentialParams, grid: GridSpec):
        self.mu = mu
        self.params = params
        R = mu.support_radius
        decades = dz.decade_radii(R * 10.0**-grid.lo_decades, R * 10.0**grid.hi_decades)
        self.nodes = dz.measure_knots(mu, grid.per_decade, grid.lo_decades, grid.hi_decades, extra=decades)
        self.engine = dz.engine_for(mu, self.nodes)
        self.op = dz.WolffOperator(self.engine, params.alpha, params.p, self.nodes)
        rng = np.random.default_rng(grid.seed)
        lo, hi = math.log(R * 10.0 ** -(grid.lo_decades - 1)), math.log(R * 10.0 ** (grid.hi_decades - 1))
        self.off_nodes = np.sort(np.exp(rng.uniform(lo, hi, grid.off_probes)))
        self._off_op = None

    @property
    def radii(self) -> np.ndarray:
        return self.nodes

    def base(self) -> np.ndarray:
        return self.op(np.zeros(len(self.nodes)))

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.op(self.params.q * np.log(u))

    def apply_off(self, u: np.ndarray) -> np.ndarray:
        if self._off_op is None:
            self._off_op = dz.WolffOperator(self.engine, self.params.alpha, self.params.p, self.off_nodes)
        return self._off_op(self.params.q * np.log(u))

    def reconstruct(self, u: np.ndarray, rho) -> np.ndarray:
        """Cubic reconstruction in log-log coordinates for off-node output."""
        spline = CubicSpline(np.log(self.nodes), np.log(u))
        return np.exp(spline(np.log(np.asarray(rho, dtype=float))))


class AtomicProblem:
    """One unknown per mollified atom, evaluated at its centre."""

    kind = "atomic"

    def __init__(self, mu: Measure, params: PotentialParams, grid: GridSpec):
        if mu.radial_segments:
            raise MeasureError("the solver handles radial measures or purely atomic ones, not mixtures")
        self.mu = mu
        self.params = params
        self.centers = [np.asarray(a.center) for a in mu.atoms]
        self.nodes = np.arange(len(mu.atoms))
        # 3 shells per atom: inside, at twice and eight times the radius
        e1 = np.zeros(mu.n)
        e1[0] = 1.0
        self.off_points = [c + f * a.radius * e1 for c, a in zip(self.centers, mu.atoms) for f in (0.5, 2.0, 8.0)]
        self.off_owner = [i for i in range(len(mu.atoms)) for _ in range(3)]
        self.off_nodes = np.array([float(np.linalg.norm(x)) for x in self.off_points])

    @property
    def radii(self) -> np.ndarray:
        return np.array([float(np.linalg.norm(c)) for c in self.centers])

    def _reweighted(self, u) -> Measure:
        q = self.params.q
        atoms = tuple(MollifiedAtom(a.center, a.mass * float(ui) ** q, a.radius) for a, ui in zip(self.mu.atoms, u))
        return Measure(self.mu.n, (), atoms)

    def base(self) -> np.ndarray:
        return np.array([wolff(self.mu, self.params, c).value for c in self.centers])

    def apply(self, u: np.ndarray) -> np.ndarray:
        nu = self._reweighted(u)
        return np.array([wolff(nu, self.params, c).value for c in self.centers])

    def apply_off(self, u: np.ndarray) -> np.ndarray:
        nu = self._reweighted(u)
        return np.array([wolff(nu, self.params, x).value for x in self.off_points])

    def reconstruct(self, u: np.ndarray, rho=None) -> np.ndarray:
        # inside an atom the unknown is its constant value; outside, the
        # solution is defined by one more potential evaluation
        out = np.empty(len(self.off_points))
        for k, (x, i) in enumerate(zip(self.off_points, self.off_owner)):
            a = self.mu.atoms[i]
            if np.linalg.norm(x - self.centers[i]) <= a.radius:
                out[k] = u[i]
            else:
                out[k] = np.nan
        return out


def make_problem(mu: Measure, params: PotentialParams, grid: GridSpec | None = None):
    grid = grid or GridSpec()
    if mu.is_radial:
        return RadialProblem(mu, params, grid)
    return AtomicProblem(mu, params, grid)


# -- envelopes --------------------------------------------------------------


def _dyadic_search(ok, lo: int = K_MIN, hi: int = K_MAX, want: str = "max") -> int | None:
    """Extreme integer ``k`` in ``[lo, hi]`` with ``ok(2^k)``; ``ok`` monotone in ``k``."""
    if want == "max":
        if not ok(2.0**lo):
            return None
        if ok(2.0**hi):
            return hi
        a, b = lo, hi  # ok(a), not ok(b)
    else:
        if not ok(2.0**hi):
            return None
        if ok(2.0**lo):
            return lo
        a, b = hi, lo  # ok(a), not ok(b)
    for _ in range(60):
        if abs(a - b) <= 1:
            break
        m = (a + b) // 2 if want == "max" else -((-(a + b)) // 2)
        if ok(2.0**m):
            a = m
        else:
            b = m
    return a


def trend_fails(values) -> bool:
    """Certified growth: last run of >= 3 strictly increasing values with >= 2x total growth."""
    v = np.asarray(values, dtype=float)
    if len(v) < 3 or not np.all(np.isfinite(v)):
        return bool(len(v) and np.any(np.isinf(v)))
    j = len(v) - 1
    while j > 0 and v[j] > v[j - 1]:
        j -= 1
    run = v[j:]
    return len(run) >= 3 and run[-1] >= 2.0 * run[0]


@dataclass
class Envelope:
    """Explicit sub/supersolution shapes with dyadic constants.

    ``lower = c_sub (r + W^gamma)``; ``upper = c_super (r + W^gamma)``
    (inhomogeneous) or ``c_super (W + W^gamma)`` (homogeneous).
    """

    kind: str
    r: float
    gamma: float
    c_sub: float
    c_super: float | None
    super_ok: bool
    reason: str
    radii: np.ndarray
    base: np.ndarray
    required_super: np.ndarray = field(repr=False, default=None)
    # explicit node values override the formulas (radial model envelopes)
    lower_values: np.ndarray = field(repr=False, default=None)
    upper_values: np.ndarray = field(repr=False, default=None)

    def lower_shape(self, W=None):
        if W is None and self.lower_values is not None:
            return self.lower_values
        W = self.base if W is None else W
        return self.r + W**self.gamma

    def upper_shape(self, W=None):
        if W is None and self.upper_values is not None:
            return self.upper_values
        W = self.base if W is None else W
        if self.kind == "homogeneous":
            return W + W**self.gamma
        return self.r + W**self.gamma

    def lower(self, W=None):
        return self.c_sub * self.lower_shape(W)

    def upper(self, W=None):
        c = self.c_super if self.c_super is not None else math.inf
        return c * self.upper_shape(W)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "r": self.r, "gamma": self.gamma, "c_sub": self.c_sub,
            "c_super": self.c_super, "super_ok": self.super_ok, "reason": self.reason,
        }


def _required_constants(A, U0, r, e):
    """Smallest ``c`` with ``c^e A + r <= c U0`` per probe (bisection in log c)."""
    A = np.asarray(A, dtype=float)
    U0 = np.asarray(U0, dtype=float)
    out = np.full(A.shape, np.nan)
    pos = U0 > 0.0
    if r == 0.0:
        with np.errstate(divide="ignore"):
            out[pos] = (A[pos] / U0[pos]) ** (1.0 / (1.0 - e))
        return out
    lo = np.full(A.shape, -200.0)
    hi = np.full(A.shape, 200.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        c = np.exp(mid)
        ok = c**e * A + r <= c * U0
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    out[pos] = np.exp(hi[pos])
    return out


def decade_samples(radii, values, R: float, decades=range(0, 7)):
    """Values at the nodes nearest ``R 10^-k``, ordered coarse to fine."""
    radii = np.asarray(radii)
    lr = np.log(radii)
    idx = [int(np.argmin(np.abs(lr - math.log(R * 10.0**-k)))) for k in decades]
    return radii[idx], np.asarray(values)[idx]


def build_envelope(problem, params: PotentialParams, kind: str | None = None,
                   base: np.ndarray | None = None) -> Envelope:
    """Largest dyadic ``c_sub`` and smallest dyadic ``c_super`` verified on the nodes."""
    q = params.q
    if q is None:
        raise ParameterError("the solver needs q")
    r = params.r
    kind = kind or ("inhomogeneous" if r > 0.0 else "homogeneous")
    if kind not in ("inhomogeneous", "homogeneous"):
        raise ParameterError("envelope kind must be 'inhomogeneous' or 'homogeneous'")
    W = problem.base() if base is None else base
    env = Envelope(kind, r, params.gamma, 1.0, None, False, "", problem.radii, W)
    L0, U0 = env.lower_shape(), env.upper_shape()
    e = q / (params.p - 1.0)
    if not np.any(W > 0.0):
        env.c_super = 1.0 if r > 0.0 else None
        env.super_ok = r > 0.0
        env.reason = "zero potential"
        return env
    # homogeneity: W((c f)^q dsigma) = c^e W(f^q dsigma), one evaluation each
    B = problem.apply(L0)
    A = problem.apply(U0)
    k_sub = _dyadic_search(lambda c: bool(np.all(c**e * B + r >= c * L0 * (1.0 - 1e-12))), want="max")
    env.c_sub = 2.0**k_sub if k_sub is not None else 2.0**K_MIN
    k_sup = _dyadic_search(lambda c: bool(np.all(c**e * A + r <= c * U0 * (1.0 + 1e-12))), want="min")
    env.required_super = _required_constants(A, U0, r, e)
    if k_sup is None:
        env.reason = f"no supersolution constant up to 2^{K_MAX}"
        return env
    env.c_super = 2.0**k_sup
    env.super_ok = True
    env.reason = "verified on nodes"
    if problem.kind == "radial" and kind == "homogeneous":
        _, samples = decade_samples(problem.radii, env.required_super, problem.mu.support_radius)
        if trend_fails(samples):
            env.super_ok = False
            env.reason = "required supersolution constant grows without bound as |x| -> 0"
    return env


# -- solutions --------------------------------------------------------------


@dataclass
class SolutionField:
    nodes: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    residual: float
    residual_nodes: np.ndarray
    residual_off: float
    off_nodes: np.ndarray
    iterations: int
    converged: bool
    status: str
    trace: list
    envelope: Envelope | None
    base: np.ndarray
    sandwich: tuple = (math.nan, math.nan)
    lower_law: float = math.nan
    monotone: bool = True

    def to_rows(self):
        env = self.envelope
        lower = env.lower() if env else np.full(len(self.values), np.nan)
        upper = env.upper() if env else np.full(len(self.values), np.nan)
        label = self.radii if len(self.radii) == len(self.values) else self.nodes
        for i in range(len(self.values)):
            yield [float(label[i]), float(self.values[i]), float(lower[i]), float(upper[i]),
                   float(self.residual_nodes[i])]

    CSV_HEADER = ["node_radius_or_index", "u", "envelope_lower", "envelope_upper", "residual"]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "residual_off_node": self.residual_off,
            "monotone_trace": self.monotone,
            "sandwich": {"c_lower": self.sandwich[0], "c_upper": self.sandwich[1],
                         "width": self.sandwich[1] / self.sandwich[0] if self.sandwich[0] else math.inf},
            "lower_law_constant": self.lower_law,
            "envelope": self.envelope.to_dict() if self.envelope else None,
            "trace": list(self.trace),
            "nodes": [dict(zip(self.CSV_HEADER, row)) for row in self.to_rows()],
        }

    def to_json(self) -> str:
        return json.dumps(_finite_json(self.to_dict()), indent=2, sort_keys=True)


def _finite_json(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_json(v) for v in obj]
    return obj


def iterate(apply, u0: np.ndarray, r: float, tol: float, max_iter: int, direction: int = 1):
    """Monotone fixed-point sweeps ``u <- apply(u) + r``; ``direction`` +1 up, -1 down."""
    u = np.asarray(u0, dtype=float).copy()
    trace = []
    for it in range(1, max_iter + 1):
        new = apply(u) + r
        if not np.all(np.isfinite(new)):
            raise SolverError("iterate became infinite")
        step = direction * (new - u)
        if np.any(step < -MONOTONE_SLACK * np.maximum(np.abs(u), 1e-300)):
            bad = int(np.argmin(step / np.maximum(np.abs(u), 1e-300)))
            raise SolverError(f"monotone trace violated at node {bad} in sweep {it}")
        change = float(np.max(np.abs(new - u) / np.maximum(np.abs(new), 1e-300)))
        trace.append(change)
        u = new
        if change < tol:
            return u, it, True, trace
    return u, max_iter, False, trace


def solve(mu: Measure, params: PotentialParams, grid: GridSpec | None = None, tol: float = 1e-8,
          max_iter: int = 500, kind: str | None = None, start: str = "sub",
          problem=None) -> SolutionField:
    """Solve ``u = W(u^q dsigma) + r`` by monotone iteration from an explicit envelope."""
    if params.q is None:
        raise ParameterError("the solver needs q")
    if mu.n != params.n:
        raise MeasureError("measure and parameters disagree on n")
    grid = grid or GridSpec()
    r = params.r
    if mu.is_zero:
        radii = dz.log_grid(10.0**-grid.lo_decades, 10.0**grid.hi_decades, grid.per_decade)
        u = np.full(len(radii), r)
        env = Envelope(kind or ("inhomogeneous" if r > 0 else "homogeneous"), r, params.gamma,
                       1.0, 1.0 if r > 0 else None, r > 0, "zero measure", radii, np.zeros(len(radii)))
        status = "converged" if r > 0 else "trivial"
        sw = (1.0, 1.0) if r > 0 else (math.nan, math.nan)
        return SolutionField(radii, radii, u, 0.0, np.zeros(len(radii)), 0.0, np.zeros(0), 1, True,
                             status, [0.0], env, np.zeros(len(radii)), sw, math.nan)
    ok, why = finiteness_check(mu, params)
    if not ok:
        raise MeasureError(f"W sigma is infinite: {why}")
    problem = problem or make_problem(mu, params, grid)
    W = problem.base()
    env = build_envelope(problem, params, kind, base=W)
    if r == 0.0 and not np.any(W > 0.0):
        z = np.zeros(len(W))
        return SolutionField(problem.nodes, problem.radii, z, 0.0, z, 0.0, problem.off_nodes, 0, True,
                             "trivial", [], env, W)
    if start == "sub":
        u0, direction = env.lower(), 1
    elif start == "super":
        if env.c_super is None:
            raise SolverError("no supersolution constant to start from")
        u0, direction = env.upper(), -1
    else:
        raise ValueError("start must be 'sub' or 'super'")
    u, its, conv, trace = iterate(problem.apply, u0, r, tol, max_iter, direction)
    if env.c_super is not None and np.any(u > env.upper() * (1.0 + 1e-6)):
        raise SolverError("iterate exceeded the verified supersolution")
    F = problem.apply(u) + r
    res_nodes = np.abs(u - F) / np.maximum(u, r + 1e-300)
    u_off = problem.reconstruct(u, problem.off_nodes)
    F_off = problem.apply_off(u) + r
    with np.errstate(invalid="ignore"):
        res_off = np.abs(u_off - F_off) / np.maximum(u_off, r + 1e-300)
    res_off = float(np.nanmax(res_off)) if np.any(np.isfinite(res_off)) else 0.0
    field_ = SolutionField(problem.nodes, problem.radii, u, float(res_nodes.max()), res_nodes, res_off,
                           problem.off_nodes, its, conv, "converged" if conv else "non-converged",
                           trace, env, W)
    field_.sandwich, field_.lower_law = certify(field_, env)
    field_.problem = problem
    return field_


def certify(u: SolutionField, envelope: Envelope, r_min: float | None = None,
            r_max: float | None = None) -> tuple[tuple[float, float], float]:
    """``((c_lower, c_upper), c_law)``: ``c_lower L <= u <= c_upper U`` and ``u >= c_law W^gamma``.

    ``L``, ``U`` are the unit-constant envelope shapes; probes are the nodes
    with radius in ``[r_min, r_max]`` (all nodes by default).
    """
    radii = np.asarray(u.radii)
    sel = np.ones(len(radii), dtype=bool)
    if r_min is not None:
        sel &= radii >= r_min
    if r_max is not None:
        sel &= radii <= r_max
    vals = u.values[sel]
    W = envelope.base[sel]
    L = envelope.lower_shape()[sel]
    U = envelope.upper_shape()[sel]
    with np.errstate(divide="ignore", invalid="ignore"):
        c_lower = float(np.min(vals / L))
        c_upper = float(np.max(vals / U))
        law = vals / W**envelope.gamma
    law = float(np.min(law[np.isfinite(law)])) if np.any(np.isfinite(law)) else math.nan
    return (c_lower, c_upper), law
