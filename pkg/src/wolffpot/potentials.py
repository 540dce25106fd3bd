"""Wolff and Riesz potentials of :class:`~wolffpot.measures.Measure` objects.

``W_{alpha,p} sigma(x) = ∫_0^∞ (sigma(B(x,t)) / t^{n - alpha p})^{1/(p-1)} dt/t``

The t-integral is split into an exact zero head (below the first contact
with the support), an adaptive Gauss-Kronrod middle part in ``log t`` with
breakpoints at every support-contact radius, and a closed-form tail once
the ball swallows a compact support.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .measures import EXPONENT_TOL, Measure, MeasureError, MollifiedAtom

DEFAULT_RTOL = 1e-9


class ParameterError(ValueError):
    """Exponents outside the admissible range."""


@dataclass(frozen=True)
class PotentialParams:
    """Dimension and exponents; all exponent arithmetic lives here.

    ``q`` and ``r`` are only needed for the integral equation, so ``q`` may be
    left unset when only potentials are evaluated.
    """

    n: int
    alpha: float
    p: float = 2.0
    q: float | None = None
    r: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError("n must be an integer >= 1")
        for name in ("alpha", "p", "r"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if not self.p > 1.0:
            raise ParameterError("p must exceed 1")
        if not self.alpha > 0.0:
            raise ParameterError("alpha must be positive")
        if not self.n - self.alpha * self.p > 0.0:
            raise ParameterError("need n - alpha*p > 0 (alpha < n/p)")
        if self.q is not None and not 0.0 < self.q < self.p - 1.0:
            raise ParameterError("q must lie in (0, p-1)")
        if self.r < 0.0:
            raise ParameterError("r must be nonnegative")

    @property
    def two_alpha(self) -> float:
        return 2.0 * self.alpha

    @property
    def kernel_exponent(self) -> float:
        """``n - alpha p``."""
        return self.n - self.alpha * self.p

    @property
    def inv(self) -> float:
        """``1/(p-1)``."""
        return 1.0 / (self.p - 1.0)

    def _need_q(self) -> float:
        if self.q is None:
            raise ParameterError("this quantity needs the sublinear exponent q")
        return self.q

    @property
    def gamma(self) -> float:
        """``(p-1)/(p-1-q)``, the envelope exponent."""
        q = self._need_q()
        return (self.p - 1.0) / (self.p - 1.0 - q)

    @property
    def beta_w(self) -> float:
        """``(p-1) q/(p-1-q)``, the weight exponent of the pointwise condition."""
        q = self._need_q()
        return (self.p - 1.0) * q / (self.p - 1.0 - q)

    @property
    def solution_scaling(self) -> float:
        """Exponent ``1/(p-1-q)`` of the mass scaling of solutions when r = 0."""
        return 1.0 / (self.p - 1.0 - self._need_q())

    def with_(self, **kw) -> PotentialParams:
        d = dict(n=self.n, alpha=self.alpha, p=self.p, q=self.q, r=self.r)
        d.update(kw)
        return PotentialParams(**d)


@dataclass(frozen=True)
class PotentialValue:
    value: float
    abs_error_bound: float = 0.0
    truncation: tuple[float, float] = (0.0, 0.0)
    head: float = 0.0
    tail: float = 0.0
    reason: str | None = None

    def __float__(self) -> float:
        return self.value

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def finiteness_check(mu: Measure, params: PotentialParams) -> tuple[bool, str]:
    """Decide ``∫_1^∞ (sigma(B(0,t))/t^{n-alpha p})^{1/(p-1)} dt/t < ∞`` from exponents.

    Only unbounded radial segments can spoil the tail.  A pure power
    ``rho^{-s}`` reaching infinity gives ``sigma(B(0,t)) ~ t^{n-s}`` (or
    ``log t`` / a constant), and the integrand then decays iff ``s > alpha p``.
    """
    if mu.n != params.n:
        raise MeasureError("measure and parameters disagree on n")
    ap = params.alpha * params.p
    for seg in mu.radial_segments:
        if seg.bounded:
            continue
        if seg.s <= ap + EXPONENT_TOL:
            return False, f"tail exponent: density |y|^-{seg.s:g} at infinity needs s > alpha*p = {ap:g}"
    return True, "ok"


def _local_divergence(mu: Measure, params: PotentialParams, d: float) -> str | None:
    if d != 0.0:
        return None
    ap = params.alpha * params.p
    for seg in mu.radial_segments:
        if seg.r_lo > 0.0:
            continue
        # sigma(B(0,t)) ~ t^{n-s} log^{-beta}: integrand ~ t^{(ap-s)/(p-1)-1}
        if seg.s > ap + EXPONENT_TOL:
            return "local divergence"
        if abs(seg.s - ap) <= EXPONENT_TOL and seg.beta * params.inv <= 1.0:
            return "local divergence"
    return None


def contact_radii(mu: Measure, x: np.ndarray) -> tuple[float, float, list[float]]:
    """First-contact radius, full-swallow radius and kinks of ``t -> sigma(B(x,t))``."""
    d = float(np.linalg.norm(x))
    first = math.inf
    last = 0.0
    kinks: list[float] = []
    for seg in mu.radial_segments:
        if d < seg.r_lo:
            first = min(first, seg.r_lo - d)
        elif d > seg.r_hi:
            first = min(first, d - seg.r_hi)
        else:
            first = 0.0
        last = max(last, d + seg.r_hi)
        for edge in (seg.r_lo, seg.r_hi):
            if math.isfinite(edge):
                kinks += [abs(d - edge), d + edge]
    for atom in mu.atoms:
        dist = float(np.linalg.norm(np.asarray(atom.center) - x))
        first = min(first, max(0.0, dist - atom.radius))
        last = max(last, dist + atom.radius)
        kinks += [abs(dist - atom.radius), dist + atom.radius]
    return first, last, kinks


def _quad(f, a, b, rtol, limit=200):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol, limit=limit)
    if caught:
        # QUADPACK's own estimate is unreliable after a warning
        err = max(err, 1e2 * rtol * abs(val))
    return val, err


def wolff(mu: Measure, params: PotentialParams, x, rtol: float = DEFAULT_RTOL,
          t_min: float = 0.0) -> PotentialValue:
    """Wolff potential ``W_{alpha,p} mu(x)`` with an error bound.

    ``t_min > 0`` gives the truncated potential ``∫_{t_min}^∞``.
    """
    if mu.n != params.n:
        raise MeasureError("measure and parameters disagree on n")
    x = mu.point(x)
    if mu.is_zero:
        return PotentialValue(0.0)
    ok, why = finiteness_check(mu, params)
    if not ok:
        return PotentialValue(math.inf, math.inf, reason=why)
    d = float(np.linalg.norm(x))
    why = _local_divergence(mu, params, d) if t_min <= 0.0 else None
    if why:
        return PotentialValue(math.inf, math.inf, reason=why)

    kexp = params.kernel_exponent
    inv = params.inv

    def integrand(v: float) -> float:
        t = math.exp(v)
        m = mu.ball_mass(x, t)
        if m <= 0.0:
            return 0.0
        return math.exp((math.log(m) - kexp * v) * inv)

    first, last, kinks = contact_radii(mu, x)
    scale = max(d, mu.support_radius if math.isfinite(mu.support_radius) else 1.0, 1e-300)
    head = head_err = 0.0
    if t_min > 0.0:
        first = max(first, t_min)
    if first > 0.0:
        t_lo = first
        if t_lo >= last:
            mass = mu.total_mass()
            tail = mass**inv * (params.p - 1.0) / kexp * t_lo ** (-kexp * inv)
            return PotentialValue(tail, 1e-15 * tail, (t_lo, t_lo), 0.0, tail)
    else:
        t_lo = 1e-9 * scale
        if math.isfinite(last):
            t_lo = min(t_lo, 1e-9 * last)
        m1 = mu.ball_mass(x, t_lo)
        m0 = mu.ball_mass(x, t_lo / math.e)
        if m1 > 0.0:
            k1 = math.log(m1 / m0) if m0 > 0 else params.n
            rate = (k1 - kexp) * inv
            if rate <= 0.0:
                return PotentialValue(math.inf, math.inf, reason="local divergence")
            head = (m1 / t_lo**kexp) ** inv / rate
            head_err = 1e-2 * head

    t_hi = last
    pts = sorted({math.log(k) for k in kinks if t_lo < k < t_hi})
    total = 0.0
    err = 0.0
    a = math.log(t_lo)
    if math.isfinite(t_hi):
        b = math.log(t_hi)
        # decade sub-panels keep QUADPACK from missing narrow shells
        grid = sorted(set(pts) | set(np.arange(a, b, math.log(10.0))[1:].tolist()))
        edges = [a] + [g for g in grid if a < g < b] + [b]
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, e = _quad(integrand, lo, hi, rtol)
            total += val
            err += e
        mass = mu.total_mass()
        tail = mass**inv * (params.p - 1.0) / kexp * t_hi ** (-kexp * inv)
    else:
        b = max(pts[-1] if pts else a, a) + 1.0
        edges = [a] + [g for g in pts if a < g < b] + [b]
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, e = _quad(integrand, lo, hi, rtol)
            total += val
            err += e
        val, e = _quad(integrand, b, np.inf, rtol, limit=400)
        total += val
        err += e
        tail = 0.0
    value = head + total + tail
    bound = err + head_err + 1e-12 * abs(value)
    return PotentialValue(value, bound, (t_lo, t_hi), head, tail)


def riesz(mu: Measure, two_alpha: float, x, rtol: float = DEFAULT_RTOL) -> PotentialValue:
    """Riesz potential ``I_{2 alpha} mu(x) = W_{alpha,2} mu(x)``."""
    if not 0.0 < two_alpha < mu.n:
        raise ParameterError("Riesz order must lie in (0, n)")
    return wolff(mu, PotentialParams(mu.n, two_alpha / 2.0, 2.0), x, rtol=rtol)


class BaseTable:
    """``W_{alpha,p} mu`` sampled once for reuse as a weight.

    Radial measures get a log-spaced knot table (piecewise power between
    knots); purely atomic measures get one value per atom, taken at its
    centre.  The table is immutable after construction.
    """

    def __init__(self, mu: Measure, params: PotentialParams, per_decade: int = 64,
                 r_min: float | None = None, r_max: float | None = None):
        from . import discretize as dz

        self.mu = mu
        self.params = params
        self.radial = mu.is_radial
        if mu.is_zero:
            raise MeasureError("base table of the zero measure is not needed")
        ok, why = finiteness_check(mu, params)
        if not ok:
            raise MeasureError(f"base potential is infinite: {why}")
        if self.radial:
            R = mu.support_radius
            lo = min(1e-8 * R, r_min if r_min else math.inf)
            hi = max(1e3 * R, r_max if r_max else 0.0)
            self.knots = dz.measure_knots(mu, per_decade, extra=[lo, hi])
            self.engine = dz.engine_for(mu, self.knots)
            zero = np.zeros(len(self.knots))
            self.values = dz.WolffOperator(self.engine, params.alpha, params.p, self.knots)(zero)
            # interpolation error, measured at geometric midpoints
            mids = np.sqrt(self.knots[1:] * self.knots[:-1])
            direct = dz.WolffOperator(self.engine, params.alpha, params.p, mids)(zero)
            fit = self.engine.interpolate(self.values, mids)
            self.fit_error = float(np.max(np.abs(fit / direct - 1.0)))
            self.atom_values = None
        else:
            if mu.radial_segments:
                raise MeasureError("weighted potentials need a radial or a purely atomic measure")
            self.knots = self.values = self.engine = None
            self.atom_values = np.array([wolff(mu, params, a.center).value for a in mu.atoms])
            self.fit_error = 0.0
        self.values_log = None if self.values is None else np.log(self.values)

    def __call__(self, rho):
        """Table value at radius ``rho`` (radial case)."""
        return self.engine.interpolate(self.values, rho)


def weighted_wolff(mu: Measure, params: PotentialParams, weight_exponent: float, x,
                   table: BaseTable | None = None) -> PotentialValue:
    """``W_{alpha,p}((W_{alpha,p} mu)^w dmu)(x)`` with ``w = weight_exponent``."""
    if weight_exponent == 0.0:
        return wolff(mu, params, x)
    x = mu.point(x)
    if mu.is_zero:
        return PotentialValue(0.0)
    if table is None:
        table = BaseTable(mu, params)
    if not table.radial:
        w = table.atom_values ** weight_exponent
        if not np.all(np.isfinite(w)):
            return PotentialValue(math.inf, math.inf, reason="base potential infinite on an atom")
        atoms = tuple(MollifiedAtom(a.center, a.mass * wi, a.radius) for a, wi in zip(mu.atoms, w))
        return wolff(Measure(mu.n, (), atoms), params, x)
    from . import discretize as dz

    d = float(np.linalg.norm(x))
    if d == 0.0:
        return PotentialValue(math.inf, math.inf, reason="weighted potential is evaluated at |x| > 0 only")
    op = dz.WolffOperator(table.engine, params.alpha, params.p, [d])
    value = float(op(weight_exponent * table.values_log)[0])
    if not math.isfinite(value):
        return PotentialValue(math.inf, math.inf, reason="weighted mass diverges")
    rel = abs(weight_exponent) * table.fit_error * params.inv + 1e-8
    return PotentialValue(value, rel * value)
