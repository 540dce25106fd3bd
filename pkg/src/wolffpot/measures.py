"""Radial and atomic measures with computable ball masses.

A :class:`Measure` is a finite sum of radial power-log density components
centred at the origin and mollified atoms (mass spread uniformly over a
small ball).  Everything downstream only needs the ball-mass oracle
``sigma(B(x, t))`` and, for radial measures, moments of ``|y|^{-e}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, special

# exponents closer than this are treated as equal when picking closed forms
EXPONENT_TOL = 1e-12


class MeasureError(ValueError):
    """Invalid measure description or unsupported operation."""


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n: int, radius: float = 1.0) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * radius**n


def _betainc_split(a: float, b: float, x, y):
    """``I_x(a, b)`` given both ``x`` and ``y = 1 - x``, each accurate where small."""
    x = np.clip(x, 0.0, 1.0)
    y = np.clip(y, 0.0, 1.0)
    return np.where(x <= 0.5, special.betainc(a, b, x), 1.0 - special.betainc(b, a, y))


def cap_fraction(n: int, rho, d, t):
    """Fraction of the sphere ``|y| = rho`` lying in the open ball ``B(x, t)``.

    ``d = |x|``.  Vectorised over all arguments.  The cap with half-angle
    ``theta`` (``cos theta = (rho^2 + d^2 - t^2) / (2 rho d)``) is measured
    with the regularized incomplete beta function.
    """
    rho, d, t = np.broadcast_arrays(
        np.asarray(rho, dtype=float), np.asarray(d, dtype=float), np.asarray(t, dtype=float)
    )
    out = np.empty(rho.shape, dtype=float)
    centred = d <= 0.0
    out[centred] = (rho[centred] < t[centred]).astype(float)
    m = ~centred
    if np.any(m):
        r, dd, tt = rho[m], d[m], t[m]
        # 1 - cos(theta) and 1 + cos(theta) in factored form: no cancellation
        # when t is tiny against rho and d
        with np.errstate(divide="ignore", invalid="ignore"):
            below = (tt - (r - dd)) * (tt + (r - dd)) / (2.0 * r * dd)
            above = ((r + dd) - tt) * ((r + dd) + tt) / (2.0 * r * dd)
        # nearest and farthest points of the sphere from x are |rho - d|, rho + d
        none = tt <= np.abs(r - dd)
        full = tt >= r + dd
        if n == 1:
            frac = np.full(r.shape, 0.5)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                c0 = (r * r + dd * dd - tt * tt) / (2.0 * r * dd)
            x = np.nan_to_num(below * above)
            half = 0.5 * _betainc_split((n - 1) / 2.0, 0.5, x, np.nan_to_num(c0 * c0))
            frac = np.where(r * r + dd * dd >= tt * tt, half, 1.0 - half)
        frac = np.where(none, 0.0, np.where(full, 1.0, frac))
        out[m] = frac
    return out if out.ndim else float(out)


def _cap_volume(n: int, radius, a, gap=None):
    """Volume of the part of ``B(0, radius)`` beyond the hyperplane at signed distance ``a``.

    ``gap = radius - a`` may be passed when it is known more accurately than
    the difference.
    """
    radius = np.asarray(radius, dtype=float)
    a = np.asarray(a, dtype=float)
    gap = radius - a if gap is None else np.asarray(gap, dtype=float)
    vol = ball_volume(n, 1.0) * radius**n
    x = gap * (radius + a) / radius**2
    cap = 0.5 * vol * _betainc_split((n + 1) / 2.0, 0.5, x, (a / radius) ** 2)
    cap = np.where(a >= 0.0, cap, vol - cap)
    return np.where(gap <= 0.0, 0.0, np.where(a <= -radius, vol, cap))


def ball_intersection_volume(n: int, h, t, dist):
    """Volume of ``B(c, h) ∩ B(x, t)`` with ``|c - x| = dist`` (vectorised)."""
    h, t, dist = np.broadcast_arrays(
        np.asarray(h, dtype=float), np.asarray(t, dtype=float), np.asarray(dist, dtype=float)
    )
    small = np.minimum(h, t)
    out = np.where(dist <= np.abs(h - t), ball_volume(n, 1.0) * small**n, 0.0)
    lens = (dist > np.abs(h - t)) & (dist < h + t)
    if np.any(lens):
        dd, hh, tt = dist[lens], h[lens], t[lens]
        a1 = (hh * hh + (dd - tt) * (dd + tt)) / (2.0 * dd)
        a2 = (tt * tt + (dd - hh) * (dd + hh)) / (2.0 * dd)
        g1 = (tt - (dd - hh)) * (tt + (dd - hh)) / (2.0 * dd)
        g2 = (hh - (dd - tt)) * (hh + (dd - tt)) / (2.0 * dd)
        out = out.copy()
        out[lens] = _cap_volume(n, hh, a1, g1) + _cap_volume(n, tt, a2, g2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RadialSegment:
    """Density ``c * rho^-s * log(e*R/rho)^-beta`` on ``r_lo < |y| < r_hi``.

    ``R`` is ``log_scale``; ``log_scale = 1/e`` gives the plain ``log(1/rho)``.
    """

    c: float
    s: float
    beta: float = 0.0
    r_lo: float = 0.0
    r_hi: float = 1.0
    log_scale: float = 1.0

    def __post_init__(self):
        vals = (self.c, self.s, self.beta, self.r_lo, self.log_scale)
        if not all(math.isfinite(v) for v in vals) or math.isnan(self.r_hi):
            raise MeasureError("radial segment parameters must be finite")
        if self.c <= 0.0:
            raise MeasureError("radial segment coefficient c must be positive")
        if not 0.0 <= self.r_lo < self.r_hi:
            raise MeasureError("radial segment needs 0 <= r_lo < r_hi")
        if self.log_scale <= 0.0:
            raise MeasureError("log_scale must be positive")
        if self.beta != 0.0:
            if math.isinf(self.r_hi):
                raise MeasureError("log-weighted segments must have finite r_hi")
            if self.r_hi >= math.e * self.log_scale:
                raise MeasureError("log factor must stay positive: need r_hi < e*log_scale")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.r_hi)

    def log_factor(self, rho):
        return 1.0 + np.log(self.log_scale / np.asarray(rho, dtype=float))

    def density(self, rho):
        """Density at radius ``rho`` (zero outside the segment)."""
        rho = np.asarray(rho, dtype=float)
        inside = (rho > self.r_lo) & (rho < self.r_hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.c * rho ** (-self.s)
            if self.beta != 0.0:
                val = val * self.log_factor(rho) ** (-self.beta)
        return np.where(inside, val, 0.0)

    def marginal(self, n: int, rho):
        """Radial marginal ``omega_{n-1} f(rho) rho^{n-1}``."""
        rho = np.asarray(rho, dtype=float)
        return sphere_area(n) * self.density(rho) * rho ** (n - 1)

    def exponent(self, n: int, e: float) -> float:
        """Power of rho in the moment integrand ``rho^{-e} f(rho) rho^{n-1}``."""
        return n - 1.0 - self.s - e

    def diverges_at_zero(self, n: int, e: float) -> bool:
        if self.r_lo > 0.0:
            return False
        k = self.exponent(n, e)
        if abs(k + 1.0) <= EXPONENT_TOL:
            return self.beta <= 1.0
        return k < -1.0

    def diverges_at_infinity(self, n: int, e: float) -> bool:
        if self.bounded:
            return False
        k = self.exponent(n, e)
        # log-weighted segments are bounded, so only pure powers reach here
        if abs(k + 1.0) <= EXPONENT_TOL:
            return self.beta <= 1.0
        return k > -1.0

    def moment(self, n: int, a: float, b: float, e: float = 0.0) -> float:
        """``∫_{a<|y|<b} |y|^{-e} dsigma`` for this segment; ``inf`` only by the divergence predicates."""
        a = max(a, self.r_lo)
        b = min(b, self.r_hi)
        if not a < b:
            return 0.0
        if a == 0.0 and self.diverges_at_zero(n, e):
            return math.inf
        if math.isinf(b) and self.diverges_at_infinity(n, e):
            return math.inf
        k = self.exponent(n, e)
        w = sphere_area(n) * self.c
        if self.beta == 0.0:
            if abs(k + 1.0) <= EXPONENT_TOL:
                return w * math.log(b / a)
            kp = k + 1.0
            hi = 0.0 if math.isinf(b) else b**kp
            lo = 0.0 if a == 0.0 else a**kp
            return w * (hi - lo) / kp
        if abs(k + 1.0) <= EXPONENT_TOL:
            lb = float(self.log_factor(b))
            if self.beta == 1.0:
                return w * (math.inf if a == 0.0 else math.log(float(self.log_factor(a)) / lb))
            la_term = 0.0 if a == 0.0 else float(self.log_factor(a)) ** (1.0 - self.beta)
            return w * (lb ** (1.0 - self.beta) - la_term) / (self.beta - 1.0)
        return w * _log_grid_quad(self, k, a, b)

    def clipped(self, r_lo: float, r_hi: float) -> RadialSegment | None:
        lo, hi = max(self.r_lo, r_lo), min(self.r_hi, r_hi)
        if not lo < hi:
            return None
        return RadialSegment(self.c, self.s, self.beta, lo, hi, self.log_scale)

    def scaled(self, lam: float) -> RadialSegment:
        return RadialSegment(self.c * lam, self.s, self.beta, self.r_lo, self.r_hi, self.log_scale)


def _log_grid_quad(seg: RadialSegment, k: float, a: float, b: float) -> float:
    # integrate rho^k log^-beta in v = log rho, piecewise over decades
    lr = seg.log_scale

    def f(v):
        return math.exp((k + 1.0) * v) * (1.0 + math.log(lr) - v) ** (-seg.beta)

    vb = math.log(b)
    if a == 0.0:
        # substitute a finite window plus the exponentially small remainder
        va = vb - min(60.0 / max(k + 1.0, 1e-3), 100.0)
        head_lo = -np.inf
    else:
        va = math.log(a)
        head_lo = None
    edges = np.linspace(va, vb, max(2, int(math.ceil((vb - va) / 2.0)) + 1))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    if head_lo is not None:
        total += integrate.quad(f, head_lo, va, epsabs=0.0, epsrel=1e-10, limit=200)[0]
    return total


@dataclass(frozen=True)
class MollifiedAtom:
    """Mass spread uniformly over the closed ball ``B(center, radius)``."""

    center: tuple[float, ...]
    mass: float
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not all(math.isfinite(c) for c in self.center):
            raise MeasureError("atom center must be finite")
        if not (self.mass > 0.0 and math.isfinite(self.mass)):
            raise MeasureError("atom mass must be positive and finite")
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise MeasureError("atom radius must be positive and finite")

    def ball_mass(self, n: int, x: np.ndarray, t) -> np.ndarray:
        dist = float(np.linalg.norm(np.asarray(self.center) - x))
        frac = ball_intersection_volume(n, self.radius, t, dist) / ball_volume(n, self.radius)
        return self.mass * np.minimum(frac, 1.0)

    def as_segment(self, n: int) -> RadialSegment:
        """The same measure written as a uniform radial density (atom centred at the origin)."""
        return RadialSegment(self.mass / ball_volume(n, self.radius), 0.0, 0.0, 0.0, self.radius)


@dataclass(frozen=True)
class Measure:
    n: int
    radial_segments: tuple[RadialSegment, ...] = ()
    atoms: tuple[MollifiedAtom, ...] = ()

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise MeasureError("dimension n must be an integer >= 1")
        object.__setattr__(self, "radial_segments", tuple(self.radial_segments))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        for seg in self.radial_segments:
            if seg.diverges_at_zero(self.n, 0.0):
                raise MeasureError("radial segment is not locally finite at the origin")
        for atom in self.atoms:
            if len(atom.center) != self.n:
                raise MeasureError("atom center dimension does not match n")

    # -- structure -----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.radial_segments and not self.atoms

    @property
    def is_radial(self) -> bool:
        return all(not any(atom.center) for atom in self.atoms)

    def radial_view(self) -> tuple[RadialSegment, ...]:
        """All components as origin-centred radial segments."""
        if not self.is_radial:
            raise MeasureError("operation needs a radial measure (no off-centre atoms)")
        return self.radial_segments + tuple(a.as_segment(self.n) for a in self.atoms)

    @property
    def support_radius(self) -> float:
        """Radius of the smallest origin-centred ball containing the support."""
        r = 0.0
        for seg in self.radial_segments:
            r = max(r, seg.r_hi)
        for atom in self.atoms:
            r = max(r, float(np.linalg.norm(atom.center)) + atom.radius)
        return r

    def total_mass(self) -> float:
        m = sum(seg.moment(self.n, 0.0, math.inf, 0.0) for seg in self.radial_segments)
        return m + sum(atom.mass for atom in self.atoms)

    def scaled(self, lam: float) -> Measure:
        return Measure(
            self.n,
            tuple(seg.scaled(lam) for seg in self.radial_segments),
            tuple(MollifiedAtom(a.center, a.mass * lam, a.radius) for a in self.atoms),
        )

    def translated(self, shift: Sequence[float]) -> Measure:
        if self.radial_segments:
            raise MeasureError("only purely atomic measures can be translated")
        shift = np.asarray(shift, dtype=float)
        return Measure(
            self.n, (),
            tuple(MollifiedAtom(tuple(np.asarray(a.center) + shift), a.mass, a.radius) for a in self.atoms),
        )

    # -- oracles -------------------------------------------------------------

    def point(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.n,):
            raise MeasureError(f"point must have {self.n} coordinates")
        if not np.all(np.isfinite(x)):
            raise MeasureError("point coordinates must be finite")
        return x

    def ball_mass(self, x, t: float) -> float:
        """``sigma(B(x, t))`` for the open ball."""
        x = self.point(x)
        t = float(t)
        if not (math.isfinite(t) and t > 0.0):
            raise MeasureError("ball radius t must be positive and finite")
        d = float(np.linalg.norm(x))
        total = sum(_segment_ball_mass(seg, self.n, d, t) for seg in self.radial_segments)
        for atom in self.atoms:
            total += float(atom.ball_mass(self.n, x, t))
        return total

    def radial_moment_below(self, rho: float, e: float) -> float:
        """``∫_{|y|<rho} |y|^{-e} dsigma``."""
        if not rho > 0.0:
            raise MeasureError("rho must be positive")
        return sum(seg.moment(self.n, 0.0, rho, e) for seg in self.radial_view())

    def radial_moment_above(self, rho: float, e: float) -> float:
        """``∫_{|y|>=rho} |y|^{-e} dsigma``."""
        if not rho > 0.0:
            raise MeasureError("rho must be positive")
        return sum(seg.moment(self.n, rho, math.inf, e) for seg in self.radial_view())

    def restricted_to_ball(self, center, radius: float) -> Measure:
        """Restriction to ``B(center, radius)``.

        Radial components are clipped only for origin-centred balls; atoms
        must lie entirely inside or outside the ball.
        """
        c = self.point(center)
        origin = not np.any(c)
        segs = []
        if self.radial_segments:
            if not origin:
                raise MeasureError("restricting radial components needs an origin-centred ball")
            segs = [s for s in (seg.clipped(0.0, radius) for seg in self.radial_segments) if s]
        atoms = []
        for atom in self.atoms:
            dist = float(np.linalg.norm(np.asarray(atom.center) - c))
            if dist + atom.radius <= radius:
                atoms.append(atom)
            elif dist - atom.radius < radius:
                if origin and dist == 0.0:
                    segs.append(atom.as_segment(self.n).clipped(0.0, radius))
                else:
                    raise MeasureError("atom straddles the restriction ball")
        return Measure(self.n, tuple(segs), tuple(atoms))

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "radial_segments": [
                {
                    "c": s.c, "s": s.s, "beta": s.beta, "r_lo": s.r_lo,
                    "r_hi": "inf" if math.isinf(s.r_hi) else s.r_hi,
                    "log_scale": s.log_scale,
                }
                for s in self.radial_segments
            ],
            "atoms": [
                {"center": list(a.center), "mass": a.mass, "radius": a.radius} for a in self.atoms
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Measure:
        try:
            n = data["n"]
            if isinstance(n, bool) or not isinstance(n, int):
                raise MeasureError("n must be an integer")
            segs = []
            for s in data.get("radial_segments", []):
                r_hi = s["r_hi"]
                r_hi = math.inf if r_hi == "inf" else float(r_hi)
                segs.append(RadialSegment(float(s["c"]), float(s["s"]), float(s.get("beta", 0.0)),
                                          float(s.get("r_lo", 0.0)), r_hi, float(s.get("log_scale", 1.0))))
            atoms = [MollifiedAtom(tuple(a["center"]), float(a["mass"]), float(a["radius"]))
                     for a in data.get("atoms", [])]
        except (KeyError, TypeError) as exc:
            raise MeasureError(f"malformed measure description: {exc}") from exc
        return cls(n, tuple(segs), tuple(atoms))

    @classmethod
    def load(cls, path: str | Path) -> Measure:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise MeasureError(f"malformed measure JSON: {exc}") from exc
        return cls.from_dict(data)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def zero_measure(n: int) -> Measure:
    return Measure(n)


def lebesgue(n: int, radius: float = math.inf) -> Measure:
    """Lebesgue measure on ``B(0, radius)`` (all of R^n by default)."""
    return Measure(n, (RadialSegment(1.0, 0.0, 0.0, 0.0, radius),))


def point_mass(n: int, mass: float = 1.0, radius: float = 0.01, center: Iterable[float] | None = None) -> Measure:
    center = tuple(center) if center is not None else (0.0,) * n
    return Measure(n, (), (MollifiedAtom(center, mass, radius),))


def _segment_ball_mass(seg: RadialSegment, n: int, d: float, t: float) -> float:
    if d == 0.0:
        return seg.moment(n, 0.0, t, 0.0)
    if seg.bounded and t >= d + seg.r_hi:
        return seg.moment(n, 0.0, math.inf, 0.0)
    total = seg.moment(n, 0.0, t - d, 0.0) if t > d else 0.0
    lo = max(abs(d - t), seg.r_lo)
    hi = min(d + t, seg.r_hi)
    if lo < hi:
        total += _partial_shell_mass(seg, n, d, t, lo, hi)
    return total


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
# cosine map u -> (1 - cos(pi u))/2 clusters nodes at both panel ends, where
# the cap fraction has square-root type behaviour
_CM_X = 0.5 * (1.0 - np.cos(0.5 * np.pi * (_GL_X + 1.0)))
_CM_W = _GL_W * 0.25 * np.pi * np.sin(0.5 * np.pi * (_GL_X + 1.0))


def shell_rule(lo: float, hi: float, panel: float = 0.5 * math.log(10.0)):
    """Nodes and weights for ``∫_lo^hi dρ`` on log panels with cosine-mapped Gauss-Legendre.

    ``lo = 0`` uses a single linear panel.
    """
    if lo <= 0.0:
        return hi * _CM_X, hi * _CM_W
    a, b = math.log(lo), math.log(hi)
    k = max(1, int(math.ceil((b - a) / panel)))
    edges = np.linspace(a, b, k + 1)
    width = np.diff(edges)[:, None]
    v = edges[:-1, None] + width * _CM_X[None, :]
    rho = np.exp(v)
    return rho.ravel(), (width * _CM_W[None, :] * rho).ravel()


def _partial_shell_mass(seg, n, d, t, lo, hi) -> float:
    rho, w = shell_rule(lo, hi)
    return float(np.sum(w * seg.marginal(n, rho) * cap_fraction(n, rho, d, t)))
