"""Desk-scale checks of the existence conditions.

Each check evaluates a ratio on a family of probes and turns the sample
sequence (ordered from coarse to fine scale) into a verdict:

* ``fails``: the last run of strictly increasing values has length >= 3 and
  grows by at least 2x (or some sample is infinite);
* ``holds``: the finest three values vary by at most 4x, or do not increase;
* ``inconclusive`` otherwise.

Finite sampling cannot prove a supremum over all balls, so verdicts are
trend statements and suprema are empirical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import discretize as dz
from .measures import Measure, MeasureError
from .potentials import BaseTable, PotentialParams, finiteness_check, weighted_wolff, wolff
from .radial import existence_moments, ratio_5_2
from .solver import trend_fails

CONDITION_IDS = ("energy_ball", "pointwise_kappa", "weaker_ball", "radial_existence", "radial_ratio")


def verdict(values) -> str:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return "holds"
    if trend_fails(v):
        return "fails"
    if v.size < 3:
        return "inconclusive"
    tail = v[-3:]
    if np.all(tail > 0.0) and tail.max() <= 4.0 * tail.min():
        return "holds"
    if np.all(np.diff(tail) <= 0.0):
        return "holds"
    return "inconclusive"


def growth_exponent(scales, values) -> float:
    """Least-squares slope of ``log value`` against ``log scale``."""
    x = np.log(np.asarray(scales, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(x[ok], y[ok], 1)[0])


@dataclass
class ConditionReport:
    condition_id: str
    samples: list
    supremum: float
    verdict: str
    parameters: dict
    notes: list = field(default_factory=list)
    growth_exponent: float = math.nan

    @classmethod
    def from_samples(cls, cid, samples, parameters, scales=None, notes=None):
        vals = [v for _, v in samples]
        sup = float(max(vals)) if vals else 0.0
        rep = cls(cid, samples, sup, verdict(vals), parameters, list(notes or []))
        if scales is not None and len(vals) >= 2:
            rep.growth_exponent = growth_exponent(scales, vals)
        return rep

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.samples], dtype=float)

    def to_dict(self) -> dict:
        def num(x):
            x = float(x)
            return x if math.isfinite(x) else ("inf" if x > 0 else ("nan" if math.isnan(x) else "-inf"))

        return {
            "condition_id": self.condition_id,
            "samples": [{"probe": p, "value": num(v)} for p, v in self.samples],
            "supremum": num(self.supremum),
            "verdict": self.verdict,
            "parameters": self.parameters,
            "growth_exponent": num(self.growth_exponent),
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _param_dict(params: PotentialParams, **extra) -> dict:
    d = {"n": params.n, "alpha": params.alpha, "p": params.p, "q": params.q, "r": params.r}
    d.update(extra)
    return d


def _coarse_to_fine(items, scale):
    return sorted(items, key=lambda it: -scale(it))


# -- energy condition -------------------------------------------------------


def _energy_radial(sub: Measure, params: PotentialParams, s: float, radius: float, per_decade: int) -> float:
    knots = dz.measure_knots(sub, per_decade, lo_decades=6.0, hi_decades=0.5)
    eng = dz.engine_for(sub, knots)
    W = dz.WolffOperator(eng, params.alpha, params.p, knots)(np.zeros(len(knots)))
    rows = eng.interval_rows(0.0, radius)
    return float(rows.apply(s * np.log(W))[0])


def _energy_atomic(sub: Measure, params: PotentialParams, s: float, samples: int, seed: int) -> float:
    n = sub.n
    if len(sub.atoms) == 1:
        # W is radial about a lone atom's centre: Gauss-Legendre in the radius
        atom = sub.atoms[0]
        c = np.asarray(atom.center)
        x, w = np.polynomial.legendre.leggauss(32)
        u, w = 0.5 * (x + 1.0), 0.5 * w
        e1 = np.zeros(n)
        e1[0] = 1.0
        vals = np.array([wolff(sub, params, c + atom.radius * ui * e1).value for ui in u])
        return atom.mass * float(np.sum(w * n * u ** (n - 1) * vals**s))
    sob = qmc.Sobol(d=n, scramble=True, seed=seed)
    pts = 2.0 * sob.random(max(samples, 2 ** int(math.ceil(math.log2(samples))) * 4)) - 1.0
    pts = pts[np.sum(pts * pts, axis=1) < 1.0][:samples]
    total = 0.0
    for atom in sub.atoms:
        c = np.asarray(atom.center)
        vals = np.array([wolff(sub, params, c + atom.radius * y).value for y in pts])
        total += atom.mass * float(np.mean(vals**s))
    return total


def energy_ball_ratio(mu: Measure, params: PotentialParams, s: float, probes,
                      per_decade: int = 24, samples: int = 256, seed: int = 0) -> ConditionReport:
    """``∫_B (W sigma_B)^s dsigma / sigma(B)`` over probe balls ``(center, radius)``."""
    if not s > 0.0:
        raise ValueError("s must be positive")
    notes = []
    out = []
    for center, radius in _coarse_to_fine(list(probes), lambda pr: pr[1]):
        c = mu.point(center)
        sub = mu.restricted_to_ball(c, radius)
        mass = sub.total_mass()
        label = {"center": [float(v) for v in c], "radius": float(radius)}
        if not mass > 0.0:
            notes.append(f"probe {label} has zero mass; skipped")
            continue
        if sub.is_radial and not np.any(c):
            integral = _energy_radial(sub, params, s, radius, per_decade)
        elif not sub.radial_segments:
            integral = _energy_atomic(sub, params, s, samples, seed)
        else:
            raise MeasureError("off-centre probes need a purely atomic restriction")
        out.append((label, integral / mass))
    scales = [p["radius"] for p, _ in out]
    return ConditionReport.from_samples("energy_ball", out, _param_dict(params, s=s), scales, notes)


# -- pointwise condition ----------------------------------------------------


def pointwise_kappa(mu: Measure, params: PotentialParams, probes, table: BaseTable | None = None) -> ConditionReport:
    """``W((W sigma)^{beta_w} dsigma)(x) / (W sigma(x) + W sigma(x)^gamma)`` at probe points."""
    pd = _param_dict(params, beta_w=params.beta_w, gamma=params.gamma)
    if mu.is_zero:
        return ConditionReport("pointwise_kappa", [], 0.0, "holds", pd, ["zero measure: holds vacuously"])
    ok, why = finiteness_check(mu, params)
    if not ok:
        raise MeasureError(f"W sigma is infinite: {why}")
    pts = [mu.point(x) for x in probes]
    pts = _coarse_to_fine(pts, lambda x: float(np.linalg.norm(x)))
    if table is None:
        norms = [float(np.linalg.norm(x)) for x in pts if np.any(x)]
        table = BaseTable(mu, params, r_min=min(norms, default=None), r_max=max(norms, default=None))
    notes, out = [], []
    for x in pts:
        d = float(np.linalg.norm(x))
        if table.radial:
            W = float(dz.WolffOperator(table.engine, params.alpha, params.p, [d])(np.zeros(len(table.knots)))[0])
        else:
            W = wolff(mu, params, x).value
        label = {"x": [float(v) for v in x], "norm": d}
        if W == 0.0:
            notes.append(f"W sigma vanishes at {label}; skipped")
            continue
        num = weighted_wolff(mu, params, params.beta_w, x, table).value
        out.append((label, num / (W + W**params.gamma)))
    scales = [p["norm"] for p, _ in out]
    return ConditionReport.from_samples("pointwise_kappa", out, pd, scales, notes)


# -- q-dependent ball condition ---------------------------------------------


def weaker_ball_condition(mu: Measure, params: PotentialParams, probes,
                          table: BaseTable | None = None) -> ConditionReport:
    """``∫_{B(x,r/2)} (I sigma)^{q/(1-q)} dsigma / [sigma(B(x,r)) (1 + ∫_r^∞ sigma(B(x,t)) t^{-(n-2a)} dt/t)^{q/(1-q)}]``."""
    mu.radial_view()
    q = params.q
    e = q / (1.0 - q)
    rp = params.with_(p=2.0, q=None, r=0.0)
    probes = _coarse_to_fine(list(probes), lambda pr: pr[1])
    if table is None:
        radii = [r for _, r in probes]
        table = BaseTable(mu, rp, r_min=min(radii) / 4.0, r_max=max(radii) * 4.0)
    notes, out = [], []
    lg = e * np.log(table.values)
    for center, radius in probes:
        x = mu.point(center)
        d = float(np.linalg.norm(x))
        label = {"center": [float(v) for v in x], "radius": float(radius)}
        mass = mu.ball_mass(x, radius)
        if not mass > 0.0:
            notes.append(f"probe {label} has zero mass; skipped")
            continue
        num = float(table.engine.rows(d, 0.5 * radius).apply(lg)[0])
        tail = wolff(mu, rp, x, t_min=radius).value
        out.append((label, num / (mass * (1.0 + tail) ** e)))
    scales = [p["radius"] for p, _ in out]
    return ConditionReport.from_samples("weaker_ball", out, _param_dict(params), scales, notes)


# -- radial criteria --------------------------------------------------------


def radial_existence(mu: Measure, params: PotentialParams) -> ConditionReport:
    """Both radial moments finite: ``∫_{|y|<1}|y|^{-(n-2a)q}`` and ``∫_{|y|>=1}|y|^{-(n-2a)}``."""
    below, above = existence_moments(mu, params)
    samples = [({"moment": "below_1", "exponent": (params.n - params.two_alpha) * params.q}, below),
               ({"moment": "above_1", "exponent": params.n - params.two_alpha}, above)]
    ok = math.isfinite(below) and math.isfinite(above)
    notes = [] if ok else [f"{p['moment']} diverges" for p, v in samples if not math.isfinite(v)]
    return ConditionReport("radial_existence", samples, max(below, above), "holds" if ok else "fails",
                           _param_dict(params), notes)


def radial_ratio(mu: Measure, params: PotentialParams, rho: float) -> float:
    """``rho^{-(n-2a)(1-q)} ∫_{|y|<rho}|y|^{-(n-2a)q} dsigma / ∫_{|y|>=rho}|y|^{-(n-2a)} dsigma``."""
    return float(ratio_5_2(mu, params, [rho])[0])


def radial_ratio_report(mu: Measure, params: PotentialParams, radii) -> ConditionReport:
    radii = sorted(radii, reverse=True)
    vals = ratio_5_2(mu, params, radii)
    samples = [({"rho": float(r)}, float(v)) for r, v in zip(radii, vals)]
    return ConditionReport.from_samples("radial_ratio", samples, _param_dict(params), radii)


# -- default probe families ---------------------------------------------------


def dyadic_balls(n: int, kmin: int = 1, kmax: int = 10, R: float = 1.0):
    """Origin-centred balls ``B(0, R 2^-k)``."""
    return [((0.0,) * n, R * 2.0**-k) for k in range(kmin, kmax + 1)]


def decade_points(n: int, kmin: int, kmax: int, R: float = 1.0):
    """Points ``R 10^-k e_1``."""
    pts = []
    for k in range(kmin, kmax + 1):
        x = np.zeros(n)
        x[0] = R * 10.0**-k
        pts.append(x)
    return pts
