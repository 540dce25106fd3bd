"""Vectorised quadrature for potentials of reweighted radial measures.

The solver, the weighted potentials and the condition checks all need
``W_{alpha,p}(g dsigma)`` for a radial measure ``sigma`` and a positive radial
weight ``g`` that changes from call to call (``u^q`` during iteration).  The
weight is given by its values on a log-spaced knot grid and reconstructed
as a piecewise power (linear in log-log coordinates); every quadrature node
and weight that does not depend on ``g`` is precomputed once, so one
application of the operator is a handful of numpy reductions.

Geometry: for ``|x| = d`` the ball mass splits into
  * the core ``|y| < rho_c`` below the grid, treated as a point mass at the
    origin whose size comes from a power-law extrapolation of ``g``;
  * the full shells ``|y| < t - d`` (cumulative sums over base cells);
  * the partial shells ``|t - d| < |y| < t + d``, weighted by the cap fraction.
"""

from __future__ import annotations

import math

import numpy as np

from .measures import MeasureError, cap_fraction

LN10 = math.log(10.0)

_X6, _W6 = np.polynomial.legendre.leggauss(6)
_X6 = 0.5 * (_X6 + 1.0)
_W6 = 0.5 * _W6


def _cosine_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    u = 0.5 * (x + 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * u)), 0.5 * w * 0.5 * np.pi * np.sin(np.pi * u)


_XC, _WC = _cosine_rule(12)
_XT, _WT = _cosine_rule(8)


def log_grid(lo: float, hi: float, per_decade: int, extra=(), grade: bool = False,
             grade_ratio: float = 1.15, grade_span: float = 10.0,
             grade_floor: float = 1e-9, plain=()) -> np.ndarray:
    """Log-spaced radii from ``lo`` to ``hi`` plus any ``extra`` radii inside.

    Uniform points closer than a quarter step to an extra radius are
    dropped.  With ``grade`` each extra radius ``e`` also gets points at
    ``e exp(±D_j)``, ``D_j = grade_span h / grade_ratio^j`` down to
    ``grade_floor``, so the local spacing is proportional to the distance
    from ``e`` (potentials have derivative singularities at density jumps).
    ``plain`` radii are inserted like extras but never graded.
    """
    k = max(1, int(round(per_decade * math.log10(hi / lo))))
    pts = np.geomspace(lo, hi, k + 1)
    h = LN10 / per_decade

    def inside(vals):
        return np.array(sorted({e for e in vals if lo < e < hi and math.isfinite(e)}))

    extra, plain = inside(extra), inside(plain)
    fixed = np.union1d(extra, plain)
    if fixed.size:
        lp = np.log(pts)
        near = np.min(np.abs(lp[:, None] - np.log(fixed)[None, :]), axis=1) < 0.25 * h
        near[[0, -1]] = False
        pts = np.union1d(pts[~near], fixed)
    if grade and extra.size:
        top = grade_span * h
        levels = int(math.ceil(math.log(top / grade_floor) / math.log(grade_ratio)))
        steps = top * grade_ratio ** -np.arange(levels + 1.0)
        fine = (extra[:, None] * np.exp(np.concatenate([steps, -steps]))[None, :]).ravel()
        pts = np.union1d(pts, fine[(fine > lo) & (fine < hi)])
    # merge coincident points, keeping fixed radii exactly
    keep = np.ones(len(pts), dtype=bool)
    close = np.diff(np.log(pts)) < 1e-12
    for i in np.nonzero(close)[0]:
        keep[i if pts[i] not in fixed else i + 1] = False
    keep[[0, -1]] = True
    return pts[keep]


def _log_panels(a: float, b: float, width: float, cuts=()) -> np.ndarray:
    edges = [a] + sorted(c for c in cuts if a < c < b) + [b]
    out = [a]
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = max(1, int(math.ceil((hi - lo) / width)))
        out.extend(np.linspace(lo, hi, k + 1)[1:].tolist())
    return np.asarray(out)


class RadialEngine:
    """Precomputed quadrature for integrals of ``g dsigma`` over balls.

    Parameters
    ----------
    segments : radial components of sigma (bounded support required)
    n : ambient dimension
    knots : increasing radii carrying the weight values
    core_ratio : the core cutoff is ``core_ratio * knots[0]``
    """

    def __init__(self, segments, n: int, knots, core_ratio: float = 1e-2,
                 shell_panel: float = LN10 / 3.0):
        self.n = n
        self.segments = tuple(segments)
        if any(not s.bounded for s in self.segments):
            raise MeasureError("the discretised engine needs a compactly supported measure")
        self.knots = np.asarray(knots, dtype=float)
        if self.knots.ndim != 1 or len(self.knots) < 2 or np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be a strictly increasing array of length >= 2")
        self.lk = np.log(self.knots)
        self.rho_c = core_ratio * self.knots[0]
        self.r_sup = max((s.r_hi for s in self.segments), default=0.0)
        self.shell_panel = shell_panel
        self.edges = sorted({e for s in self.segments for e in (s.r_lo, s.r_hi) if e > 0.0})
        per_decade = max(1, int(round(1.0 / max(np.diff(self.lk).min() / LN10, 1e-6))))
        if self.r_sup > self.rho_c:
            cells = log_grid(self.rho_c, self.r_sup, min(per_decade, 24),
                             extra=list(self.knots) + self.edges)
        else:
            cells = np.array([])
        self.cell_edges = cells
        if len(cells) >= 2:
            lo, hi = np.log(cells[:-1]), np.log(cells[1:])
            v = lo[:, None] + (hi - lo)[:, None] * _X6[None, :]
            rho = np.exp(v)
            w = (hi - lo)[:, None] * _W6[None, :] * rho * self.marginal(rho)
            self._b_rho = rho.ravel()
            self._b_w = w.ravel()
            self._b_cell = np.repeat(np.arange(len(cells) - 1), len(_X6))
        else:
            self._b_rho = np.zeros(0)
            self._b_w = np.zeros(0)
            self._b_cell = np.zeros(0, dtype=int)
        self._b_interp = self._interp(self._b_rho)
        self.n_cells = max(len(cells) - 1, 0)

    # -- weight reconstruction ----------------------------------------------

    def marginal(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.zeros(rho.shape)
        for seg in self.segments:
            out += seg.marginal(self.n, rho)
        return out

    def _interp(self, rho):
        v = np.log(np.maximum(rho, 1e-300))
        j = np.clip(np.searchsorted(self.lk, v) - 1, 0, len(self.lk) - 2)
        theta = (v - self.lk[j]) / (self.lk[j + 1] - self.lk[j])
        return j, theta

    def _eval_log(self, lg, interp):
        j, theta = interp
        return (1.0 - theta) * lg[j] + theta * lg[j + 1]

    def interpolate(self, values, rho):
        """Piecewise-power reconstruction of knot ``values`` at ``rho``."""
        lg = np.log(np.asarray(values, dtype=float))
        return np.exp(self._eval_log(lg, self._interp(np.asarray(rho, dtype=float))))

    def core_mass(self, lg) -> float:
        """``∫_{|y|<rho_c} g dsigma`` with ``g`` extended as a power below the first knot."""
        if self.rho_c <= 0.0 or not any(s.r_lo < self.rho_c for s in self.segments):
            return 0.0
        slope = (lg[1] - lg[0]) / (self.lk[1] - self.lk[0])
        base = math.exp(lg[0] - slope * self.lk[0])
        total = 0.0
        for seg in self.segments:
            total += seg.moment(self.n, 0.0, self.rho_c, -slope)
        return base * total

    def cell_masses(self, lg) -> np.ndarray:
        g = np.exp(self._eval_log(lg, self._b_interp))
        return np.bincount(self._b_cell, self._b_w * g, minlength=self.n_cells)

    def total_mass(self, lg) -> float:
        return self.core_mass(lg) + float(self.cell_masses(lg).sum())

    # -- row construction ----------------------------------------------------

    def rows(self, d, t) -> "Rows":
        """Rows computing ``∫_{B(x,t)} g dsigma`` for ``|x| = d`` (``d = 0`` allowed)."""
        d, t = np.broadcast_arrays(np.atleast_1d(np.asarray(d, dtype=float)),
                                   np.atleast_1d(np.asarray(t, dtype=float)))
        d, t = d.ravel(), t.ravel()
        idx = np.arange(d.size)
        pieces = []
        full = t - d
        cum_hi, p = self._cum_pieces(np.where(full > self.rho_c, full, 0.0), idx)
        pieces.append(p)
        lo = np.maximum(np.abs(d - t), self.rho_c)
        hi = np.minimum(d + t, self.r_sup)
        m = (d > 0.0) & (lo < hi)
        pieces.append(self._partial_pieces(d[m], t[m], lo[m], hi[m], idx[m]))
        core = (t > d).astype(float)
        return self._finish(d.size, pieces, cum_hi, np.zeros(d.size, dtype=int), core)

    def interval_rows(self, a, b) -> "Rows":
        """Rows computing ``∫_{a<|y|<b} g dsigma``."""
        a, b = np.broadcast_arrays(np.atleast_1d(np.asarray(a, dtype=float)),
                                   np.atleast_1d(np.asarray(b, dtype=float)))
        a, b = a.ravel(), b.ravel()
        idx = np.arange(a.size)
        cum_hi, p_hi = self._cum_pieces(np.where(b > self.rho_c, b, 0.0), idx)
        cum_lo, p_lo = self._cum_pieces(np.where(a > self.rho_c, a, 0.0), idx)
        p_lo = (p_lo[0], -p_lo[1], p_lo[2])
        core = ((a <= self.rho_c) & (b > 0.0)).astype(float)
        return self._finish(a.size, [p_hi, p_lo], cum_hi, cum_lo, core)

    def _cum_pieces(self, a, idx):
        """Complete-cell counts below ``a`` and the GL pieces ``[cell edge, a]``."""
        edges = self.cell_edges
        if len(edges) < 2:
            z = np.zeros(0)
            return np.zeros(a.size, dtype=int), (z, z, np.zeros(0, dtype=int))
        a = np.minimum(a, edges[-1])
        k = np.clip(np.searchsorted(edges, a, side="right") - 1, 0, len(edges) - 1)
        k = np.where(a > edges[0], k, 0)
        m = a > edges[k]
        lo, hi = np.log(edges[k[m]]), np.log(a[m])
        v = lo[:, None] + (hi - lo)[:, None] * _X6[None, :]
        rho = np.exp(v)
        w = (hi - lo)[:, None] * _W6[None, :] * rho * self.marginal(rho)
        rows = np.repeat(idx[m], len(_X6))
        return k, (rho.ravel(), w.ravel(), rows)

    def _partial_pieces(self, d, t, lo, hi, idx):
        """Cap-weighted cosine-mapped GL panels in ``log rho`` over ``[lo, hi]``."""
        if d.size == 0:
            z = np.zeros(0)
            return z, z, np.zeros(0, dtype=int)
        a, b = np.log(lo), np.log(hi)
        cuts = np.log(np.asarray(self.edges)) if self.edges else np.zeros(0)
        brk = np.sort(np.concatenate(
            [a[:, None], b[:, None], np.clip(cuts[None, :], a[:, None], b[:, None])], axis=1), axis=1)
        s_lo, s_hi = brk[:, :-1].ravel(), brk[:, 1:].ravel()
        s_row = np.repeat(np.arange(d.size), brk.shape[1] - 1)
        width = s_hi - s_lo
        keep = width > 0.0
        s_lo, width, s_row = s_lo[keep], width[keep], s_row[keep]
        k = np.maximum(1, np.ceil(width / self.shell_panel - 1e-12)).astype(int)
        p_sub = np.repeat(np.arange(k.size), k)
        j = np.arange(p_sub.size) - np.repeat(np.cumsum(k) - k, k)
        pw = (width / k)[p_sub]
        p_lo = s_lo[p_sub] + j * pw
        p_row = s_row[p_sub]
        v = p_lo[:, None] + pw[:, None] * _XC[None, :]
        rho = np.exp(v).ravel()
        rr = np.repeat(p_row, len(_XC))
        w = (pw[:, None] * _WC[None, :]).ravel() * rho
        w = w * self.marginal(rho) * cap_fraction(self.n, rho, d[rr], t[rr])
        return rho, w, idx[rr]

    def _finish(self, n_rows, pieces, cum_hi, cum_lo, core) -> "Rows":
        rho = np.concatenate([p[0] for p in pieces])
        w = np.concatenate([p[1] for p in pieces])
        row = np.concatenate([p[2] for p in pieces]).astype(int)
        keep = w != 0.0
        return Rows(self, n_rows, rho[keep], w[keep], row[keep],
                    np.asarray(cum_hi, dtype=int), np.asarray(cum_lo, dtype=int),
                    np.asarray(core, dtype=float))


class Rows:
    """Linear functionals of ``g`` sharing the engine's base cells."""

    def __init__(self, engine, n_rows, rho, w, row, cum_hi, cum_lo, core):
        self.engine = engine
        self.n_rows = n_rows
        self.w = w
        self.row = row
        self.interp = engine._interp(rho)
        self.cum_hi = cum_hi
        self.cum_lo = cum_lo
        self.core = core

    def apply(self, lg, cells=None, core=None) -> np.ndarray:
        eng = self.engine
        if cells is None:
            cells = eng.cell_masses(lg)
        if core is None:
            core = eng.core_mass(lg)
        cum = np.concatenate([[0.0], np.cumsum(cells)])
        g = np.exp(eng._eval_log(lg, self.interp))
        out = np.bincount(self.row, self.w * g, minlength=self.n_rows).astype(float)
        out += cum[self.cum_hi] - cum[self.cum_lo]
        if core:
            hit = self.core > 0.0
            out[hit] += self.core[hit] * core
        return out


class WolffOperator:
    """``g -> W_{alpha,p}(g dsigma)`` at fixed evaluation radii (all positive)."""

    def __init__(self, engine: RadialEngine, alpha: float, p: float, radii,
                 t_panel: float = LN10 / 3.0, head_ratio: float = 1e-6):
        self.engine = engine
        self.alpha = alpha
        self.p = p
        self.kexp = engine.n - alpha * p
        if self.kexp <= 0.0:
            raise ValueError("need n - alpha p > 0")
        self.inv = 1.0 / (p - 1.0)
        self.radii = np.asarray(radii, dtype=float)
        if np.any(self.radii <= 0.0):
            raise ValueError("evaluation radii must be positive")
        ds, ts, tw, owner = [], [], [], []
        head_rows, head_coef, tail = [], [], []
        edges = [0.0] + list(engine.edges)
        R = engine.r_sup
        for i, d in enumerate(self.radii):
            contact = min(
                (max(s.r_lo - d, d - s.r_hi, 0.0) for s in engine.segments), default=math.inf
            )
            if engine.rho_c > 0.0 and any(s.r_lo < engine.rho_c for s in engine.segments):
                contact = min(contact, max(d - engine.rho_c, 0.0))
            T = d + R
            tail.append(T)
            if not math.isfinite(contact) or contact >= T:
                head_rows.append(-1)
                head_coef.append(0.0)
                continue
            if contact > 0.0:
                t_lo = contact
                head_rows.append(-1)
                head_coef.append(0.0)
            else:
                t_lo = head_ratio * d
                head_rows.append(len(ds))
                # ∫_0^{t_lo} (m(t_lo)(t/t_lo)^n / t^kexp)^inv dt/t
                head_coef.append(t_lo ** (-engine.n * self.inv) * t_lo ** ((engine.n - self.kexp) * self.inv)
                                 / ((engine.n - self.kexp) * self.inv))
                ds.append(d)
                ts.append(t_lo)
                tw.append(0.0)
                owner.append(i)
            cuts = [math.log(c) for e in edges for c in (abs(d - e), d + e) if c > 0.0]
            pan = _log_panels(math.log(t_lo), math.log(T), t_panel, cuts)
            width = np.diff(pan)[:, None]
            v = (pan[:-1, None] + width * _XT[None, :]).ravel()
            wv = (width * _WT[None, :]).ravel()
            tt = np.exp(v)
            ds.extend([d] * len(tt))
            ts.extend(tt.tolist())
            tw.extend((wv * tt ** (-self.kexp * self.inv)).tolist())
            owner.extend([i] * len(tt))
        self.t = np.asarray(ts)
        self.t_weight = np.asarray(tw)
        self.owner = np.asarray(owner, dtype=int)
        self.head_rows = np.asarray(head_rows, dtype=int)
        self.head_coef = np.asarray(head_coef)
        self.T = np.asarray(tail)
        self.rows = engine.rows(np.asarray(ds), self.t)
        self.tail_coef = (p - 1.0) / self.kexp * self.T ** (-self.kexp * self.inv)

    def __call__(self, lg) -> np.ndarray:
        eng = self.engine
        lg = np.asarray(lg, dtype=float)
        cells = eng.cell_masses(lg)
        core = eng.core_mass(lg)
        m = self.rows.apply(lg, cells, core)
        m = np.maximum(m, 0.0)
        contrib = self.t_weight * m**self.inv
        out = np.bincount(self.owner, contrib, minlength=len(self.radii))
        has_head = self.head_rows >= 0
        out[has_head] += self.head_coef[has_head] * m[self.head_rows[has_head]] ** self.inv
        total = core + float(cells.sum())
        out += self.tail_coef * total**self.inv
        return out


def measure_knots(mu, per_decade: int = 48, lo_decades: float = 6.0, hi_decades: float = 3.0,
                  extra=(), grade: bool = True) -> np.ndarray:
    """Default grid ``[10^-lo R, 10^hi R]`` around the support radius ``R``.

    Segment edges are knots, with ``grade`` refinement levels on each side:
    potentials have derivative singularities there.  ``extra`` points are
    inserted as knots and widen the range if needed.
    """
    R = mu.support_radius
    if not (R > 0.0 and math.isfinite(R)):
        raise MeasureError("grid construction needs a nonzero compactly supported measure")
    edges = sorted({e for s in mu.radial_view() for e in (s.r_lo, s.r_hi) if e > 0.0})
    lo = min([R * 10.0**-lo_decades] + [e for e in extra if e > 0.0])
    hi = max([R * 10.0**hi_decades] + list(extra))
    pts = log_grid(lo, hi, per_decade, extra=edges, grade=grade, plain=[e for e in extra if e > 0.0])
    return pts


def decade_radii(lo: float, hi: float) -> list:
    """Powers of ten inside ``[lo, hi]``; used as exact output knots."""
    return [10.0**k for k in range(math.ceil(math.log10(lo) - 1e-12), math.floor(math.log10(hi) + 1e-12) + 1)]


def engine_for(mu, knots, **kw) -> RadialEngine:
    return RadialEngine(mu.radial_view(), mu.n, knots, **kw)


def radial_profile(mu, alpha: float, p: float, radii, per_decade: int = 24) -> np.ndarray:
    """``W_{alpha,p} mu`` at positive radii for a radial compactly supported measure."""
    radii = np.asarray(radii, dtype=float)
    knots = measure_knots(mu, per_decade, extra=[radii.min(), radii.max()])
    eng = engine_for(mu, knots)
    return WolffOperator(eng, alpha, p, radii)(np.zeros(len(knots)))
