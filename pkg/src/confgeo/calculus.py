"""Finite-difference oracle and numerical arc-length reparameterization.

The finite differences here are deliberately independent of the jet
evaluator: they see expressions only through plain float evaluation, which
is what makes them usable as an anti-drift check on the jets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exprkit import Expr, eval_jet3, evaluate
from .geometry import CurveJets, SurfacePatch, TorsionUnavailableError

QUAD_TOL = 1e-10
ZERO_SPEED_FLOOR = 1e-12
REPARAM_TOL = 1e-6


class CalculusError(Exception):
    pass


class ZeroSpeedError(CalculusError):
    """The speed |dbeta/dt| dropped below the quadrature floor."""


class NonMonotoneLengthError(CalculusError):
    """Cumulative arc length failed to increase (numerical failure)."""


# ---------------------------------------------------------------------------
# Finite differences


def fd_partial(e: Expr, point, index, step: float | None = None) -> float:
    """Central-difference estimate of a partial derivative of order <= 2.

    ``index`` is a multi-index over the expression's declared variables,
    e.g. (1, 0) for d/du and (1, 1) for the mixed partial (four-point cross
    stencil).  Default steps: 1e-5 for first, 1e-4 for second derivatives.
    """
    pt = [float(x) for x in point]
    idx = tuple(int(k) for k in index)
    if len(pt) != len(e.variables) or len(idx) != len(e.variables):
        raise ValueError(f"point/index must match variables {e.variables}")
    order = sum(idx)
    if order == 0:
        return evaluate(e, *pt)
    if order > 2 or min(idx) < 0:
        raise ValueError(f"unsupported multi-index {idx}")
    h = float(step) if step is not None else (1e-5 if order == 1 else 1e-4)
    if h <= 0.0:
        raise ValueError("step must be positive")

    def at(*shifts: float) -> float:
        return evaluate(e, *(x + dx for x, dx in zip(pt, shifts)))

    def unit(i: int, scale: float) -> list[float]:
        out = [0.0] * len(pt)
        out[i] = scale
        return out

    if order == 1:
        i = idx.index(1)
        return (at(*unit(i, h)) - at(*unit(i, -h))) / (2.0 * h)
    if 2 in idx:
        i = idx.index(2)
        return (at(*unit(i, h)) - 2.0 * at(*([0.0] * len(pt))) + at(*unit(i, -h))) / (h * h)
    i, j = (k for k, c in enumerate(idx) if c == 1)

    def cross(si: float, sj: float) -> float:
        shifts = [0.0] * len(pt)
        shifts[i], shifts[j] = si, sj
        return at(*shifts)

    return (cross(h, h) - cross(h, -h) - cross(-h, h) + cross(-h, -h)) / (4.0 * h * h)


# ---------------------------------------------------------------------------
# Quadrature


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL) -> float:
    """Adaptive Simpson quadrature with absolute per-panel tolerance."""
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth=50)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    half = 0.5 * tol
    return (_simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1)
            + _simpson_rec(f, m, b, fm, frm, fb, right, half, depth - 1))


# ---------------------------------------------------------------------------
# Arc-length reparameterization


def _monotone_tangents(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    # Harmonic-mean tangents: monotone Hermite cubic for same-sign secants.
    d = np.diff(ys) / np.diff(xs)
    m = np.empty_like(ys)
    m[0], m[-1] = d[0], d[-1]
    for i in range(1, len(ys) - 1):
        if d[i - 1] * d[i] <= 0.0:
            m[i] = 0.0
        else:
            m[i] = 2.0 * d[i - 1] * d[i] / (d[i - 1] + d[i])
    return m


def _hermite(x, x0, x1, y0, y1, m0, m1):
    h = x1 - x0
    t = (x - x0) / h
    t2, t3 = t * t, t * t * t
    return (y0 * (2 * t3 - 3 * t2 + 1) + h * m0 * (t3 - 2 * t2 + t)
            + y1 * (-2 * t3 + 3 * t2) + h * m1 * (t3 - t2))


def _curve_speed(patch: SurfacePatch, u_raw: Expr, v_raw: Expr, t: float) -> float:
    ju, jv = eval_jet3(u_raw, t), eval_jet3(v_raw, t)
    m = patch.first_form(ju.value, jv.value)
    q = m.E * ju.d1 ** 2 + 2.0 * m.F * ju.d1 * jv.d1 + m.G * jv.d1 ** 2
    w = math.sqrt(q) if q > 0.0 else 0.0
    if w < ZERO_SPEED_FLOOR:
        raise ZeroSpeedError(f"zero-speed point at t={t}")
    return w


@dataclass(eq=False)
class UnitSpeedCurve:
    """Arc-length reparameterization of a raw-parameter curve on a patch.

    Carries the (s_i, u_i, v_i) sample table; jets are produced on demand
    by Newton-inverting the cumulative length (monotone-cubic seed) and
    pushing exact raw-curve jets through the inverse chain rule, so the
    unit-speed invariant holds to quadrature accuracy, well inside the
    1e-6 reparameterization tolerance.  Order-3 jets are unavailable.
    """

    patch: SurfacePatch
    u_raw: Expr
    v_raw: Expr
    t0: float
    t1: float
    length: float
    s_samples: np.ndarray
    t_samples: np.ndarray
    u_samples: np.ndarray
    v_samples: np.ndarray
    interpolation: str = "monotone-cubic"
    _tangents: np.ndarray = field(init=False, repr=False)

    supports_order3 = False

    def __post_init__(self):
        self._tangents = _monotone_tangents(self.s_samples, self.t_samples)

    # -- speed machinery -----------------------------------------------------

    def _raw_jets(self, t: float):
        return eval_jet3(self.u_raw, t), eval_jet3(self.v_raw, t)

    def _speed(self, t: float) -> float:
        return _curve_speed(self.patch, self.u_raw, self.v_raw, t)

    def _seed(self, s: float) -> float:
        i = int(np.searchsorted(self.s_samples, s, side="right")) - 1
        i = min(max(i, 0), len(self.s_samples) - 2)
        return float(_hermite(s, self.s_samples[i], self.s_samples[i + 1],
                              self.t_samples[i], self.t_samples[i + 1],
                              self._tangents[i], self._tangents[i + 1]))

    def invert(self, s: float) -> float:
        """Solve cumulative-length(t) = s by Newton from the cubic seed."""
        if not (-1e-9 <= s <= self.length * (1.0 + 1e-9) + 1e-9):
            raise CalculusError(f"s={s} outside [0, {self.length}]")
        i = int(np.searchsorted(self.s_samples, s, side="right")) - 1
        i = min(max(i, 0), len(self.s_samples) - 2)
        t_knot, s_knot = float(self.t_samples[i]), float(self.s_samples[i])
        t = min(max(self._seed(s), self.t0), self.t1)
        for _ in range(40):
            g = s_knot + adaptive_simpson(self._speed, t_knot, t) - s
            if abs(g) <= 1e-13 * max(1.0, self.length):
                break
            t -= g / self._speed(t)
            t = min(max(t, self.t0), self.t1)
        return t

    # -- curve protocol --------------------------------------------------------

    def point(self, s: float) -> tuple[float, float]:
        t = self.invert(s)
        return evaluate(self.u_raw, t), evaluate(self.v_raw, t)

    def jets(self, s: float, order: int = 2) -> CurveJets:
        if order >= 3:
            raise TorsionUnavailableError(
                "reparameterized curves expose jets to order 2 only")
        t = self.invert(s)
        ju, jv = self._raw_jets(t)
        m = self.patch.first_form(ju.value, jv.value)
        u1, v1, u2, v2 = ju.d1, jv.d1, ju.d2, jv.d2
        q = m.E * u1 * u1 + 2.0 * m.F * u1 * v1 + m.G * v1 * v1
        w = math.sqrt(q)
        dq = ((m.E_u * u1 + m.E_v * v1) * u1 * u1 + 2.0 * m.E * u1 * u2
              + 2.0 * (m.F_u * u1 + m.F_v * v1) * u1 * v1 + 2.0 * m.F * (u2 * v1 + u1 * v2)
              + (m.G_u * u1 + m.G_v * v1) * v1 * v1 + 2.0 * m.G * v1 * v2)
        wp = dq / (2.0 * w)
        ts = 1.0 / w
        tss = -wp / (w * w * w)
        return CurveJets(
            ju.value, jv.value,
            u1 * ts, v1 * ts,
            u2 * ts * ts + u1 * tss,
            v2 * ts * ts + v1 * tss,
        )


def reparameterize_arclength(patch: SurfacePatch, curve: tuple[Expr, Expr],
                             t0: float, t1: float, n: int) -> UnitSpeedCurve:
    """Reparameterize a raw-parameter curve (u(t), v(t)) by arc length.

    Cumulative length by adaptive Simpson quadrature of |dbeta/dt|
    (absolute tolerance 1e-10 per panel) over ``n`` uniform t-panels.
    """
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    if n < 16:
        raise ValueError("need n >= 16 samples")
    u_raw, v_raw = curve

    def speed(t: float) -> float:
        return _curve_speed(patch, u_raw, v_raw, t)

    t_samples = np.linspace(t0, t1, n + 1)
    increments = [adaptive_simpson(speed, float(a), float(b))
                  for a, b in zip(t_samples[:-1], t_samples[1:])]
    s_samples = np.concatenate([[0.0], np.cumsum(increments)])
    if np.any(np.diff(s_samples) <= 0.0):
        raise NonMonotoneLengthError("cumulative arc length is not strictly increasing")
    u_samples = np.array([evaluate(u_raw, float(t)) for t in t_samples])
    v_samples = np.array([evaluate(v_raw, float(t)) for t in t_samples])
    return UnitSpeedCurve(patch, u_raw, v_raw, t0, t1, float(s_samples[-1]),
                          s_samples, t_samples, u_samples, v_samples)
