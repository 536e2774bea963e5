"""Fundamental forms, Christoffel symbols, Frenet frames and curvatures.

Surfaces come in two flavours: an embedded patch (three coordinate
expressions over ``u, v``) or a bare metric (``E, F, G`` expressions).
Everything downstream of the first fundamental form is intrinsic and uses
one shared code path for both.

Orientation convention: the unit surface normal is ``Psi_u x Psi_v / W``
everywhere; every signed quantity (second-form coefficients, normal
curvature) inherits it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exprkit import Expr, eval_jet2, eval_jet3, substitute

REGULARITY_FLOOR = 1e-10
METRIC_FLOOR = 1e-20
UNIT_SPEED_TOL = 1e-6
CURVATURE_FLOOR = 1e-9

Box = tuple[tuple[float, float], tuple[float, float]]


class GeometryError(Exception):
    """Base class for geometric precondition failures."""


class RegularityError(GeometryError):
    """W = sqrt(EG - F^2) fell below the regularity floor."""


class NotUnitSpeedError(GeometryError):
    def __init__(self, speed: float, s: float):
        super().__init__(f"curve is not unit speed at s={s}: |beta'| = {speed}")
        self.speed = speed


class VanishingCurvatureError(GeometryError):
    """kappa ~ 0: principal normal, binormal and torsion are undefined."""


class TorsionUnavailableError(GeometryError):
    """Table-backed curves expose jets to order 2 only; torsion needs order 3."""


def _in_box(domain: Box, u: float, v: float) -> bool:
    (u0, u1), (v0, v1) = domain
    eu = 1e-9 * max(1.0, abs(u0), abs(u1))
    ev = 1e-9 * max(1.0, abs(v0), abs(v1))
    return (u0 - eu) <= u <= (u1 + eu) and (v0 - ev) <= v <= (v1 + ev)


# ---------------------------------------------------------------------------
# Surface descriptions


@dataclass
class PatchJets:
    """Position and partial derivatives of an embedded patch at one point."""

    p: np.ndarray
    pu: np.ndarray
    pv: np.ndarray
    puu: np.ndarray
    puv: np.ndarray
    pvv: np.ndarray


@dataclass(frozen=True)
class SurfacePatch:
    """Embedded patch Psi(u, v) in E^3 with a rectangular parameter domain."""

    x: Expr
    y: Expr
    z: Expr
    domain: Box

    def contains(self, u: float, v: float) -> bool:
        return _in_box(self.domain, u, v)

    def jets(self, u: float, v: float) -> PatchJets:
        if not self.contains(u, v):
            raise GeometryError(f"point ({u}, {v}) outside domain box {self.domain}")
        js = [eval_jet2(c, u, v) for c in (self.x, self.y, self.z)]
        pick = lambda attr: np.array([getattr(j, attr) for j in js])
        return PatchJets(pick("value"), pick("du"), pick("dv"),
                         pick("duu"), pick("duv"), pick("dvv"))

    def point(self, u: float, v: float) -> np.ndarray:
        return self.jets(u, v).p

    def first_form(self, u: float, v: float) -> "FirstForm":
        return first_fundamental(self, u, v)


@dataclass(frozen=True)
class AbstractMetric:
    """First fundamental form given directly as E, F, G expressions."""

    E: Expr
    F: Expr
    G: Expr
    domain: Box

    def contains(self, u: float, v: float) -> bool:
        return _in_box(self.domain, u, v)

    def first_form(self, u: float, v: float) -> "FirstForm":
        if not self.contains(u, v):
            raise GeometryError(f"point ({u}, {v}) outside domain box {self.domain}")
        je = eval_jet2(self.E, u, v)
        jf = eval_jet2(self.F, u, v)
        jg = eval_jet2(self.G, u, v)
        if je.value <= 0.0 or jg.value <= 0.0:
            raise RegularityError(f"metric needs E > 0 and G > 0 at ({u}, {v})")
        disc = je.value * jg.value - jf.value * jf.value
        if disc <= METRIC_FLOOR:
            raise RegularityError(f"EG - F^2 = {disc} below floor at ({u}, {v})")
        return FirstForm(je.value, jf.value, jg.value, math.sqrt(disc),
                         je.du, je.dv, jf.du, jf.dv, jg.du, jg.dv)


# ---------------------------------------------------------------------------
# Value types


@dataclass(frozen=True)
class FirstForm:
    """E, F, G with their first partials and W = sqrt(EG - F^2)."""

    E: float
    F: float
    G: float
    W: float
    E_u: float
    E_v: float
    F_u: float
    F_v: float
    G_u: float
    G_v: float


@dataclass(frozen=True)
class SecondForm:
    """L, M, N against the unit normal Psi_u x Psi_v / W."""

    L: float
    M: float
    N: float
    n_vec: np.ndarray


@dataclass(frozen=True)
class ChristoffelSet:
    """Second-kind symbols; g<i><j><k> holds Gamma^k_ij (g121 = Gamma^1_12)."""

    g111: float
    g112: float
    g121: float
    g122: float
    g221: float
    g222: float


@dataclass(frozen=True)
class CurveJets:
    """Parameter values and s-derivatives of a surface curve at one s."""

    u: float
    v: float
    u1: float
    v1: float
    u2: float
    v2: float
    u3: float | None = None
    v3: float | None = None


@dataclass(frozen=True)
class ParamCurve:
    """Unit-speed curve (u(s), v(s)) given analytically."""

    u: Expr
    v: Expr

    supports_order3 = True

    def jets(self, s: float, order: int = 2) -> CurveJets:
        ju = eval_jet3(self.u, s)
        jv = eval_jet3(self.v, s)
        if order >= 3:
            return CurveJets(ju.value, jv.value, ju.d1, jv.d1, ju.d2, jv.d2, ju.d3, jv.d3)
        return CurveJets(ju.value, jv.value, ju.d1, jv.d1, ju.d2, jv.d2)


@dataclass(frozen=True)
class FrameData:
    """Frenet data; n, b, tau are None when undefined (kappa ~ 0, or a
    table-backed curve that cannot supply order-3 jets)."""

    beta: np.ndarray
    t: np.ndarray
    kappa: float
    n: np.ndarray | None
    b: np.ndarray | None
    tau: float | None


# ---------------------------------------------------------------------------
# Operations


def first_fundamental(p: SurfacePatch, u: float, v: float) -> FirstForm:
    """First-form coefficients and their first partials from patch jets."""
    pj = p.jets(u, v)
    E = float(pj.pu @ pj.pu)
    F = float(pj.pu @ pj.pv)
    G = float(pj.pv @ pj.pv)
    disc = E * G - F * F
    if disc <= REGULARITY_FLOOR ** 2:
        raise RegularityError(f"degenerate patch at ({u}, {v}): EG - F^2 = {disc}")
    return FirstForm(
        E, F, G, math.sqrt(disc),
        E_u=float(2.0 * (pj.puu @ pj.pu)),
        E_v=float(2.0 * (pj.puv @ pj.pu)),
        F_u=float(pj.puu @ pj.pv + pj.pu @ pj.puv),
        F_v=float(pj.puv @ pj.pv + pj.pu @ pj.pvv),
        G_u=float(2.0 * (pj.puv @ pj.pv)),
        G_v=float(2.0 * (pj.pvv @ pj.pv)),
    )


def second_fundamental(p: SurfacePatch, u: float, v: float) -> SecondForm:
    """L, M, N and the unit normal, oriented along Psi_u x Psi_v."""
    pj = p.jets(u, v)
    cross = np.cross(pj.pu, pj.pv)
    w = float(np.linalg.norm(cross))
    if w <= REGULARITY_FLOOR:
        raise RegularityError(f"degenerate patch at ({u}, {v}): |Psi_u x Psi_v| = {w}")
    n_vec = cross / w
    return SecondForm(float(pj.puu @ n_vec), float(pj.puv @ n_vec),
                      float(pj.pvv @ n_vec), n_vec)


def christoffel(m: FirstForm) -> ChristoffelSet:
    """The six second-kind Christoffel symbols of a 2D metric.

    Closed forms in E, F, G and their first partials; these are the forms
    whose conformal shift is exactly the theta terms of the conformal
    module (see tests on metrics with F != 0).
    """
    if m.W <= 0.0:
        raise RegularityError("Christoffel symbols need W > 0")
    d = 2.0 * m.W * m.W
    return ChristoffelSet(
        g111=(m.G * m.E_u - 2.0 * m.F * m.F_u + m.F * m.E_v) / d,
        g112=(2.0 * m.E * m.F_u - m.E * m.E_v - m.F * m.E_u) / d,
        g121=(m.G * m.E_v - m.F * m.G_u) / d,
        g122=(m.E * m.G_u - m.F * m.E_v) / d,
        g221=(2.0 * m.G * m.F_v - m.G * m.G_u - m.F * m.G_v) / d,
        g222=(m.E * m.G_v - 2.0 * m.F * m.F_v + m.F * m.G_u) / d,
    )


def beltrami_bracket(g: ChristoffelSet, cj: CurveJets) -> float:
    """The Beltrami bracket B: Christoffel cubic terms plus u'v'' - u''v'.

    Geodesic curvature of a unit-speed curve is B*W; the bracket itself is
    weight-free and is what the conformal shift identity constrains.
    """
    u1, v1, u2, v2 = cj.u1, cj.v1, cj.u2, cj.v2
    return (
        g.g112 * u1 ** 3
        + (2.0 * g.g122 - g.g111) * u1 * u1 * v1
        + (g.g222 - 2.0 * g.g121) * u1 * v1 * v1
        - g.g221 * v1 ** 3
        + (u1 * v2 - u2 * v1)
    )


def normal_curvature_form(sf: SecondForm, u1: float, v1: float) -> float:
    """kappa_n = u'^2 L + 2 u'v' M + v'^2 N."""
    return u1 * u1 * sf.L + 2.0 * u1 * v1 * sf.M + v1 * v1 * sf.N


def speed_from_form(m: FirstForm, u1: float, v1: float) -> float:
    q = m.E * u1 * u1 + 2.0 * m.F * u1 * v1 + m.G * v1 * v1
    return math.sqrt(q) if q > 0.0 else 0.0


def _beta_jets(p: SurfacePatch, cj: CurveJets) -> tuple[PatchJets, np.ndarray, np.ndarray]:
    pj = p.jets(cj.u, cj.v)
    beta1 = pj.pu * cj.u1 + pj.pv * cj.v1
    beta2 = (pj.pu * cj.u2 + pj.pv * cj.v2
             + pj.puu * cj.u1 ** 2 + 2.0 * pj.puv * cj.u1 * cj.v1 + pj.pvv * cj.v1 ** 2)
    return pj, beta1, beta2


def _require_unit_speed(beta1: np.ndarray, s: float) -> None:
    speed = float(np.linalg.norm(beta1))
    if abs(speed - 1.0) > UNIT_SPEED_TOL:
        raise NotUnitSpeedError(speed, s)


@lru_cache(maxsize=128)
def _composed_components(p: SurfacePatch, c: ParamCurve) -> tuple[Expr, Expr, Expr]:
    mapping = {"u": c.u, "v": c.v}
    return (substitute(p.x, mapping), substitute(p.y, mapping), substitute(p.z, mapping))


def frenet(p: SurfacePatch, c, s: float, with_torsion: bool | None = None) -> FrameData:
    """Frenet data of a unit-speed curve on a patch.

    ``with_torsion=None`` computes tau when the curve supplies order-3 jets
    and leaves it None otherwise; ``True`` requires it (raising
    :class:`TorsionUnavailableError` for table-backed curves).
    """
    cj = c.jets(s)
    pj, beta1, beta2 = _beta_jets(p, cj)
    _require_unit_speed(beta1, s)
    kappa = float(np.linalg.norm(beta2))
    if kappa <= CURVATURE_FLOOR:
        return FrameData(pj.p, beta1, kappa, None, None, None)

    n = beta2 / kappa
    b = np.cross(beta1, n)

    if with_torsion is None:
        with_torsion = getattr(c, "supports_order3", False)
    tau = None
    if with_torsion:
        if not getattr(c, "supports_order3", False):
            raise TorsionUnavailableError(
                "torsion needs order-3 jets; table-backed curves stop at order 2")
        comps = _composed_components(p, c)
        j3 = [eval_jet3(comp, s) for comp in comps]
        beta3 = np.array([j.d3 for j in j3])
        tau = float(np.cross(beta1, beta2) @ beta3) / (kappa * kappa)
    return FrameData(pj.p, beta1, kappa, n, b, tau)


def normal_curvature(p: SurfacePatch, c, s: float) -> float:
    """Signed normal curvature of a unit-speed curve (se1 closed form)."""
    cj = c.jets(s)
    _, beta1, _ = _beta_jets(p, cj)
    _require_unit_speed(beta1, s)
    sf = second_fundamental(p, cj.u, cj.v)
    return normal_curvature_form(sf, cj.u1, cj.v1)


def geodesic_curvature(source, c, s: float, weight: str) -> float:
    """Geodesic curvature via the Beltrami formula, B * W or B * W^2.

    Both weight conventions are in circulation, so ``weight`` is mandatory
    ("W1" or "W2") and callers must say which one they mean.  W1 is the
    geometric one (it satisfies kappa^2 = kappa_n^2 + kappa_g^2).
    ``source`` may be an embedded patch or an abstract metric.
    """
    if weight not in ("W1", "W2"):
        raise ValueError(f"weight must be 'W1' or 'W2', got {weight!r}")
    cj = c.jets(s)
    m = source.first_form(cj.u, cj.v)
    speed = speed_from_form(m, cj.u1, cj.v1)
    if abs(speed - 1.0) > UNIT_SPEED_TOL:
        raise NotUnitSpeedError(speed, s)
    bracket = beltrami_bracket(christoffel(m), cj)
    return bracket * (m.W if weight == "W1" else m.W * m.W)


def _fd1(fn, u: float, v: float, which: int, h: float = 1e-5) -> float:
    # Central first difference of a scalar function of (u, v).
    if which == 0:
        return (fn(u + h, v) - fn(u - h, v)) / (2.0 * h)
    return (fn(u, v + h) - fn(u, v - h)) / (2.0 * h)


def metric_derivative_identities(p: SurfacePatch, u: float, v: float) -> tuple[float, ...]:
    """Residuals of the six dot-product/metric-derivative identities.

    Left sides are second-order patch jets dotted into first-order ones;
    right sides rebuild the same quantities from finite differences of the
    metric coefficients, so the two routes are independent:

        Psi_uu.Psi_u = E_u/2        Psi_uu.Psi_v = F_u - E_v/2
        Psi_uv.Psi_u = E_v/2        Psi_uv.Psi_v = G_u/2
        Psi_vv.Psi_u = F_v - G_u/2  Psi_vv.Psi_v = G_v/2
    """
    pj = p.jets(u, v)

    def coeff(name):
        def fn(uu, vv):
            q = p.jets(uu, vv)
            if name == "E":
                return float(q.pu @ q.pu)
            if name == "F":
                return float(q.pu @ q.pv)
            return float(q.pv @ q.pv)
        return fn

    E_u = _fd1(coeff("E"), u, v, 0)
    E_v = _fd1(coeff("E"), u, v, 1)
    F_u = _fd1(coeff("F"), u, v, 0)
    F_v = _fd1(coeff("F"), u, v, 1)
    G_u = _fd1(coeff("G"), u, v, 0)
    G_v = _fd1(coeff("G"), u, v, 1)

    return (
        abs(float(pj.puu @ pj.pu) - E_u / 2.0),
        abs(float(pj.puu @ pj.pv) - (F_u - E_v / 2.0)),
        abs(float(pj.puv @ pj.pu) - E_v / 2.0),
        abs(float(pj.puv @ pj.pv) - G_u / 2.0),
        abs(float(pj.pvv @ pj.pu) - (F_v - G_u / 2.0)),
        abs(float(pj.pvv @ pj.pv) - G_v / 2.0),
    )
