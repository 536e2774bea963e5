"""Conformal pairs: dilation fields, theta terms and transformation residuals.

A :class:`ConformalPair` holds two surfaces (or bare metrics) over one
shared parameter domain.  The dilation zeta is always estimated from the
metric ratio; a declared dilation expression is cross-checked against the
estimate and, when present, supplies exact derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exprkit import Expr, Jet2, eval_grad3, eval_jet2, evaluate
from .geometry import (
    UNIT_SPEED_TOL,
    AbstractMetric,
    CurveJets,
    FirstForm,
    NotUnitSpeedError,
    SurfacePatch,
    beltrami_bracket,
    christoffel,
    second_fundamental,
    speed_from_form,
)

CONFORMALITY_TOL = 1e-8

WEIGHTS = ("W1", "W2")
PAIRINGS = tuple(f"{wt}/{ws}" for wt in WEIGHTS for ws in WEIGHTS)


class ConformalError(Exception):
    pass


class NonConformalError(ConformalError):
    def __init__(self, message: str, residuals: tuple[float, float, float] | None = None):
        super().__init__(message)
        self.residuals = residuals


class EmbeddingRequiredError(ConformalError):
    """The operation needs an embedded patch, not a bare metric."""


class AmbientMapError(ConformalError):
    pass


def _is_patch(member) -> bool:
    return isinstance(member, SurfacePatch)


@dataclass(frozen=True)
class ConformalPair:
    """Source and target over one domain box, with optional dilation and
    optional ambient map (three expressions over the ambient variables)."""

    source: SurfacePatch | AbstractMetric
    target: SurfacePatch | AbstractMetric
    dilation: Expr | None = None
    ambient_map: tuple[Expr, Expr, Expr] | None = None
    conformality_tol: float = CONFORMALITY_TOL

    def __post_init__(self):
        if self.source.domain != self.target.domain:
            raise ValueError(
                f"pair members must share a domain box: "
                f"{self.source.domain} != {self.target.domain}")
        for u, v in self._sample_grid():
            if self.dilation is not None:
                z = evaluate(self.dilation, u, v)
                if not z > 0.0:
                    raise ValueError(f"declared dilation must be positive, got {z} at ({u}, {v})")
            if self.ambient_map is not None:
                if not (_is_patch(self.source) and _is_patch(self.target)):
                    raise AmbientMapError("ambient map requires embedded patches on both sides")
                p = self.source.point(u, v)
                image = np.array([evaluate(c, *p) for c in self.ambient_map])
                gap = float(np.linalg.norm(image - self.target.point(u, v)))
                if gap > 1e-9:
                    raise AmbientMapError(
                        f"ambient map disagrees with target by {gap} at ({u}, {v})")

    def _sample_grid(self, n: int = 3):
        (u0, u1), (v0, v1) = self.source.domain
        us = [u0 + (u1 - u0) * (i + 1) / (n + 1) for i in range(n)]
        vs = [v0 + (v1 - v0) * (j + 1) / (n + 1) for j in range(n)]
        return [(u, v) for u in us for v in vs]

    @property
    def embedded(self) -> bool:
        return _is_patch(self.source) and _is_patch(self.target)

    def forms(self, u: float, v: float) -> tuple[FirstForm, FirstForm]:
        return self.source.first_form(u, v), self.target.first_form(u, v)


# ---------------------------------------------------------------------------
# Dilation


def dilation_field(pair: ConformalPair, u: float, v: float,
                   tol: float | None = None) -> tuple[float, tuple[float, float, float]]:
    """Estimate zeta = sqrt(E~/E) and the three conformality residuals
    |zeta^2 E - E~|, |zeta^2 F - F~|, |zeta^2 G - G~|, each normalized by
    max(1, |E~|).  Raises :class:`NonConformalError` past the tolerance.
    """
    tol = pair.conformality_tol if tol is None else tol
    m, mt = pair.forms(u, v)
    if m.E <= 1e-12:
        raise NonConformalError(f"source E = {m.E} below regularity floor at ({u}, {v})")
    z2 = mt.E / m.E
    if z2 <= 0.0:
        raise NonConformalError(f"metric ratio E~/E = {z2} not positive at ({u}, {v})")
    zeta = math.sqrt(z2)
    norm = max(1.0, abs(mt.E))
    residuals = (
        abs(z2 * m.E - mt.E) / norm,
        abs(z2 * m.F - mt.F) / norm,
        abs(z2 * m.G - mt.G) / norm,
    )
    if max(residuals) > tol:
        raise NonConformalError(
            f"pair is not conformal at ({u}, {v}): metric ratio residuals "
            f"(E, F, G) = {residuals}", residuals)
    if pair.dilation is not None:
        declared = evaluate(pair.dilation, u, v)
        if abs(declared - zeta) > tol * max(1.0, abs(zeta)):
            raise NonConformalError(
                f"declared dilation {declared} disagrees with estimate {zeta} at ({u}, {v})")
    return zeta, residuals


def dilation_jet(pair: ConformalPair, u: float, v: float,
                 tol: float | None = None) -> Jet2:
    """zeta with first partials.  A declared dilation (cross-checked against
    the metric-ratio estimate) supplies exact jets; otherwise the partials
    come from differentiating zeta^2 E = E~."""
    zeta, _ = dilation_field(pair, u, v, tol)
    if pair.dilation is not None:
        return eval_jet2(pair.dilation, u, v)
    m, mt = pair.forms(u, v)
    zu = (mt.E_u - zeta * zeta * m.E_u) / (2.0 * zeta * m.E)
    zv = (mt.E_v - zeta * zeta * m.E_v) / (2.0 * zeta * m.E)
    return Jet2(zeta, du=zu, dv=zv)


# ---------------------------------------------------------------------------
# Theta terms and shift residuals


@dataclass(frozen=True)
class ThetaSet:
    """Conformal Christoffel shift terms; t<i><j><k> holds theta^k_ij."""

    t111: float
    t112: float
    t121: float
    t122: float
    t221: float
    t222: float


def theta_terms(m: FirstForm, zeta_jet: Jet2) -> ThetaSet:
    """The six theta^k_ij of the conformal Christoffel shift.

    All vanish identically when zeta_u = zeta_v = 0 (isometry/homothety).
    """
    z, zu, zv = zeta_jet.value, zeta_jet.du, zeta_jet.dv
    if not z > 0.0:
        raise ValueError(f"dilation must be positive, got {z}")
    d = z * m.W * m.W
    E, F, G = m.E, m.F, m.G
    return ThetaSet(
        t111=(E * G * zu - 2.0 * F * F * zu + F * E * zv) / d,
        t112=(E * F * zu - E * E * zv) / d,
        t121=(E * G * zv - F * G * zu) / d,
        t122=(E * G * zu - F * E * zv) / d,
        t221=(G * F * zv - G * G * zu) / d,
        t222=(E * G * zv - 2.0 * F * F * zv + F * G * zu) / d,
    )


def christoffel_shift_residual(pair: ConformalPair, u: float, v: float) -> tuple[float, ...]:
    """|Gamma~^k_ij - Gamma^k_ij - theta^k_ij| for the six slots."""
    zj = dilation_jet(pair, u, v)
    m, mt = pair.forms(u, v)
    g, gt = christoffel(m), christoffel(mt)
    th = theta_terms(m, zj)
    return tuple(
        abs(getattr(gt, slot) - getattr(g, slot) - getattr(th, "t" + slot[1:]))
        for slot in ("g111", "g112", "g121", "g122", "g221", "g222")
    )


def theta_bracket(th: ThetaSet, cj: CurveJets) -> float:
    """Theta analogue of the Beltrami bracket (no u'v'' - u''v' term: it
    cancels in the target-minus-source difference)."""
    u1, v1 = cj.u1, cj.v1
    return (th.t112 * u1 ** 3
            + (2.0 * th.t122 - th.t111) * u1 * u1 * v1
            + (th.t222 - 2.0 * th.t121) * u1 * v1 * v1
            - th.t221 * v1 ** 3)


@dataclass(frozen=True)
class BracketShift:
    b_src: float
    b_tgt: float
    theta_bracket: float
    residual: float


def beltrami_bracket_shift(pair: ConformalPair, c, s: float) -> BracketShift:
    """Convention-free core of the geodesic-curvature shift:
    B_tgt - B_src = Theta, with B the Beltrami bracket on each side."""
    cj = c.jets(s)
    zj = dilation_jet(pair, cj.u, cj.v)
    m, mt = pair.forms(cj.u, cj.v)
    speed = speed_from_form(m, cj.u1, cj.v1)
    if abs(speed - 1.0) > UNIT_SPEED_TOL:
        raise NotUnitSpeedError(speed, s)
    b_src = beltrami_bracket(christoffel(m), cj)
    b_tgt = beltrami_bracket(christoffel(mt), cj)
    th = theta_bracket(theta_terms(m, zj), cj)
    return BracketShift(b_src, b_tgt, th, abs(b_tgt - b_src - th))


# ---------------------------------------------------------------------------
# Named deviation scalars


def h_function(m: FirstForm, th: ThetaSet, cj: CurveJets) -> float:
    """h bracket of the normal-component deviation, times W^2."""
    u1, v1 = cj.u1, cj.v1
    bracket = (u1 ** 3 * th.t112
               - v1 ** 3 * th.t221
               + 2.0 * u1 * u1 * v1 * th.t122
               + u1 * v1 * v1 * th.t222
               - u1 * u1 * v1 * th.t111
               + 2.0 * u1 * v1 * v1 * th.t121)
    return bracket * m.W * m.W


def f_function(m: FirstForm, th: ThetaSet, cj: CurveJets) -> float:
    """f = (theta Beltrami bracket) * W^2, the geodesic-curvature deviation."""
    return theta_bracket(th, cj) * m.W * m.W


def g_functions(m: FirstForm, zeta_jet: Jet2, cj: CurveJets,
                nu_over_kappa: float) -> tuple[float, float]:
    """Tangential deviation scalars g1, g2."""
    z, zu, zv = zeta_jet.value, zeta_jet.du, zeta_jet.dv
    u1, v1 = cj.u1, cj.v1
    g1 = nu_over_kappa * (u1 * u1 * z * zu * m.E
                          + 2.0 * u1 * v1 * z * zv * m.E
                          + v1 * v1 * (2.0 * z * zv * m.F - z * zu * m.G))
    g2 = nu_over_kappa * (u1 * u1 * (2.0 * z * zu * m.F - z * zv * m.E)
                          + 2.0 * u1 * v1 * z * zu * m.G
                          + v1 * v1 * z * zv * m.G)
    return g1, g2


# ---------------------------------------------------------------------------
# Geodesic-curvature deviation report


@dataclass(frozen=True)
class DeviationReport:
    """Per-point record of the geodesic-curvature deviation identity.

    ``i20_residuals`` holds |kg~(i) - zeta^2 kg(j) - f| keyed by
    "<target weight>/<source weight>"; ``passing`` lists the pairings below
    tolerance.  g1/g2 are reported with unit nu/kappa prefactor.
    """

    s: float
    zeta: float
    zeta_u: float
    zeta_v: float
    conformality: tuple[float, float, float]
    christoffel_shift: tuple[float, ...]
    h: float
    f: float
    g1: float
    g2: float
    kappa_g_src: dict[str, float]
    kappa_g_tgt: dict[str, float]
    i20_residuals: dict[str, float]
    passing: tuple[str, ...]
    tolerance: float


def geodesic_deviation_report(pair: ConformalPair, c, s: float,
                              tol: float = 1e-8) -> DeviationReport:
    cj = c.jets(s)
    zeta, conf = dilation_field(pair, cj.u, cj.v)
    zj = dilation_jet(pair, cj.u, cj.v)
    m, mt = pair.forms(cj.u, cj.v)
    speed = speed_from_form(m, cj.u1, cj.v1)
    if abs(speed - 1.0) > UNIT_SPEED_TOL:
        raise NotUnitSpeedError(speed, s)
    th = theta_terms(m, zj)
    b_src = beltrami_bracket(christoffel(m), cj)
    b_tgt = beltrami_bracket(christoffel(mt), cj)
    f = f_function(m, th, cj)
    h = h_function(m, th, cj)
    g1, g2 = g_functions(m, zj, cj, nu_over_kappa=1.0)
    kg_src = {"W1": b_src * m.W, "W2": b_src * m.W * m.W}
    kg_tgt = {"W1": b_tgt * mt.W, "W2": b_tgt * mt.W * mt.W}
    residuals = {
        f"{wt}/{ws}": abs(kg_tgt[wt] - zeta * zeta * kg_src[ws] - f)
        for wt in WEIGHTS for ws in WEIGHTS
    }
    passing = tuple(k for k in PAIRINGS if residuals[k] < tol)
    return DeviationReport(
        s=s, zeta=zeta, zeta_u=zj.du, zeta_v=zj.dv, conformality=conf,
        christoffel_shift=christoffel_shift_residual(pair, cj.u, cj.v),
        h=h, f=f, g1=g1, g2=g2,
        kappa_g_src=kg_src, kappa_g_tgt=kg_tgt,
        i20_residuals=residuals, passing=passing, tolerance=tol,
    )


def image_geodesic_curvature(pair: ConformalPair, c, s: float) -> float:
    """Brute-force geodesic curvature of the image curve on the target.

    Uses the general-speed formula beta''.(N x beta')/|beta'|^3 with jets of
    the target patch along the same parameter curve; independent of the
    Beltrami route and of any weight convention.
    """
    if not _is_patch(pair.target):
        raise EmbeddingRequiredError("direct image curvature needs an embedded target")
    cj = c.jets(s)
    pj = pair.target.jets(cj.u, cj.v)
    beta1 = pj.pu * cj.u1 + pj.pv * cj.v1
    beta2 = (pj.pu * cj.u2 + pj.pv * cj.v2
             + pj.puu * cj.u1 ** 2 + 2.0 * pj.puv * cj.u1 * cj.v1 + pj.pvv * cj.v1 ** 2)
    n_vec = second_fundamental(pair.target, cj.u, cj.v).n_vec
    speed = float(np.linalg.norm(beta1))
    return float(beta2 @ np.cross(n_vec, beta1)) / speed ** 3


# ---------------------------------------------------------------------------
# Ambient pushforward


def ambient_jacobian(map3: tuple[Expr, Expr, Expr], p) -> np.ndarray:
    """3x3 Jacobian of an ambient map at p, by forward-mode jets."""
    rows = []
    for comp in map3:
        g = eval_grad3(comp, float(p[0]), float(p[1]), float(p[2]))
        rows.append([g.gx, g.gy, g.gz])
    return np.array(rows)


def pushforward_residual(pair: ConformalPair, u: float, v: float) -> tuple[float, float]:
    """|Psi~_u - zeta (J* Psi_u)| and |Psi~_v - zeta (J* Psi_v)|.

    For an ambient-conformal map the Jacobian factors as zeta times a
    length-preserving part; J* here is that part (Jacobian / zeta), so the
    residual compares target patch jets against the dilation-times-isometry
    pushforward of the source jets.
    """
    if pair.ambient_map is None:
        raise AmbientMapError("pair has no ambient map")
    zeta, _ = dilation_field(pair, u, v)
    pj = pair.source.jets(u, v)
    pjt = pair.target.jets(u, v)
    jac_star = ambient_jacobian(pair.ambient_map, pj.p) / zeta
    r_u = float(np.linalg.norm(pjt.pu - zeta * (jac_star @ pj.pu)))
    r_v = float(np.linalg.norm(pjt.pv - zeta * (jac_star @ pj.pv)))
    return r_u, r_v
