"""Numerical differential geometry of curves on surfaces under conformal maps.

Submodules: :mod:`exprkit` (expression DSL and forward-mode jets),
:mod:`calculus` (finite-difference oracle, arc-length reparameterization),
:mod:`geometry` (forms, Christoffel symbols, Frenet frames, curvatures),
:mod:`conformal` (dilation fields, theta terms, shift residuals),
:mod:`normalcurve` (frame decomposition, classification, deviation residuals),
:mod:`cli` (scenario-driven verification front end).
"""

from . import calculus, cli, conformal, exprkit, geometry, normalcurve

__version__ = "0.1.0"

__all__ = ["calculus", "cli", "conformal", "exprkit", "geometry", "normalcurve",
           "__version__"]
