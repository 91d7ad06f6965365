"""Hessian Estimation Evolution Strategies on convex quadratics."""

__version__ = "0.1.0"
