"""Constant-mean-curvature spheres in Nil and the spinor energy functional."""

__version__ = "0.1.0"
