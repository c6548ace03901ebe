"""The Heisenberg group Nil with metric dx^2 + dy^2 + (dz - x dy)^2.

Points are upper unitriangular matrices with entries (x, y, z). Tangent data
is expressed in the left-invariant orthonormal frame

    e1 = d/dx,   e2 = d/dy + x d/dz,   e3 = d/dz,    [e1, e2] = e3,

whose dual coframe is (dx, dy, dz - x dy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NilPoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.z])):
            raise ValueError("NilPoint coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class CylPoint:
    """Cylindrical coordinates; ``phi`` is deliberately not reduced mod 2 pi."""

    rho: float
    phi: float
    h: float

    def __post_init__(self):
        if not self.rho >= 0:
            raise ValueError("rho must be >= 0")


@dataclass(frozen=True)
class FrameVector:
    """Components in the left-invariant orthonormal frame (e1, e2, e3)."""

    a1: float
    a2: float
    a3: float

    def __post_init__(self):
        for name in ("a1", "a2", "a3"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not np.all(np.isfinite([self.a1, self.a2, self.a3])):
            raise ValueError("FrameVector components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3])

    def dot(self, other: "FrameVector") -> float:
        return float(self.as_array() @ other.as_array())

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def __add__(self, other):
        return FrameVector(*(self.as_array() + other.as_array()))

    def __sub__(self, other):
        return FrameVector(*(self.as_array() - other.as_array()))

    def __mul__(self, c):
        return FrameVector(*(c * self.as_array()))

    __rmul__ = __mul__


ZERO = FrameVector(0.0, 0.0, 0.0)


def cyl_to_cart(p: CylPoint) -> NilPoint:
    x, y, z = cyl_to_cart_arrays(p.rho, p.phi, p.h)
    return NilPoint(float(x), float(y), float(z))


def cyl_to_cart_arrays(rho, phi, h):
    """Vectorized cyl_to_cart returning (x, y, z) arrays."""
    c, s = np.cos(phi), np.sin(phi)
    return rho * c, rho * s, 0.5 * rho**2 * c * s + h


def cyl_jacobian(rho, phi, h=None):
    """Partial derivatives of (x, y, z) with respect to (rho, phi, h).

    Returns three arrays of shape (3, ...) for d/drho, d/dphi and d/dh.
    """
    rho = np.asarray(rho, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    zero = np.zeros_like(rho * c)
    d_rho = np.array([c + zero, s + zero, rho * c * s])
    d_phi = np.array([-rho * s, rho * c, 0.5 * rho**2 * (c * c - s * s)])
    d_h = np.array([zero, zero, zero + 1.0])
    return d_rho, d_phi, d_h


def metric_cyl_matrix(rho: float) -> np.ndarray:
    """Gram matrix of ds^2 in the coordinate order (rho, phi, h)."""
    r2 = rho * rho
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, 0.25 * r2 * (4.0 + r2), -0.5 * r2],
        [0.0, -0.5 * r2, 1.0],
    ])


def metric_cyl(p: CylPoint, a, b) -> float:
    """Inner product of two coordinate tangent vectors (d rho, d phi, d h) at ``p``."""
    return float(np.asarray(a, dtype=float) @ metric_cyl_matrix(p.rho) @ np.asarray(b, dtype=float))


def metric_cart_matrix(p: NilPoint) -> np.ndarray:
    """Gram matrix of dx^2 + dy^2 + (dz - x dy)^2 in the order (x, y, z)."""
    x = p.x
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0 + x * x, -x],
        [0.0, -x, 1.0],
    ])


def frame_vectors_cart(p: NilPoint) -> np.ndarray:
    """Rows are e1, e2, e3 written in Cartesian coordinate components."""
    return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, p.x], [0.0, 0.0, 1.0]])


def to_frame(p_x, v):
    """Frame components of a Cartesian tangent vector ``v`` at a point with x = ``p_x``."""
    v = np.asarray(v)
    return np.array([v[0], v[1], v[2] - p_x * v[1]])


# Structure constants c[i, j] = [e_i, e_j]; only [e1, e2] = e3 is nonzero.
_BRACKET = np.zeros((3, 3, 3))
_BRACKET[0, 1, 2] = 1.0
_BRACKET[1, 0, 2] = -1.0


def _koszul_table() -> np.ndarray:
    # <nabla_{e_i} e_j, e_k> = (c_ijk - c_jki + c_kij) / 2 for an orthonormal frame
    c = _BRACKET
    table = np.zeros((3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                table[i, j, k] = 0.5 * (c[i, j, k] - c[j, k, i] + c[k, i, j])
    return table


CONNECTION = _koszul_table()


def levi_civita(i: int, j: int) -> FrameVector:
    """nabla_{e_i} e_j for frame indices i, j in {1, 2, 3}."""
    if i not in (1, 2, 3) or j not in (1, 2, 3):
        raise IndexError("frame indices must be 1, 2 or 3")
    return FrameVector(*CONNECTION[i - 1, j - 1])


def bracket(i: int, j: int) -> FrameVector:
    if i not in (1, 2, 3) or j not in (1, 2, 3):
        raise IndexError("frame indices must be 1, 2 or 3")
    return FrameVector(*_BRACKET[i - 1, j - 1])


def tangent_sectional_curvature(n3):
    """Sectional curvature 1/4 - n3^2 of the plane with unit normal third component n3."""
    n3_arr = np.asarray(n3, dtype=float)
    if np.any(np.abs(n3_arr) > 1.0 + 1e-12):
        raise ValueError("|n3| must not exceed 1")
    out = 0.25 - n3_arr**2
    return float(out) if np.ndim(n3) == 0 else out


def volume_density_cyl(rho):
    """Riemannian volume density in (rho, phi, h): sqrt(det g) = rho."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 0):
        raise ValueError("rho must be >= 0")
    return float(rho_arr) if np.ndim(rho) == 0 else rho_arr.copy()
