"""Spinor (Weierstrass) data of conformal immersions into Nil on discrete charts.

Conventions
-----------
Charts are rectangular grids in a conformal coordinate z = x + i y, with
arrays indexed ``[ix, iy]`` (``meshgrid(..., indexing="ij")``). Complex
derivatives are

    d/dz = (d/dx - i d/dy) / 2,    d/dzbar = (d/dx + i d/dy) / 2.

Masked nodes carry NaN in every derived field; finite differences propagate
the mask to every stencil that touches it.

The surface flows one way: immersion -> Z -> psi -> (U, n, A, Atilde) ->
identity residuals. Nothing here solves the Dirac system.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from . import cmc_family
from .nil_geometry import cyl_jacobian, cyl_to_cart_arrays
from .numerics import grid_derivative
from .numerics.differences import _central

BRANCH_EPS = 1e-6
ISOTROPY_TOL = 1e-8


@dataclass(frozen=True)
class Chart:
    """Uniform rectangular grid of a conformal coordinate."""

    x: np.ndarray
    y: np.ndarray
    periodic_y: bool = False

    def __post_init__(self):
        for name in ("x", "y"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size < 2 or not np.all(np.diff(arr) > 0):
                raise ValueError(f"chart axis {name} must be strictly increasing with >= 2 nodes")
            object.__setattr__(self, name, arr)

    @property
    def step_x(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def step_y(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.size, self.y.size

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")


def square_chart(center: complex, half_width: float, n: int) -> Chart:
    """n x n chart on the square of the given half width around ``center``."""
    if n < 5:
        raise ValueError("need at least 5 nodes per axis")
    c = complex(center)
    return Chart(np.linspace(c.real - half_width, c.real + half_width, n),
                 np.linspace(c.imag - half_width, c.imag + half_width, n))


def cylinder_chart(t_min: float, t_max: float, n_t: int, n_theta: int) -> Chart:
    """Chart (t, theta), theta periodic on [0, 2 pi) without the endpoint."""
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    return Chart(np.linspace(t_min, t_max, n_t), theta, periodic_y=True)


@dataclass(frozen=True)
class SpinorGrid:
    """Per-node Weierstrass data on a chart.

    ``normal`` is stored as an array of shape (3, nx, ny) holding the frame
    components (n1, n2, n3). Fields that ``dressing`` fills are None before.
    """

    chart: Chart
    Z: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    alpha: np.ndarray
    mask: np.ndarray
    H: np.ndarray | None = None
    U: np.ndarray | None = None
    normal: np.ndarray | None = None
    A: np.ndarray | None = None
    Atilde: np.ndarray | None = None
    order: int = 4

    @property
    def Z1(self):
        return self.Z[0]

    @property
    def Z2(self):
        return self.Z[1]

    @property
    def Z3(self):
        return self.Z[2]

    @property
    def V(self):
        return self.U

    @property
    def n3(self):
        return None if self.normal is None else self.normal[2]

    @property
    def dressed(self) -> bool:
        return self.A is not None


# -- derivatives on a chart ------------------------------------------------

def _dx(field, chart: Chart, order: int, deriv: int = 1):
    return grid_derivative(field, chart.step_x, axis=0, order=order, deriv=deriv)


def _dy(field, chart: Chart, order: int, deriv: int = 1):
    if chart.periodic_y:
        offsets, w = _central(order, deriv)
        acc = sum(wk * np.roll(field, -off, axis=1) for off, wk in zip(offsets, w) if wk)
        return acc / chart.step_y**deriv
    return grid_derivative(field, chart.step_y, axis=1, order=order, deriv=deriv)


def d_z(field, chart: Chart, order: int = 4):
    """d/dz = (d/dx - i d/dy)/2 by central differences."""
    return 0.5 * (_dx(field, chart, order) - 1j * _dy(field, chart, order))


def d_zbar(field, chart: Chart, order: int = 4):
    return 0.5 * (_dx(field, chart, order) + 1j * _dy(field, chart, order))


def laplacian(field, chart: Chart, order: int = 4):
    """Flat Laplacian d_xx + d_yy (= 4 d dbar)."""
    return _dx(field, chart, order, deriv=2) + _dy(field, chart, order, deriv=2)


# -- immersion -> Z -> psi -------------------------------------------------

def frame_components(f, f_x, f_y, tol: float = ISOTROPY_TOL) -> np.ndarray:
    """Frame components Z_k of f^{-1} f_z from Cartesian derivatives.

    ``f``, ``f_x``, ``f_y`` have shape (3, ...). Returns a complex array of
    shape (3, ...). Raises if f_z vanishes or the isotropy Z.Z = 0 (i.e.
    conformality) fails by more than ``tol`` relative to |Z|^2.
    """
    f, f_x, f_y = (np.asarray(a, dtype=float) for a in (f, f_x, f_y))
    fz = 0.5 * (f_x - 1j * f_y)
    Z = np.array([fz[0], fz[1], fz[2] - f[0] * fz[1]])
    norm2 = np.sum(np.abs(Z) ** 2, axis=0)
    if np.any(norm2 == 0):
        raise ValueError("degenerate node: f_z = 0")
    iso = np.abs(np.sum(Z * Z, axis=0)) / norm2
    if np.nanmax(iso) > tol:
        raise ValueError(f"immersion is not conformal: max |Z.Z|/|Z|^2 = {np.nanmax(iso):.3e}")
    return Z


def Z_from_spinor(psi1, psi2) -> np.ndarray:
    """(Z1, Z2, Z3) from the spinor."""
    p2b = np.conj(psi2)
    return np.array([0.5j * (p2b**2 + psi1**2), 0.5 * (p2b**2 - psi1**2), psi1 * p2b])


def spinor_from_Z(Z, alpha=None, mask=None, continuation: bool = True,
                  eps: float = BRANCH_EPS, tol: float = ISOTROPY_TOL):
    """Recover (psi1, psi2), up to a common sign, from isotropic Z.

    psi1^2 = -(Z2 + i Z1) and conj(psi2)^2 = Z2 - i Z1; the relative sign
    is fixed by psi1 conj(psi2) = Z3. With ``continuation`` the overall
    sign is propagated breadth-first from the node nearest the chart centre
    so that psi is continuous; nodes where |psi_i| < eps e^{alpha/2}, nodes
    not reachable from the seed, and nodes adjacent to a sign jump (a
    branch cut of the continuation) are masked. Without ``continuation``
    every node is treated independently.

    Returns ``(psi1, psi2, mask)``.
    """
    Z = np.asarray(Z, dtype=complex)
    Z1, Z2, Z3 = Z
    norm2 = np.sum(np.abs(Z) ** 2, axis=0)
    if np.any(np.abs(Z1**2 + Z2**2 + Z3**2) > tol * np.maximum(norm2, np.finfo(float).tiny)):
        raise ValueError("isotropy violated: Z1^2 + Z2^2 + Z3^2 != 0")
    s1 = np.sqrt(-(Z2 + 1j * Z1))
    s2b = np.sqrt(Z2 - 1j * Z1)
    # relative sign from Z3
    flip = np.abs(s1 * s2b - Z3) > np.abs(-s1 * s2b - Z3)
    s2b = np.where(flip, -s2b, s2b)
    if not continuation:
        return s1, np.conj(s2b), np.zeros(s1.shape, dtype=bool)

    if s1.ndim != 2:
        raise ValueError("continuation needs a 2-D grid")
    ealpha = np.sqrt(2 * norm2) if alpha is None else np.exp(alpha)
    small = eps * np.sqrt(ealpha)
    bad = (np.abs(s1) < small) | (np.abs(s2b) < small)
    if mask is not None:
        bad |= np.asarray(mask, dtype=bool)
    nx, ny = s1.shape
    if np.all(bad):
        raise ValueError("every node is masked; no seed for sign continuation")
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    dist = (ii - (nx - 1) / 2) ** 2 + (jj - (ny - 1) / 2) ** 2
    dist = np.where(bad, np.inf, dist)
    seed = np.unravel_index(np.argmin(dist), dist.shape)

    sign = np.zeros((nx, ny))
    sign[seed] = 1.0
    queue = deque([seed])
    while queue:
        i, j = queue.popleft()
        ref = sign[i, j] * s1[i, j]
        for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if 0 <= a < nx and 0 <= b < ny and not bad[a, b] and sign[a, b] == 0:
                sign[a, b] = 1.0 if abs(s1[a, b] - ref) <= abs(s1[a, b] + ref) else -1.0
                queue.append((a, b))
    psi1 = sign * s1
    psi2 = np.conj(sign * s2b)
    unreached = (sign == 0) & ~bad
    masked = bad | unreached
    # sign jumps between neighbours mark where the spanning tree closed a loop
    jump = np.zeros_like(masked)
    for axis in (0, 1):
        a = psi1
        b = np.roll(psi1, -1, axis=axis)
        hit = (np.abs(a - b) > np.abs(a + b))
        edge = [slice(None)] * 2
        edge[axis] = slice(-1, None)
        hit[tuple(edge)] = False
        hit &= ~masked & ~np.roll(masked, -1, axis=axis)
        jump |= hit | np.roll(hit, 1, axis=axis)
    masked |= jump
    psi1 = np.where(masked, np.nan, psi1)
    psi2 = np.where(masked, np.nan, psi2)
    return psi1, psi2, masked


def grid_from_immersion(chart: Chart, immersion: Callable, singular_points=(),
                        order: int = 4) -> SpinorGrid:
    """Sample ``immersion(x, y) -> (f, f_x, f_y)`` on the chart and recover psi.

    Nodes within 3 grid steps of any point in ``singular_points`` are masked.
    """
    X, Y = chart.mesh()
    with np.errstate(divide="ignore", invalid="ignore"):
        f, f_x, f_y = immersion(X, Y)
    Z = frame_components(f, f_x, f_y)
    alpha = 0.5 * np.log(2 * np.sum(np.abs(Z) ** 2, axis=0))
    mask = np.zeros(X.shape, dtype=bool)
    radius = 3 * max(chart.step_x, chart.step_y)
    for p in singular_points:
        mask |= np.abs(X + 1j * Y - complex(p)) < radius
    psi1, psi2, mask = spinor_from_Z(Z, alpha, mask)
    alpha = np.where(mask, np.nan, alpha)
    Z = np.where(mask, np.nan, Z)
    return SpinorGrid(chart, Z, psi1, psi2, alpha, mask, order=order)


# -- dressing ----------------------------------------------------------------

def potential(H, psi1, psi2):
    """U = V = (H/2)(|psi1|^2 + |psi2|^2) + (i/4)(|psi2|^2 - |psi1|^2)."""
    a1, a2 = np.abs(psi1) ** 2, np.abs(psi2) ** 2
    return 0.5 * H * (a1 + a2) + 0.25j * (a2 - a1)


def normal_from_spinor(psi1, psi2, alpha) -> np.ndarray:
    """Unit normal in the frame, shape (3, ...)."""
    w = psi1 * psi2
    e = np.exp(-alpha)
    return np.array([
        e * np.real(1j * (w - np.conj(w))),
        -e * np.real(w + np.conj(w)),
        e * (np.abs(psi2) ** 2 - np.abs(psi1) ** 2),
    ])


def hopf(psi1, psi2, chart: Chart, order: int = 4):
    """A = conj(psi2) d psi1 - psi1 d conj(psi2) + i psi1^2 conj(psi2)^2."""
    p2b = np.conj(psi2)
    return p2b * d_z(psi1, chart, order) - psi1 * d_z(p2b, chart, order) + 1j * psi1**2 * p2b**2


def mean_curvature_from_dirac(grid: SpinorGrid, order: int = 4) -> np.ndarray:
    """Pointwise H from U = -d psi2 / psi1 and U = (H/2) e^alpha + i(...)."""
    U = -d_z(grid.psi2, grid.chart, order) / grid.psi1
    return 2 * np.real(U) * np.exp(-grid.alpha)


def dressing(grid: SpinorGrid, H=None, order: int | None = None) -> SpinorGrid:
    """Fill U (= V), the normal, A, Atilde and H.

    If ``H`` is None it is recovered pointwise from the Dirac equation.
    """
    if grid.psi1 is None or grid.alpha is None:
        raise ValueError("grid has no spinor or conformal factor")
    order = grid.order if order is None else order
    with np.errstate(divide="ignore", invalid="ignore"):
        return _dress(grid, H, order)


def _dress(grid, H, order):
    if H is None:
        Hf = mean_curvature_from_dirac(grid, order)
    else:
        Hf = np.where(grid.mask, np.nan, np.broadcast_to(np.asarray(H, dtype=float), grid.alpha.shape))
    U = potential(Hf, grid.psi1, grid.psi2)
    normal = normal_from_spinor(grid.psi1, grid.psi2, grid.alpha)
    A = hopf(grid.psi1, grid.psi2, grid.chart, order)
    Atilde = A + grid.Z3**2 / (2 * Hf + 1j)
    return replace(grid, H=Hf, U=U, normal=normal, A=A, Atilde=Atilde, order=order)


# -- identities ----------------------------------------------------------------

RESIDUAL_NAMES = ("dirac_1", "dirac_2", "deriv_psi1", "deriv_psi2",
                  "dn3_dz", "metric", "dZ3bar_dz", "dn3_dz_cmc")


def identity_fields(grid: SpinorGrid, order: int | None = None) -> dict:
    """Residual fields of the Dirac system, derivational equations and identities.

    ``dn3_dz_cmc`` is the reduced form of ``dn3_dz`` valid when Atilde = 0.
    """
    if not grid.dressed:
        raise ValueError("grid must be dressed first")
    order = grid.order if order is None else order
    c = grid.chart
    nx, ny = c.shape
    if min(nx, ny) <= order + 1:
        raise ValueError("grid too coarse for the stencil")
    with np.errstate(divide="ignore", invalid="ignore"):
        return _identity_fields(grid, c, order)


def _identity_fields(grid, c, order):
    p1, p2, al, U = grid.psi1, grid.psi2, grid.alpha, grid.U
    H, A, Z3, n3 = grid.H, grid.A, grid.Z3, grid.n3
    ea = np.exp(al)
    Z3b = np.conj(Z3)
    one_m = 1 - n3**2
    return {
        "dirac_1": d_z(p2, c, order) + U * p1,
        "dirac_2": d_zbar(p1, c, order) - U * p2,
        "deriv_psi1": d_z(p1, c, order) - (d_z(al, c, order) * p1 + A / ea * p2
                                          - 0.5j * p1**2 * np.conj(p2)),
        "deriv_psi2": d_zbar(p2, c, order) - (-np.conj(A) / ea * p1 + d_zbar(al, c, order) * p2
                                             - 0.5j * np.conj(p1) * p2**2),
        "dn3_dz": d_z(n3, c, order) - ((-H + 0.5j) * Z3 - 2 * A * Z3b / ea**2),
        "metric": ea**2 - 4 * np.abs(Z3) ** 2 / one_m,
        "dZ3bar_dz": d_z(Z3b, c, order) - (2 * H - 1j) * np.abs(Z3) ** 2 * n3 / one_m,
        "dn3_dz_cmc": d_z(n3, c, order) - (-H + 0.5j + one_m / (4 * H + 2j)) * Z3,
    }


def identity_residuals(grid: SpinorGrid, order: int | None = None) -> dict:
    """Sup norms over unmasked nodes of every field of :func:`identity_fields`."""
    return {k: sup_norm(v) for k, v in identity_fields(grid, order).items()}


def sup_norm(field) -> float:
    vals = np.abs(np.asarray(field))
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        raise ValueError("no unmasked nodes")
    return float(np.max(vals))


def main_equation_from_derivatives(n3, n3_x, n3_y, lap_n3):
    """Delta n3 + 2 n3 (n3_x^2 + n3_y^2)/(1 - n3^2); NaN where |n3| >= 1."""
    n3 = np.asarray(n3, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lap_n3 + 2 * n3 * (n3_x**2 + n3_y**2) / (1 - n3**2)
    return np.where(np.abs(n3) < 1, out, np.nan)


def main_equation_residual(n3, chart: Chart, order: int = 4):
    """Finite-difference residual of the main equation for a gridded n3."""
    n3 = np.where(np.abs(n3) < 1, n3, np.nan)
    return main_equation_from_derivatives(n3, _dx(n3, chart, order), _dy(n3, chart, order),
                                          laplacian(n3, chart, order))


def metric_from_n3(n3, dn3_dz, H):
    """e^{2 alpha} = 4/(1 - n3^2) (16H^2 + 4)/(4H^2 + n3^2)^2 |d n3/dz|^2.

    Nodes with |n3| >= 1 or d n3/dz = 0 are NaN.
    """
    n3 = np.asarray(n3, dtype=float)
    g = np.abs(dn3_dz) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 4 / (1 - n3**2) * (16 * H * H + 4) / (4 * H * H + n3**2) ** 2 * g
    return np.where((np.abs(n3) < 1) & (g > 0), out, np.nan)


# -- the cmc spheres S_H on charts ---------------------------------------------

def _sphere_parts(H, r, theta):
    p = cmc_family.profile(H, r)
    drho, dpsi, dh = cmc_family.profile_derivatives(H, r)
    phi = p.psi + theta
    j_rho, j_phi, j_h = cyl_jacobian(p.rho, phi)
    f = np.array(cyl_to_cart_arrays(p.rho, phi, p.h))
    S_r = j_rho * drho + j_phi * dpsi + j_h * dh
    return f, S_r, j_phi


def sphere_immersion(H: float, kind: str = "planar") -> Callable:
    """Conformal chart of S_H with analytic derivatives.

    ``planar``: w = x + i y, the surface point at conformal radius 1/|w| and
    rotation angle -arg w. The only singular point is w = 0 (n3 = 1); there
    n3 = (|w|^2 - 1)/(|w|^2 + 1).
    ``cylinder``: (t, theta) with w = e^{t + i theta}; regular everywhere,
    n3 = tanh t, periodic in theta.
    """
    H = float(H)
    if kind == "planar":
        def immersion(x, y):
            q = x * x + y * y
            r = 1 / np.sqrt(q)
            f, S_r, S_th = _sphere_parts(H, r, -np.arctan2(y, x))
            r3 = r**3
            return f, S_r * (-x * r3) + S_th * (y / q), S_r * (-y * r3) + S_th * (-x / q)
    elif kind == "cylinder":
        def immersion(t, th):
            r = np.exp(-t)
            f, S_r, S_th = _sphere_parts(H, r, -th)
            return f, -r * S_r, -S_th
    else:
        raise ValueError("kind must be 'planar' or 'cylinder'")
    return immersion


def sphere_chart_n3(chart: Chart, kind: str = "planar"):
    """Exact n3 on a sphere chart, for cross-checks."""
    X, Y = chart.mesh()
    if kind == "planar":
        q = X * X + Y * Y
        return (q - 1) / (q + 1)
    return np.tanh(X)


def sphere_grid(H: float, n: int = 41, center: complex = 1 + 0j, half_width: float = 0.5,
                order: int = 4, dressed: bool = True) -> SpinorGrid:
    """Planar chart of S_H around ``center``; points near w = 0 are masked."""
    chart = square_chart(center, half_width, n)
    grid = grid_from_immersion(chart, sphere_immersion(H, "planar"), singular_points=(0j,),
                               order=order)
    return dressing(grid, H=H, order=order) if dressed else grid


def sphere_cylinder_grid(H: float, n_t: int, n_theta: int, t_min: float = -12.0,
                         t_max: float = 12.5, order: int = 4, dressed: bool = True) -> SpinorGrid:
    """Whole-sphere cylinder chart of S_H (both poles excluded by the t window)."""
    chart = cylinder_chart(t_min, t_max, n_t, n_theta)
    grid = grid_from_immersion(chart, sphere_immersion(H, "cylinder"), order=order)
    return dressing(grid, H=H, order=order) if dressed else grid


def chart_integral(field, chart: Chart):
    """Integral of a gridded field over the chart (dx dy).

    Simpson's rule along x; along y Simpson's rule, or the rectangle rule
    for periodic charts (spectrally accurate for smooth periodic data).
    """
    f = np.asarray(field)
    if np.any(~np.isfinite(f)):
        raise ValueError("cannot integrate over masked nodes")
    fx = simpson(f, dx=chart.step_x, axis=0)
    if chart.periodic_y:
        return np.sum(fx) * chart.step_y
    return simpson(fx, dx=chart.step_y)


def uv_integral(grid: SpinorGrid) -> complex:
    """Chart integral of U V dx dy; on a closed surface the imaginary part vanishes."""
    if grid.U is None:
        raise ValueError("grid must be dressed first")
    return complex(chart_integral(grid.U * grid.V, grid.chart))


# -- convergence ----------------------------------------------------------------

def nested_sizes(n: int, levels: int = 3) -> list[int]:
    """n, 2n - 1, 4n - 3, ...: each grid contains all nodes of the previous one."""
    return [(n - 1) * 2**k + 1 for k in range(levels)]


def convergence_study(make_fields: Callable[[int], dict], n: int, levels: int = 3) -> dict:
    """Sup norms of residual fields on nested grids, over the common coarse nodes.

    ``make_fields(m)`` returns a dict of fields on an m x m grid. Returns
    ``{name: {"norms": [...], "orders": [...]}}`` with observed orders
    log2(norm_k / norm_{k+1}).
    """
    sizes = nested_sizes(n, levels)
    norms: dict[str, list] = {}
    for k, m in enumerate(sizes):
        stride = 2**k
        for name, field in make_fields(m).items():
            norms.setdefault(name, []).append(sup_norm(np.asarray(field)[::stride, ::stride]))
    out = {}
    for name, vals in norms.items():
        vals = np.array(vals)
        with np.errstate(divide="ignore"):
            orders = np.log2(vals[:-1] / vals[1:])
        out[name] = {"norms": vals.tolist(), "orders": orders.tolist()}
    return out


def sphere_identity_study(H: float, n: int = 21, order: int = 4, center: complex = 1 + 0j,
                          half_width: float = 0.5, levels: int = 3) -> dict:
    """Convergence of every identity residual on nested planar charts of S_H.

    Only nodes that are interior on the coarsest grid enter the norms, so the
    same physical points are compared across levels.
    """
    pad = order // 2 + 1

    def fields(m):
        g = sphere_grid(H, m, center, half_width, order)
        stride = (m - 1) // (n - 1)
        keep = np.zeros(g.chart.shape, dtype=bool)
        keep[pad * stride:m - pad * stride, pad * stride:m - pad * stride] = True
        return {k: np.where(keep, v, np.nan) for k, v in identity_fields(g).items()}

    return convergence_study(fields, n, levels)


# -- export ---------------------------------------------------------------------

CSV_COLUMNS = ("x", "y", "psi1_re", "psi1_im", "psi2_re", "psi2_im", "Z1_re", "Z1_im",
               "Z2_re", "Z2_im", "Z3_re", "Z3_im", "A_re", "A_im", "Atilde_re", "Atilde_im",
               "alpha", "n1", "n2", "n3", "H")


def write_grid_csv(grid: SpinorGrid, path) -> None:
    """One row per node; masked nodes are written as ``nan``."""
    if not grid.dressed:
        raise ValueError("grid must be dressed first")
    X, Y = grid.chart.mesh()
    cols = [X, Y]
    for c in (grid.psi1, grid.psi2, grid.Z1, grid.Z2, grid.Z3, grid.A, grid.Atilde):
        cols += [np.real(c), np.imag(c)]
    cols += [grid.alpha, *grid.normal, grid.H]
    table = np.stack([np.ravel(c) for c in cols], axis=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in table:
            w.writerow([repr(float(v)) for v in row])
