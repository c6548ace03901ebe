"""Surfaces of revolution in Nil through their profile curves.

A rotation-invariant surface is generated by a curve in the quotient
half-plane B = {(u, v): u >= 0} with metric du^2 + 4/(4 + u^2) dv^2, where
(u, v) = (rho, h) are the cylindrical coordinates. The curve is sampled by
arclength s and sigma is its angle to d/du, so

    u' = cos(sigma),   v' = (2u)^{-1} sqrt(4u^2 + u^4) sin(sigma),
    H  = (sigma' + sin(sigma)/u) / 2,
    n3 = 2u cos(sigma) / sqrt(4u^2 + u^4),
    dmu = (1/2) sqrt(4u^2 + u^4) dtheta ds.

We always write sqrt(4u^2 + u^4) as u sqrt(4 + u^2), which is regular at
the axis. Sampled integrals use Simpson's rule on closed sphere meridians
and the rectangle rule on periodic torus meridians.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree
from shapely.geometry import LineString

from . import cmc_family
from .numerics import Event, OdeState, ode_solve, sample_derivative

TOPOLOGIES = ("sphere", "torus")
TOPOLOGY_TOL = 1e-6
CHI = {"sphere": 2, "torus": 0}


class ClosureError(RuntimeError):
    """A meridian is not closed (open curve, or shooting failed to close)."""


class ProfileFormatError(ValueError):
    """Malformed profile CSV."""


@dataclass(frozen=True)
class ProfileCurve:
    """Arclength samples (s, u, v, sigma) of a meridian.

    ``s`` must be uniformly spaced and strictly increasing. Torus meridians
    repeat their first point at the end, with sigma advanced by a multiple
    of 2 pi.
    """

    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    sigma: np.ndarray
    topology: str = "sphere"

    def __post_init__(self):
        arrays = []
        for name in ("s", "u", "v", "sigma"):
            a = np.array(getattr(self, name), dtype=float)
            if a.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
            arrays.append(a)
        if len({a.size for a in arrays}) != 1:
            raise ValueError("s, u, v, sigma must have equal length")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        if self.s.size >= 2:
            ds = np.diff(self.s)
            if not np.all(ds > 0):
                raise ValueError("s must be strictly increasing")
            if np.max(np.abs(ds - ds.mean())) > 1e-9 * max(1.0, ds.mean()):
                raise ValueError("s must be uniformly spaced; use resample_uniform")
        if np.any(self.u < -1e-12):
            raise ValueError("u must be >= 0")

    @property
    def n(self) -> int:
        return self.s.size

    @property
    def length(self) -> float:
        return float(self.s[-1] - self.s[0]) if self.n else 0.0

    @property
    def step(self) -> float:
        return float(self.s[1] - self.s[0])

    def subsample(self, k: int) -> "ProfileCurve":
        """Every k-th sample; the sample count minus one must be divisible by k."""
        if (self.n - 1) % k:
            raise ValueError("n - 1 must be divisible by k")
        return ProfileCurve(self.s[::k], self.u[::k], self.v[::k], self.sigma[::k], self.topology)


def resample_uniform(s, u, v, sigma, n: int, topology: str = "sphere") -> ProfileCurve:
    """Cubic-spline resampling of increasing (possibly non-uniform) samples."""
    s = np.asarray(s, dtype=float)
    if not np.all(np.diff(s) > 0):
        raise ValueError("s must be strictly increasing")
    t = np.linspace(s[0], s[-1], n)
    return ProfileCurve(t, CubicSpline(s, u)(t), CubicSpline(s, v)(t),
                        CubicSpline(s, sigma)(t), topology)


# -- the ODE -------------------------------------------------------------------

def ode_rhs(u, v, sigma, H):
    """(u', v', sigma') of a meridian of constant mean curvature H; u must be > 0."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise ValueError("u = 0 requires pole regularization")
    s = np.sin(sigma)
    out = (np.cos(sigma), 0.5 * np.sqrt(4 + u * u) * s, 2 * H - s / u)
    return tuple(float(x) for x in out) if np.ndim(u) == 0 else out


def _rhs(s, y, H):
    return np.array(ode_rhs(y[0], y[1], y[2], H))


def _rhs_mirrored(s, y, H):
    # backward arc in tau = L - s with the reflected angle pi - sigma; the
    # forward system with v' negated, so both arcs start from a small angle
    u, v, ref = ode_rhs(y[0], y[1], y[2], H)
    return np.array([u, -v, ref])


def pole_epsilon(H: float) -> float:
    return 1e-8 * max(1.0, 1.0 / H)


JUNCTION_SIGMA = 0.75 * np.pi


def _unmirror(y):
    # the mirrored second component is already v measured from the upper pole
    return np.array([y[0], y[1], np.pi - y[2]])


@dataclass(frozen=True)
class ShootingResult:
    curve: ProfileCurve
    length: float
    junction_u_mismatch: float
    junction_sigma_mismatch: float
    steps: int


def shoot_cmc(H: float, tol: float = 1e-10, n: int = 4001, closure_tol: float = 1e-7) -> ShootingResult:
    """Two-sided shooting for the cmc meridian.

    The forward arc starts at the lower pole, (u, v, sigma) = (eps, H eps^2/2,
    H eps) at s = eps, and the backward arc starts at the upper pole with
    sigma = pi - H eps; it is integrated in the reflected angle pi - sigma.
    Both stop where sigma = 3 pi/4. Integrating into a
    pole from the far side is unstable (deviations grow like 1/(L - s)),
    which this avoids. The arcs are joined by a shift in v; the mismatch of
    u at the junction measures closure.
    """
    if not H > 0:
        raise ValueError("H must be positive")
    eps = pole_epsilon(H)
    span = 4 * np.pi / H + 10.0
    start = OdeState(eps, [eps, 0.5 * H * eps**2, H * eps])
    fwd = ode_solve(lambda s, y: _rhs(s, y, H), start, span, tol=tol,
                    events=[Event(lambda s, y: y[2] - JUNCTION_SIGMA)])
    bwd_start = OdeState(eps, [eps, -0.5 * H * eps**2, H * eps])
    bwd = ode_solve(lambda s, y: _rhs_mirrored(s, y, H), bwd_start, span, tol=tol,
                    events=[Event(lambda s, y: y[2] - (np.pi - JUNCTION_SIGMA))])
    if not (fwd.terminated and bwd.terminated):
        raise ClosureError("shooting did not reach the junction angle")
    s1, y1 = fwd.event_s[-1], fwd.event_y[-1]
    t2 = bwd.event_s[-1]
    y2 = _unmirror(bwd.event_y[-1])
    du = float(y1[0] - y2[0])
    dsig = float(y1[2] - y2[2])
    if abs(du) > closure_tol:
        raise ClosureError(f"meridian does not close: junction mismatch |du| = {abs(du):.3e}")
    L = s1 + t2
    v_shift = y1[1] - y2[1]

    s = np.linspace(0.0, L, n)
    u = np.empty(n)
    v = np.empty(n)
    sig = np.empty(n)
    for i, si in enumerate(s):
        if si <= s1:
            if si < eps:
                u[i], v[i], sig[i] = si, 0.5 * H * si * si, H * si
            else:
                u[i], v[i], sig[i] = fwd(si)
        else:
            tau = L - si
            yb = _unmirror([tau, -0.5 * H * tau * tau, H * tau] if tau < eps else bwd(tau))
            u[i], v[i], sig[i] = yb[0], yb[1] + v_shift, yb[2]
    u[0] = u[-1] = 0.0
    curve = ProfileCurve(s, u, v, sig, "sphere")
    return ShootingResult(curve, L, du, dsig, len(fwd.s) + len(bwd.s) - 2)


def generate_cmc_profile(H: float, tol: float = 1e-10, n: int = 4001,
                         closure_tol: float = 1e-7) -> ProfileCurve:
    """Meridian of the cmc sphere of mean curvature H, from the ODE."""
    return shoot_cmc(H, tol, n, closure_tol).curve


# -- pointwise geometry ----------------------------------------------------------

@dataclass(frozen=True)
class GeometryFields:
    sigma_dot: np.ndarray
    sin_over_u: np.ndarray
    H: np.ndarray
    n3: np.ndarray
    density: np.ndarray  # (1/2) u sqrt(4 + u^2), per dtheta ds
    consistency: np.ndarray  # u' - cos(sigma)


def _periodic_parts(curve: ProfileCurve):
    """Samples of one period without the repeated endpoint, and the sigma winding."""
    winding = curve.sigma[-1] - curve.sigma[0]
    return slice(0, curve.n - 1), winding


def geometry_fields(curve: ProfileCurve) -> GeometryFields:
    """Mean curvature, n3 and area density along the samples.

    sigma' is a fourth-order difference (one-sided at sphere endpoints,
    periodic on tori). At axis samples (u = 0, sphere endpoints only)
    sin(sigma)/u is replaced by its limit sigma'.
    """
    if curve.n < 5:
        raise ValueError("need at least 5 samples")
    h = curve.step
    u, sig = curve.u, curve.sigma
    if curve.topology == "torus":
        sl, wind = _periodic_parts(curve)
        L = curve.length
        ramp = wind * (curve.s - curve.s[0]) / L
        sd = sample_derivative((sig - ramp)[sl], h, periodic=True) + wind / L
        ud = sample_derivative(u[sl], h, periodic=True)
        sd = np.append(sd, sd[0])
        ud = np.append(ud, ud[0])
    else:
        sd = sample_derivative(sig, h)
        ud = sample_derivative(u, h)
    axis = u <= 1e-14
    if np.any(axis[1:-1]) or (curve.topology == "torus" and np.any(axis)):
        raise ValueError("interior sample on the axis (u = 0)")
    with np.errstate(divide="ignore", invalid="ignore"):
        sou = np.where(axis, sd, np.sin(sig) / np.where(axis, 1.0, u))
    root = np.sqrt(4 + u * u)
    return GeometryFields(sd, sou, 0.5 * (sd + sou), 2 * np.cos(sig) / root, 0.5 * u * root,
                          ud - np.cos(sig))


def _integrate(values, curve: ProfileCurve) -> float:
    if curve.topology == "torus":
        return float(np.sum(values[:-1]) * curve.step)
    return float(simpson(values, dx=curve.step))


# -- closure ------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostics:
    closed: bool
    topology: str | None
    chi: int | None
    messages: tuple = ()
    end_u: tuple = (np.nan, np.nan)
    end_sin_sigma: tuple = (np.nan, np.nan)
    max_consistency: float = np.nan
    tagged: str = "sphere"


def closure_and_topology(curve: ProfileCurve, tol: float = TOPOLOGY_TOL) -> Diagnostics:
    """Check the meridian invariants and classify sphere (chi 2) vs torus (chi 0)."""
    msgs = []
    if curve.n < 5 or curve.length == 0:
        return Diagnostics(False, None, None, ("open meridian: fewer than 5 samples or zero length",),
                           tagged=curve.topology)
    u, sig = curve.u, curve.sigma
    end_u = (float(u[0]), float(u[-1]))
    end_sin = (float(np.sin(sig[0])), float(np.sin(sig[-1])))
    is_sphere = max(end_u) <= tol and max(abs(x) for x in end_sin) <= tol
    wind = sig[-1] - sig[0]
    is_loop = (abs(u[-1] - u[0]) <= tol and abs(curve.v[-1] - curve.v[0]) <= tol
               and abs(wind - 2 * np.pi * np.round(wind / (2 * np.pi))) <= tol
               and np.min(u) > tol)
    try:
        cons = float(np.max(np.abs(geometry_fields(curve).consistency)))
    except ValueError as exc:
        msgs.append(str(exc))
        cons = np.nan
    if is_sphere:
        topo = "sphere"
    elif is_loop:
        topo = "torus"
    else:
        topo = None
        msgs.append(f"open meridian: endpoints u = {end_u}, sin(sigma) = {end_sin}")
    if topo is not None and topo != curve.topology:
        msgs.append(f"tagged {curve.topology!r} but samples form a {topo}")
    return Diagnostics(topo is not None and topo == curve.topology, topo,
                       CHI.get(topo) if topo else None, tuple(msgs), end_u, end_sin, cons,
                       curve.topology)


def _require_closed(curve: ProfileCurve) -> Diagnostics:
    d = closure_and_topology(curve)
    if not d.closed:
        raise ClosureError("; ".join(d.messages) or "open meridian")
    return d


# -- functionals -----------------------------------------------------------------

def energy_direct(curve: ProfileCurve) -> float:
    """E = (1/4) int (H^2 - n3^2/4) dmu = (pi/4) int (H^2 - n3^2/4) u sqrt(4 + u^2) ds."""
    _require_closed(curve)
    g = geometry_fields(curve)
    return np.pi / 2 * _integrate((g.H**2 - 0.25 * g.n3**2) * g.density, curve)


def reduced_integrand(curve: ProfileCurve) -> np.ndarray:
    """(sigma' - sin(sigma)/u)^2 u sqrt(4 + u^2); vanishes identically on cmc meridians."""
    g = geometry_fields(curve)
    return (g.sigma_dot - g.sin_over_u) ** 2 * 2 * g.density


def energy_reduced(curve: ProfileCurve) -> float:
    """E = (pi/16) int (sigma' - sin(sigma)/u)^2 u sqrt(4 + u^2) ds + pi chi / 2.

    Writing H^2 = (sigma' - sin(sigma)/u)^2/4 + sigma' sin(sigma)/u in the
    direct form leaves the exact derivative -(pi/4) d/ds[u' sqrt(4 + u^2)],
    which integrates to pi chi/2; the square keeps the factor (pi/4)(1/4).
    """
    d = _require_closed(curve)
    return np.pi / 16 * _integrate(reduced_integrand(curve), curve) + np.pi * d.chi / 2


def energy_imag(curve: ProfileCurve) -> float:
    """Imaginary part (H/4) int n3 dmu of the integral of U V; zero on closed surfaces."""
    _require_closed(curve)
    g = geometry_fields(curve)
    return np.pi / 2 * _integrate(g.H * g.n3 * g.density, curve)


def willmore_direct(curve: ProfileCurve) -> float:
    """W = int (H^2 + 1/4 - n3^2) dmu."""
    _require_closed(curve)
    g = geometry_fields(curve)
    return 2 * np.pi * _integrate((g.H**2 + 0.25 - g.n3**2) * g.density, curve)


def khat_integral(curve: ProfileCurve) -> float:
    """int (1/4 - n3^2) dmu."""
    _require_closed(curve)
    g = geometry_fields(curve)
    return 2 * np.pi * _integrate((0.25 - g.n3**2) * g.density, curve)


def is_embedded(curve: ProfileCurve) -> bool:
    """True unless the meridian polyline crosses itself."""
    pts = np.column_stack([curve.u, curve.v])
    if curve.topology == "torus":
        pts = pts[:-1]
        return LineString(np.vstack([pts, pts[:1]])).is_simple
    return LineString(pts).is_simple


def area_and_volume(curve: ProfileCurve) -> tuple[float, float]:
    """Area pi int u sqrt(4 + u^2) ds and, for spheres, volume |pi int u^2 v' ds|.

    The volume is Green's theorem in B for the density rho of d nu = rho
    d rho d phi d h; the axis segment closing a sphere meridian contributes
    nothing. A zero-length curve has area and volume 0.
    """
    if curve.n < 2 or curve.length == 0:
        return 0.0, 0.0
    _require_closed(curve)
    g = geometry_fields(curve)
    area = 2 * np.pi * _integrate(g.density, curve)
    if curve.topology != "sphere":
        return area, float("nan")
    if not is_embedded(curve):
        raise ValueError("self-intersecting meridian: enclosed volume undefined")
    vdot = sample_derivative(curve.v, curve.step)
    return area, abs(np.pi * _integrate(curve.u**2 * vdot, curve))


@dataclass(frozen=True)
class RevolutionReport:
    """Functionals of a closed meridian; ``errors`` holds the change under 2x coarsening."""

    E_direct: float
    E_reduced: float
    E_imag: float
    W: float
    area: float
    volume: float
    chi: int
    errors: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"E_direct": self.E_direct, "E_reduced": self.E_reduced, "E_imag": self.E_imag,
                "W": self.W, "area": self.area, "volume": self.volume, "chi": self.chi}


def _values(curve):
    a, v = area_and_volume(curve)
    return {"E_direct": energy_direct(curve), "E_reduced": energy_reduced(curve),
            "E_imag": energy_imag(curve), "W": willmore_direct(curve), "area": a, "volume": v}


def report(curve: ProfileCurve) -> RevolutionReport:
    d = _require_closed(curve)
    vals = _values(curve)
    errors = {}
    if (curve.n - 1) % 2 == 0 and curve.n >= 9:
        coarse = _values(curve.subsample(2))
        errors = {k: abs(vals[k] - coarse[k]) for k in vals}
    return RevolutionReport(chi=d.chi, errors=errors, **vals)


# -- constructors and comparison ------------------------------------------------

def profile_from_parametric(points, n: int, topology: str = "torus") -> ProfileCurve:
    """Arclength meridian through a densely sampled planar curve in B.

    ``points`` is an (m, 2) array of (u, v). For tori the points describe one
    period without repeating the first point. Arclength is measured in the
    metric of B.
    """
    pts = np.asarray(points, dtype=float)
    m = pts.shape[0]
    periodic = topology == "torus"
    t = np.arange(m + 1 if periodic else m, dtype=float)
    if periodic:
        pts = np.vstack([pts, pts[:1]])
    bc = "periodic" if periodic else "not-a-knot"
    su, sv = CubicSpline(t, pts[:, 0], bc_type=bc), CubicSpline(t, pts[:, 1], bc_type=bc)
    # Gauss-Legendre arclength on each parameter interval
    gx, gw = np.polynomial.legendre.leggauss(8)
    mids = 0.5 * (t[:-1, None] + t[1:, None]) + 0.5 * gx[None, :]

    def speed(tt):
        uu, du, dv = su(tt), su(tt, 1), sv(tt, 1)
        return np.sqrt(du**2 + 4 * dv**2 / (4 + uu**2))

    seg = 0.5 * np.sum(gw[None, :] * speed(mids), axis=1)
    S = np.concatenate([[0.0], np.cumsum(seg)])
    s_new = np.linspace(0.0, S[-1], n)
    t_of_s = CubicSpline(S, t)(s_new)
    uu, vv, du, dv = su(t_of_s), sv(t_of_s), su(t_of_s, 1), sv(t_of_s, 1)
    sig = np.unwrap(np.arctan2(2 * dv / np.sqrt(4 + uu**2), du))
    return ProfileCurve(s_new, uu, vv, sig, topology)


def circle_torus(center_u: float, center_v: float, radius: float, n: int = 2001,
                 m: int = 4000) -> ProfileCurve:
    """Torus meridian through the coordinate circle of the given centre and radius."""
    if not center_u > radius > 0:
        raise ValueError("need 0 < radius < center_u so the meridian avoids the axis")
    th = 2 * np.pi * np.arange(m) / m
    pts = np.column_stack([center_u + radius * np.cos(th), center_v + radius * np.sin(th)])
    return profile_from_parametric(pts, n, "torus")


def closed_form_polyline(H: float, m: int = 400_001) -> np.ndarray:
    """Dense polyline (rho(r), h(r) - h(0)) of S_H, including both poles."""
    t = np.linspace(0.0, 1.0, m)[:-1]
    r = t / (1 - t)
    p = cmc_family.profile(H, r)
    h0 = float(cmc_family.profile(H, 0.0).h)
    # h at r = infinity: the rational term vanishes, arctan -> pi/2
    h_inf = (1 + 4 * H * H) / (4 * H * H) * np.pi / 2
    pts = np.column_stack([p.rho, p.h - h0])
    return np.vstack([pts, [0.0, h_inf - h0]])


def _distance_to_polyline(points: np.ndarray, poly: np.ndarray, k: int = 4) -> np.ndarray:
    tree = cKDTree(poly)
    _, idx = tree.query(points, k=k)
    best = np.full(points.shape[0], np.inf)
    last = poly.shape[0] - 1
    for col in range(k):
        for shift in (-1, 0):
            i0 = np.clip(idx[:, col] + shift, 0, last - 1)
            a, b = poly[i0], poly[i0 + 1]
            ab = b - a
            tt = np.clip(np.einsum("ij,ij->i", points - a, ab) / np.einsum("ij,ij->i", ab, ab), 0, 1)
            d = np.linalg.norm(points - (a + tt[:, None] * ab), axis=1)
            best = np.minimum(best, d)
    return best


def distance_to_closed_form(curve: ProfileCurve, H: float, densify: int = 20) -> float:
    """Symmetric point-set (Hausdorff) distance in the (u, v) plane to the exact meridian.

    The sampled curve is densified with cubic splines in s; v is measured
    from the lower pole on both sides.
    """
    poly = closed_form_polyline(H)
    s_fine = np.linspace(curve.s[0], curve.s[-1], (curve.n - 1) * densify + 1)
    gen = np.column_stack([CubicSpline(curve.s, curve.u)(s_fine),
                           CubicSpline(curve.s, curve.v - curve.v[0])(s_fine)])
    d1 = _distance_to_polyline(gen, poly)
    d2 = _distance_to_polyline(poly, gen)
    return float(max(d1.max(), d2.max()))


# -- files ------------------------------------------------------------------------

def write_profile_csv(curve: ProfileCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# topology={curve.topology}\n")
        w = csv.writer(fh)
        w.writerow(["s", "u", "v", "sigma"])
        for row in zip(curve.s, curve.u, curve.v, curve.sigma):
            w.writerow([repr(float(x)) for x in row])


def read_profile_csv(path) -> ProfileCurve:
    """Read a profile written by :func:`write_profile_csv`; rejects non-monotone s."""
    topology = "sphere"
    rows = []
    header = None
    with open(path, newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key.strip() == "topology":
                    topology = val.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                if header != ["s", "u", "v", "sigma"]:
                    raise ProfileFormatError(f"expected header s,u,v,sigma, got {line!r}")
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError as exc:
                raise ProfileFormatError(f"malformed row {line!r}") from exc
    if header is None:
        raise ProfileFormatError("missing header")
    if any(len(r) != 4 for r in rows):
        raise ProfileFormatError("every row needs 4 columns")
    data = np.array(rows, dtype=float).reshape(-1, 4)
    if data.shape[0] >= 2 and not np.all(np.diff(data[:, 0]) > 0):
        raise ProfileFormatError("s is not strictly increasing")
    try:
        return ProfileCurve(data[:, 0], data[:, 1], data[:, 2], data[:, 3], topology)
    except ValueError as exc:
        raise ProfileFormatError(str(exc)) from exc
