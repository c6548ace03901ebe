"""Constant mean curvature spheres of revolution in S^2 x R.

The quotient by rotations is B = {(x, y): x in R, y in [0, pi]}, with x the
R coordinate and y the polar angle on S^2. A meridian parametrized by
arclength s with angle sigma to the x-axis satisfies

    x' = cos(sigma),   y' = sin(sigma),   sigma' = h + cot(y) cos(sigma),

and the surface has mean curvature h, dmu = sin(y) dtheta ds and ambient
sectional curvature Khat = sin(sigma)^2 along its tangent planes. The
sphere meridian leaves the axis y = 0 vertically (sigma = pi/2) and comes
back to it (sigma = 3 pi/2).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .numerics import Event, OdeState, ode_solve, sample_derivative

JUNCTION_SIGMA = 1.25 * np.pi


class ClosureError(RuntimeError):
    pass


@dataclass(frozen=True)
class S2RProfile:
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    h: float

    def __post_init__(self):
        for name in ("s", "x", "y", "sigma"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not np.all(np.diff(self.s) > 0):
            raise ValueError("s must be strictly increasing")
        if np.any(self.y < -1e-12) or np.any(self.y > np.pi + 1e-12):
            raise ValueError("y must lie in [0, pi]")

    @property
    def step(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def length(self) -> float:
        return float(self.s[-1] - self.s[0])


def _check_h(h):
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"h must be positive and finite, got {h!r}")
    return float(h)


def pedrosa_rhs(x, y, sigma, h):
    """(x', y', sigma') for y strictly inside (0, pi)."""
    y = np.asarray(y, dtype=float)
    if np.any((y <= 0) | (y >= np.pi)):
        raise ValueError("y on the axis requires pole regularization")
    c = np.cos(sigma)
    out = (c, np.sin(sigma), h + c / np.tan(y))
    return tuple(float(v) for v in out) if np.ndim(y) == 0 else out


def _pole_series(t, h):
    return np.array([-0.25 * h * t * t, t, 0.5 * h * t])


def _from_offset(z, backward: bool):
    if backward:
        return np.array([-z[0], z[1], 1.5 * np.pi - z[2]])
    return np.array([z[0], z[1], 0.5 * np.pi + z[2]])


def generate_sphere(h: float, tol: float = 1e-10, n: int = 4001,
                    closure_tol: float = 1e-7) -> S2RProfile:
    """Sphere meridian of mean curvature h by two-sided shooting.

    Near the axis sigma = pi/2 + h s/2, y = s, x = -h s^2/4 (and the mirror
    image at the far end); the arcs meet where sigma = 5 pi/4.
    """
    h = _check_h(h)
    eps = 1e-8 * max(1.0, 1.0 / h)
    span = 8 * np.pi + 10.0

    # Both arcs are integrated in the offset angle t = sigma - pi/2 (forward)
    # and t = 3 pi/2 - sigma (backward, in tau = L - s), which satisfy the
    # same system up to x -> -x, so both start from a small angle.
    def offset_rhs(s, z):
        xd, yd, sd = pedrosa_rhs(z[0], z[1], z[2] + 0.5 * np.pi, h)
        return np.array([xd, yd, sd])

    start = OdeState(eps, [-0.25 * h * eps**2, eps, 0.5 * h * eps])
    fwd = ode_solve(offset_rhs, start, span, tol=tol,
                    events=[Event(lambda s, z: z[2] - (JUNCTION_SIGMA - 0.5 * np.pi))])
    bwd = ode_solve(offset_rhs, start, span, tol=tol,
                    events=[Event(lambda s, z: z[2] - (1.5 * np.pi - JUNCTION_SIGMA))])
    if not (fwd.terminated and bwd.terminated):
        raise ClosureError("shooting did not reach the junction angle")
    s1, z1 = fwd.event_s[-1], _from_offset(fwd.event_y[-1], False)
    t2, z2 = bwd.event_s[-1], _from_offset(bwd.event_y[-1], True)
    if abs(z1[1] - z2[1]) > closure_tol:
        raise ClosureError(f"meridian does not close: junction mismatch |dy| = {abs(z1[1] - z2[1]):.3e}")
    L = s1 + t2
    shift = z1[0] - z2[0]
    s = np.linspace(0.0, L, n)
    out = np.empty((n, 3))
    for i, si in enumerate(s):
        if si <= s1:
            out[i] = _from_offset(_pole_series(si, h) if si < eps else fwd(si), False)
        else:
            tau = L - si
            zb = _from_offset(_pole_series(tau, h) if tau < eps else bwd(tau), True)
            out[i] = (zb[0] + shift, zb[1], zb[2])
    out[0, 1] = out[-1, 1] = 0.0
    return S2RProfile(s, out[:, 0], out[:, 1], out[:, 2], h)


def mean_curvature(profile: S2RProfile) -> np.ndarray:
    """h = sigma' - cot(y) cos(sigma); at the axis cot(y) cos(sigma) -> -sigma'."""
    sd = sample_derivative(profile.sigma, profile.step)
    axis = profile.y <= 1e-14
    with np.errstate(divide="ignore", invalid="ignore"):
        cc = np.where(axis, -sd, np.cos(profile.sigma) / np.tan(np.where(axis, 1.0, profile.y)))
    return sd - cc


def khat(profile: S2RProfile) -> np.ndarray:
    return np.sin(profile.sigma) ** 2


def area_quadrature(profile: S2RProfile) -> float:
    return float(2 * np.pi * simpson(np.sin(profile.y), dx=profile.step))


def khat_quadrature(profile: S2RProfile) -> float:
    return float(2 * np.pi * simpson(khat(profile) * np.sin(profile.y), dx=profile.step))


def _log_term(h):
    q = np.sqrt(1 + h * h)
    # ln((q + 1)/(q - 1)) with q - 1 = h^2/(q + 1) to avoid cancellation
    return np.log((q + 1) ** 2 / (h * h))


def closed_forms(h: float) -> tuple[float, float]:
    """(area, int Khat dmu) of the sphere of mean curvature h."""
    h = _check_h(h)
    q2 = 1 + h * h
    Lg = _log_term(h)
    area = 4 * np.pi * (2 / q2 + h * h / q2**1.5 * Lg)
    int_khat = 4 * np.pi * (2 - h * h / np.sqrt(q2) * Lg)
    return float(area), float(int_khat)


def willmore_type_value(h: float, mode: str = "closed_form", tol: float = 1e-10) -> float:
    """int (H^2 + Khat + 1) dmu = h^2 A + int Khat + A; equal to 16 pi."""
    h = _check_h(h)
    if mode == "closed_form":
        area, ik = closed_forms(h)
    elif mode == "quadrature":
        prof = generate_sphere(h, tol)
        area, ik = area_quadrature(prof), khat_quadrature(prof)
    else:
        raise ValueError("mode must be 'closed_form' or 'quadrature'")
    return h * h * area + ik + area


def write_profile_csv(profile: S2RProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# space=s2xr\n")
        fh.write(f"# h={profile.h!r}\n")
        w = csv.writer(fh)
        w.writerow(["s", "x", "y", "sigma"])
        for row in zip(profile.s, profile.x, profile.y, profile.sigma):
            w.writerow([repr(float(v)) for v in row])
