"""Criticality of the spinor energy: Euler-Lagrange residual, the cmc-sphere
identities, perturbations of sphere meridians and a descent minimizer.

The Euler-Lagrange integrand is

    Delta H + 2H(H^2 - K) + 2 e^{-4 alpha}(A conj(Z3)^2 + conj(A) Z3^2),

where Delta is the Laplace-Beltrami operator of e^{2 alpha}|dz|^2 and K is
the product of the principal curvatures. By the Gauss equation in Nil,
K = K_int - Khat with K_int = -e^{-2 alpha} (alpha_xx + alpha_yy) the
intrinsic curvature and Khat = 1/4 - n3^2 the ambient sectional curvature
of the tangent plane.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .numerics import cumulative_integral
from .revolution import ClosureError, ProfileCurve, closure_and_topology, energy_reduced, is_embedded
from .weierstrass import SpinorGrid, convergence_study, laplacian, sphere_grid


# -- Euler-Lagrange residual ----------------------------------------------------

@dataclass(frozen=True)
class ElResidualField:
    values: np.ndarray
    K: np.ndarray
    K_intrinsic: np.ndarray
    K_hat: np.ndarray
    laplace_H: np.ndarray


def el_residual(grid: SpinorGrid, order: int | None = None) -> ElResidualField:
    """Pointwise Euler-Lagrange integrand on a dressed grid; masked nodes stay NaN."""
    if not grid.dressed:
        raise ValueError("grid must be dressed first")
    order = grid.order if order is None else order
    c = grid.chart
    with np.errstate(invalid="ignore"):
        e2 = np.exp(-2 * grid.alpha)
        K_int = -e2 * laplacian(grid.alpha, c, order)
        K_hat = 0.25 - grid.n3**2
        K = K_int - K_hat
        lap_H = e2 * laplacian(grid.H, c, order)
        Z3 = grid.Z3
        hopf_term = 2 * e2**2 * np.real(grid.A * np.conj(Z3) ** 2 + np.conj(grid.A) * Z3**2)
        values = lap_H + 2 * grid.H * (grid.H**2 - K) + hopf_term
    return ElResidualField(values, K, K_int, K_hat, lap_H)


def el_residual_study(H: float, n: int = 21, order: int = 4, center: complex = 1 + 0j,
                      half_width: float = 0.5, levels: int = 3) -> dict:
    """Sup norms and observed orders of :func:`el_residual` on nested charts of S_H.

    As in :func:`~nilwillmore.weierstrass.sphere_identity_study`, only nodes
    interior on the coarsest grid are compared; the Laplacians of H and alpha
    need a stencil of width ``order`` on each side.
    """
    pad = order + 1

    def fields(m):
        g = sphere_grid(H, m, center, half_width, order)
        stride = (m - 1) // (n - 1)
        keep = np.zeros(g.chart.shape, dtype=bool)
        keep[pad * stride:m - pad * stride, pad * stride:m - pad * stride] = True
        return {"el_residual": np.where(keep, el_residual(g).values, np.nan)}

    return convergence_study(fields, n, levels)["el_residual"]


def theorem3_identities(H, Z3, alpha) -> dict:
    """The two cmc-sphere identities behind criticality, as scaled residuals.

    With A = -Z3^2/(2H + i) and K from H^2 - K = 4 e^{-4 alpha}|A|^2:

        2H(H^2 - K)                          =  8 e^{-4 alpha} H |Z3|^4/(4H^2 + 1),
        2 e^{-4 alpha}(A conj(Z3)^2 + c.c.)  = -8 e^{-4 alpha} H |Z3|^4/(4H^2 + 1),

    so their sum, the Euler-Lagrange integrand with Delta H = 0, vanishes.
    Residuals are relative to the largest operand, max(1, |rhs|, 2H H^2,
    2H |K|): forming H^2 - K costs round-off of order eps H^2. Inputs broadcast.
    """
    H = np.asarray(H, dtype=float)
    Z3 = np.asarray(Z3, dtype=complex)
    e4 = np.exp(-4 * np.asarray(alpha, dtype=float))
    A = -Z3**2 / (2 * H + 1j)
    K = H**2 - 4 * e4 * np.abs(A) ** 2
    term1 = 2 * H * (H**2 - K)
    term2 = 2 * e4 * np.real(A * np.conj(Z3) ** 2 + np.conj(A) * Z3**2)
    rhs = 8 * e4 * H * np.abs(Z3) ** 4 / (4 * H**2 + 1)
    scale = np.maximum.reduce([np.ones_like(rhs), np.abs(rhs), 2 * H**3, 2 * H * np.abs(K)])
    return {
        "gauss_term": np.abs(term1 - rhs) / scale,
        "hopf_term": np.abs(term2 + rhs) / scale,
        "sum": np.abs(term1 + term2) / scale,
    }


# -- perturbations of sphere meridians --------------------------------------------

def _meridian_from_sigma(s: np.ndarray, sigma: np.ndarray) -> ProfileCurve:
    h = s[1] - s[0]
    u = cumulative_integral(np.cos(sigma), h)
    u[0] = 0.0
    u[-1] = 0.0
    v = cumulative_integral(0.5 * np.sqrt(4 + u * u) * np.sin(sigma), h)
    return ProfileCurve(s, u, v, sigma, "sphere")


def _closure_gap(sigma: np.ndarray, h: float) -> float:
    return float(cumulative_integral(np.cos(sigma), h)[-1])


def project_closure(s: np.ndarray, sigma: np.ndarray, max_iter: int = 50) -> tuple[np.ndarray, float]:
    """Add c sin(pi s/L) to sigma so that u(L) = int cos(sigma) ds = 0.

    The bump leaves sigma at both poles unchanged. Newton iteration in c;
    returns the corrected sigma and c.
    """
    L = s[-1] - s[0]
    h = s[1] - s[0]
    bump = np.sin(np.pi * (s - s[0]) / L)
    c = 0.0
    for _ in range(max_iter):
        sig = sigma + c * bump
        g = _closure_gap(sig, h)
        dg = float(cumulative_integral(-np.sin(sig) * bump, h)[-1])
        if dg == 0:
            break
        step = g / dg
        c -= step
        if abs(step) < 1e-15 * max(1.0, abs(c)) or abs(g) < 1e-15 * L:
            break
    sig = sigma + c * bump
    if abs(_closure_gap(sig, h)) > 1e-10 * max(1.0, L):
        raise ClosureError("closure projection did not converge")
    return sig, c


def _checked_sphere(curve: ProfileCurve) -> ProfileCurve:
    if np.any(curve.u[1:-1] <= 0):
        raise ClosureError("meridian touches the axis in its interior")
    if not is_embedded(curve):
        raise ClosureError("meridian is self-intersecting")
    d = closure_and_topology(curve)
    if not d.closed or d.topology != "sphere":
        raise ClosureError("; ".join(d.messages) or "not a sphere meridian")
    return curve


def perturb(curve: ProfileCurve, amplitude: float, mode: int = 2, seed: int | None = None) -> ProfileCurve:
    """Perturb the turning angle of a sphere meridian and re-close it.

    Adds ``amplitude * sin(mode pi s/L)`` to sigma; with a ``seed`` the
    perturbation is instead a random combination of modes 2..mode with the
    largest coefficient equal to ``amplitude``. u and v are re-integrated
    from sigma, and closure is restored by :func:`project_closure`. Mode 1
    is the correction direction itself, so modes start at 2.
    """
    if curve.topology != "sphere":
        raise ValueError("perturb needs a sphere meridian")
    if mode < 2:
        raise ValueError("mode must be >= 2")
    if amplitude == 0:
        return curve
    s = curve.s
    x = (s - s[0]) / curve.length
    if seed is None:
        delta = np.sin(mode * np.pi * x)
    else:
        rng = np.random.default_rng(seed)
        coeffs = rng.normal(size=mode - 1)
        coeffs /= np.max(np.abs(coeffs))
        delta = sum(ck * np.sin(k * np.pi * x) for k, ck in zip(range(2, mode + 1), coeffs))
    sigma, _ = project_closure(s, curve.sigma + amplitude * delta)
    return _checked_sphere(_meridian_from_sigma(s, sigma))


# -- descent ------------------------------------------------------------------------

@dataclass
class MinimizeOptions:
    max_iter: int = 500
    n_modes: int = 12
    tol_E: float = 1e-13
    tol_grad: float = 1e-9
    tol_c: float = 1e-10
    fd_step: float = 1e-6
    armijo: float = 1e-4
    max_halvings: int = 40


@dataclass
class DescentTrace:
    iterations: list = field(default_factory=list)  # (iter, E, violation, step)
    converged: bool = False
    failed: bool = False
    message: str = ""

    @property
    def energies(self) -> np.ndarray:
        return np.array([row[1] for row in self.iterations])

    def is_monotone(self) -> bool:
        e = self.energies
        return bool(np.all(np.diff(e) <= 0))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "E", "violation", "step"])
            for it, E, viol, step in self.iterations:
                w.writerow([it, repr(float(E)), repr(float(viol)), repr(float(step))])


class _Problem:
    """Reduced energy as a function of sine coefficients added to sigma."""

    def __init__(self, initial: ProfileCurve, n_modes: int):
        self.s = initial.s
        self.sigma0 = initial.sigma
        x = (self.s - self.s[0]) / initial.length
        self.basis = np.array([np.sin(k * np.pi * x) / k for k in range(2, n_modes + 1)])

    def curve(self, c: np.ndarray) -> tuple[ProfileCurve, float]:
        sigma, _ = project_closure(self.s, self.sigma0 + c @ self.basis)
        curve = _checked_sphere(_meridian_from_sigma(self.s, sigma))
        h = self.s[1] - self.s[0]
        return curve, abs(_closure_gap(sigma, h))

    def energy(self, c: np.ndarray) -> float:
        try:
            return energy_reduced(self.curve(c)[0])
        except (ClosureError, ValueError):
            return np.inf

    def gradient(self, c: np.ndarray, step: float) -> np.ndarray:
        g = np.empty_like(c)
        for k in range(c.size):
            e = np.zeros_like(c)
            e[k] = step
            g[k] = (self.energy(c + e) - self.energy(c - e)) / (2 * step)
        return g


def minimize_energy(initial: ProfileCurve, options: MinimizeOptions | None = None
                    ) -> tuple[ProfileCurve, DescentTrace]:
    """Descend the reduced energy over closed sphere meridians of fixed length.

    The turning angle is the initial one plus a sine series in modes
    2..n_modes (mode 1 is spent on exact closure at every evaluation).
    Quasi-Newton (BFGS) directions with finite-difference gradients and a
    backtracking Armijo line search halving the step.
    """
    opt = options or MinimizeOptions()
    if initial.topology != "sphere":
        raise ValueError("minimize_energy needs a sphere meridian")
    prob = _Problem(initial, opt.n_modes)
    c = np.zeros(prob.basis.shape[0])
    curve, viol = prob.curve(c)
    E = energy_reduced(curve)
    trace = DescentTrace([(0, E, viol, 0.0)])
    g = prob.gradient(c, opt.fd_step)
    Hinv = np.eye(c.size)
    for it in range(1, opt.max_iter + 1):
        if np.max(np.abs(g)) < opt.tol_grad and viol < opt.tol_c:
            trace.converged, trace.message = True, "gradient below tolerance"
            break
        d = -Hinv @ g
        if g @ d >= 0:
            Hinv = np.eye(c.size)
            d = -g
        t = 1.0
        for _ in range(opt.max_halvings):
            E_new = prob.energy(c + t * d)
            if E_new <= E + opt.armijo * t * (g @ d):
                break
            t *= 0.5
        else:
            trace.failed, trace.message = True, "line search failed"
            break
        c_new = c + t * d
        g_new = prob.gradient(c_new, opt.fd_step)
        sk, yk = c_new - c, g_new - g
        if sk @ yk > 1e-16:
            rho = 1.0 / (sk @ yk)
            I = np.eye(c.size)
            Hinv = (I - rho * np.outer(sk, yk)) @ Hinv @ (I - rho * np.outer(yk, sk)) + rho * np.outer(sk, sk)
        dE = E - E_new
        c, g, E = c_new, g_new, E_new
        curve, viol = prob.curve(c)
        trace.iterations.append((it, E, viol, t))
        if dE < opt.tol_E and viol < opt.tol_c:
            trace.converged, trace.message = True, "energy change below tolerance"
            break
    else:
        trace.failed, trace.message = True, "iteration budget exhausted"
    return curve, trace
