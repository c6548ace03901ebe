"""Explicit adaptive ODE integration (Dormand-Prince 5(4) with dense output).

The step controller is deterministic: identical inputs and tolerances give
bit-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

_EPS = np.finfo(float).eps

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array(_A[6] + [0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
               22 / 525, -1 / 40])
# Shampine's continuous extension as used in Hairer's DOPRI5.
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
               -10690763975 / 1880347072, 701980252875 / 199316789632,
               -1453857185 / 822651844, 69997945 / 29380423])


@dataclass(frozen=True)
class OdeState:
    s: float
    y: np.ndarray

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if not (np.isfinite(self.s) and np.all(np.isfinite(y))):
            raise ValueError("OdeState entries must be finite")
        object.__setattr__(self, "y", y)


class OdeError(RuntimeError):
    """Base class for integration failures."""

    def __init__(self, message, state: OdeState | None = None):
        super().__init__(message)
        self.state = state


class StepSizeUnderflow(OdeError):
    """The controller asked for a step below round-off; usually a singularity."""


class StepBudgetExhausted(OdeError):
    pass


@dataclass
class Event:
    """Zero crossing of ``fn(s, y)`` to locate during integration."""

    fn: Callable[[float, np.ndarray], float]
    terminal: bool = True
    direction: int = 0


@dataclass
class Trajectory:
    s: np.ndarray
    y: np.ndarray
    event_s: list = field(default_factory=list)
    event_y: list = field(default_factory=list)
    terminated: bool = False
    _coeffs: list = field(default_factory=list, repr=False)

    @property
    def final(self) -> OdeState:
        return OdeState(float(self.s[-1]), self.y[-1].copy())

    def __call__(self, s):
        """Evaluate the continuous extension at ``s`` (scalar or array)."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s_arr < self.s[0] - 1e-12 * max(1, abs(self.s[0]))) or np.any(
                s_arr > self.s[-1] + 1e-12 * max(1, abs(self.s[-1]))):
            raise ValueError("dense output requested outside the integrated range")
        idx = np.clip(np.searchsorted(self.s, s_arr, side="right") - 1, 0, len(self._coeffs) - 1)
        out = np.empty((s_arr.size, self.y.shape[1]))
        for j, (sj, i) in enumerate(zip(s_arr, idx)):
            out[j] = _dense_eval(self._coeffs[i], self.s[i], self.s[i + 1], sj)
        return out[0] if np.ndim(s) == 0 else out


def _dense_eval(coeffs, s0, s1, s):
    h = s1 - s0
    theta = (s - s0) / h if h else 0.0
    theta1 = 1.0 - theta
    r1, r2, r3, r4, r5 = coeffs
    return r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)))


def _initial_step(rhs, s0, y0, f0, tol, span):
    scale = tol + tol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = np.asarray(rhs(s0 + h0, y1), dtype=float)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def ode_solve(rhs: Callable, y0: OdeState, s_end: float, tol: float = 1e-10,
              events: Sequence[Event] = (), max_steps: int = 200_000,
              max_step: float = np.inf) -> Trajectory:
    """Integrate ``y' = rhs(s, y)`` from ``y0.s`` to ``s_end``.

    Each accepted step keeps the embedded error estimate below ``tol`` in the
    mixed norm ``|err_i| <= tol * (1 + |y_i|)``. Integration stops early at
    the first terminal event.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    s = float(y0.s)
    y = y0.y.copy()
    if not s_end > s:
        raise ValueError("s_end must exceed the initial s")
    span = s_end - s

    def f(si, yi):
        return np.asarray(rhs(si, yi), dtype=float)

    k = np.empty((7, y.size))
    k[0] = f(s, y)
    h = min(_initial_step(f, s, y, k[0], tol, span), max_step)

    ss, ys, coeffs = [s], [y.copy()], []
    traj = Trajectory(np.empty(0), np.empty((0, y.size)))
    g_prev = [ev.fn(s, y) for ev in events]
    steps = 0
    while s < s_end:
        if steps >= max_steps:
            raise StepBudgetExhausted(f"step budget of {max_steps} exhausted at s = {s!r}",
                                      OdeState(s, y))
        if h < 16 * _EPS * max(1.0, abs(s)):
            raise StepSizeUnderflow(f"step size underflow at s = {s!r}", OdeState(s, y))
        h = min(h, s_end - s)
        for i in range(1, 7):
            k[i] = f(s + _C[i] * h, y + h * np.dot(_A[i], k[:i]))
        y_new = y + h * np.dot(_B[:6], k[:6])
        # k[6] is f(s + h, y_new) by the FSAL property.
        err_vec = h * np.dot(_E, k)
        scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        err = np.max(np.abs(err_vec) / scale)
        if not np.isfinite(err):
            h *= 0.2
            steps += 1
            continue
        if err <= 1.0:
            s_new = s + h if s_end - (s + h) > 16 * _EPS * abs(s_end) else s_end
            ydiff = y_new - y
            bspl = h * k[0] - ydiff
            c = (y.copy(), ydiff, bspl, ydiff - h * k[6] - bspl, h * np.dot(_D, k))
            coeffs.append(c)
            ss.append(s_new)
            ys.append(y_new.copy())
            hit = None
            for j, ev in enumerate(events):
                g_new = ev.fn(s_new, y_new)
                crossed = (g_prev[j] < 0 <= g_new) or (g_prev[j] > 0 >= g_new)
                if crossed and (ev.direction == 0 or np.sign(g_new - g_prev[j]) == ev.direction):
                    s0c, s1c = s, s_new
                    root = brentq(lambda t: ev.fn(t, _dense_eval(c, s0c, s1c, t)), s0c, s1c,
                                  xtol=4 * _EPS * max(1.0, abs(s1c)), rtol=4 * _EPS)
                    y_root = _dense_eval(c, s0c, s1c, root)
                    traj.event_s.append(root)
                    traj.event_y.append(y_root)
                    if ev.terminal and (hit is None or root < hit[0]):
                        hit = (root, y_root)
                g_prev[j] = g_new
            s, y = s_new, y_new
            k[0] = k[6]
            steps += 1
            if hit is not None:
                # truncate: the last stored step now ends at the event
                ss[-1], ys[-1] = hit[0], hit[1]
                coeffs[-1] = _restrict(c, ss[-2], s_new, hit[0])
                traj.terminated = True
                break
            h = min(h * min(5.0, max(0.2, 0.9 * err ** -0.2)) if err > 0 else 5 * h, max_step)
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
            steps += 1
    traj.s = np.array(ss)
    traj.y = np.array(ys)
    traj._coeffs = coeffs
    return traj


def _restrict(coeffs, s0, s1, s_cut):
    """Coefficients for the same interpolant on the shorter interval [s0, s_cut]."""
    frac = (s_cut - s0) / (s1 - s0)
    # Re-fit the quartic in theta on the sub-interval by exact sampling.
    thetas = np.linspace(0.0, 1.0, 5)
    vals = np.array([_dense_eval(coeffs, 0.0, 1.0, frac * t) for t in thetas])
    # Solve for (r1..r5) in r1 + t(r2 + (1-t)(r3 + t(r4 + (1-t) r5))).
    basis = np.array([[1.0, t, t * (1 - t), t * t * (1 - t), t * t * (1 - t) ** 2] for t in thetas])
    sol = np.linalg.solve(basis, vals)
    return tuple(sol)
