"""Finite-difference stencils: pointwise Jacobians, grid derivatives, sampled curves."""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

_EPS = np.finfo(float).eps


class CancellationError(ArithmeticError):
    """Raised when round-off dominates a difference quotient."""


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, deriv: int) -> np.ndarray:
    """Weights w with sum_k w_k f(x + offsets_k h) ~ h**deriv f^(deriv)(x)."""
    offs = np.asarray(offsets, dtype=float)
    n = offs.size
    vander = np.vander(offs, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    w = np.linalg.solve(vander, rhs)
    w.setflags(write=False)
    return w


def _central(order: int, deriv: int = 1) -> tuple[tuple, np.ndarray]:
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    half = order // 2
    offsets = tuple(range(-half, half + 1))
    return offsets, fd_weights(offsets, deriv)


def finite_difference(f: Callable, x, order: int = 2, step: float = 1e-3) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x``.

    Returns an array of shape ``(m, n)`` (``f``: R^n -> R^m); scalar in and
    out gives a scalar. A second estimate at ``step/2`` is compared with the
    first: if their disagreement is at the round-off level and that level
    already swamps half the significant digits, the step is rejected.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    offsets, w = _central(order)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    scalar_in = np.ndim(x) == 0
    fx = f(x_arr[0] if scalar_in else x_arr)
    scalar_out = np.ndim(fx) == 0
    f0 = np.atleast_1d(np.asarray(fx, dtype=float))

    def jac(h):
        out = np.zeros((f0.size, x_arr.size))
        fmax = 0.0
        for j in range(x_arr.size):
            for off, wk in zip(offsets, w):
                if wk == 0.0:
                    continue
                xp = x_arr.copy()
                xp[j] += off * h
                fv = np.atleast_1d(np.asarray(f(xp[0] if scalar_in else xp), dtype=float))
                fmax = max(fmax, float(np.max(np.abs(fv))))
                out[:, j] += wk * fv
        return out / h, fmax

    j1, fmax = jac(step)
    j2, _ = jac(step / 2)
    noise = _EPS * fmax * np.sum(np.abs(w)) / (step / 2)
    disagreement = float(np.max(np.abs(j1 - j2)))
    scale = max(float(np.max(np.abs(j1))), np.finfo(float).tiny)
    if disagreement <= 10 * noise and noise > np.sqrt(_EPS) * scale:
        raise CancellationError(
            f"step {step!r} too small: round-off ~{noise:.2e} dominates the difference quotient")
    if scalar_in and scalar_out:
        return j1[0, 0]
    return j1


def grid_derivative(field: np.ndarray, step: float, axis: int, order: int = 4,
                    deriv: int = 1) -> np.ndarray:
    """Central difference of a gridded field along ``axis``.

    Nodes whose stencil leaves the grid, or touches a NaN (masked) node, are
    NaN in the result.
    """
    offsets, w = _central(order, deriv)
    field = np.asarray(field)
    out = np.full(field.shape, np.nan, dtype=np.result_type(field.dtype, float))
    half = max(offsets)
    n = field.shape[axis]
    if n <= 2 * half:
        return out
    inner = [slice(None)] * field.ndim
    inner[axis] = slice(half, n - half)
    acc = np.zeros_like(out[tuple(inner)])
    for off, wk in zip(offsets, w):
        if wk == 0.0:
            continue
        sl = [slice(None)] * field.ndim
        sl[axis] = slice(half + off, n - half + off)
        acc = acc + wk * field[tuple(sl)]
    out[tuple(inner)] = acc / step**deriv
    return out


def sample_derivative(values: np.ndarray, step: float, order: int = 4,
                      periodic: bool = False) -> np.ndarray:
    """First derivative of uniformly spaced samples.

    Interior nodes use the central stencil; the first and last few nodes use
    one-sided stencils of the same order. With ``periodic=True`` the samples
    are one period without the repeated endpoint.
    """
    values = np.asarray(values, dtype=float)
    offsets, w = _central(order)
    half = max(offsets)
    n = values.size
    if periodic:
        acc = np.zeros(n)
        for off, wk in zip(offsets, w):
            acc += wk * np.roll(values, -off)
        return acc / step
    width = order + 1
    if n < width:
        raise ValueError(f"need at least {width} samples for order {order}")
    out = np.empty(n)
    acc = np.zeros(n - 2 * half)
    for off, wk in zip(offsets, w):
        acc += wk * values[half + off:n - half + off]
    out[half:n - half] = acc
    for i in range(half):
        offs = tuple(range(-i, width - i))
        wl = fd_weights(offs, 1)
        out[i] = np.dot(wl, values[:width])
        out[n - 1 - i] = -np.dot(wl, values[::-1][:width])
    return out / step


def cumulative_integral(values: np.ndarray, step: float) -> np.ndarray:
    """Running integral of uniformly spaced samples, fourth order, starting at 0."""
    f = np.asarray(values, dtype=float)
    n = f.size
    if n < 4:
        raise ValueError("need at least 4 samples")
    pieces = np.empty(n - 1)
    pieces[1:n - 2] = (-f[0:n - 3] + 13 * f[1:n - 2] + 13 * f[2:n - 1] - f[3:n]) / 24
    pieces[0] = (9 * f[0] + 19 * f[1] - 5 * f[2] + f[3]) / 24
    pieces[n - 2] = (9 * f[n - 1] + 19 * f[n - 2] - 5 * f[n - 3] + f[n - 4]) / 24
    out = np.zeros(n)
    out[1:] = np.cumsum(pieces) * step
    return out
