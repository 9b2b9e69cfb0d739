"""Explicit Runge-Kutta integration over generic scalars.

The Dormand-Prince 5(4) pair is written against a minimal state
interface (addition, scaling by floats), so the state may be a float
array, a batch of Monte Carlo trajectories, or a :class:`~momentode.dual.Dual2`
carrying derivative coefficients.  Error control folds in every Taylor
coefficient of the state, which keeps propagated derivatives as accurate
as the values themselves.
"""

from dataclasses import dataclass

import numpy as np

from .dual import Dual2, value
from .errors import IntegrationError

__all__ = ["OdeOptions", "integrate"]


@dataclass(frozen=True)
class OdeOptions:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_steps: int = 100_000
    # fixed-grid fallback: classic RK4 on this many uniform steps
    fixed_steps: int = None


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
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4


def _coeffs(y):
    """Flat float view of all Taylor coefficients of a state."""
    if isinstance(y, Dual2):
        return np.concatenate(
            [
                np.asarray(value(y.val), float).ravel(),
                np.asarray(value(y.grad), float).ravel(),
                np.asarray(value(y.hess), float).ravel(),
            ]
        )
    return np.asarray(value(y), float).ravel()


def _combine(y, h, ks, weights):
    out = y
    for k, w in zip(ks, weights):
        if w != 0.0:
            out = out + (h * w) * k
    return out


def _promote_like(y, k):
    """Lift a plain state to a zero-coefficient Dual2 when the RHS is dual.

    Happens when the initial state is built purely from non-random
    parameters while the dynamics depend on seeded ones.
    """
    if isinstance(k, Dual2) and not isinstance(y, Dual2):
        return Dual2.constant(np.asarray(y), k.d)
    return y


def integrate(rhs, y0, t0, t_eval, opts=OdeOptions()):
    """Integrate ``dy/dt = rhs(t, y)`` and return states at ``t_eval``.

    ``t_eval`` must be sorted ascending with ``t_eval[0] >= t0``; requested
    times are hit exactly by clipping steps.
    """
    t_eval = list(t_eval)
    if any(b < a for a, b in zip(t_eval, t_eval[1:])) or (t_eval and t_eval[0] < t0):
        raise ValueError("t_eval must be sorted ascending and start at or after t0")
    if not t_eval:
        return []
    if opts.fixed_steps is not None:
        return _integrate_rk4(rhs, y0, t0, t_eval, opts.fixed_steps)

    span = max(t_eval[-1] - t0, 0.0)
    out = []
    t, y = t0, y0
    i = 0
    while i < len(t_eval) and t_eval[i] <= t0:
        out.append(y)
        i += 1
    if i == len(t_eval):
        return out

    h = max(span * 1e-3, 1e-12)
    k1 = rhs(t, y)
    y = _promote_like(y, k1)
    n_steps = 0
    hmin = max(span, 1.0) * 1e-14
    while i < len(t_eval):
        if n_steps >= opts.max_steps:
            raise IntegrationError(f"step budget exhausted at t={t:.6g}", t=t)
        h = min(h, t_eval[i] - t)
        ks = [k1]
        for s in range(1, 7):
            ys = _combine(y, h, ks, _A[s])
            ks.append(rhs(t + _C[s] * h, ys))
        y_new = _combine(y, h, ks, _B5)
        err = _combine(y, h, ks, _E) - y  # pure embedded-difference term

        e = _coeffs(err)
        scale = opts.atol + opts.rtol * np.maximum(
            np.abs(_coeffs(y)), np.abs(_coeffs(y_new))
        )
        ratio = float(np.max(np.abs(e) / scale)) if e.size else 0.0
        if not np.isfinite(ratio):
            ratio = np.inf

        if ratio <= 1.0:
            t = t + h
            y = y_new
            k1 = ks[6]  # FSAL: last stage is rhs at the accepted point
            if abs(t - t_eval[i]) <= 1e-12 * max(1.0, abs(t_eval[i])):
                out.append(y)
                i += 1
            grow = 5.0 if ratio == 0.0 else min(5.0, 0.9 * ratio**-0.2)
            h = h * max(grow, 0.2)
        else:
            h = h * max(0.2, 0.9 * ratio**-0.2)
            if h < hmin:
                raise IntegrationError(f"step size underflow at t={t:.6g}", t=t)
        n_steps += 1
    return out


def _integrate_rk4(rhs, y0, t0, t_eval, n_steps):
    grid = np.union1d(np.linspace(t0, t_eval[-1], n_steps + 1), t_eval)
    out = []
    t, y = t0, y0
    i = 0
    while i < len(t_eval) and t_eval[i] <= t0:
        out.append(y)
        i += 1
    for t_next in grid:
        if t_next <= t:
            continue
        h = t_next - t
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + (h / 2) * k1)
        k3 = rhs(t + h / 2, y + (h / 2) * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6) * k1 + (h / 3) * k2 + (h / 3) * k3 + (h / 6) * k4
        t = t_next
        while i < len(t_eval) and abs(t - t_eval[i]) <= 1e-12 * max(1.0, abs(t)):
            out.append(y)
            i += 1
    return out
