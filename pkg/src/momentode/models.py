"""Dynamical models and observation processes.

Every model exposes its raw trajectory columns as functions of a list of
parameter scalars written against the generic arithmetic in
:mod:`momentode.dual`, so the same code path serves plain evaluation,
vectorised Monte Carlo sampling (parameters as sample arrays) and
forward-mode differentiation (parameters as dual scalars).

An :class:`ObservationPlan` turns raw trajectories into observed outputs
by composing per-output noise: noise terms are extra parameter-vector
components (appended after the dynamical parameters), so measurement
error is just another random parameter and derivatives flow through it.
"""

from dataclasses import dataclass

import numpy as np

from .dual import Dual2, eval_with_derivs, exp, stack_scalars, value
from .errors import ModelDomainError, SpecValidationError
from .ode import OdeOptions, integrate

__all__ = [
    "ObservedOutput",
    "ObservationPlan",
    "observe",
    "Logistic",
    "Allee",
    "LinearTwoPool",
    "NonlinearTwoPool",
    "UserODE",
    "get_model",
    "full_param_names",
    "stacked_columns",
    "output_derivs",
]


@dataclass(frozen=True)
class ObservedOutput:
    raw: int = 0
    noise: str = None  # None | "additive" | "multiplicative"
    noise_param: str = None

    def __post_init__(self):
        if self.noise not in (None, "additive", "multiplicative"):
            raise SpecValidationError(f"unknown noise kind {self.noise!r}")
        if (self.noise is None) != (self.noise_param is None):
            raise SpecValidationError("noise kind and noise_param go together")


@dataclass(frozen=True)
class ObservationPlan:
    times: tuple
    outputs: tuple

    def __post_init__(self):
        ts = tuple(self.times)
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise SpecValidationError("observation times must be sorted ascending")

    @property
    def q(self):
        return len(self.outputs)

    @property
    def noise_names(self):
        seen = []
        for o in self.outputs:
            if o.noise_param is not None and o.noise_param not in seen:
                seen.append(o.noise_param)
        return tuple(seen)


def observe(y, noise, eps):
    """Compose a raw output with its noise component."""
    if noise is None:
        return y
    if noise == "additive":
        return y + eps
    if noise == "multiplicative":
        return y * eps
    raise SpecValidationError(f"unknown noise kind {noise!r}")


def _times_array(times, theta):
    t = np.asarray(times, dtype=float)
    if any(isinstance(p, np.ndarray) and p.ndim >= 1 for p in theta):
        return t[:, None]  # broadcast against per-sample parameter arrays
    return t


def _column(states, j):
    """Extract raw-output column j from per-time states."""
    return stack_scalars([s[j] for s in states])


class Model:
    name = ""
    param_names = ()
    n_raw = 1

    def raw_columns(self, theta, times, opts=OdeOptions()):
        raise NotImplementedError


class Logistic(Model):
    """Saturating growth of a radius; closed-form solution."""

    name = "logistic"
    param_names = ("r0", "lam", "R")

    def raw_columns(self, theta, times, opts=OdeOptions()):
        r0, lam, R = theta
        if np.min(value(r0)) <= 0 or np.min(value(R)) <= 0:
            raise ModelDomainError(
                f"logistic requires r0 > 0 and R > 0, got r0={value(r0)}, R={value(R)}"
            )
        t = _times_array(times, theta)
        decay = exp((lam * (-1.0 / 3.0)) * t)
        r = R / ((R / r0 - 1.0) * decay + 1.0)
        return [r]


class Allee(Model):
    """Bistable growth: stable states at 0 and R, unstable threshold at A."""

    name = "allee"
    param_names = ("r0", "lam", "R", "A")

    def raw_columns(self, theta, times, opts=OdeOptions()):
        r0, lam, R, A = theta

        def rhs(t, r):
            return (lam * (1.0 / 3.0)) * r * (r / A - 1.0) * (1.0 - r / R)

        states = integrate(rhs, r0, 0.0, list(times), opts)
        return [stack_scalars(states)]


class LinearTwoPool(Model):
    """Two compartments with linear transfer and decay; closed form.

    The removable singularity at k2 = k21 + k1 switches to the analytic
    limit so derivatives stay finite near the crossing.
    """

    name = "linear_two_pool"
    param_names = ("k1", "k21", "k2", "x0")
    n_raw = 2

    _SING_TOL = 1e-8

    def raw_columns(self, theta, times, opts=OdeOptions()):
        k1, k21, k2, x0 = theta
        t = _times_array(times, theta)
        a = k21 + k1
        x1 = x0 * exp(-1.0 * a * t)
        e2 = exp(-1.0 * k2 * t)
        den = k2 - a
        if isinstance(den, (Dual2,)) or np.ndim(value(den)) == 0:
            if abs(value(den)) < self._SING_TOL:
                x2 = k21 * x0 * t * e2
            else:
                x2 = k21 * x0 * (exp(-1.0 * a * t) - e2) / den
        else:
            dv = value(den)
            mask = np.abs(dv) < self._SING_TOL
            safe = np.where(mask, 1.0, dv)
            general = k21 * x0 * (exp(-1.0 * a * t) - e2) / safe
            limit = k21 * x0 * t * e2
            x2 = np.where(mask, limit, general)
        return [x1, x2]


class NonlinearTwoPool(Model):
    """Two compartments with saturating (Michaelis-Menten) transfer."""

    name = "nonlinear_two_pool"
    param_names = ("k1", "k21", "V21", "k2", "x0")
    n_raw = 2

    def raw_columns(self, theta, times, opts=OdeOptions()):
        k1, k21, V21, k2, x0 = theta

        def rhs(t, y):
            x1, x2 = y[0], y[1]
            den = V21 + x1
            if np.min(value(den)) <= 0.0:
                raise ModelDomainError(
                    f"nonlinear_two_pool requires V21 + x1 > 0 (got min {np.min(value(den))})"
                )
            flux = k21 * x1 / den
            return _pack([-1.0 * (flux + k1 * x1), flux - k2 * x2])

        y0 = _pack([x0, 0.0 * x0])
        states = integrate(rhs, y0, 0.0, list(times), opts)
        return [_column(states, 0), _column(states, 1)]


def _pack(items):
    return stack_scalars(items)


class UserODE(Model):
    """User-registered ODE: generic-scalar right-hand side plus metadata."""

    def __init__(self, name, rhs, n_state, param_names, init, observed=None):
        self.name = name
        self._rhs = rhs
        self.n_raw = n_state
        self.param_names = tuple(param_names)
        self._init = init
        if observed is not None:
            self.n_raw = len(observed)
        self._observed = observed

    def raw_columns(self, theta, times, opts=OdeOptions()):
        def rhs(t, y):
            comps = [y[j] for j in range(len_state)]
            return _pack(self._rhs(t, comps, theta))

        init = self._init(theta)
        len_state = len(init)
        y0 = _pack(init)
        states = integrate(rhs, y0, 0.0, list(times), opts)
        idx = self._observed if self._observed is not None else range(len_state)
        return [_column(states, j) for j in idx]


_MODELS = {
    m.name: m for m in (Logistic(), Allee(), LinearTwoPool(), NonlinearTwoPool())
}


def get_model(name):
    try:
        return _MODELS[name]
    except KeyError:
        raise SpecValidationError(
            f"unknown model {name!r}; available: {sorted(_MODELS)}"
        ) from None


def register_model(model):
    _MODELS[model.name] = model
    return model


def full_param_names(model, plan):
    """Dynamical parameter names followed by the plan's noise components."""
    names = tuple(model.param_names) + plan.noise_names
    if len(set(names)) != len(names):
        raise SpecValidationError(
            f"noise components must not reuse model parameter names: {names}"
        )
    for o in plan.outputs:
        if not 0 <= o.raw < model.n_raw:
            raise SpecValidationError(
                f"observed output index {o.raw} out of range for model {model.name!r}"
            )
    return names


def stacked_columns(model, plan, theta_full, opts=OdeOptions()):
    """Observed output columns (len q), each batched over plan.times."""
    names = full_param_names(model, plan)
    if len(theta_full) != len(names):
        raise SpecValidationError(
            f"parameter vector has {len(theta_full)} entries, expected {len(names)}"
        )
    nm = len(model.param_names)
    raws = model.raw_columns(list(theta_full[:nm]), plan.times, opts)
    noise_idx = {n: nm + i for i, n in enumerate(plan.noise_names)}
    cols = []
    for o in plan.outputs:
        eps = theta_full[noise_idx[o.noise_param]] if o.noise else None
        cols.append(observe(raws[o.raw], o.noise, eps))
    return cols


def output_derivs(model, plan, theta_hat, active=None, opts=OdeOptions()):
    """Value/gradient/Hessian of every stacked output at ``theta_hat``.

    Rows are time-major: row ``t*q + j`` holds output ``j`` at
    ``plan.times[t]``.  ``active`` restricts seeded directions to the
    parameters that actually carry randomness.
    """
    return eval_with_derivs(
        lambda th: stacked_columns(model, plan, th, opts), theta_hat, active
    )
