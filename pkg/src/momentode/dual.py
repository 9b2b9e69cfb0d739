"""Forward-mode differentiation with second-order truncated Taylor scalars.

:class:`Dual2` carries a value plus the gradient and Hessian with respect
to a set of ``d`` seed directions in a single forward pass.  Values may be
batched (e.g. over observation times): ``val`` has an arbitrary leading
shape ``B``, ``grad`` has shape ``B + (d,)`` and ``hess`` shape
``B + (d, d)``, so one sweep through a closed-form model evaluates every
output's derivatives at once using plain numpy arithmetic.

:class:`Dual1` is a scalar first-order dual used to differentiate the
hyperparameter-to-moments pipeline: the coefficient arrays of a
:class:`Dual2` may hold :class:`Dual1` objects (numpy object dtype), which
makes the whole second-order sweep transparently differentiable once more
with respect to hyperparameters.

Model code should use the generic :func:`exp`, :func:`log`, :func:`sqrt`
helpers from this module so it evaluates identically on floats, numpy
arrays, and dual scalars.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteOutputError

__all__ = [
    "Dual1",
    "Dual2",
    "Derivs",
    "exp",
    "log",
    "sqrt",
    "tanh",
    "value",
    "seed_dual1",
    "eval_with_derivs",
    "stack_scalars",
]


class Dual1:
    """Scalar first-order dual number: value plus gradient vector."""

    __slots__ = ("val", "grad")

    def __init__(self, val, grad):
        self.val = float(val)
        self.grad = np.asarray(grad, dtype=float)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Dual1):
            return other.val, other.grad
        if isinstance(other, (int, float, np.integer, np.floating)):
            return float(other), 0.0
        return None, None

    def __add__(self, other):
        if isinstance(other, Dual2):
            return NotImplemented
        ov, og = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Dual1(self.val + ov, self.grad + og)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual2):
            return NotImplemented
        ov, og = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Dual1(self.val - ov, self.grad - og)

    def __rsub__(self, other):
        ov, og = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Dual1(ov - self.val, og - self.grad)

    def __mul__(self, other):
        if isinstance(other, Dual2):
            return NotImplemented
        if isinstance(other, Dual1):
            return Dual1(
                self.val * other.val, self.val * other.grad + other.val * self.grad
            )
        ov, _ = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Dual1(self.val * ov, ov * self.grad)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return NotImplemented
        if isinstance(other, Dual1):
            v = self.val / other.val
            return Dual1(v, (self.grad - v * other.grad) / other.val)
        ov, _ = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Dual1(self.val / ov, self.grad / ov)

    def __rtruediv__(self, other):
        ov, og = self._coerce(other)
        if ov is None:
            return NotImplemented
        v = ov / self.val
        return Dual1(v, -v * self.grad / self.val)

    def __neg__(self):
        return Dual1(-self.val, -self.grad)

    def __pow__(self, n):
        if not isinstance(n, (int, float, np.integer, np.floating)):
            return NotImplemented
        v = self.val ** n
        return Dual1(v, n * self.val ** (n - 1) * self.grad)

    # -- transcendental (numpy dispatches to these on object arrays) ------
    def exp(self):
        v = np.exp(self.val)
        return Dual1(v, v * self.grad)

    def log(self):
        return Dual1(np.log(self.val), self.grad / self.val)

    def sqrt(self):
        v = np.asarray(np.sqrt(self.val))
        return Dual1(v, self.grad / (2.0 * v))

    def tanh(self):
        v = np.tanh(self.val)
        return Dual1(v, (1.0 - v * v) * self.grad)

    def arctanh(self):
        return Dual1(np.arctanh(self.val), self.grad / (1.0 - self.val**2))

    # -- comparisons on the value part ------------------------------------
    def __lt__(self, other):
        return self.val < value(other)

    def __le__(self, other):
        return self.val <= value(other)

    def __gt__(self, other):
        return self.val > value(other)

    def __ge__(self, other):
        return self.val >= value(other)

    def __float__(self):
        return self.val

    def __repr__(self):
        return f"Dual1({self.val!r}, grad={self.grad!r})"


class Dual2:
    """Batched second-order dual: value, gradient and Hessian coefficients."""

    __slots__ = ("val", "grad", "hess")

    # Keep numpy from scattering a Dual2 elementwise over float arrays;
    # with this unset, ``ndarray * Dual2`` falls back to ``__rmul__``.
    __array_ufunc__ = None

    def __init__(self, val, grad, hess):
        self.val = np.asarray(val)
        self.grad = np.asarray(grad)
        self.hess = np.asarray(hess)

    @property
    def d(self):
        return self.grad.shape[-1]

    @staticmethod
    def seed(val, index, d):
        """Scalar seed with unit perturbation along direction ``index``."""
        g = np.zeros(d)
        g[index] = 1.0
        return Dual2(val, g, np.zeros((d, d)))

    @staticmethod
    def constant(val, d):
        return Dual2(val, np.zeros(np.shape(val) + (d,)), np.zeros(np.shape(val) + (d, d)))

    # -- helpers -----------------------------------------------------------
    @staticmethod
    def _is_const(other):
        return isinstance(
            other, (int, float, np.integer, np.floating, np.ndarray, Dual1)
        )

    @staticmethod
    def _cv(other):
        # constants enter broadcasting as bare arrays (0-d for scalars)
        return other.val if isinstance(other, Dual2) else np.asarray(other)

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual2):
            return Dual2(
                self.val + other.val, self.grad + other.grad, self.hess + other.hess
            )
        if self._is_const(other):
            c = np.asarray(other)
            v = self.val + c
            return Dual2(
                v,
                np.broadcast_to(self.grad, np.shape(v) + (self.d,)),
                np.broadcast_to(self.hess, np.shape(v) + (self.d, self.d)),
            )
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, Dual2) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + np.asarray(other)

    def __neg__(self):
        return Dual2(-self.val, -self.grad, -self.hess)

    def __mul__(self, other):
        if isinstance(other, Dual2):
            v = self.val * other.val
            g = self.val[..., None] * other.grad + other.val[..., None] * self.grad
            h = (
                self.val[..., None, None] * other.hess
                + other.val[..., None, None] * self.hess
                + self.grad[..., :, None] * other.grad[..., None, :]
                + other.grad[..., :, None] * self.grad[..., None, :]
            )
            return Dual2(v, g, h)
        if self._is_const(other):
            c = np.asarray(other)
            return Dual2(
                self.val * c,
                c[..., None] * self.grad,
                c[..., None, None] * self.hess,
            )
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            v = np.asarray(self.val / other.val)
            g = (self.grad - v[..., None] * other.grad) / other.val[..., None]
            cross = g[..., :, None] * other.grad[..., None, :]
            h = (
                self.hess
                - v[..., None, None] * other.hess
                - cross
                - np.swapaxes(cross, -1, -2)
            ) / other.val[..., None, None]
            return Dual2(v, g, h)
        if self._is_const(other):
            c = np.asarray(other)
            return Dual2(
                self.val / c, self.grad / c[..., None], self.hess / c[..., None, None]
            )
        return NotImplemented

    def __rtruediv__(self, other):
        if self._is_const(other):
            return Dual2.constant(np.asarray(other), self.d).__truediv__(self)
        return NotImplemented

    def __pow__(self, n):
        if not isinstance(n, (int, float, np.integer, np.floating)):
            return NotImplemented
        v = self.val**n
        dv = n * self.val ** (n - 1)
        d2v = n * (n - 1) * self.val ** (n - 2)
        return self._chain(v, dv, d2v)

    def _chain(self, v, dv, d2v):
        """Lift a scalar function through the Taylor coefficients."""
        v, dv, d2v = np.asarray(v), np.asarray(dv), np.asarray(d2v)
        g = dv[..., None] * self.grad
        h = (
            dv[..., None, None] * self.hess
            + d2v[..., None, None] * self.grad[..., :, None] * self.grad[..., None, :]
        )
        return Dual2(v, g, h)

    def exp(self):
        v = np.exp(self.val)
        return self._chain(v, v, v)

    def log(self):
        g = self.grad / self.val[..., None]
        h = self.hess / self.val[..., None, None] - g[..., :, None] * g[..., None, :]
        return Dual2(np.log(self.val), g, h)

    def sqrt(self):
        v = np.asarray(np.sqrt(self.val))
        g = self.grad / (2.0 * v[..., None])
        h = self.hess / (2.0 * v[..., None, None]) - (
            g[..., :, None] * g[..., None, :]
        ) / v[..., None, None]
        return Dual2(v, g, h)

    def __getitem__(self, key):
        return Dual2(self.val[key], self.grad[key], self.hess[key])

    def __repr__(self):
        return f"Dual2(val={self.val!r}, d={self.d})"


# -- generic scalar functions ----------------------------------------------


def exp(x):
    return x.exp() if isinstance(x, (Dual1, Dual2)) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, (Dual1, Dual2)) else np.log(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, (Dual1, Dual2)) else np.sqrt(x)


def tanh(x):
    return x.tanh() if isinstance(x, Dual1) else np.tanh(x)


def value(x):
    """Strip all dual structure, returning plain floats / float arrays."""
    while isinstance(x, (Dual1, Dual2)):
        x = x.val
    if isinstance(x, np.ndarray) and x.dtype == object:
        out = np.empty(x.shape, dtype=float)
        flat_in, flat_out = x.ravel(), out.ravel()
        for i, e in enumerate(flat_in):
            flat_out[i] = float(value(e))
        return out
    return x


def seed_dual1(values):
    """One :class:`Dual1` per entry, with unit one-hot gradients."""
    m = len(values)
    out = []
    for k, v in enumerate(values):
        g = np.zeros(m)
        g[k] = 1.0
        out.append(Dual1(v, g))
    return out


def stack_scalars(items, d=None):
    """Stack scalar Dual2/plain values into one batched Dual2 (or array).

    Items may mix scalar-valued Dual2 and plain scalars/arrays.  If no
    item is a Dual2 the result is a plain numpy stack.
    """
    duals = [it for it in items if isinstance(it, Dual2)]
    if not duals:
        return np.stack([np.asarray(it) for it in items])
    if d is None:
        d = duals[0].d
    obj = any(isinstance(it, Dual1) for it in items) or any(
        du.val.dtype == object for du in duals
    )
    dtype = object if obj else float
    n = len(items)
    val = np.empty(n, dtype=dtype)
    grad = np.zeros((n, d), dtype=dtype)
    hess = np.zeros((n, d, d), dtype=dtype)
    for i, it in enumerate(items):
        if isinstance(it, Dual2):
            val[i] = it.val[()] if it.val.ndim == 0 else it.val
            grad[i] = it.grad
            hess[i] = it.hess
        else:
            val[i] = it
    return Dual2(val, grad, hess)


@dataclass
class Derivs:
    """Value, gradient and Hessian of every stacked output at a point.

    ``value`` has shape ``(n,)``; ``grad`` is ``(n, d)`` and ``hess`` is
    ``(n, d, d)`` where ``d`` counts the *active* (seeded) parameters.
    ``active`` maps those columns back to indices in the full parameter
    vector; parameters that carry no randomness need no derivatives.
    """

    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    active: tuple

    @property
    def n(self):
        return self.value.shape[0]

    def rows(self, sl):
        return Derivs(self.value[sl], self.grad[sl], self.hess[sl], self.active)


def eval_with_derivs(fn, theta_hat, active=None):
    """Evaluate ``fn`` with second-order duals seeded at ``theta_hat``.

    ``fn`` receives a list of scalars (mixed Dual2 seeds for active
    entries, bare values otherwise) and returns one batched scalar per
    output column, or a list of them.  Columns are interleaved
    column-fastest: row ``t*q + j`` of the result is output ``j`` at
    batch position ``t``.
    """
    theta_hat = list(theta_hat)
    d_full = len(theta_hat)
    if active is None:
        active = tuple(range(d_full))
    da = len(active)
    obj = any(isinstance(t, Dual1) for t in theta_hat)

    seeded = list(theta_hat)
    for k, a in enumerate(active):
        seeded[a] = Dual2.seed(theta_hat[a], k, da)

    cols = fn(seeded)
    if isinstance(cols, (Dual2, np.ndarray, float, int)):
        cols = [cols]
    q = len(cols)

    # a column may pick up Dual1 coefficients from closed-over scalars even
    # when theta itself is float; casting those to float would silently
    # drop their derivatives
    for c in cols:
        if isinstance(c, Dual2):
            obj = obj or any(
                a.dtype == object for a in (c.val, c.grad, c.hess)
            )
        elif isinstance(c, np.ndarray):
            obj = obj or c.dtype == object
    dtype = object if obj else float
    parts_v, parts_g, parts_h = [], [], []
    for c in cols:
        if isinstance(c, Dual2):
            v = np.atleast_1d(np.asarray(c.val, dtype=dtype))
            b = v.shape[0]
            g = np.broadcast_to(np.asarray(c.grad, dtype=dtype), (b, da))
            h = np.broadcast_to(np.asarray(c.hess, dtype=dtype), (b, da, da))
        else:
            v = np.atleast_1d(np.asarray(c, dtype=dtype))
            b = v.shape[0]
            g = np.zeros((b, da), dtype=dtype)
            h = np.zeros((b, da, da), dtype=dtype)
        parts_v.append(v)
        parts_g.append(g)
        parts_h.append(h)

    b = max(p.shape[0] for p in parts_v)
    n = b * q
    val = np.empty(n, dtype=dtype)
    grad = np.empty((n, da), dtype=dtype)
    hess = np.empty((n, da, da), dtype=dtype)
    for j in range(q):
        val[j::q] = np.broadcast_to(parts_v[j], (b,))
        grad[j::q] = np.broadcast_to(parts_g[j], (b, da))
        hess[j::q] = np.broadcast_to(parts_h[j], (b, da, da))

    if not obj:
        for arr, what in ((val, "value"), (grad, "gradient"), (hess, "Hessian")):
            bad = ~np.isfinite(arr)
            if bad.any():
                idx = int(np.argwhere(bad)[0][0])
                raise NonFiniteOutputError(
                    f"non-finite {what} for output {idx} at theta="
                    f"{np.asarray([value(t) for t in theta_hat])}",
                    index=idx,
                    theta=[value(t) for t in theta_hat],
                )
    return Derivs(val, grad, hess, tuple(active))
