"""Moment propagation and moment-matched surrogate densities.

:func:`propagate` pushes input central moments (mean, V, S, K) through a
second-order expansion of the output map, using the stacked value /
gradient / Hessian data produced by :mod:`momentode.models`.  Expectations
of fifth- and sixth-order input moment tensors are closed to zero.

The propagated (mean, covariance, skewness) triple feeds three families
of evaluable densities: a multivariate normal (any output dimension), a
shifted gamma matching three moments (univariate), and a Gaussian-copula
pair of shifted gammas (bivariate) whose copula parameter comes from a
precomputed correlation-map table.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaincinv, gammaln, logsumexp, ndtr, ndtri

from .dual import Dual1, value
from .errors import (
    ConditioningError,
    CopulaTableMissingError,
    DegenerateOutputError,
    TableBuildError,
)
from .tensors import frobenius, kron

__all__ = [
    "OutputMoments",
    "propagate",
    "propagate_reference",
    "propagate_univariate",
    "ShiftedGammaParams",
    "fit_shifted_gamma",
    "fit_normal",
    "NormalSurrogate",
    "GammaSurrogate",
    "BivariateGammaCopula",
    "MixtureSurrogate",
    "mixture_surrogate",
    "CopulaTable",
    "build_copula_table",
    "copula_rho",
    "build_surrogate",
]

# Outputs are floored rather than -inf outside a surrogate's support so
# derivative-free optimizers keep a finite ordering.
SUPPORT_FLOOR = -1e10

# Gamma surrogates are kept below the shape transition at |omega| = 2.
OMEGA_CLAMP = 1.95

# Below this skewness the gamma fit degenerates; fall back to a normal.
OMEGA_NORMAL_FALLBACK = 1e-4


@dataclass
class OutputMoments:
    """Propagated mean vector, covariance matrix and skewness vector.

    ``omega`` is clamped to ``[-1.95, 1.95]`` ahead of gamma fitting;
    ``clamped`` records where that happened and ``omega_raw`` keeps the
    unclamped values for diagnostics.
    """

    mu: np.ndarray
    Sigma: np.ndarray
    omega: np.ndarray
    clamped: np.ndarray = None
    omega_raw: np.ndarray = None

    @property
    def n(self):
        return self.mu.shape[0]


def _condition_diag(Sigma, mu, obj):
    """Jitter the covariance diagonal once; reject non-positive variances."""
    n = Sigma.shape[0]
    diag = np.array([value(Sigma[i, i]) for i in range(n)], dtype=float)
    scale = diag.max() if diag.size else 0.0
    if scale <= 0.0:
        # fully degenerate outputs: a tiny absolute spike width
        scale = (1.0 + np.abs(value(mu)).max()) ** 2 * 1e-4
    jit = 1e-10 * scale
    for i in range(n):
        Sigma[i, i] = Sigma[i, i] + jit
    for i in range(n):
        if value(Sigma[i, i]) <= 0.0:
            raise DegenerateOutputError(
                f"output {i} has non-positive variance {value(Sigma[i, i]):.3e} "
                "after conditioning",
                index=i,
            )
    return Sigma


def _finalize(mu, raw2, raw3, obj):
    Sigma = raw2 - np.multiply.outer(mu, mu)
    Sigma = _condition_diag(Sigma, mu, obj)
    n = mu.shape[0]
    dt = object if obj else float
    omega = np.empty(n, dtype=dt)
    for i in range(n):
        var = Sigma[i, i]
        tc = raw3[i] - 3.0 * mu[i] * var - mu[i] ** 3
        omega[i] = tc / var**1.5
    om_val = np.array([value(o) for o in omega], dtype=float)
    clamped = np.abs(om_val) > OMEGA_CLAMP
    omega_out = omega.copy()
    for i in np.flatnonzero(clamped):
        omega_out[i] = OMEGA_CLAMP * np.sign(om_val[i])
    return OutputMoments(mu, Sigma, omega_out, clamped, omega)


def propagate(input_moments, derivs):
    """Propagate input moments through second-order output derivatives.

    Returns the joint :class:`OutputMoments` over every row of ``derivs``.
    Directions outside ``derivs.active`` carry no randomness and are
    sliced out of the input tensors before contraction.
    """
    imr = input_moments.restrict(derivs.active)
    obj = derivs.value.dtype == object or imr.V.dtype == object
    if obj:
        return propagate_reference(input_moments, derivs)
    v, G, H = derivs.value, derivs.grad, derivs.hess
    V, S, K = imr.V, imr.S, imr.K

    VH = np.einsum("ab,nab->n", V, H)
    mu = v + 0.5 * VH
    GVG = np.einsum("ab,na,mb->nm", V, G, G)
    SHG = np.einsum("abc,nab,mc->nm", S, H, G)
    KHH = np.einsum("abcd,nab,mcd->nm", K, H, H)
    raw2 = (
        np.multiply.outer(v, v)
        + GVG
        + 0.5 * (np.multiply.outer(v, VH) + np.multiply.outer(VH, v))
        + 0.5 * (SHG + SHG.T)
        + 0.25 * KHH
    )
    SGGG = np.einsum("abc,na,nb,nc->n", S, G, G, G)
    KGGH = np.einsum("abcd,na,nb,ncd->n", K, G, G, H)
    raw3 = (
        v**3
        + 3.0 * v * np.diag(GVG)
        + 1.5 * v**2 * VH
        + SGGG
        + 3.0 * v * np.diag(SHG)
        + 1.5 * KGGH
        + 0.75 * v * np.diag(KHH)
    )
    return _finalize(mu, raw2, raw3, obj=False)


def propagate_reference(input_moments, derivs):
    """Same contraction written directly with tensor primitives.

    Slower but dtype-agnostic: coefficients may be Dual1 scalars, which
    makes the whole moment map differentiable in the hyperparameters.
    """
    imr = input_moments.restrict(derivs.active)
    v, G, H = derivs.value, derivs.grad, derivs.hess
    V, S, K = imr.V, imr.S, imr.K
    n = v.shape[0]
    obj = v.dtype == object or V.dtype == object
    dt = object if obj else float

    mu = np.empty(n, dtype=dt)
    raw2 = np.empty((n, n), dtype=dt)
    raw3 = np.empty(n, dtype=dt)
    for i in range(n):
        mu[i] = v[i] + 0.5 * frobenius(V, H[i])
        raw3[i] = (
            v[i] ** 3
            + 3.0 * v[i] * frobenius(V, kron(G[i], G[i]))
            + 1.5 * v[i] ** 2 * frobenius(V, H[i])
            + frobenius(S, kron(kron(G[i], G[i]), G[i]))
            + 3.0 * v[i] * frobenius(S, kron(H[i], G[i]))
            + 1.5 * frobenius(K, kron(kron(G[i], G[i]), H[i]))
            + 0.75 * v[i] * frobenius(K, kron(H[i], H[i]))
        )
        for j in range(n):
            raw2[i, j] = (
                v[i] * v[j]
                + frobenius(V, kron(G[i], G[j]))
                + 0.5 * frobenius(V, v[i] * H[j] + v[j] * H[i])
                + 0.5 * frobenius(S, kron(H[i], G[j]) + kron(H[j], G[i]))
                + 0.25 * frobenius(K, kron(H[i], H[j]))
            )
    return _finalize(mu, raw2, raw3, obj)


def propagate_univariate(input_moments, derivs):
    """Per-row moments treating every output as its own univariate map.

    Fast path for snapshot likelihoods with one output per observation
    time: no cross-output covariances are formed.  Returns
    ``(mu, var, omega, clamped)`` float vectors; variances are jittered
    relatively per entry.
    """
    imr = input_moments.restrict(derivs.active)
    v, G, H = derivs.value, derivs.grad, derivs.hess
    V, S, K = imr.V, imr.S, imr.K

    VH = np.einsum("ab,nab->n", V, H)
    GVG = np.einsum("ab,na,nb->n", V, G, G)
    SHG = np.einsum("abc,nab,nc->n", S, H, G)
    KHH = np.einsum("abcd,nab,ncd->n", K, H, H)
    SGGG = np.einsum("abc,na,nb,nc->n", S, G, G, G)
    KGGH = np.einsum("abcd,na,nb,ncd->n", K, G, G, H)

    mu = v + 0.5 * VH
    raw2 = v**2 + GVG + v * VH + SHG + 0.25 * KHH
    raw3 = (
        v**3
        + 3.0 * v * GVG
        + 1.5 * v**2 * VH
        + SGGG
        + 3.0 * v * SHG
        + 1.5 * KGGH
        + 0.75 * v * KHH
    )
    var = raw2 - mu**2
    scale = var.max() if var.size else 0.0
    if scale <= 0.0:
        scale = (1.0 + np.abs(mu).max()) ** 2 * 1e-4  # point-mass spec: spike width
    var = var + 1e-10 * scale
    if np.any(var <= 0.0):
        i = int(np.argmin(var))
        raise DegenerateOutputError(
            f"output {i} has non-positive variance {var[i]:.3e} after conditioning",
            index=i,
        )
    tc = raw3 - 3.0 * mu * var - mu**3
    omega_raw = tc / var**1.5
    clamped = np.abs(omega_raw) > OMEGA_CLAMP
    omega = np.clip(omega_raw, -OMEGA_CLAMP, OMEGA_CLAMP)
    return mu, var, omega, clamped


# ---------------------------------------------------------------------------
# surrogate densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftedGammaParams:
    """Moment-matched gamma: shape k, scale s, shift, optional reflection."""

    k: float
    s: float
    shift: float
    reflected: bool


def fit_shifted_gamma(mu, var, omega):
    """Match (mean, variance, skewness) with a shifted gamma surrogate.

    ``|omega|`` below ``1e-4`` falls back to a moment-matched normal (the
    gamma shape diverges there); the fallback is recorded on the returned
    surrogate.
    """
    if var <= 0:
        raise DegenerateOutputError(f"gamma fit needs var > 0, got {var}")
    sd = np.sqrt(var)
    if abs(omega) < OMEGA_NORMAL_FALLBACK:
        return GammaSurrogate(None, mu, sd, normal_fallback=True)
    k = 4.0 / omega**2
    s = sd * abs(omega) / 2.0
    shift = mu - np.sign(omega) * 2.0 * sd / abs(omega)
    return GammaSurrogate(
        ShiftedGammaParams(k, s, shift, omega < 0), mu, sd, normal_fallback=False
    )


class GammaSurrogate:
    """Univariate shifted (possibly reflected) gamma density."""

    def __init__(self, params, mu, sd, normal_fallback=False):
        self.params = params
        self.mu = float(mu)
        self.sd = float(sd)
        self.normal_fallback = normal_fallback
        self.floor = SUPPORT_FLOOR

    @property
    def n(self):
        return 1

    def _z(self, y):
        p = self.params
        y = np.asarray(y, dtype=float)
        return (p.shift - y) / p.s if p.reflected else (y - p.shift) / p.s

    def logpdf(self, y):
        if self.normal_fallback:
            y = np.asarray(y, dtype=float)
            return (
                -0.5 * np.log(2.0 * np.pi * self.sd**2)
                - 0.5 * ((y - self.mu) / self.sd) ** 2
            )
        p = self.params
        z = self._z(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = (p.k - 1.0) * np.log(z) - z - gammaln(p.k) - np.log(p.s)
        return np.where(z > 0.0, np.nan_to_num(lp, neginf=self.floor), self.floor)

    def cdf(self, y):
        if self.normal_fallback:
            return ndtr((np.asarray(y, float) - self.mu) / self.sd)
        p = self.params
        z = np.maximum(self._z(y), 0.0)
        c = gammainc(p.k, z)
        return 1.0 - c if p.reflected else c

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.normal_fallback:
            return self.mu + self.sd * ndtri(u)
        p = self.params
        if p.reflected:
            return p.shift - p.s * gammaincinv(p.k, 1.0 - u)
        return p.shift + p.s * gammaincinv(p.k, u)

    def sample(self, rng, n):
        if self.normal_fallback:
            return self.mu + self.sd * rng.standard_normal(n)
        p = self.params
        g = rng.gamma(p.k, p.s, size=n)
        return p.shift - g if p.reflected else p.shift + g


class NormalSurrogate:
    """Multivariate normal density matching two moments."""

    def __init__(self, mu, Sigma):
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
        self.Sigma = Sigma
        try:
            self._chol = np.linalg.cholesky(Sigma)
        except np.linalg.LinAlgError:
            jit = 1e-10 * max(np.diag(Sigma).max(), 1e-300)
            try:
                self._chol = np.linalg.cholesky(Sigma + jit * np.eye(len(self.mu)))
            except np.linalg.LinAlgError:
                raise ConditioningError(
                    "covariance not positive definite after jitter"
                ) from None
        self._logdet = 2.0 * np.log(np.diag(self._chol)).sum()

    @property
    def n(self):
        return self.mu.shape[0]

    def logpdf(self, y):
        y = np.asarray(y, dtype=float)
        if self.n == 1 and (y.ndim == 0 or y.ndim == 1):
            y = y.reshape(-1, 1)
        y = np.atleast_2d(y)
        resid = y - self.mu
        sol = np.linalg.solve(self._chol, resid.T)
        maha = (sol**2).sum(axis=0)
        return -0.5 * (self.n * np.log(2.0 * np.pi) + self._logdet + maha)

    def cdf(self, y):
        if self.n != 1:
            raise ValueError("cdf available only for univariate surrogates")
        return ndtr((np.asarray(y, float) - self.mu[0]) / np.sqrt(self.Sigma[0, 0]))

    def ppf(self, u):
        if self.n != 1:
            raise ValueError("ppf available only for univariate surrogates")
        return self.mu[0] + np.sqrt(self.Sigma[0, 0]) * ndtri(np.asarray(u, float))

    def sample(self, rng, n):
        z = rng.standard_normal((n, self.n))
        return self.mu + z @ self._chol.T


def fit_normal(m):
    """Normal surrogate from propagated output moments."""
    return NormalSurrogate(m.mu if np.ndim(m.mu) else [m.mu], np.atleast_2d(m.Sigma))


class BivariateGammaCopula:
    """Two shifted-gamma marginals joined by a Gaussian copula."""

    def __init__(self, marginal1, marginal2, rho_tilde):
        self.marginals = (marginal1, marginal2)
        self.rho_tilde = float(np.clip(rho_tilde, -0.999, 0.999))
        self.floor = SUPPORT_FLOOR

    @property
    def n(self):
        return 2

    def logpdf(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        m1, m2 = self.marginals
        lp1, lp2 = m1.logpdf(y[:, 0]), m2.logpdf(y[:, 1])
        out_of_support = (lp1 <= self.floor) | (lp2 <= self.floor)
        tiny = 1e-300
        u1 = np.clip(m1.cdf(y[:, 0]), tiny, 1.0 - 1e-16)
        u2 = np.clip(m2.cdf(y[:, 1]), tiny, 1.0 - 1e-16)
        z1, z2 = ndtri(u1), ndtri(u2)
        r = self.rho_tilde
        logc = -0.5 * np.log1p(-r * r) - (
            r * r * (z1 * z1 + z2 * z2) - 2.0 * r * z1 * z2
        ) / (2.0 * (1.0 - r * r))
        total = lp1 + lp2 + logc
        return np.where(out_of_support, self.floor, total)

    def sample(self, rng, n):
        z = rng.standard_normal((n, 2))
        z2 = self.rho_tilde * z[:, 0] + np.sqrt(1.0 - self.rho_tilde**2) * z[:, 1]
        u1, u2 = ndtr(z[:, 0]), ndtr(z2)
        return np.column_stack(
            [self.marginals[0].ppf(u1), self.marginals[1].ppf(u2)]
        )


class MixtureSurrogate:
    """Finite mixture of surrogate densities; logpdf via logsumexp."""

    def __init__(self, weights, components):
        self.weights = np.asarray([value(w) for w in weights], dtype=float)
        if abs(self.weights.sum() - 1.0) > 1e-9 or (self.weights < 0).any():
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        self.components = list(components)

    @property
    def n(self):
        return self.components[0].n

    def logpdf(self, y):
        parts = np.stack([c.logpdf(y) for c in self.components])
        return logsumexp(parts + np.log(self.weights)[:, None], axis=0)

    def cdf(self, y):
        return sum(w * c.cdf(y) for w, c in zip(self.weights, self.components))

    def sample(self, rng, n):
        choice = rng.choice(len(self.components), size=n, p=self.weights)
        first = self.components[0].sample(rng, 0)
        q = 1 if first.ndim == 1 else first.shape[1]
        out = np.empty((n, q)) if q > 1 else np.empty(n)
        for k, c in enumerate(self.components):
            mask = choice == k
            if mask.any():
                out[mask] = c.sample(rng, int(mask.sum()))
        return out


def mixture_surrogate(components):
    """Build a mixture from ``[(weight, surrogate)]`` pairs."""
    ws = [w for w, _ in components]
    cs = [c for _, c in components]
    if len(cs) == 1:
        return cs[0]
    return MixtureSurrogate(ws, cs)


# ---------------------------------------------------------------------------
# Gaussian-copula correlation map
# ---------------------------------------------------------------------------


def _std_gamma_quantile_table(omega, z_grid):
    """Quantile function of a standardised shifted gamma on a z grid."""
    if omega < OMEGA_NORMAL_FALLBACK:
        return z_grid.copy()
    k = 4.0 / omega**2
    s = omega / 2.0
    shift = -2.0 / omega
    return shift + s * gammaincinv(k, ndtr(z_grid))


@dataclass
class CopulaTable:
    """Precomputed map (omega1, omega2, target rho) -> copula parameter.

    Grids cover ``omega in [0, omega_max]`` and signed target correlations;
    negative skewnesses are handled by reflection symmetry at query time.
    Values are clamped where a target correlation is unattainable for the
    given marginals.
    """

    omega_grid: np.ndarray
    rho_grid: np.ndarray
    values: np.ndarray  # (n_omega, n_omega, n_rho)
    meta: dict

    def save(self, path):
        header = {
            "omega_grid": self.omega_grid.tolist(),
            "rho_grid": self.rho_grid.tolist(),
            "shape": list(self.values.shape),
            "meta": self.meta,
            "version": 1,
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            fh.write(np.ascontiguousarray(self.values, dtype=float).tobytes())

    @staticmethod
    def load(path):
        try:
            fh = open(path, "rb")
        except FileNotFoundError:
            raise CopulaTableMissingError(
                f"no copula table at {path!r}; build one with build_copula_table() "
                "or the 'copula-table' command"
            ) from None
        with fh:
            header = json.loads(fh.readline().decode())
            data = np.frombuffer(fh.read(), dtype=float)
        shape = tuple(header["shape"])
        if data.size != int(np.prod(shape)):
            raise CopulaTableMissingError(f"copula table at {path!r} is truncated")
        return CopulaTable(
            np.asarray(header["omega_grid"]),
            np.asarray(header["rho_grid"]),
            data.reshape(shape).copy(),
            header.get("meta", {}),
        )


def copula_forward_corr(omega1, omega2, rho_tilde, quad_n=400, z_table_n=4001):
    """Pearson correlation induced by a Gaussian copula with parameter
    ``rho_tilde`` over standardised shifted-gamma marginals.

    2-D Gauss-Legendre quadrature in copula (uniform) coordinates; the
    quadrature estimates of the marginal means/variances are divided out,
    which cancels most of the shared discretisation error.
    """
    x, w = np.polynomial.legendre.leggauss(quad_n)
    u = 0.5 * (x + 1.0)
    w = 0.5 * w
    z = ndtri(u)
    zf = np.linspace(-8.6, 8.6, z_table_n)
    q1f = _std_gamma_quantile_table(abs(omega1), zf)
    q2f = _std_gamma_quantile_table(abs(omega2), zf)
    # reflected marginal: quantile q-(u) = -q+(1-u), i.e. -q+(Phi(-z))
    q1 = -np.interp(-z, zf, q1f) if omega1 < 0 else np.interp(z, zf, q1f)
    m1 = w @ q1
    v1 = w @ (q1 * q1) - m1 * m1

    rho_tilde = np.atleast_1d(np.asarray(rho_tilde, dtype=float))
    out = np.empty(rho_tilde.shape)
    for idx, rt in enumerate(rho_tilde):
        s = np.sqrt(max(1.0 - rt * rt, 0.0))
        args = rt * z[:, None] + s * z[None, :]
        Q2 = -np.interp(-args, zf, q2f) if omega2 < 0 else np.interp(args, zf, q2f)
        g = Q2 @ w
        g2 = (Q2 * Q2) @ w
        m2 = w @ g
        v2 = w @ g2 - m2 * m2
        cov = w @ (q1 * g) - m1 * m2
        out[idx] = cov / np.sqrt(v1 * v2)
    return out if out.shape[0] > 1 else float(out[0])


def build_copula_table(
    n_omega=21,
    omega_max=2.0,
    n_rho=41,
    rho_max=0.99,
    quad_n=400,
    forward_n=81,
    n_jobs=1,
):
    """Tabulate the copula parameter against target Pearson correlation.

    For every (omega1, omega2) node the forward map rho_tilde -> Pearson
    correlation is evaluated by quadrature on a dense rho_tilde grid,
    checked monotone, and inverted onto the target-correlation grid by
    piecewise-linear interpolation.  Unattainable targets clamp to the
    attainable range.
    """
    omegas = np.linspace(0.0, omega_max, n_omega)
    rhos = np.linspace(-rho_max, rho_max, n_rho)
    rt_fwd = np.linspace(-0.999, 0.999, forward_n)

    pairs = [(i, j) for i in range(n_omega) for j in range(i, n_omega)]

    def slice_for(pair):
        i, j = pair
        fwd = copula_forward_corr(omegas[i], omegas[j], rt_fwd, quad_n=quad_n)
        if np.any(np.diff(fwd) <= 0):
            raise TableBuildError(
                f"forward correlation map not monotone at omegas "
                f"({omegas[i]:.3g}, {omegas[j]:.3g}); increase quadrature resolution"
            )
        return np.interp(rhos, fwd, rt_fwd)

    if n_jobs != 1:
        from joblib import Parallel, delayed

        slices = Parallel(n_jobs=n_jobs)(delayed(slice_for)(p) for p in pairs)
    else:
        slices = [slice_for(p) for p in pairs]

    values = np.empty((n_omega, n_omega, n_rho))
    for (i, j), sl in zip(pairs, slices):
        values[i, j] = sl
        values[j, i] = sl
    meta = {"quad_n": quad_n, "forward_n": forward_n, "rho_max": rho_max}
    return CopulaTable(omegas, rhos, values, meta)


def _interp_fraction(grid, x):
    x = np.clip(x, grid[0], grid[-1])
    i = int(np.clip(np.searchsorted(grid, x) - 1, 0, len(grid) - 2))
    t = (x - grid[i]) / (grid[i + 1] - grid[i])
    return i, t


def copula_rho(table, omega1, omega2, rho_target):
    """Copula parameter achieving ``rho_target`` between two gamma marginals.

    Trilinear interpolation of the table; reflected (negative-skew)
    marginals map onto the tabulated nonnegative-skew grid through the
    symmetry of the reflected quantile transform.
    """
    neg = (omega1 < 0) != (omega2 < 0)
    rho_q = -rho_target if neg else rho_target
    i, ti = _interp_fraction(table.omega_grid, abs(omega1))
    j, tj = _interp_fraction(table.omega_grid, abs(omega2))
    k, tk = _interp_fraction(table.rho_grid, np.clip(rho_q, -0.99, 0.99))
    v = table.values
    c = 0.0
    for di, wi in ((0, 1 - ti), (1, ti)):
        for dj, wj in ((0, 1 - tj), (1, tj)):
            for dk, wk in ((0, 1 - tk), (1, tk)):
                c += wi * wj * wk * v[i + di, j + dj, k + dk]
    return -c if neg else c


def build_surrogate(m, kind, copula_table=None):
    """Evaluable surrogate density from propagated output moments.

    ``kind`` is ``"normal"`` (any dimension) or ``"gamma"`` (univariate
    shifted gamma; bivariate via the Gaussian copula).
    """
    if kind == "normal":
        return fit_normal(m)
    if kind != "gamma":
        raise ValueError(f"unknown surrogate kind {kind!r}")
    n = m.n
    if n == 1:
        return fit_shifted_gamma(float(m.mu[0]), float(m.Sigma[0, 0]), float(m.omega[0]))
    if n == 2:
        if copula_table is None:
            raise CopulaTableMissingError(
                "bivariate gamma surrogate needs a copula table; "
                "build one with build_copula_table() or the 'copula-table' command"
            )
        m1 = fit_shifted_gamma(float(m.mu[0]), float(m.Sigma[0, 0]), float(m.omega[0]))
        m2 = fit_shifted_gamma(float(m.mu[1]), float(m.Sigma[1, 1]), float(m.omega[1]))
        rho = float(
            np.clip(m.Sigma[0, 1] / np.sqrt(m.Sigma[0, 0] * m.Sigma[1, 1]), -0.99, 0.99)
        )
        rt = copula_rho(copula_table, float(m.omega[0]), float(m.omega[1]), rho)
        return BivariateGammaCopula(m1, m2, rt)
    raise ValueError(
        f"gamma surrogates cover univariate and bivariate outputs only (got n={n}); "
        "use the normal surrogate for higher dimensions"
    )
