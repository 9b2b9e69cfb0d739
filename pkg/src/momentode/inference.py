"""Surrogate likelihood for snapshot data and the inference stack.

The log-likelihood sums, over observation times and replicates, the log
density of a per-time surrogate built by propagating the input-moment
tensors of the current hyperparameters through the model.  Mixtures are
propagated per component and remixed at the density level.  On top sit
derivative-free maximum likelihood, profile-likelihood identifiability
scans, adaptive-Metropolis posterior sampling, and a numerical rank test
of the hyperparameter-to-moments sensitivity matrix.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, minimize
from scipy.special import gammaln, logsumexp

from .distributions import DistSpec, mixture_components, moments_of
from .dual import seed_dual1, value
from .errors import (
    ConditioningError,
    DegenerateOutputError,
    IntegrationError,
    ModelDomainError,
    NonFiniteOutputError,
    OptimizationError,
    SpecValidationError,
)
from .models import full_param_names, output_derivs
from .ode import OdeOptions
from .sampling import stream
from .surrogates import (
    OMEGA_NORMAL_FALLBACK,
    SUPPORT_FLOOR,
    build_surrogate,
    mixture_surrogate,
    propagate,
    propagate_univariate,
)

__all__ = [
    "PROFILE_THRESHOLD_95",
    "SnapshotProblem",
    "SnapshotLikelihood",
    "snapshot_loglik",
    "per_time_surrogates",
    "MleResult",
    "find_mle",
    "ProfileResult",
    "profile",
    "McmcChain",
    "mcmc",
    "mcmc_map",
    "FimReport",
    "fim",
]

# Half the 0.95 quantile of chi-squared with one degree of freedom: the
# normalised profile log-likelihood threshold for an approximate 95% CI.
PROFILE_THRESHOLD_95 = -1.9207

_RECOVERABLE = (
    ModelDomainError,
    IntegrationError,
    DegenerateOutputError,
    ConditioningError,
    NonFiniteOutputError,
    SpecValidationError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


@dataclass
class SnapshotProblem:
    """Everything needed to evaluate the surrogate likelihood.

    ``template`` fixes the distribution families and which hyperparameters
    are free; a hyperparameter vector reproduces a concrete spec through
    ``template.with_xi``.  Component order must match the model's
    parameter order followed by the plan's noise components.
    """

    model: object
    plan: object
    template: DistSpec
    surrogate: str = "gamma"
    copula_table: object = None
    ode: OdeOptions = field(default_factory=OdeOptions)
    floor: float = SUPPORT_FLOOR

    def __post_init__(self):
        names = full_param_names(self.model, self.plan)
        if tuple(self.template.names) != tuple(names):
            raise SpecValidationError(
                f"spec components {self.template.names} must match model+noise "
                f"order {names}"
            )
        if self.surrogate not in ("normal", "gamma"):
            raise SpecValidationError(f"unknown surrogate kind {self.surrogate!r}")

    @property
    def free_names(self):
        return self.template.free_names()

    @property
    def dim(self):
        return len(self.free_names)

    def xi_true(self):
        return self.template.xi()


def _part_moments(problem, spec):
    """(weight, InputMoments, Derivs) for every mixture part of a spec."""
    out = []
    for w, part in mixture_components(spec):
        im = moments_of(part)
        theta_hat = list(im.mean)
        D = output_derivs(
            problem.model, problem.plan, theta_hat,
            active=part.random_indices(), opts=problem.ode,
        )
        out.append((w, im, D))
    return out


def _mix_output_moments(ws, oms):
    """Exact moments of a finite mixture of per-part output moments."""
    from .surrogates import OutputMoments, OMEGA_CLAMP

    ws = np.asarray(ws, float)
    mus = np.stack([np.asarray(o.mu, float) for o in oms])
    Sigmas = np.stack([np.asarray(o.Sigma, float) for o in oms])
    omegas = np.stack([np.asarray(o.omega_raw if o.omega_raw is not None else o.omega,
                                  float) for o in oms])
    mu = np.einsum("p,pn->n", ws, mus)
    raw2 = np.einsum("p,pnm->nm", ws, Sigmas + np.einsum("pn,pm->pnm", mus, mus))
    Sigma = raw2 - np.outer(mu, mu)
    var_p = np.einsum("pnn->pn", Sigmas)
    m3raw = np.einsum(
        "p,pn->n", ws,
        omegas * var_p**1.5 + 3.0 * mus * var_p + mus**3,
    )
    var = np.diag(Sigma)
    tc = m3raw - 3.0 * mu * var - mu**3
    omega_raw = tc / var**1.5
    clamped = np.abs(omega_raw) > OMEGA_CLAMP
    return OutputMoments(mu, Sigma, np.clip(omega_raw, -OMEGA_CLAMP, OMEGA_CLAMP),
                         clamped, omega_raw)


def per_time_surrogates(problem, xi, return_moments=False):
    """One surrogate density per observation time at hyperparameters xi.

    Mixture specs yield mixture surrogates; ``return_moments`` adds the
    per-time output moments of the (possibly mixed) distribution.
    """
    spec = problem.template.with_xi(xi) if xi is not None else problem.template
    parts = _part_moments(problem, spec)
    T, q = len(problem.plan.times), problem.plan.q
    surs, oms = [], []
    for t in range(T):
        sl = slice(t * q, (t + 1) * q)
        per_part = []
        part_oms = []
        for w, im, D in parts:
            om = propagate(im, D.rows(sl))
            part_oms.append(om)
            per_part.append((w, build_surrogate(om, problem.surrogate,
                                                problem.copula_table)))
        surs.append(mixture_surrogate(per_part))
        if len(parts) == 1:
            oms.append(part_oms[0])
        else:
            oms.append(_mix_output_moments([w for w, _, _ in parts], part_oms))
    if return_moments:
        return surs, oms
    return surs


def _gamma_logpdf_by_time(y, tidx, mu, var, omega, floor):
    """Vectorised shifted-gamma log density with per-time parameters."""
    sd = np.sqrt(var)
    fallback = np.abs(omega) < OMEGA_NORMAL_FALLBACK
    out = np.empty_like(y)

    fb = fallback[tidx]
    if fb.any():
        m, s = mu[tidx][fb], sd[tidx][fb]
        out[fb] = -0.5 * np.log(2.0 * np.pi * s * s) - 0.5 * ((y[fb] - m) / s) ** 2
    ga = ~fb
    if ga.any():
        om = omega[tidx][ga]
        m, s0 = mu[tidx][ga], sd[tidx][ga]
        k = 4.0 / om**2
        s = s0 * np.abs(om) / 2.0
        shift = m - np.sign(om) * 2.0 * s0 / np.abs(om)
        z = np.sign(om) * (y[ga] - shift) / s
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = (k - 1.0) * np.log(z) - z - gammaln(k) - np.log(s)
        out[ga] = np.where(z > 0.0, np.nan_to_num(lp, neginf=floor), floor)
    return out


class SnapshotLikelihood:
    """Callable surrogate log-likelihood bound to one data set.

    Per call the surrogate of each observation time is built once and
    reused across that time's replicates; failures inside the propagation
    pipeline return the configured finite floor (optimizer-safe), with the
    cause recorded for :meth:`detailed`.
    """

    def __init__(self, problem, data):
        self.problem = problem
        self.data = data
        if len(data.times) != len(problem.plan.times) or any(
            abs(a - b) > 1e-9 for a, b in zip(data.times, problem.plan.times)
        ):
            raise SpecValidationError(
                f"data times {data.times} do not match plan times {problem.plan.times}"
            )
        if data.q != problem.plan.q:
            raise SpecValidationError(
                f"data dimension {data.q} does not match plan dimension {problem.plan.q}"
            )
        self._y_flat = np.concatenate([b[:, 0] for b in data.obs])
        self._tidx = np.concatenate(
            [np.full(b.shape[0], i, dtype=int) for i, b in enumerate(data.obs)]
        )
        self.last_flag = None

    def __call__(self, xi):
        try:
            return self._eval(np.asarray(xi, dtype=float))
        except _RECOVERABLE as e:
            self.last_flag = f"{type(e).__name__}: {e}"
            return self.problem.floor

    def detailed(self, xi):
        self.last_flag = None
        val = self(xi)
        return val, self.last_flag

    # -- implementation ----------------------------------------------------
    def _eval(self, xi):
        problem = self.problem
        spec = problem.template.with_xi(xi)
        if problem.plan.q == 1:
            return self._eval_univariate(spec)
        surs = per_time_surrogates(problem, xi)
        total = 0.0
        for sur, block in zip(surs, self.data.obs):
            total += float(np.sum(sur.logpdf(block)))
        return total

    def _eval_univariate(self, spec):
        problem = self.problem
        parts = mixture_components(spec)
        lps = []
        for w, part in parts:
            im = moments_of(part)
            D = output_derivs(
                problem.model, problem.plan, list(im.mean),
                active=part.random_indices(), opts=problem.ode,
            )
            mu, var, omega, _ = propagate_univariate(im, D)
            if problem.surrogate == "gamma":
                lp = _gamma_logpdf_by_time(
                    self._y_flat, self._tidx, mu, var, omega, problem.floor
                )
            else:
                m, v = mu[self._tidx], var[self._tidx]
                lp = -0.5 * np.log(2.0 * np.pi * v) - 0.5 * (self._y_flat - m) ** 2 / v
            lps.append(lp + np.log(value(w)))
        if len(lps) == 1:
            return float(np.sum(lps[0] - np.log(value(parts[0][0]))))
        return float(np.sum(logsumexp(np.stack(lps), axis=0)))


def snapshot_loglik(problem, data, xi):
    """Surrogate log-likelihood of snapshot data at hyperparameters xi."""
    return SnapshotLikelihood(problem, data)(xi)


# ---------------------------------------------------------------------------
# maximum likelihood
# ---------------------------------------------------------------------------


@dataclass
class MleResult:
    xi: np.ndarray
    loglik: float
    starts: list
    n_eval: int


def _initial_simplex(x0, lo, hi, frac):
    m = len(x0)
    simplex = np.tile(x0, (m + 1, 1))
    for k in range(m):
        step = frac * (hi[k] - lo[k])
        simplex[k + 1, k] += step if x0[k] + step <= hi[k] else -step
    return np.clip(simplex, lo, hi)


def _neldermead(fun, x0, lo, hi, maxfev, xatol=1e-6, fatol=1e-9, simplex_frac=0.1):
    res = minimize(
        fun,
        np.clip(x0, lo, hi),
        method="Nelder-Mead",
        bounds=Bounds(lo, hi),
        options=dict(
            maxfev=maxfev,
            xatol=xatol,
            fatol=fatol,
            initial_simplex=_initial_simplex(np.clip(x0, lo, hi), lo, hi, simplex_frac),
        ),
    )
    return res


def find_mle(problem, data, init, bounds, n_starts=5, seed=0, maxfev=None,
             xatol=1e-6, fatol=1e-9):
    """Multi-start Nelder-Mead maximisation of the surrogate likelihood.

    Starts at ``init`` plus ``n_starts - 1`` uniform draws from the prior
    box; deterministic for a given seed.
    """
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    ll = SnapshotLikelihood(problem, data)
    neg = lambda x: -ll(x)
    m = len(lo)
    if maxfev is None:
        maxfev = 400 * m
    rng = stream(seed, "optim")
    starts = [np.asarray(init, dtype=float)]
    starts += [rng.uniform(lo, hi) for _ in range(max(n_starts - 1, 0))]

    records, best = [], None
    n_eval = 0
    for k, x0 in enumerate(starts):
        try:
            res = _neldermead(neg, x0, lo, hi, maxfev, xatol, fatol)
        except _RECOVERABLE as e:
            records.append({"start": k, "error": str(e)})
            continue
        n_eval += res.nfev
        records.append(
            {"start": k, "x": res.x.tolist(), "loglik": -float(res.fun),
             "nfev": res.nfev, "converged": bool(res.success)}
        )
        if best is None or -res.fun > best[1]:
            best = (res.x, -float(res.fun))
    if best is None:
        raise OptimizationError("every optimizer start failed", diagnostics=records)
    return MleResult(np.asarray(best[0]), best[1], records, n_eval)


# ---------------------------------------------------------------------------
# profile likelihood
# ---------------------------------------------------------------------------


@dataclass
class ProfileResult:
    """Normalised profile curve with confidence interval and verdict.

    ``values`` are sup-log-likelihood differences from the best optimum
    found (max equals 0 up to optimizer tolerance); the 95% CI is the
    superlevel set above ``threshold``; the verdict is "identifiable"
    (both CI endpoints interior), "one-sided" (exactly one endpoint pinned
    to the search box edge) or "non-identifiable".
    """

    name: str
    index: int
    grid: np.ndarray
    values: np.ndarray
    nuisance: np.ndarray
    loglik_hat: float
    threshold: float
    ci: tuple
    verdict: str
    failed: np.ndarray

    def ci_contains(self, x):
        return self.ci[0] <= x <= self.ci[1]


def _ci_from_profile(grid, vals, threshold):
    """Superlevel-set CI around the profile maximum, with edge flags."""
    finite = np.where(np.isfinite(vals), vals, -np.inf)
    k_star = int(np.argmax(finite))
    if finite[k_star] <= threshold:  # degenerate: no point above threshold
        return (float(grid[k_star]), float(grid[k_star])), "non-identifiable"
    lo_edge = hi_edge = False
    k_lo = k_star
    while k_lo > 0 and finite[k_lo - 1] > threshold:
        k_lo -= 1
    if k_lo == 0:
        ci_lo, lo_edge = grid[0], True
    else:
        a, b = k_lo - 1, k_lo
        ci_lo = grid[a] + (threshold - finite[a]) * (grid[b] - grid[a]) / (
            finite[b] - finite[a]
        )
    k_hi = k_star
    n = len(grid)
    while k_hi < n - 1 and finite[k_hi + 1] > threshold:
        k_hi += 1
    if k_hi == n - 1:
        ci_hi, hi_edge = grid[-1], True
    else:
        a, b = k_hi + 1, k_hi
        ci_hi = grid[a] + (threshold - finite[a]) * (grid[b] - grid[a]) / (
            finite[b] - finite[a]
        )
    if lo_edge and hi_edge:
        verdict = "non-identifiable"
    elif lo_edge or hi_edge:
        verdict = "one-sided"
    else:
        verdict = "identifiable"
    return (float(ci_lo), float(ci_hi)), verdict


def profile(problem, data, xi_hat, param, bounds, n_grid=40, grid=None,
            inner_maxfev=None, xatol=1e-6, fatol=1e-9, refine_iters=6):
    """Profile log-likelihood of one hyperparameter over its prior range.

    Nuisance parameters are re-optimised at each grid point, warm-started
    from the neighbouring point sweeping outward from the MLE.  The grid
    spans the search box by default; because confidence intervals are
    usually much narrower than the box, the threshold crossings are then
    sharpened by ``refine_iters`` bisection steps each, so CI endpoints do
    not inherit the coarse grid spacing.  Failed points are marked and
    skipped rather than aborting the profile.
    """
    names = problem.free_names
    j = names.index(param) if isinstance(param, str) else int(param)
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    m = len(lo)
    xi_hat = np.asarray(xi_hat, dtype=float)
    ll = SnapshotLikelihood(problem, data)
    l_hat = ll(xi_hat)

    if grid is None:
        grid = np.linspace(lo[j], hi[j], n_grid)
    # the MLE coordinate joins the grid so the superlevel set is never
    # empty (box-spanning grids are far coarser than typical CIs)
    grid = np.unique(np.append(np.asarray(grid, dtype=float), xi_hat[j]))
    nuis = [k for k in range(m) if k != j]
    lo_n, hi_n = lo[nuis], hi[nuis]
    if inner_maxfev is None:
        inner_maxfev = 200 * max(m - 1, 1)

    def solve_point(phi, warm):
        """(value, nuisance optimum, ok) of the profile at one phi."""
        xi_full = xi_hat.copy()
        xi_full[j] = phi
        if m == 1:
            return ll(xi_full), np.zeros(0), True

        def neg(lmbda):
            xi_full[nuis] = lmbda
            return -ll(xi_full)

        try:
            res = _neldermead(neg, warm, lo_n, hi_n, inner_maxfev,
                              xatol, fatol, simplex_frac=0.02)
            return -float(res.fun), res.x, True
        except _RECOVERABLE:
            return np.nan, warm, False

    pts = {}  # phi -> (value, nuisance)
    failed_pts = set()

    def run_sweep(indices):
        warm = xi_hat[nuis].copy()
        for k in indices:
            v, lam_k, ok = solve_point(grid[k], warm)
            if ok:
                pts[grid[k]] = (v, lam_k)
                warm = lam_k.copy()
            else:
                failed_pts.add(grid[k])
                pts[grid[k]] = (np.nan, warm)

    k0 = int(np.argmin(np.abs(grid - xi_hat[j])))
    run_sweep(range(k0, len(grid)))
    run_sweep(range(k0 - 1, -1, -1))

    def crossings():
        """Brackets (a, b) where the normalised profile crosses the threshold."""
        phis = sorted(pts)
        raw = np.array([pts[p][0] for p in phis])
        top = np.nanmax(np.append(raw, l_hat))
        rel = np.where(np.isfinite(raw), raw - top, -np.inf)
        out = []
        for a, b, va, vb in zip(phis, phis[1:], rel, rel[1:]):
            if (va > PROFILE_THRESHOLD_95) != (vb > PROFILE_THRESHOLD_95):
                out.append((a, b))
        return out

    for a, b in list(crossings()):
        for _ in range(refine_iters):
            mid = 0.5 * (a + b)
            warm = pts[min((abs(p - mid), p) for p in pts if np.isfinite(pts[p][0]))[1]][1]
            v, lam_k, ok = solve_point(mid, warm.copy())
            pts[mid] = (v, lam_k)
            if not ok:
                break
            top = np.nanmax([v for v, _ in pts.values()] + [l_hat])
            side_a = (pts[a][0] - top) > PROFILE_THRESHOLD_95
            side_m = (v - top) > PROFILE_THRESHOLD_95
            if side_a != side_m:
                b = mid
            else:
                a = mid

    phis = np.array(sorted(pts))
    raw = np.array([pts[p][0] for p in phis])
    lam = np.array([pts[p][1] for p in phis]) if m > 1 else np.zeros((len(phis), 0))
    failed = np.array([p in failed_pts for p in phis])
    top = np.nanmax(np.append(raw, l_hat))
    norm = raw - top
    ci, verdict = _ci_from_profile(phis, norm, PROFILE_THRESHOLD_95)
    return ProfileResult(
        name=names[j], index=j, grid=phis, values=norm, nuisance=lam,
        loglik_hat=float(l_hat), threshold=PROFILE_THRESHOLD_95, ci=ci,
        verdict=verdict, failed=failed,
    )


# ---------------------------------------------------------------------------
# adaptive-Metropolis MCMC
# ---------------------------------------------------------------------------


@dataclass
class McmcChain:
    samples: np.ndarray
    logpost: np.ndarray
    accept_windows: list
    seed: int
    chain_index: int
    burn: float
    proposal_cov: np.ndarray
    n_outside: int

    def posterior_samples(self):
        start = int(self.burn * len(self.samples))
        return self.samples[start:]

    def map_sample(self):
        k = int(np.argmax(self.logpost))
        return self.samples[k], float(self.logpost[k])


def am_chain(loglik, lo, hi, n_iters, rng, init=None, adapt_start=200,
             epsilon=1e-10, window=1000):
    """One adaptive-Metropolis chain over a uniform box.

    The proposal covariance is the running sample covariance of the whole
    chain history scaled by 2.38^2/dim plus a small diagonal
    regularisation; proposals outside the box are rejected without a
    target evaluation.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m = len(lo)
    scale = 2.38**2 / m
    cov0 = np.diag(((hi - lo) / 20.0) ** 2)
    reg = epsilon * float(np.mean(np.diag(cov0)))

    x = np.asarray(init, dtype=float).copy() if init is not None else rng.uniform(lo, hi)
    fx = loglik(x)
    samples = np.empty((n_iters, m))
    logpost = np.empty(n_iters)
    mean = x.copy()
    M2 = np.zeros((m, m))
    chol = np.linalg.cholesky(scale * cov0)
    accept_windows = []
    out = 0
    win_acc = 0
    for t in range(n_iters):
        prop = x + chol @ rng.standard_normal(m)
        if np.any(prop < lo) or np.any(prop > hi):
            out += 1
        else:
            fp = loglik(prop)
            if np.log(rng.random()) < fp - fx:
                x, fx = prop, fp
                win_acc += 1
        samples[t] = x
        logpost[t] = fx
        # running moments over the whole history (Welford; includes x0)
        delta = x - mean
        mean += delta / (t + 2)
        M2 += np.outer(delta, x - mean)
        if t + 1 >= adapt_start:
            cov = M2 / (t + 1)
            chol = np.linalg.cholesky(scale * (cov + reg * np.eye(m)))
        if (t + 1) % window == 0:
            accept_windows.append((t + 1, win_acc / window))
            win_acc = 0
    return samples, logpost, accept_windows, chol @ chol.T, out


def mcmc(problem, data, bounds, n_iters, n_chains=1, seed=0, init=None,
         adapt_start=200, epsilon=1e-10, burn=0.5, window=1000):
    """Adaptive-Metropolis chains targeting likelihood x uniform-box prior.

    Chains are independent and bit-reproducible per (seed, chain index),
    regardless of how they are scheduled.
    """
    ll = SnapshotLikelihood(problem, data)
    chains = []
    for c in range(n_chains):
        rng = stream(seed, "mcmc", c)
        samples, logpost, acc, cov, out = am_chain(
            ll, bounds[0], bounds[1], n_iters, rng, init=init,
            adapt_start=adapt_start, epsilon=epsilon, window=window,
        )
        chains.append(McmcChain(samples, logpost, acc, seed, c, burn, cov, out))
    return chains


def mcmc_map(problem, data, chains, bounds, polish=True, maxfev=None):
    """Posterior-mode estimate: best chain sample, optionally polished.

    With a uniform box prior the posterior mode coincides with the MLE, so
    the best sample is refined by the same bounded Nelder-Mead used for
    maximum likelihood.
    """
    best_x, best_f = None, -np.inf
    for ch in chains:
        x, f = ch.map_sample()
        if f > best_f:
            best_x, best_f = x, f
    if not polish:
        return np.asarray(best_x), float(best_f)
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    ll = SnapshotLikelihood(problem, data)
    if maxfev is None:
        maxfev = 400 * len(lo)
    res = _neldermead(lambda x: -ll(x), best_x, lo, hi, maxfev)
    if -res.fun >= best_f:
        return np.asarray(res.x), -float(res.fun)
    return np.asarray(best_x), float(best_f)


# ---------------------------------------------------------------------------
# sensitivity-matrix (Fisher information) rank analysis
# ---------------------------------------------------------------------------


@dataclass
class FimReport:
    """Sensitivity of the hyperparameter-to-moments map and its rank."""

    jacobian: np.ndarray
    S: np.ndarray
    eigenvalues: np.ndarray
    rank: int
    rank_tol: float
    moment_labels: list
    param_labels: list


def moment_map(problem, xi):
    """Per-time (means, upper-triangular covariances, skewnesses) stack.

    Evaluated with first-order hyperparameter duals throughout the whole
    propagation pipeline, so the Jacobian is exact to solver tolerance.
    """
    xi = np.asarray(xi, dtype=float)
    spec = problem.template.with_xi(seed_dual1(xi))
    if spec.is_mixture:
        raise SpecValidationError("moment map is defined for atomic specs")
    im = moments_of(spec)
    D = output_derivs(problem.model, problem.plan, list(im.mean),
                      active=spec.random_indices(), opts=problem.ode)
    T, q = len(problem.plan.times), problem.plan.q
    entries, labels = [], []
    for t in range(T):
        om = propagate(im, D.rows(slice(t * q, (t + 1) * q)))
        for j in range(q):
            entries.append(om.mu[j])
            labels.append(f"t{t}_mu{j}")
        for a in range(q):
            for b in range(a, q):
                entries.append(om.Sigma[a, b])
                labels.append(f"t{t}_Sigma{a}{b}")
        for j in range(q):
            entries.append(om.omega[j])
            labels.append(f"t{t}_omega{j}")
    m = len(xi)
    valv = np.array([float(value(e)) for e in entries])
    jac = np.zeros((len(entries), m))
    for i, e in enumerate(entries):
        node = e
        if hasattr(node, "grad"):
            jac[i] = np.asarray(node.grad, dtype=float)
    return valv, jac, labels


def fim(problem, xi, rank_tol=1e-8):
    """Rank diagnostic of S = J^T J for the moment map at ``xi``.

    The numerical rank counts eigenvalues above ``rank_tol`` times the
    largest; local identifiability requires full rank.
    """
    _, jac, labels = moment_map(problem, xi)
    S = jac.T @ jac
    eig = np.linalg.eigvalsh(S)
    lam_max = float(eig.max())
    rank = int(np.sum(eig > rank_tol * lam_max))
    return FimReport(jac, S, eig, rank, rank_tol, labels, list(problem.free_names))
