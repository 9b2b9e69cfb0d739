"""Ready-made study configurations used by the demos and the test suite.

Each factory bundles a model, an observation plan, the true generating
distribution (doubling as the free-hyperparameter template) and a search
box for inference.  Box widths are deliberately generous (several orders
of magnitude for scale parameters, encoded as natural logs).
"""

from dataclasses import dataclass

import numpy as np

from .distributions import CorrPair, Degenerate, DistSpec, Normal, ShiftedGamma, Uniform
from .inference import SnapshotProblem
from .models import (
    Allee,
    LinearTwoPool,
    Logistic,
    NonlinearTwoPool,
    ObservationPlan,
    ObservedOutput,
)

__all__ = ["Study", "get_study", "STUDIES"]

LN = np.log


@dataclass
class Study:
    name: str
    problem: SnapshotProblem
    lo: np.ndarray
    hi: np.ndarray
    n_per_time: int

    @property
    def bounds(self):
        return self.lo, self.hi

    def xi_true(self):
        return self.problem.xi_true()


_LOGISTIC_TIMES = tuple(float(t) for t in range(0, 16, 2))


def _logistic_plan(noise=True):
    out = ObservedOutput(0, "additive", "eps") if noise else ObservedOutput(0)
    return ObservationPlan(times=_LOGISTIC_TIMES, outputs=(out,))


def _bounds(*pairs):
    lo = np.array([p[0] for p in pairs], dtype=float)
    hi = np.array([p[1] for p in pairs], dtype=float)
    return lo, hi


def logistic_independent(surrogate="gamma"):
    """Growth-curve study: independent normal parameters, additive noise."""
    spec = DistSpec(components=(
        ("r0", Normal(50.0, 3.0)),
        ("lam", Normal(1.0, 0.05)),
        ("R", Normal(300.0, 20.0)),
        ("eps", Normal(0.0, 4.0, fixed=("mu",))),
    ))
    problem = SnapshotProblem(Logistic(), _logistic_plan(), spec, surrogate)
    lo, hi = _bounds(
        (10.0, 150.0), (LN(1e-2), LN(30.0)),      # mu_r0, ln_sigma_r0
        (0.1, 3.0), (LN(1e-4), LN(1.0)),           # mu_lam, ln_sigma_lam
        (150.0, 600.0), (LN(0.5), LN(150.0)),      # mu_R, ln_sigma_R
        (LN(1e-2), LN(50.0)),                      # ln_sigma_eps
    )
    return Study("logistic_independent", problem, lo, hi, n_per_time=10)


def logistic_correlated(surrogate="gamma", rho=0.6):
    """Growth-curve study with correlated rate and capacity."""
    spec = DistSpec(
        components=(
            ("r0", Normal(50.0, 3.0)),
            ("lam", Normal(1.0, 0.05)),
            ("R", Normal(300.0, 20.0)),
            ("eps", Normal(0.0, 4.0, fixed=("mu",))),
        ),
        correlation=(CorrPair("lam", "R", rho),),
    )
    problem = SnapshotProblem(Logistic(), _logistic_plan(), spec, surrogate)
    base = logistic_independent()
    lo = np.append(base.lo, np.arctanh(-0.9))
    hi = np.append(base.hi, np.arctanh(0.9))
    return Study("logistic_correlated", problem, lo, hi, n_per_time=10)


def logistic_skewed(surrogate="gamma", omega=-1.5):
    """Growth-curve study with a skewed growth-rate distribution."""
    spec = DistSpec(components=(
        ("r0", Normal(50.0, 3.0)),
        ("lam", ShiftedGamma(1.0, 0.05, omega)),
        ("R", Normal(300.0, 20.0)),
        ("eps", Normal(0.0, 4.0, fixed=("mu",))),
    ))
    problem = SnapshotProblem(Logistic(), _logistic_plan(), spec, surrogate)
    lo, hi = _bounds(
        (10.0, 150.0), (LN(1e-2), LN(30.0)),
        (0.1, 3.0), (LN(1e-4), LN(1.0)), (-2.0, 1.0),   # omega_lam box
        (150.0, 600.0), (LN(0.5), LN(150.0)),
        (LN(1e-2), LN(50.0)),
    )
    return Study("logistic_skewed", problem, lo, hi, n_per_time=10)


def logistic_bimodal(surrogate="gamma", w=0.4, mu1=0.9, mu2=1.1):
    """Growth-curve study with a bimodal growth-rate mixture (fixed truth).

    The default subpopulations overlap; pass ``mu1=0.7, mu2=1.3`` for the
    clearly separated variant.
    """

    def part(mu_lam):
        return DistSpec(components=(
            ("r0", Normal(50.0, 3.0, fixed=("mu", "sigma"))),
            ("lam", Normal(mu_lam, 0.05, fixed=("mu", "sigma"))),
            ("R", Normal(300.0, 20.0, fixed=("mu", "sigma"))),
            ("eps", Normal(0.0, 4.0, fixed=("mu", "sigma"))),
        ))

    spec = DistSpec(mixture=((w, part(mu1)), (1.0 - w, part(mu2))))
    problem = SnapshotProblem(Logistic(), _logistic_plan(), spec, surrogate)
    return Study("logistic_bimodal", problem, np.zeros(0), np.zeros(0),
                 n_per_time=1000)


def logistic_uniform(surrogate="gamma"):
    """Growth-curve study with uniform parameter distributions, no noise."""
    spec = DistSpec(components=(
        ("r0", Uniform(50.0, 3.0)),
        ("lam", Uniform(1.0, 0.05)),
        ("R", Uniform(300.0, 20.0)),
    ))
    problem = SnapshotProblem(Logistic(), _logistic_plan(noise=False), spec, surrogate)
    lo, hi = _bounds(
        (10.0, 150.0), (LN(1e-2), LN(30.0)),
        (0.1, 3.0), (LN(1e-4), LN(1.0)),
        (150.0, 600.0), (LN(0.5), LN(150.0)),
    )
    return Study("logistic_uniform", problem, lo, hi, n_per_time=10)


def linear_two_pool(surrogate="gamma"):
    """Linear compartment study: random transfer rate, multiplicative noise."""
    spec = DistSpec(components=(
        ("k1", Degenerate(0.7)),
        ("k21", Normal(0.6, 0.1)),
        ("k2", Degenerate(0.4)),
        ("x0", Degenerate(1.0, fixed=("mu",))),
        ("eps", Normal(1.0, 0.01, fixed=("mu",))),
    ))
    plan = ObservationPlan(
        times=(0.5, 1.5, 2.5, 3.5, 5.0, 7.0),
        outputs=(ObservedOutput(1, "multiplicative", "eps"),),
    )
    problem = SnapshotProblem(LinearTwoPool(), plan, spec, surrogate)
    lo, hi = _bounds(
        (0.05, 3.0),                   # mu_k1
        (0.05, 3.0), (LN(1e-3), LN(1.0)),   # mu_k21, ln_sigma_k21
        (0.05, 3.0),                   # mu_k2
        (LN(1e-4), LN(0.5)),           # ln_sigma_eps
    )
    return Study("linear_two_pool", problem, lo, hi, n_per_time=20)


def _nonlinear_spec():
    return DistSpec(components=(
        ("k1", Degenerate(0.1)),
        ("k21", Normal(0.6, 0.1)),
        ("V21", Normal(5.0, 1.0)),
        ("k2", Degenerate(0.4)),
        ("x0", Degenerate(5.0, fixed=("mu",))),
        ("eps1", Normal(1.0, 0.01, fixed=("mu",))),
        ("eps2", Normal(0.0, 0.01, fixed=("mu",))),
    ))


def _nonlinear_bounds():
    return _bounds(
        (0.01, 1.0),                        # mu_k1
        (0.05, 3.0), (LN(1e-3), LN(1.0)),   # mu_k21, ln_sigma_k21
        (0.5, 20.0), (LN(1e-2), LN(5.0)),   # mu_V21, ln_sigma_V21
        (0.05, 3.0),                        # mu_k2
        (LN(1e-4), LN(0.5)),                # ln_sigma_eps1
        (LN(1e-4), LN(1.0)),                # ln_sigma_eps2
    )


def nonlinear_two_pool(surrogate="gamma", copula_table=None):
    """Saturating compartment study: bivariate outputs at five times."""
    plan = ObservationPlan(
        times=(2.0, 4.0, 6.0, 8.0, 10.0),
        outputs=(
            ObservedOutput(0, "multiplicative", "eps1"),
            ObservedOutput(1, "additive", "eps2"),
        ),
    )
    problem = SnapshotProblem(NonlinearTwoPool(), plan, _nonlinear_spec(),
                              surrogate, copula_table)
    lo, hi = _nonlinear_bounds()
    return Study("nonlinear_two_pool", problem, lo, hi, n_per_time=20)


def nonlinear_two_pool_single(surrogate="gamma", copula_table=None):
    """Single observation time variant (invasive-sampling scenario)."""
    plan = ObservationPlan(
        times=(10.0,),
        outputs=(
            ObservedOutput(0, "multiplicative", "eps1"),
            ObservedOutput(1, "additive", "eps2"),
        ),
    )
    problem = SnapshotProblem(NonlinearTwoPool(), plan, _nonlinear_spec(),
                              surrogate, copula_table)
    lo, hi = _nonlinear_bounds()
    return Study("nonlinear_two_pool_single", problem, lo, hi, n_per_time=100)


def allee_bistable(surrogate="gamma", t=5.0):
    """Bistable growth with a random initial condition straddling the
    unstable threshold; the documented failure mode of the approximation."""
    spec = DistSpec(components=(
        ("r0", Normal(51.0, 1.0)),
        ("lam", Degenerate(3.0, fixed=("mu",))),
        ("R", Degenerate(300.0, fixed=("mu",))),
        ("A", Degenerate(50.0, fixed=("mu",))),
    ))
    plan = ObservationPlan(times=(t,), outputs=(ObservedOutput(0),))
    problem = SnapshotProblem(Allee(), plan, spec, surrogate)
    lo, hi = _bounds((10.0, 100.0), (LN(1e-2), LN(10.0)))
    return Study("allee_bistable", problem, lo, hi, n_per_time=100)


STUDIES = {
    f.__name__: f
    for f in (
        logistic_independent,
        logistic_correlated,
        logistic_skewed,
        logistic_bimodal,
        logistic_uniform,
        linear_two_pool,
        nonlinear_two_pool,
        nonlinear_two_pool_single,
        allee_bistable,
    )
}


def get_study(name, **kwargs):
    try:
        factory = STUDIES[name]
    except KeyError:
        raise KeyError(f"unknown study {name!r}; available: {sorted(STUDIES)}") from None
    return factory(**kwargs)
