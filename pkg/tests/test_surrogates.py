import numpy as np
import pytest
from scipy.integrate import quad

from momentode.distributions import (
    Degenerate,
    DistSpec,
    Normal,
    ShiftedGamma,
    Uniform,
    moments_of,
)
from momentode.dual import eval_with_derivs
from momentode.errors import DegenerateOutputError
from momentode.models import Logistic, ObservationPlan, ObservedOutput, output_derivs
from momentode.sampling import kde, sample_outputs
from momentode.surrogates import (
    MixtureSurrogate,
    NormalSurrogate,
    OutputMoments,
    fit_shifted_gamma,
    mixture_surrogate,
    propagate,
    propagate_reference,
    propagate_univariate,
)


def _affine_derivs(A, b, theta_hat, active=None):
    A = np.asarray(A, float)

    def f(th):
        return [sum(A[i, j] * th[j] for j in range(A.shape[1])) + b[i]
                for i in range(A.shape[0])]

    return eval_with_derivs(f, theta_hat, active)


def test_affine_propagation_is_exact():
    spec = DistSpec(components=(
        ("a", Normal(1.0, 0.5)),
        ("b", ShiftedGamma(-2.0, 1.5, 1.1)),
        ("c", Uniform(0.5, 0.2)),
    ))
    im = moments_of(spec)
    g = np.random.Generator(np.random.Philox(12))
    A = g.normal(size=(2, 3))
    b = g.normal(size=2)
    D = _affine_derivs(A, b, list(im.mean))
    om = propagate(im, D)
    mu_exact = A @ im.mean + b
    Sig_exact = A @ im.V @ A.T
    tc_exact = np.einsum("abc,ia,ib,ic->i", im.S, A, A, A)
    # conditioning adds a documented relative jitter once, on the diagonal
    jit = 1e-10 * np.diag(Sig_exact).max()
    target = Sig_exact + jit * np.eye(2)
    var_j = np.diag(target)
    omega_exact = (tc_exact - 3.0 * mu_exact * jit) / var_j**1.5
    scale = np.abs(Sig_exact).max()
    assert np.allclose(om.mu, mu_exact, rtol=1e-12)
    assert np.allclose(om.Sigma, target, rtol=1e-12, atol=1e-12 * scale)
    assert np.allclose(om.omega, omega_exact, rtol=1e-10, atol=1e-12)


def test_quadratic_gaussian_mean_and_second_moment_exact():
    spec = DistSpec(components=(("t", Normal(0.0, 1.0)),))
    im = moments_of(spec)
    D = eval_with_derivs(lambda th: th[0] * th[0], [0.0])
    om = propagate(im, D)
    assert np.isclose(om.mu[0], 1.0, atol=1e-10)
    # raw second moment E[t^4] = 3 so variance is exactly 2
    assert np.isclose(om.Sigma[0, 0], 2.0, atol=1e-10)


def test_fast_path_matches_reference():
    spec = DistSpec(components=(
        ("r0", Normal(50.0, 3.0)),
        ("lam", ShiftedGamma(1.0, 0.05, -1.2)),
        ("R", Normal(300.0, 20.0)),
        ("eps", Normal(0.0, 4.0, fixed=("mu",))),
    ))
    im = moments_of(spec)
    plan = ObservationPlan(
        times=(2.0, 6.0, 10.0), outputs=(ObservedOutput(0, "additive", "eps"),)
    )
    D = output_derivs(Logistic(), plan, list(im.mean), active=spec.random_indices())
    a = propagate(im, D)
    b = propagate_reference(im, D)
    assert np.allclose(a.mu, b.mu, rtol=1e-13)
    assert np.allclose(a.Sigma, b.Sigma, rtol=1e-13)
    assert np.allclose(a.omega, b.omega, rtol=1e-12)
    mu_u, var_u, om_u, _ = propagate_univariate(im, D)
    assert np.allclose(mu_u, a.mu, rtol=1e-13)
    assert np.allclose(var_u, np.diag(a.Sigma), rtol=1e-9)
    assert np.allclose(om_u, a.omega, rtol=1e-9)


def test_logistic_moments_within_three_se_of_simulation():
    from momentode.studies import get_study
    from momentode.sampling import empirical_moments

    st = get_study("logistic_independent")
    im = moments_of(st.problem.template)
    D = output_derivs(
        st.problem.model, st.problem.plan, list(im.mean),
        active=st.problem.template.random_indices(),
    )
    om = propagate(im, D)
    ss = sample_outputs(st.problem, st.xi_true(), 1_000_000, seed=2024)
    emp = empirical_moments(ss)
    i = list(st.problem.plan.times).index(10.0)
    assert abs(om.mu[i] - emp.mu[i, 0]) < 3 * emp.se_mu[i, 0]
    assert abs(om.Sigma[i, i] - emp.Sigma[i, 0, 0]) < 3 * emp.se_Sigma[i, 0, 0]
    assert abs(om.omega[i] - emp.omega[i, 0]) < 3 * emp.se_omega[i, 0]


def test_fit_shifted_gamma_unit_exponential():
    s = fit_shifted_gamma(2.0, 1.0, 2.0)
    assert np.isclose(s.params.k, 1.0)
    assert np.isclose(s.params.s, 1.0)
    assert np.isclose(s.params.shift, 1.0)
    assert not s.params.reflected


@pytest.mark.parametrize("mu,var,omega", [(0.0, 1.0, 1.0), (3.0, 4.0, -0.7)])
def test_fit_shifted_gamma_moments_by_quadrature(mu, var, omega):
    s = fit_shifted_gamma(mu, var, omega)
    p = s.params
    lo = p.shift if not p.reflected else -np.inf
    hi = np.inf if not p.reflected else p.shift
    pdf = lambda y: np.exp(s.logpdf(np.array([y]))[0])
    m0 = quad(pdf, lo, hi)[0]
    m1 = quad(lambda y: y * pdf(y), lo, hi)[0]
    v = quad(lambda y: (y - m1) ** 2 * pdf(y), lo, hi)[0]
    m3 = quad(lambda y: (y - m1) ** 3 * pdf(y), lo, hi)[0]
    assert np.isclose(m0, 1.0, atol=1e-8)
    assert np.isclose(m1, mu, atol=1e-8)
    assert np.isclose(v, var, atol=1e-8)
    assert np.isclose(m3 / v**1.5, omega, atol=1e-8)


def test_gamma_converges_to_normal_as_omega_vanishes():
    y = np.linspace(-3, 3, 31)
    n = NormalSurrogate([0.0], [[1.0]])
    coarse = fit_shifted_gamma(0.0, 1.0, 1e-3)
    fine = fit_shifted_gamma(0.0, 1.0, 1e-5)
    err_coarse = np.abs(np.exp(coarse.logpdf(y)) - np.exp(n.logpdf(y))).max()
    assert fine.normal_fallback  # below the fallback threshold
    assert np.allclose(np.exp(fine.logpdf(y)), np.exp(n.logpdf(y)))
    assert err_coarse < 1e-3


def test_gamma_support_floor():
    s = fit_shifted_gamma(2.0, 1.0, 2.0)  # support y > 1
    lp = s.logpdf(np.array([0.5, 1.5]))
    assert lp[0] == s.floor
    assert np.isfinite(lp[1]) and lp[1] > s.floor


def test_normal_surrogate_examples():
    n1 = NormalSurrogate([3.0], [[4.0]])
    assert np.isclose(n1.logpdf(np.array([3.0]))[0], -0.5 * np.log(2 * np.pi * 4.0))
    Sig = np.diag([4.0, 0.25])
    n2 = NormalSurrogate([1.0, -1.0], Sig)
    y = np.array([[2.0, 0.0], [1.0, -1.0]])
    marg = NormalSurrogate([1.0], [[4.0]]).logpdf(y[:, 0]) + NormalSurrogate(
        [-1.0], [[0.25]]
    ).logpdf(y[:, 1])
    assert np.allclose(n2.logpdf(y), marg)


def test_densities_integrate_to_one():
    n = NormalSurrogate([1.0], [[2.0]])
    assert np.isclose(quad(lambda y: np.exp(n.logpdf(np.array([y]))[0]), -20, 20)[0],
                      1.0, atol=1e-6)
    g = fit_shifted_gamma(1.0, 2.0, 0.8)
    assert np.isclose(
        quad(lambda y: np.exp(g.logpdf(np.array([y]))[0]), g.params.shift, 40)[0],
        1.0, atol=1e-6,
    )
    mix = MixtureSurrogate([0.3, 0.7], [n, NormalSurrogate([4.0], [[1.0]])])
    assert np.isclose(quad(lambda y: np.exp(mix.logpdf(np.array([y]))[0]), -20, 20)[0],
                      1.0, atol=1e-6)


def test_mixture_surrogate_identities():
    n = NormalSurrogate([0.0], [[1.0]])
    y = np.linspace(-2, 2, 9)
    assert mixture_surrogate([(1.0, n)]) is n
    two = mixture_surrogate([(0.25, n), (0.75, NormalSurrogate([0.0], [[1.0]]))])
    assert np.allclose(two.logpdf(y), n.logpdf(y), rtol=1e-12)


def test_bimodal_mixture_density_matches_simulated_modes():
    from momentode.inference import per_time_surrogates
    from momentode.studies import get_study

    st = get_study("logistic_bimodal", mu1=0.7, mu2=1.3, w=0.5)
    surs = per_time_surrogates(st.problem, st.xi_true())
    i = list(st.problem.plan.times).index(4.0)
    sur = surs[i]
    ss = sample_outputs(st.problem, st.xi_true(), 100_000, seed=77)
    y = ss.values[:, i, 0]
    grid = np.linspace(y.min(), y.max(), 2000)
    dens = np.exp(sur.logpdf(grid))
    kd = kde(y)(grid)

    def modes(f):
        idx = np.flatnonzero((f[1:-1] > f[:-2]) & (f[1:-1] > f[2:])
                             & (f[1:-1] > 0.05 * f.max())) + 1
        return grid[idx]

    m_sur, m_kde = modes(dens), modes(kd)
    assert len(m_sur) == 2 and len(m_kde) == 2
    assert np.all(np.abs(np.sort(m_sur) - np.sort(m_kde)) < 5.0)


def test_omega_clamp_recorded():
    # pure quadratic of a Gaussian: the closed third moment implies a
    # skewness beyond the gamma shape transition, so it must clamp
    spec = DistSpec(components=(("t", Normal(0.0, 1.0)),))
    im = moments_of(spec)
    D = eval_with_derivs(lambda th: th[0] * th[0], [0.0])
    out = propagate(im, D)
    assert out.clamped[0]
    assert abs(out.omega[0]) == pytest.approx(1.95)
    assert abs(out.omega_raw[0]) > 1.95


def test_gamma_surrogate_dimension_guard(small_table):
    from momentode.surrogates import build_surrogate

    om = OutputMoments(np.zeros(3), np.eye(3), np.zeros(3))
    with pytest.raises(ValueError, match="normal"):
        build_surrogate(om, "gamma", small_table)


def test_degenerate_output_error_names_index():
    from momentode.distributions import InputMoments

    # hand-built tensors violating the fourth-moment bound force a
    # negative propagated variance; the error must name the output
    im = InputMoments(
        mean=np.zeros(1), V=np.ones((1, 1)), S=np.zeros((1, 1, 1)),
        K=np.full((1, 1, 1, 1), 0.2),
    )
    D = eval_with_derivs(lambda th: [th[0], th[0] * th[0]], [0.0])
    with pytest.raises(DegenerateOutputError) as e:
        propagate(im, D)
    assert e.value.index == 1


def test_two_pool_moments_converge_to_quadrature_as_spread_shrinks():
    # propagated moments carry a second-order truncation error that scales
    # with the fourth power of the input spread; against an exact
    # Gauss-Hermite oracle the relative error must fall off accordingly
    from momentode.models import LinearTwoPool, output_derivs
    from momentode.distributions import Degenerate

    k1, k2, x0, seps, t = 0.7, 0.4, 1.0, 0.01, 7.0
    nodes, w = np.polynomial.hermite_e.hermegauss(80)
    W = w / w.sum()

    def exact(s21):
        k21 = 0.6 + s21 * nodes
        a = k21 + k1
        v = k21 * x0 * (np.exp(-a * t) - np.exp(-k2 * t)) / (k2 - a)
        m1, m2, m3 = W @ v, W @ v**2, W @ v**3
        m2, m3 = m2 * (1 + seps**2), m3 * (1 + 3 * seps**2)
        var = m2 - m1**2
        return m1, var, (m3 - 3 * m1 * var - m1**3) / var**1.5

    def prop(s21):
        spec = DistSpec(components=(
            ("k1", Degenerate(k1)), ("k21", Normal(0.6, s21)),
            ("k2", Degenerate(k2)), ("x0", Degenerate(x0)),
            ("eps", Normal(1.0, seps, fixed=("mu",))),
        ))
        im = moments_of(spec)
        plan = ObservationPlan(times=(t,),
                               outputs=(ObservedOutput(1, "multiplicative", "eps"),))
        D = output_derivs(LinearTwoPool(), plan, list(im.mean),
                          active=spec.random_indices())
        om = propagate(im, D)
        return om.mu[0], om.Sigma[0, 0], om.omega[0]

    rel_errs = []
    for s21 in (0.1, 0.05, 0.025):
        ex, pr = exact(s21), prop(s21)
        rel_errs.append(abs(pr[1] - ex[1]) / ex[1])
    # quartic-in-spread truncation: halving the spread cuts the relative
    # variance error by about four
    assert rel_errs[1] < 0.35 * rel_errs[0]
    assert rel_errs[2] < 0.35 * rel_errs[1]
    ex, pr = exact(0.025), prop(0.025)
    assert abs(pr[0] - ex[0]) / ex[0] < 1e-4
    assert abs(pr[1] - ex[1]) / ex[1] < 0.005
    assert abs(pr[2] - ex[2]) < 0.02


def test_all_degenerate_spec_gives_spike():
    spec = DistSpec(components=(("a", Degenerate(3.0)),))
    im = moments_of(spec)
    D = eval_with_derivs(lambda th: 2.0 * th[0], list(im.mean), active=())
    om = propagate(im, D)
    assert om.Sigma[0, 0] > 0 and om.Sigma[0, 0] < 1e-10
    assert np.isclose(om.mu[0], 6.0)
