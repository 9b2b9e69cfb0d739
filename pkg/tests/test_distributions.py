import numpy as np
import pytest
from scipy.integrate import quad

from momentode.distributions import (
    CorrPair,
    Degenerate,
    DistSpec,
    Normal,
    ShiftedGamma,
    Uniform,
    mixture_components,
    moments_of,
)
from momentode.errors import SpecValidationError


def _spec(*comps, corr=()):
    return DistSpec(components=tuple(comps), correlation=tuple(corr))


def test_degenerate_contributes_only_mean():
    spec = _spec(("k1", Degenerate(0.7)), ("a", Normal(1.0, 0.2)))
    im = moments_of(spec)
    assert im.mean[0] == 0.7
    assert not im.V[0].any() and not im.V[:, 0].any()
    assert not im.S[0].any()
    assert not im.K[0].any()


def test_independent_normal_moments():
    im = moments_of(_spec(("a", Normal(1.0, 0.05))))
    assert np.isclose(im.V[0, 0], 0.0025)
    assert im.S[0, 0, 0] == 0.0
    assert np.isclose(im.K[0, 0, 0, 0], 3 * 0.05**4)


def _shifted_gamma_pdf(mu, sigma, omega):
    from scipy.stats import gamma as gamma_dist

    k = 4.0 / omega**2
    s = sigma * abs(omega) / 2.0
    sign = 1.0 if omega > 0 else -1.0
    shift = mu - sign * 2.0 * sigma / abs(omega)

    def pdf(y):
        return gamma_dist.pdf(sign * (y - shift), k, scale=s)

    lo = shift if omega > 0 else -np.inf
    hi = np.inf if omega > 0 else shift
    return pdf, lo, hi


@pytest.mark.parametrize("omega", [1.0, -0.8])
def test_shifted_gamma_moments_match_quadrature(omega):
    mu, sigma = 1.0, 1.0
    pdf, lo, hi = _shifted_gamma_pdf(mu, sigma, omega)
    m = quad(lambda y: y * pdf(y), lo, hi)[0]
    m3 = quad(lambda y: (y - m) ** 3 * pdf(y), lo, hi)[0]
    m4 = quad(lambda y: (y - m) ** 4 * pdf(y), lo, hi)[0]
    im = moments_of(_spec(("a", ShiftedGamma(mu, sigma, omega))))
    assert np.isclose(im.mean[0], m, atol=1e-9)
    assert np.isclose(im.S[0, 0, 0], m3, atol=1e-8)
    assert np.isclose(im.K[0, 0, 0, 0], m4, atol=1e-8)
    if omega == 1.0:
        assert np.isclose(m3, 1.0, atol=1e-9)
        assert np.isclose(m4, 4.5, atol=1e-8)


def test_uniform_moments():
    im = moments_of(_spec(("a", Uniform(2.0, 0.5))))
    assert np.isclose(im.V[0, 0], 0.25)
    assert im.S[0, 0, 0] == 0.0
    assert np.isclose(im.K[0, 0, 0, 0], 9 * 0.5**4 / 5)


def test_gamma_limits_to_normal_as_omega_vanishes():
    base = moments_of(_spec(("a", Normal(1.0, 0.3))))
    near = moments_of(_spec(("a", ShiftedGamma(1.0, 0.3, 1e-7))))
    assert np.isclose(near.V[0, 0], base.V[0, 0], rtol=1e-12)
    assert abs(near.S[0, 0, 0]) < 1e-8
    assert np.isclose(near.K[0, 0, 0, 0], base.K[0, 0, 0, 0], rtol=1e-12)


def test_isserlis_matches_gauss_hermite_quadrature():
    # brute-force 4th moments of a correlated trivariate normal
    g = np.random.Generator(np.random.Philox(5))
    sig = g.uniform(0.5, 2.0, size=3)
    spec = _spec(
        ("a", Normal(0.3, sig[0])),
        ("b", Normal(-1.0, sig[1])),
        ("c", Normal(2.0, sig[2])),
        corr=[CorrPair("a", "b", 0.55), CorrPair("b", "c", -0.3)],
    )
    im = moments_of(spec)
    L = np.linalg.cholesky(im.V)
    nodes, w = np.polynomial.hermite_e.hermegauss(7)
    W = (w / w.sum())
    K = np.zeros((3, 3, 3, 3))
    for i, zi in enumerate(nodes):
        for j, zj in enumerate(nodes):
            for k, zk in enumerate(nodes):
                phi = L @ np.array([zi, zj, zk])
                K += W[i] * W[j] * W[k] * np.einsum("a,b,c,d->abcd", phi, phi, phi, phi)
    assert np.allclose(K, im.K, rtol=1e-10, atol=1e-12)


def test_mixture_components_flattening():
    atom = _spec(("a", Normal(0.0, 1.0)))
    assert mixture_components(atom) == [(1.0, atom)]

    lam1 = _spec(("lam", Normal(0.9, 0.05)))
    lam2 = _spec(("lam", Normal(1.1, 0.05)))
    mix = DistSpec(mixture=((0.4, lam1), (0.6, lam2)))
    parts = mixture_components(mix)
    assert [w for w, _ in parts] == [0.4, 0.6]

    nested = DistSpec(mixture=((0.5, lam1), (0.5, mix)))
    flat = mixture_components(nested)
    assert np.allclose([w for w, _ in flat], [0.5, 0.2, 0.3])
    assert all(not s.is_mixture for _, s in flat)


def test_mixture_weight_validation():
    a = _spec(("x", Normal(0.0, 1.0)))
    with pytest.raises(SpecValidationError, match="sum"):
        DistSpec(mixture=((0.4, a), (0.4, a)))
    with pytest.raises(SpecValidationError, match="negative"):
        DistSpec(mixture=((-0.2, a), (1.2, a)))


def test_validation_errors_name_offender():
    with pytest.raises(SpecValidationError, match="sigma"):
        Normal(0.0, -1.0)
    with pytest.raises(SpecValidationError, match="skewness"):
        ShiftedGamma(0.0, 1.0, 2.5)
    with pytest.raises(SpecValidationError, match="normal components"):
        _spec(
            ("a", ShiftedGamma(0.0, 1.0, 1.0)),
            ("b", Normal(0.0, 1.0)),
            corr=[CorrPair("a", "b", 0.5)],
        )
    with pytest.raises(SpecValidationError, match="positive semi-definite"):
        _spec(
            ("a", Normal(0, 1)),
            ("b", Normal(0, 1)),
            ("c", Normal(0, 1)),
            corr=[
                CorrPair("a", "b", -0.9),
                CorrPair("a", "c", -0.9),
                CorrPair("b", "c", -0.9),
            ],
        )
    with pytest.raises(SpecValidationError, match="duplicate"):
        _spec(("a", Normal(0, 1)), ("a", Normal(0, 1)))


def test_xi_round_trip_and_names():
    spec = DistSpec(
        components=(
            ("r0", Normal(50.0, 3.0)),
            ("lam", ShiftedGamma(1.0, 0.05, -1.5)),
            ("R", Normal(300.0, 20.0)),
            ("eps", Normal(0.0, 4.0, fixed=("mu",))),
        ),
        correlation=(CorrPair("r0", "R", 0.25),),
    )
    names = spec.free_names()
    assert names == [
        "mu_r0", "ln_sigma_r0", "mu_lam", "ln_sigma_lam", "omega_lam",
        "mu_R", "ln_sigma_R", "ln_sigma_eps", "atanh_rho_r0_R",
    ]
    xi = spec.xi()
    back = spec.with_xi(xi)
    assert np.allclose(back.xi(), xi, rtol=1e-14)
    assert np.isclose(back.marginal("lam").omega, -1.5)
    assert np.isclose(back.correlation[0].rho, 0.25)
    with pytest.raises(SpecValidationError, match="extra"):
        spec.with_xi(np.append(xi, 1.0))


def test_json_round_trip():
    spec = DistSpec(
        components=(
            ("a", Normal(1.0, 0.1, fixed=("mu",))),
            ("b", ShiftedGamma(0.0, 1.0, 0.5)),
            ("c", Degenerate(2.0)),
            ("d", Uniform(0.0, 1.0)),
        ),
        correlation=(),
    )
    doc = spec.to_dict()
    assert DistSpec.from_dict(doc) == spec
    mix = DistSpec(mixture=((0.4, spec), (0.6, spec)))
    assert DistSpec.from_dict(mix.to_dict()) == mix


def _block_se(theta, stat, n_blocks=50):
    blocks = np.array_split(theta, n_blocks)
    vals = np.array([stat(b) for b in blocks])
    return vals.std(axis=0, ddof=1) / np.sqrt(n_blocks)


def test_sampled_moments_match_exact_within_5_se():
    spec = DistSpec(
        components=(
            ("a", Normal(1.0, 0.5)),
            ("b", ShiftedGamma(-1.0, 2.0, 1.3)),
            ("c", Uniform(0.0, 1.0)),
            ("d", Normal(3.0, 1.5)),
            ("e", Degenerate(5.0)),
        ),
        correlation=(CorrPair("a", "d", 0.6),),
    )
    im = moments_of(spec)
    rng = np.random.Generator(np.random.Philox(99))
    th = spec.sample(rng, 1_000_000)
    assert np.allclose(th[:, 4], 5.0)

    mean_se = _block_se(th, lambda b: b.mean(axis=0))
    assert np.all(np.abs(th.mean(axis=0) - im.mean) <= 5 * mean_se + 1e-12)

    phi = th - im.mean
    V_emp = np.einsum("na,nb->ab", phi, phi) / len(phi)
    V_se = _block_se(phi, lambda b: np.einsum("na,nb->ab", b, b) / len(b))
    assert np.all(np.abs(V_emp - im.V) <= 5 * V_se + 1e-12)

    S_emp = np.einsum("na,nb,nc->abc", phi, phi, phi) / len(phi)
    S_se = _block_se(phi, lambda b: np.einsum("na,nb,nc->abc", b, b, b) / len(b))
    assert np.all(np.abs(S_emp - im.S) <= 5 * S_se + 1e-10)

    K_emp = np.einsum("na,nb,nc,nd->abcd", phi, phi, phi, phi) / len(phi)
    K_se = _block_se(
        phi, lambda b: np.einsum("na,nb,nc,nd->abcd", b, b, b, b) / len(b)
    )
    assert np.all(np.abs(K_emp - im.K) <= 5 * K_se + 1e-9)


def test_kurtosis_diagonal_dominates_variance_squared():
    spec = _spec(
        ("a", Normal(0.0, 1.3)),
        ("b", ShiftedGamma(1.0, 0.7, -1.2)),
        ("c", Uniform(0.0, 0.4)),
    )
    im = moments_of(spec)
    for i in range(3):
        assert im.K[i, i, i, i] >= im.V[i, i] ** 2


def test_sampling_deterministic_per_seed():
    spec = _spec(("a", Normal(0.0, 1.0)), ("b", ShiftedGamma(0.0, 1.0, 0.9)))
    a = spec.sample(np.random.Generator(np.random.Philox(3)), 1000)
    b = spec.sample(np.random.Generator(np.random.Philox(3)), 1000)
    assert np.array_equal(a, b)
