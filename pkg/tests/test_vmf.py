import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from acsel.errors import DegenerateKappa, ValidationError, ZeroResultant
from acsel.vmf import (VmfParams, _rotate_from_pole, estimate_kappa, estimate_mu, kappa_from_rbar,
                       log_bessel_iv, sample_vmf, sample_vmf_columns, vmf_log_density)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def bessel_ratio(kappa, dim):
    # A_D(kappa) = I_{D/2}(kappa) / I_{D/2-1}(kappa), the expected cosine to mu
    return special.ive(dim / 2, kappa) / special.ive(dim / 2 - 1, kappa)


def log_density_s2(kappa, t):
    # closed form on S^2: kappa exp(kappa t) / (4 pi sinh kappa), written stably
    return np.log(kappa) - np.log(2 * np.pi) + kappa * (t - 1) - np.log1p(-np.exp(-2 * kappa))


def test_estimate_mu_single_and_repeated():
    z = unit([1.0, 2.0, -0.5])
    np.testing.assert_allclose(estimate_mu(z), z)
    np.testing.assert_allclose(estimate_mu(np.column_stack([z, z])), z)


def test_estimate_mu_antipodal_raises():
    z = unit([1.0, 0.0, 0.0])
    with pytest.raises(ZeroResultant):
        estimate_mu(np.column_stack([z, -z]))


def test_estimate_mu_from_draws():
    mu = unit(np.arange(1.0, 10.0))
    pts = sample_vmf(VmfParams(mu, 50.0), 1000, np.random.default_rng(0))
    angle = np.arccos(np.clip(estimate_mu(pts) @ mu, -1, 1))
    assert angle < 0.1


def test_kappa_single_point_is_degenerate():
    assert estimate_kappa(unit([1.0, 1.0])) == np.inf


def test_kappa_uniform_is_small():
    g = np.random.default_rng(1).standard_normal((9, 10000))
    assert estimate_kappa(g / np.linalg.norm(g, axis=0)) < 0.15


def test_kappa_recovered_from_draws():
    mu = unit(np.ones(9))
    pts = sample_vmf(VmfParams(mu, 20.0), 5000, np.random.default_rng(2))
    assert 17.0 <= estimate_kappa(pts) <= 23.0


def test_kappa_formula_elementwise():
    r = np.array([0.0, 0.5, 1.0])
    k = kappa_from_rbar(r, 9)
    assert k[0] == 0.0
    assert k[1] == pytest.approx(0.5 * (9 - 0.25) / 0.75)
    assert k[2] == np.inf


def test_density_s2_closed_form():
    mu = unit([0.0, 0.0, 1.0])
    got = vmf_log_density(mu, VmfParams(mu, 2.0))
    expect = np.log(2.0 * np.exp(2.0) / (4 * np.pi * np.sinh(2.0)))
    assert abs(got - expect) < 1e-10


@pytest.mark.parametrize("kappa", [0.01, 1.0, 37.5, 700.0, 1e4, 1e6])
def test_density_s2_closed_form_wide_range(kappa):
    mu = unit([1.0, 2.0, 2.0])
    x = unit([1.0, -1.0, 0.5])
    got = vmf_log_density(x, VmfParams(mu, kappa))
    expect = log_density_s2(kappa, mu @ x)
    assert abs(got - expect) <= 1e-10 * max(1.0, abs(expect))


def test_density_integrates_to_one_s2():
    mu = unit([0.0, 0.0, 1.0])
    p = VmfParams(mu, 5.0)

    def f(t):
        x = np.array([np.sqrt(1 - t * t), 0.0, t])
        return np.exp(vmf_log_density(x, p))

    # on S^2 the surface element integrates to 2 pi dt over the cosine
    total = 2 * np.pi * integrate.quad(f, -1.0, 1.0, epsabs=1e-13)[0]
    assert abs(total - 1.0) < 1e-6


def test_density_depends_only_on_cosine():
    mu = unit([1.0, 0.0, 0.0, 0.0])
    p = VmfParams(mu, 3.0)
    a = np.array([0.6, 0.8, 0.0, 0.0])
    b = np.array([0.6, 0.0, 0.0, -0.8])
    assert vmf_log_density(a, p) == pytest.approx(vmf_log_density(b, p), abs=1e-14)


@pytest.mark.parametrize("kappa", [0.0, np.inf])
def test_density_degenerate_kappa(kappa):
    mu = unit([1.0, 0.0, 0.0])
    with pytest.raises(DegenerateKappa):
        vmf_log_density(mu, VmfParams(mu, kappa))


def test_log_bessel_matches_scipy_and_extends():
    for v in (0.5, 3.5, 11.0):
        for x in (0.1, 5.0, 80.0):
            assert log_bessel_iv(v, x) == pytest.approx(np.log(special.iv(v, x)), rel=1e-12)
    # tiny argument with large order underflows ive; the series fallback must stay finite
    val = log_bessel_iv(200.0, 1e-3)
    expect = 200 * np.log(5e-4) - special.gammaln(201)
    assert val == pytest.approx(expect, rel=1e-10)


def test_params_validation():
    with pytest.raises(ValidationError):
        VmfParams(np.array([1.0, 1.0]), 1.0)
    with pytest.raises(ValidationError):
        VmfParams(unit([1.0, 1.0]), -1.0)


def test_sample_infinite_kappa_is_exact_copy():
    mu = unit([0.3, -0.2, 0.9, 0.1])
    pts = sample_vmf(VmfParams(mu, np.inf), 7, np.random.default_rng(0))
    assert np.array_equal(pts, np.repeat(mu[:, None], 7, axis=1))


def test_sample_zero_kappa_uniform():
    mu = unit(np.ones(9))
    pts = sample_vmf(VmfParams(mu, 0.0), 20000, np.random.default_rng(3))
    assert np.linalg.norm(pts.mean(axis=1)) < 0.02


@pytest.mark.parametrize("dim", [4, 9, 24])
@pytest.mark.parametrize("kappa", [5.0, 20.0, 100.0])
def test_sample_mean_cosine_matches_bessel_ratio(kappa, dim):
    rng = np.random.default_rng(int(kappa) * 100 + dim)
    mu = unit(rng.normal(size=dim))
    pts = sample_vmf(VmfParams(mu, kappa), 20000, rng)
    assert abs((mu @ pts).mean() - bessel_ratio(kappa, dim)) < 0.01


def test_sample_kappa100_d9_m5000():
    mu = unit(np.arange(9.0) - 3.5)
    pts = sample_vmf(VmfParams(mu, 100.0), 5000, np.random.default_rng(11))
    assert abs((mu @ pts).mean() - bessel_ratio(100.0, 9)) < 0.01


def test_sample_unit_norm_and_deterministic():
    mu = unit(np.arange(1.0, 6.0))
    a = sample_vmf(VmfParams(mu, 7.0), 500, np.random.default_rng(5))
    b = sample_vmf(VmfParams(mu, 7.0), 500, np.random.default_rng(5))
    assert np.array_equal(a, b)
    np.testing.assert_allclose(np.linalg.norm(a, axis=0), 1.0, atol=1e-10)


def test_sample_columns_mixed_kappas():
    rng = np.random.default_rng(6)
    mus = np.column_stack([unit(rng.normal(size=5)) for _ in range(4)])
    out = sample_vmf_columns(mus, np.array([np.inf, 0.0, 10.0, 1e7]), rng)
    assert np.array_equal(out[:, 0], mus[:, 0])
    np.testing.assert_allclose(np.linalg.norm(out, axis=0), 1.0, atol=1e-12)
    assert out[:, 3] @ mus[:, 3] > 0.9999


def test_sample_huge_kappa_stays_finite():
    mu = unit(np.ones(441))
    pts = sample_vmf(VmfParams(mu, 1e9), 50, np.random.default_rng(4))
    assert np.all(np.isfinite(pts))
    assert (mu @ pts).min() > 0.999


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_property_rotation_preserves_norms(dim, seed):
    rng = np.random.default_rng(seed)
    mu = rng.normal(size=(dim, 3))
    mu /= np.linalg.norm(mu, axis=0)
    x = rng.normal(size=(dim, 3))
    y = _rotate_from_pole(x, mu)
    np.testing.assert_allclose(np.linalg.norm(y, axis=0), np.linalg.norm(x, axis=0), rtol=1e-12)
    pole = np.zeros((dim, 3))
    pole[0] = 1.0
    np.testing.assert_allclose(_rotate_from_pole(pole, mu), mu, atol=1e-12)
