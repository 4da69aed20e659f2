"""Observation families: densities, sampling, moments, bounds."""

import math

import numpy as np
import pytest
from scipy import stats

from blockpost import (
    Bernoulli,
    Binomial,
    GaussLocation,
    GaussScale,
    Multinomial,
    Poisson,
    SpecError,
    ZeroInflated,
    ZeroTruncatedPoisson,
    family_from_dict,
    make_rng,
)

from conftest import all_families, oracle_log_density, random_param


@pytest.mark.parametrize("fam", all_families(), ids=lambda f: f.name)
def test_log_density_matches_scipy_route(fam, rng):
    for _ in range(25):
        p = random_param(fam, rng)
        x = fam.sample(np.broadcast_to(np.asarray(p), (7,) + np.shape(p)), make_rng(5))
        for xv in np.atleast_1d(x).reshape(-1)[:7]:
            mine = float(fam.log_density(np.asarray(xv), np.asarray(p)))
            ref = oracle_log_density(fam, float(xv), p)
            assert mine == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("fam", all_families(), ids=lambda f: f.name)
def test_sampling_moments_within_five_standard_errors(fam, rng):
    # one cell, many draws: the empirical mean and variance must sit
    # within five standard errors of the analytic moments
    p = random_param(fam, rng)
    N = 100_000
    draws = fam.sample(np.broadcast_to(np.asarray(p), (N,) + np.shape(p)), make_rng(77))
    mean = float(fam.mean(np.asarray(p)))
    var = float(fam.variance(np.asarray(p)))
    se_mean = math.sqrt(var / N)
    assert abs(draws.mean() - mean) <= 5 * se_mean
    m4 = np.mean((draws - draws.mean()) ** 4)
    se_var = math.sqrt(max(m4 - var**2, 1e-12) / N)
    assert abs(draws.var() - var) <= 5 * se_var


def test_sampling_is_deterministic_given_seed():
    fam = ZeroInflated(ZeroTruncatedPoisson(0.5, 3.0), a=0.2)
    p = np.array([0.4, 1.7])
    a = fam.sample(np.broadcast_to(p, (1000, 2)), make_rng(123))
    b = fam.sample(np.broadcast_to(p, (1000, 2)), make_rng(123))
    assert np.array_equal(a, b)


def test_bernoulli_bounds_enforced():
    fam = Bernoulli(a=0.05)
    with pytest.raises(SpecError):
        fam.validate_param(0.999)
    fam.validate_param(0.95)  # boundary allowed
    with pytest.raises(SpecError):
        Bernoulli(a=0.6)


def test_zero_inflated_zero_fraction_binomial_ci():
    # sparsity 0.3 with a zero-truncated inner: zero fraction 0.7 +- 0.01
    fam = ZeroInflated(ZeroTruncatedPoisson(0.5, 3.0), a=0.2)
    p = np.array([0.3, 2.0])
    N = 100_000
    draws = fam.sample(np.broadcast_to(p, (N, 2)), make_rng(3))
    frac0 = np.mean(draws == 0.0)
    assert abs(frac0 - 0.7) <= 0.01
    # and within the exact 5-sigma binomial band, which is tighter
    assert abs(frac0 - 0.7) <= 5 * math.sqrt(0.7 * 0.3 / N)


def test_poisson_mean_clt_width():
    fam = Poisson(0.5, 3.0)
    N = 100_000
    draws = fam.sample(np.full(N, 2.0), make_rng(9))
    assert abs(draws.mean() - 2.0) <= 0.05


def test_zero_inflated_conditional_matches_inner_chisquare():
    # conditional on nonzero, draws must follow the inner family
    inner = ZeroTruncatedPoisson(0.5, 3.0)
    fam = ZeroInflated(inner, a=0.2)
    p = np.array([0.5, 1.5])
    draws = fam.sample(np.broadcast_to(p, (10_000, 2)), make_rng(31))
    nz = draws[draws > 0].astype(int)
    kmax = int(nz.max())
    observed = np.bincount(nz, minlength=kmax + 1)[1:]
    probs = np.array([math.exp(oracle_log_density(inner, k, 1.5)) for k in range(1, kmax + 1)])
    # merge the tail so expected counts stay above 5
    expected = probs * nz.size
    cut = np.searchsorted(np.cumsum(expected[::-1]), 5.0)
    keep = max(1, expected.size - cut)
    obs_b = np.append(observed[:keep], observed[keep:].sum())
    exp_b = np.append(expected[:keep], expected[keep:].sum())
    exp_b = exp_b * obs_b.sum() / exp_b.sum()
    chi2 = float(((obs_b - exp_b) ** 2 / exp_b).sum())
    pval = float(stats.chi2.sf(chi2, df=obs_b.size - 1))
    assert pval > 0.01


def test_zero_inflated_conditional_matches_gaussian_inner_ks():
    inner = GaussLocation(0.8, -1.0, 2.0)
    fam = ZeroInflated(inner, a=0.2)
    p = np.array([0.6, 0.9])
    draws = fam.sample(np.broadcast_to(p, (10_000, 2)), make_rng(32))
    nz = draws[draws != 0.0]
    res = stats.kstest(nz, "norm", args=(0.9, math.sqrt(0.8)))
    assert res.pvalue > 0.01


def test_multinomial_support_and_sampling(rng):
    fam = Multinomial(4, 0.05)
    p = random_param(fam, rng)
    draws = fam.sample(np.broadcast_to(p, (50_000, 4)), make_rng(8))
    assert set(np.unique(draws)) <= {1.0, 2.0, 3.0, 4.0}
    freqs = np.bincount(draws.astype(int), minlength=5)[1:] / draws.size
    assert np.max(np.abs(freqs - p)) <= 5 * math.sqrt(0.25 / draws.size) + 0.01


def test_zero_inflated_rejects_inner_with_mass_at_zero():
    with pytest.raises(SpecError):
        ZeroInflated(Poisson(0.5, 2.0), a=0.1)
    with pytest.raises(SpecError):
        ZeroInflated(Bernoulli(0.2), a=0.1)


def test_gauss_scale_parameter_is_variance():
    fam = GaussScale(1.0, 0.5, 2.0)
    draws = fam.sample(np.full(200_000, 1.5), make_rng(4))
    assert draws.var() == pytest.approx(1.5, rel=0.02)
    assert draws.mean() == pytest.approx(1.0, abs=0.02)


def test_family_dict_round_trip():
    for fam in all_families():
        again = family_from_dict(fam.to_dict())
        assert again == fam
    with pytest.raises(SpecError):
        family_from_dict({"kind": "no-such-family"})


def test_binomial_validates_trials():
    with pytest.raises(SpecError):
        Binomial(0, 0.1)
    with pytest.raises(SpecError):
        Multinomial(1, 0.1)
