"""Divergence constants: closed forms against numeric oracles."""

import math

import numpy as np
import pytest

from blockpost import (
    Bernoulli,
    Binomial,
    ConnectivityMatrix,
    Multinomial,
    Poisson,
    TheoryPreconditionError,
    ZeroInflated,
    ZeroTruncatedPoisson,
    cross_log_ratio,
    kappa_max,
    kappa_min,
    kl_divergence,
    lipschitz_L0,
)

from conftest import all_families, oracle_cross_log_ratio, oracle_kl, random_param


@pytest.mark.parametrize("fam", all_families(), ids=lambda f: f.name)
def test_kl_matches_numeric_oracle(fam, rng):
    for _ in range(30):
        p = random_param(fam, rng)
        q = random_param(fam, rng)
        assert kl_divergence(fam, p, q) == pytest.approx(oracle_kl(fam, p, q), abs=1e-8)


@pytest.mark.parametrize("fam", all_families(), ids=lambda f: f.name)
def test_cross_log_ratio_matches_numeric_oracle(fam, rng):
    for _ in range(15):
        p, q, r = (random_param(fam, rng) for _ in range(3))
        assert cross_log_ratio(fam, p, q, r) == pytest.approx(
            oracle_cross_log_ratio(fam, p, q, r), abs=1e-8
        )


@pytest.mark.parametrize("fam", all_families(), ids=lambda f: f.name)
def test_kl_nonnegative_zero_iff_equal(fam, rng):
    for _ in range(20):
        p = random_param(fam, rng)
        q = random_param(fam, rng)
        assert kl_divergence(fam, p, p) == pytest.approx(0.0, abs=1e-14)
        d = kl_divergence(fam, p, q)
        assert d >= -1e-14
        if not np.all(fam.params_equal(np.asarray(p), np.asarray(q))):
            assert d > 0.0


def test_kl_reference_values():
    pois = Poisson(0.5, 3.0)
    assert kl_divergence(pois, 2.0, 1.0) == pytest.approx(2.0 * math.log(2.0) - 1.0, abs=1e-12)
    bern = Bernoulli(0.1)
    expected = 0.3 * math.log(0.3 / 0.6) + 0.7 * math.log(0.7 / 0.4)
    assert kl_divergence(bern, 0.3, 0.6) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.183787, abs=1e-6)


def test_kappa_min_examples():
    fam = Bernoulli(0.25)
    pi = ConnectivityMatrix([[0.3, 0.6], [0.6, 0.3]], fam)
    got = kappa_min(pi)
    d1 = kl_divergence(fam, 0.3, 0.6)
    d2 = kl_divergence(fam, 0.6, 0.3)
    assert got == pytest.approx(min(d1, d2), abs=1e-14)
    assert got == pytest.approx(0.183787, abs=1e-6)
    # single distinct pair
    pi2 = ConnectivityMatrix([[0.3, 0.3], [0.6, 0.6]], fam)
    assert kappa_min(pi2) == pytest.approx(min(d1, d2), abs=1e-14)
    # all equal entries: undefined
    pi3 = ConnectivityMatrix([[0.3, 0.3], [0.3, 0.3]], fam)
    with pytest.raises(TheoryPreconditionError):
        kappa_min(pi3)


def _grid_kappa_max(fam, points=101):
    if isinstance(fam, Multinomial):
        rng = np.random.default_rng(5)
        pts = [random_param(fam, rng) for _ in range(400)]
        from blockpost.divergence import _mult_vertices

        pts.extend(_mult_vertices(fam.levels, fam.a))
        return max(float(fam.kl(p, q)) for p in pts for q in pts)
    if isinstance(fam, ZeroInflated):
        lo_i, hi_i = fam.inner.bounds
        sps = np.linspace(fam.a, 1 - fam.a, 21)
        gms = np.linspace(lo_i, hi_i, 21)
        best = 0.0
        for sp in sps:
            for sq in sps:
                for g in (lo_i, hi_i):
                    for g2 in (lo_i, hi_i):
                        best = max(best, float(fam.kl(np.array([sp, g]), np.array([sq, g2]))))
        return best
    lo, hi = fam.bounds
    grid = np.linspace(lo, hi, points)
    return max(float(fam.kl(p, q)) for p in grid for q in grid)


@pytest.mark.parametrize("fam", all_families(), ids=lambda f: f.name)
def test_kappa_max_dominates_grid_search(fam):
    closed = kappa_max(fam)
    grid = _grid_kappa_max(fam)
    assert closed >= grid - 1e-9
    # endpoint families attain the supremum on the grid exactly
    if not isinstance(fam, Multinomial):
        assert closed == pytest.approx(grid, rel=1e-6)


def test_kappa_max_bernoulli_closed_form():
    a = 0.2
    fam = Bernoulli(a)
    expected = (1 - 2 * a) * (math.log(1 - a) - math.log(a))
    assert kappa_max(fam) == pytest.approx(expected, abs=1e-14)
    assert kappa_max(Binomial(3, a)) == pytest.approx(3 * expected, abs=1e-13)


def test_lipschitz_constants(rng):
    assert lipschitz_L0(Bernoulli(0.25)) == pytest.approx(4.0)
    # independent of proportions by construction: only the family enters
    assert lipschitz_L0(Bernoulli(0.25)) == lipschitz_L0(Bernoulli(0.25))
    for fam in all_families():
        L0 = lipschitz_L0(fam)
        worst = 0.0
        for _ in range(2000):
            p, q, r = (random_param(fam, rng) for _ in range(3))
            gap = float(
                np.max(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)))
            )
            if gap < 1e-9:
                continue
            val = abs(cross_log_ratio(fam, p, q, r))
            worst = max(worst, val / gap)
        assert worst <= L0 + 1e-9, fam.name


def test_zero_inflated_kl_decomposition(rng):
    fam = ZeroInflated(ZeroTruncatedPoisson(0.5, 3.0), a=0.1)
    for _ in range(20):
        p = random_param(fam, rng)
        q = random_param(fam, rng)
        bern_part = kl_divergence(Bernoulli(0.1), p[0], q[0])
        inner_part = kl_divergence(fam.inner, p[1], q[1])
        assert kl_divergence(fam, p, q) == pytest.approx(
            bern_part + p[0] * inner_part, rel=1e-12, abs=1e-12
        )
