"""Shared builders and independent numeric oracles.

The oracles here deliberately avoid the library's closed forms: they
integrate, sum series, or enumerate with scipy/stdlib primitives so
that every closed-form path in the package is checked against an
independent route.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy import integrate
from scipy import stats

from blockpost import (
    Bernoulli,
    Binomial,
    ConnectivityMatrix,
    GaussLocation,
    GaussScale,
    ModelSpec,
    ModelVariant,
    Multinomial,
    Poisson,
    ZeroInflated,
    ZeroTruncatedPoisson,
)


# ----------------------------------------------------------------------
# spec builders


def bern_lbm_spec(a=0.1, alpha=(0.5, 0.5), beta=(0.5, 0.5), values=((0.2, 0.7), (0.55, 0.35))):
    fam = Bernoulli(a)
    pi = ConnectivityMatrix(np.asarray(values, dtype=float), fam)
    return ModelSpec(ModelVariant.lbm(), list(alpha), list(beta), pi)


def affiliation_sbm_spec(lam=0.8, nu=0.2, Q=2, a=0.1, alpha=None):
    fam = Bernoulli(a)
    vals = np.full((Q, Q), nu)
    np.fill_diagonal(vals, lam)
    pi = ConnectivityMatrix(vals, fam)
    if alpha is None:
        alpha = [1.0 / Q] * Q
    return ModelSpec(ModelVariant.sbm(), alpha, alpha, pi)


def asym_sbm_spec(a=0.1, values=((0.2, 0.8), (0.8, 0.8))):
    """Graph spec whose connectivity has no symmetry (trivial group)."""
    fam = Bernoulli(a)
    pi = ConnectivityMatrix(np.asarray(values, dtype=float), fam)
    return ModelSpec(ModelVariant.sbm(), [0.5, 0.5], [0.5, 0.5], pi)


def all_families():
    """One representative instance per observation family."""
    return [
        Bernoulli(0.1),
        Binomial(4, 0.15),
        Multinomial(3, 0.1),
        Poisson(0.8, 2.5),
        GaussLocation(1.3, -1.0, 1.5),
        GaussScale(0.4, 0.7, 2.2),
        ZeroInflated(ZeroTruncatedPoisson(0.6, 2.4), a=0.15),
    ]


def random_param(fam, rng):
    """Random parameter inside the family's admissible box."""
    if isinstance(fam, Multinomial):
        lo, hi = fam.bounds
        for _ in range(1000):
            v = rng.dirichlet(np.ones(fam.levels))
            if np.all(v >= lo) and np.all(v <= hi):
                return v
        # fall back to a slightly shrunk uniform-ish vector
        base = np.full(fam.levels, 1.0 / fam.levels)
        off = rng.uniform(-lo / 2, lo / 2, size=fam.levels)
        off -= off.mean()
        return base + off
    if isinstance(fam, ZeroInflated):
        lo_i, hi_i = fam.inner.bounds
        return np.array(
            [rng.uniform(fam.a, 1.0 - fam.a), rng.uniform(lo_i, hi_i)]
        )
    lo, hi = fam.bounds
    return rng.uniform(lo, hi)


def random_connectivity(fam, Q, L, rng, distinct=True):
    """Random connectivity matrix, optionally with all entries distinct
    in every coordinate (generic position)."""
    for _ in range(200):
        if fam.param_dim == 1:
            vals = np.array([[random_param(fam, rng) for _ in range(L)] for _ in range(Q)])
            flat = vals.reshape(-1)
            ok = len(np.unique(np.round(flat, 6))) == flat.size
        else:
            vals = np.array(
                [[random_param(fam, rng) for _ in range(L)] for _ in range(Q)]
            )
            flat = vals.reshape(-1, vals.shape[-1])
            ok = all(
                not np.allclose(flat[i], flat[j], atol=1e-6)
                for i in range(len(flat))
                for j in range(i + 1, len(flat))
            )
            if isinstance(fam, ZeroInflated):
                sp = np.round(vals[..., 0].reshape(-1), 6)
                gm = np.round(vals[..., 1].reshape(-1), 6)
                ok = ok and len(np.unique(sp)) == sp.size and len(np.unique(gm)) == gm.size
        if not distinct or ok:
            return ConnectivityMatrix(vals, fam)
    raise RuntimeError("could not build a generic connectivity matrix")


# ----------------------------------------------------------------------
# independent log-density (scipy / stdlib route)


def oracle_log_density(fam, x, param) -> float:
    if isinstance(fam, Bernoulli):
        return float(stats.bernoulli.logpmf(int(x), float(param)))
    if isinstance(fam, Binomial):
        return float(stats.binom.logpmf(int(x), fam.trials, float(param)))
    if isinstance(fam, Multinomial):
        return math.log(float(np.asarray(param)[int(x) - 1]))
    if isinstance(fam, Poisson):
        return float(stats.poisson.logpmf(int(x), float(param)))
    if isinstance(fam, GaussLocation):
        return float(stats.norm.logpdf(x, loc=float(param), scale=math.sqrt(fam.sigma2)))
    if isinstance(fam, GaussScale):
        return float(stats.norm.logpdf(x, loc=fam.fixed_mean, scale=math.sqrt(float(param))))
    if isinstance(fam, ZeroTruncatedPoisson):
        g = float(param)
        return float(stats.poisson.logpmf(int(x), g) - math.log1p(-math.exp(-g)))
    if isinstance(fam, ZeroInflated):
        sp, g = float(param[0]), float(param[1])
        if x == 0:
            return math.log1p(-sp)
        return math.log(sp) + oracle_log_density(fam.inner, x, g)
    raise AssertionError(f"no oracle density for {fam}")


# ----------------------------------------------------------------------
# independent cross log-ratio / KL oracles


def _discrete_support(fam, params):
    if isinstance(fam, Bernoulli):
        return [0, 1]
    if isinstance(fam, Binomial):
        return list(range(fam.trials + 1))
    if isinstance(fam, Multinomial):
        return list(range(1, fam.levels + 1))
    if isinstance(fam, (Poisson, ZeroTruncatedPoisson)):
        hi = max(float(np.max(np.asarray(p))) for p in params)
        kmax = int(hi + 40 * math.sqrt(hi) + 60)
        lo = 0 if isinstance(fam, Poisson) else 1
        return list(range(lo, kmax + 1))
    raise AssertionError


def oracle_cross_log_ratio(fam, p, q, r, tol=1e-12) -> float:
    """integral log(f(;p)/f(;q)) f(;r) by series or quadrature."""
    if isinstance(fam, (Bernoulli, Binomial, Multinomial, Poisson, ZeroTruncatedPoisson)):
        total = 0.0
        for x in _discrete_support(fam, (p, q, r)):
            w = math.exp(oracle_log_density(fam, x, r))
            if w < 1e-18:
                continue
            total += w * (oracle_log_density(fam, x, p) - oracle_log_density(fam, x, q))
        return total
    if isinstance(fam, (GaussLocation, GaussScale)):
        if isinstance(fam, GaussLocation):
            loc, scale = float(r), math.sqrt(fam.sigma2)
        else:
            loc, scale = fam.fixed_mean, math.sqrt(float(r))

        def integrand(x):
            return math.exp(oracle_log_density(fam, x, r)) * (
                oracle_log_density(fam, x, p) - oracle_log_density(fam, x, q)
            )

        val, _ = integrate.quad(
            integrand, loc - 12 * scale, loc + 12 * scale, limit=200, epsabs=1e-12
        )
        return val
    if isinstance(fam, ZeroInflated):
        sp_p, g_p = float(p[0]), float(p[1])
        sp_q, g_q = float(q[0]), float(q[1])
        sp_r, g_r = float(r[0]), float(r[1])
        zero_term = (1.0 - sp_r) * (math.log1p(-sp_p) - math.log1p(-sp_q))
        nz = sp_r * (math.log(sp_p) - math.log(sp_q))
        nz += sp_r * oracle_cross_log_ratio(fam.inner, g_p, g_q, g_r)
        return zero_term + nz
    raise AssertionError(f"no oracle cross term for {fam}")


def oracle_kl(fam, p, q) -> float:
    return oracle_cross_log_ratio(fam, p, q, p)


# ----------------------------------------------------------------------
# brute-force posterior oracle (independent enumeration route)


def oracle_posterior(x, spec):
    """Normalized posterior over all configurations via direct
    summation: scipy-based cell log densities, plain loops, explicit
    max-shift normalization."""
    n, m = x.n, x.m
    Q, L = spec.Q, spec.L
    eff = spec.pi.effective()
    fam = spec.family
    cell_table = {}
    for q in range(Q):
        for l in range(L):
            grid = np.full((n, m), np.nan)
            for i in range(n):
                for j in range(m):
                    if x.mask[i, j]:
                        grid[i, j] = oracle_log_density(fam, x.values[i, j], eff[q, l])
            cell_table[(q, l)] = grid
    entries = {}
    sbm = spec.variant.is_sbm
    z_iter = itertools.product(range(Q), repeat=n)
    for z in z_iter:
        if sbm:
            ws = [z]
        else:
            ws = itertools.product(range(L), repeat=m)
        for w in ws:
            lv = sum(math.log(spec.alpha[g]) for g in z)
            if not sbm:
                lv += sum(math.log(spec.beta[g]) for g in w)
            for i in range(n):
                for j in range(m):
                    if x.mask[i, j]:
                        lv += cell_table[(z[i], w[j])][i, j]
            entries[(z, w)] = lv
    mx = max(entries.values())
    total = sum(math.exp(v - mx) for v in entries.values())
    return {k: math.exp(v - mx) / total for k, v in entries.items()}


# ----------------------------------------------------------------------


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)
