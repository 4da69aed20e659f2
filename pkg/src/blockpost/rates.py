"""Deviation rate functions and their exact Chernoff envelopes.

The concentration scheme controls the centered log-likelihood-ratio sum
through a per-cell moment bound: if psi_max(lambda) dominates the
log-MGF of the centered per-cell log ratio uniformly over parameter
pairs, the two-sided tail at level eps per differing cell decays like
exp(-rate(eps) * cells) with

    rate(eps) = mu_min^2 / 8 * sup_lambda (lambda * eps - psi_max(lambda)).

This module provides

* the closed-form per-family rate functions (Hoeffding, Bernstein,
  Bennett and chi-square flavours),
* a numerical *exact Chernoff* envelope per family, evaluated from
  closed-form log-MGFs over a parameter-pair grid -- the yardstick every
  closed form must stay below,
* the zero-inflated composite rate, and
* the sparse-regime scalings: the xi-scaled minimal divergence,
  Lipschitz and rate-function lower bounds for the binary and weighted
  vanishing-density setups.

Two small-deviation Bernstein variants are deliberately kept under
distinct names: ``breve_psi_s42`` folds no extra bound constant into the
denominator while ``breve_psi_lemma3`` carries the sparse-regime factor
``a``.  They come from two places in the underlying analysis that fold
constants differently; both are exposed verbatim rather than reconciled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .divergence import _mult_vertices, lipschitz_L0
from .errors import SpecError, TheoryPreconditionError
from .families import (
    Bernoulli,
    Binomial,
    Family,
    GaussLocation,
    GaussScale,
    Multinomial,
    Poisson,
    ZeroInflated,
    ZeroTruncatedPoisson,
)
from .model import ConnectivityMatrix

__all__ = [
    "RateFunction",
    "rate_function",
    "exact_chernoff_rate",
    "breve_psi_s42",
    "breve_psi_lemma3",
    "breve_psi_lemma4",
    "tilde_psi_star_max",
    "tilde_psi_star_sparse",
    "golden_section_max",
    "sparse_scalings",
    "SparseScalings",
    "c_min_constant",
    "growth_product_bound",
]


# ----------------------------------------------------------------------
# numeric search


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-9):
    """Maximize a unimodal function on [lo, hi]; returns (argmax, max).

    The tolerance applies to the argument, per the numeric conventions
    used for every rate-function supremum in this package.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def _sup_positive_lambda(f: Callable[[float], float], lam_hi: float | None, tol: float = 1e-9):
    """sup over lambda > 0 of a concave objective.

    With no domain edge the bracket expands until the maximizer moves
    off the right edge (hard cap 1e6, effectively +inf deviations).
    """
    if lam_hi is not None:
        _, val = golden_section_max(f, 0.0, lam_hi, tol=tol)
        return max(val, 0.0)
    hi = 1.0
    while True:
        x, val = golden_section_max(f, 0.0, hi, tol=tol)
        if x < 0.95 * hi or hi >= 1e6:
            return max(val, 0.0)
        hi *= 4.0


# ----------------------------------------------------------------------
# closed-form rate functions


@dataclass(frozen=True)
class RateFunction:
    """Evaluator x -> rate(x) >= 0 with its provenance parameters."""

    family: str
    variant: str
    params: dict
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))


def _log_odds_span(a: float) -> float:
    return math.log1p(-a) - math.log(a)


def breve_psi_s42(a: float, mu_min: float) -> Callable:
    """Small-deviation Bernstein rate, plain variant (no sparsity factor
    in the quadratic denominator term)."""
    K = _log_odds_span(a)

    def fn(x):
        x = np.asarray(x, dtype=float)
        return x * x * mu_min**2 / (64.0 * K * K + 32.0 * x * K / 3.0)

    return fn


def breve_psi_lemma3(a: float, mu_min: float) -> Callable:
    """Small-deviation Bernstein rate for the vanishing-density binary
    regime; carries the bound constant ``a`` in the quadratic term."""
    K = _log_odds_span(a)

    def fn(x):
        x = np.asarray(x, dtype=float)
        return x * x * mu_min**2 / (64.0 * a * K * K + 32.0 * x * K / 3.0)

    return fn


def breve_psi_lemma4(a: float) -> Callable:
    """Dirac-part rate for the weighted sparse regime; the mu_min^2/8
    factor lives outside, in the composite lower bound."""
    K = _log_odds_span(a)

    def fn(x):
        x = np.asarray(x, dtype=float)
        return x * x / (8.0 * a * K * K + 4.0 * x * K / 3.0)

    return fn


def _h_bennett(u):
    return (1.0 + u) * np.log1p(u) - u


def rate_function(
    family: Family,
    mu_min: float,
    variant: str | None = None,
    *,
    xi: float = 1.0,
    scale_sigma2: float = 1.0,
    tol: float = 1e-9,
) -> RateFunction:
    """Closed-form rate function for a family.

    ``variant`` selects among documented alternatives:

    * bernoulli: "hoeffding" (default) or "bernstein" (pass ``xi`` for a
      shrunken parameter box);
    * gauss_scale: "chernoff" (default) is the valid closed-form
      chi-square envelope for the variance family; "reference" is an
      alternative linear-plus-log form with the free constant
      ``scale_sigma2`` -- kept for comparison, but it exceeds the exact
      envelope at small deviations and is not a usable rate function
      there (see README);
    * zero_inflated: "hoeffding"/"bernstein" select the Dirac component
      of the composite; the inner component is resolved numerically.

    The returned evaluator includes the mu_min^2 scaling of the
    concentration scheme.
    """
    if not (0.0 < mu_min <= 0.5):
        raise SpecError(f"mu_min must lie in (0, 1/2], got {mu_min}")
    mu2 = mu_min**2

    if isinstance(family, Bernoulli):
        a = family.a
        K = _log_odds_span(a)
        var = variant or "hoeffding"
        if var == "hoeffding":
            fn = lambda x: x * x * mu2 / (16.0 * K * K)
        elif var == "bernstein":
            if not (0.0 < xi <= 1.0):
                raise SpecError(f"bernstein variant needs xi in (0, 1], got {xi}")
            fn = lambda x: x * x * mu2 / (64.0 * xi * K * K + 32.0 * x * K / 3.0)
        else:
            raise SpecError(f"unknown binary rate variant {variant!r}")
        return RateFunction("bernoulli", var, {"a": a, "mu_min": mu_min, "xi": xi}, fn)

    if isinstance(family, Binomial):
        a, p = family.a, family.trials
        K = _log_odds_span(a)
        fn = lambda x: x * x * mu2 / (16.0 * p * p * K * K)
        return RateFunction(
            "binomial", "hoeffding", {"a": a, "trials": p, "mu_min": mu_min}, fn
        )

    if isinstance(family, Multinomial):
        a, p = family.a, family.levels
        K = _log_odds_span(a)
        fn = lambda x: x * x * mu2 / (8.0 * p * K * K)
        return RateFunction(
            "multinomial", "hoeffding", {"a": a, "levels": p, "mu_min": mu_min}, fn
        )

    if isinstance(family, Poisson):
        lo, hi = family.bounds
        U = math.log(hi / lo)
        fn = lambda x: mu2 / 8.0 * hi * _h_bennett(x / (hi * U))
        return RateFunction(
            "poisson", "bennett", {"pi_min": lo, "pi_max": hi, "mu_min": mu_min}, fn
        )

    if isinstance(family, GaussLocation):
        lo, hi, s2 = family.pi_min, family.pi_max, family.sigma2
        R = hi - lo
        fn = lambda x: mu2 * s2 * x * x / (16.0 * R * R)
        return RateFunction(
            "gauss_location",
            "subgaussian",
            {"pi_min": lo, "pi_max": hi, "sigma2": s2, "mu_min": mu_min},
            fn,
        )

    if isinstance(family, GaussScale):
        lo, hi = family.bounds
        R = hi - lo
        var = variant or "chernoff"
        if var == "chernoff":
            # exact chi-square envelope for the variance family:
            # per-cell rate (z - log(1+z))/2 at z = 2*lo*x/R
            def fn(x):
                z = 2.0 * lo * np.asarray(x, dtype=float) / R
                return mu2 / 8.0 * 0.5 * (z - np.log1p(z))

        elif var == "reference":
            s2 = scale_sigma2

            def fn(x):
                x = np.asarray(x, dtype=float)
                return mu2 * s2 * x / (8.0 * R) + mu2 / 16.0 * np.log1p(2.0 * lo * x / R)

        else:
            raise SpecError(f"unknown gauss_scale rate variant {variant!r}")
        return RateFunction(
            "gauss_scale",
            var,
            {"pi_min": lo, "pi_max": hi, "mu_min": mu_min, "sigma2": scale_sigma2},
            fn,
        )

    if isinstance(family, ZeroInflated):
        bin_variant = variant or "hoeffding"
        bin_rate = rate_function(Bernoulli(a=family.a), mu_min, bin_variant, xi=xi)
        inner_sup = tilde_psi_star_max(family.inner, tol=tol)

        def fn(x):
            x = np.asarray(x, dtype=float)
            flat = np.atleast_1d(x)
            inner_vals = np.array([inner_sup(float(v) / 2.0) for v in flat])
            inner_vals = inner_vals.reshape(x.shape) if x.shape else inner_vals[0]
            return np.minimum(mu2 / 8.0 * inner_vals, bin_rate.fn(x / 2.0))

        return RateFunction(
            "zero_inflated", f"composite-{bin_variant}", {"a": family.a, "mu_min": mu_min}, fn
        )

    raise SpecError(f"no rate function rule for family {family.name!r}")


# ----------------------------------------------------------------------
# log-MGF envelopes of the centered per-cell log ratio
#
# Each envelope is a vectorized representation of
#   lambda -> sup over parameter combinations of
#             log E exp(lambda * (log ratio - E log ratio)),
# precomputed so a single lambda evaluation costs a few array ops.


class _Envelope:
    """Pointwise max of several log-MGF building blocks."""

    def __init__(self):
        self.gauss_a = []  # logmgf = lam*a + lam^2 v / 2
        self.gauss_v = []
        self.chi_a = []  # logmgf = lam*a - 0.5 log(1 - 2 lam b)
        self.chi_b = []
        self.series_logw = []  # logmgf = logsumexp(logw + lam * r)
        self.series_r = []

    def add_gauss(self, a, v):
        self.gauss_a.extend(np.atleast_1d(a).tolist())
        self.gauss_v.extend(np.atleast_1d(v).tolist())

    def add_chi(self, a, b):
        self.chi_a.extend(np.atleast_1d(a).tolist())
        self.chi_b.extend(np.atleast_1d(b).tolist())

    def add_series(self, logw, r):
        self.series_logw.append(np.asarray(logw, dtype=float))
        self.series_r.append(np.asarray(r, dtype=float))

    def finalize(self):
        self._ga = np.asarray(self.gauss_a, dtype=float)
        self._gv = np.asarray(self.gauss_v, dtype=float)
        self._ca = np.asarray(self.chi_a, dtype=float)
        self._cb = np.asarray(self.chi_b, dtype=float)
        if self.series_logw:
            self._sw = np.vstack(self.series_logw)
            self._sr = np.vstack(self.series_r)
        else:
            self._sw = None
        return self

    def lam_hi(self) -> float | None:
        """Largest admissible lambda (chi-square blocks bound it)."""
        if self._ca.size == 0:
            return None
        bmax = float(np.max(self._cb))
        bmin = float(np.min(self._cb))
        cands = []
        if bmax > 0:
            cands.append((1.0 - 1e-9) / (2.0 * bmax))
        if bmin < 0:
            # negative b only binds for negative lambda; two-sided use
            # evaluates both signs, so the positive-lambda domain must
            # respect |b| as well
            cands.append((1.0 - 1e-9) / (2.0 * abs(bmin)))
        return min(cands) if cands else None

    def value(self, lam: float) -> float:
        best = 0.0
        if self._ga.size:
            best = max(best, float(np.max(lam * self._ga + lam * lam * self._gv / 2.0)))
        if self._ca.size:
            arg = 1.0 - 2.0 * lam * self._cb
            if np.any(arg <= 1e-12):
                return math.inf
            best = max(best, float(np.max(lam * self._ca - 0.5 * np.log(arg))))
        if self._sw is not None:
            t = self._sw + lam * self._sr
            mx = np.max(t, axis=1)
            vals = mx + np.log(np.sum(np.exp(t - mx[:, None]), axis=1))
            best = max(best, float(np.max(vals)))
        return best

    def two_sided(self, lam: float) -> float:
        return max(self.value(lam), self.value(-lam))

    def exp_value(self, lam: float) -> float:
        """max over blocks of E exp(lam * centered) (no log)."""
        v = self.value(lam)
        return math.exp(v) if v < 700.0 else math.inf

    def two_sided_exp(self, lam: float) -> float:
        return max(self.exp_value(lam), self.exp_value(-lam))


def _grid(family: Family, points: int):
    lo, hi = family.bounds
    return np.linspace(lo, hi, points)


def _ztp_kmax(*params: float) -> int:
    return int(max(80.0, 10.0 * max(params) + 80.0))


def _ztp_series(g_meas: float, g: float, g2: float, kmax: int):
    """Log-weights and centered log-ratio values of the zero-truncated
    Poisson likelihood ratio under the measuring parameter."""
    k = np.arange(1.0, kmax + 1.0)
    logw = k * math.log(g_meas) - gammaln(k + 1.0) - math.log(math.expm1(g_meas))
    u = math.log(g) - math.log(g2)
    mean_k = g_meas / (-math.expm1(-g_meas))
    r = (k - mean_k) * u  # the expm1-gap constant cancels in centering
    return logw, r


def _inner_envelope(inner: Family, grid_points: int) -> _Envelope:
    """Envelope of the centered inner log ratio, conditional on a
    nonzero draw, over (measure, numerator, denominator) grid triples."""
    env = _Envelope()
    grid = _grid(inner, grid_points)
    if isinstance(inner, ZeroTruncatedPoisson):
        kmax = _ztp_kmax(*grid)
        for g_meas in grid:
            for g in grid:
                for g2 in grid:
                    if g == g2:
                        continue
                    logw, r = _ztp_series(g_meas, g, g2, kmax)
                    env.add_series(logw, r)
    elif isinstance(inner, GaussLocation):
        s2 = inner.sigma2
        gm, g, g2 = np.meshgrid(grid, grid, grid, indexing="ij")
        keep = g != g2
        # log ratio = (x (g - g2) + (g2^2 - g^2)/2) / s2, x ~ N(gm, s2)
        var_r = (g - g2) ** 2 / s2
        env.add_gauss(np.zeros(np.count_nonzero(keep)), var_r[keep])
    elif isinstance(inner, GaussScale):
        gm, g, g2 = np.meshgrid(grid, grid, grid, indexing="ij")
        keep = g != g2
        # log ratio = a0 + b S, S ~ chi2(1) under variance gm
        b = -0.5 * gm * (1.0 / g - 1.0 / g2)
        # centered: a = b (since E S = 1, mean = a0 + b)
        env.add_chi(-b[keep], b[keep])
    else:
        raise SpecError(f"no inner envelope rule for family {inner.name!r}")
    return env.finalize()


class _ScaledEnvelope:
    """log-MGF of a sum of i.i.d. copies: a fixed multiple of a base
    envelope (used for the binomial as trials x bernoulli)."""

    def __init__(self, base, mult: int):
        self._base = base
        self._mult = mult

    def lam_hi(self):
        return self._base.lam_hi()

    def value(self, lam):
        return self._mult * self._base.value(lam)

    def two_sided(self, lam):
        return max(self.value(lam), self.value(-lam))


class _PoissonEnvelope:
    """Exact centered Poisson log-ratio log-MGF: p (e^{lam u} - 1 - lam u)."""

    def __init__(self, u: np.ndarray, p: np.ndarray):
        self._u = u
        self._p = p

    def lam_hi(self):
        return None

    def value(self, lam):
        t = lam * self._u
        return float(np.max(self._p * (np.exp(t) - 1.0 - t), initial=0.0))

    def two_sided(self, lam):
        return max(self.value(lam), self.value(-lam))


def _family_envelope(family: Family, grid_points: int, rng_seed: int = 20240801):
    """Envelope of the centered per-cell log ratio over ordered pairs."""
    env = _Envelope()
    if isinstance(family, (Bernoulli, Binomial)):
        grid = _grid(family, grid_points)
        p = grid[:, None]
        q = grid[None, :]
        s = (np.log(p) - np.log(q)) - (np.log1p(-p) - np.log1p(-q))
        # per trial the centered variable takes value s(1-p) w.p. p and
        # -s p w.p. 1-p; a two-term series per ordered pair
        keep = (p != q).ravel()
        logw = np.stack(
            [
                np.broadcast_to(np.log(p), s.shape).ravel(),
                np.broadcast_to(np.log1p(-p), s.shape).ravel(),
            ],
            axis=1,
        )[keep]
        r = np.stack([(s * (1.0 - p)).ravel(), (-s * p).ravel()], axis=1)[keep]
        env.add_series(logw, r)
        env.finalize()
        if isinstance(family, Binomial):
            return _ScaledEnvelope(env, family.trials)
        return env
    if isinstance(family, Poisson):
        grid = _grid(family, grid_points)
        p = grid[:, None]
        q = grid[None, :]
        keep = (p != q).ravel()
        u = (np.log(p) - np.log(q)).ravel()[keep]
        meas = np.broadcast_to(p, (grid.size, grid.size)).ravel()[keep]
        return _PoissonEnvelope(u, meas)
    if isinstance(family, GaussLocation):
        grid = _grid(family, grid_points)
        p = grid[:, None]
        q = grid[None, :]
        keep = (p != q).ravel()
        env.add_gauss(np.zeros(np.count_nonzero(keep)), ((p - q) ** 2 / family.sigma2).ravel()[keep])
        return env.finalize()
    if isinstance(family, GaussScale):
        grid = _grid(family, grid_points)
        p = grid[:, None]
        q = grid[None, :]
        keep = (p != q).ravel()
        b = (-0.5 * (1.0 - p / q)).ravel()[keep]
        env.add_chi(-b, b)
        return env.finalize()
    if isinstance(family, Multinomial):
        verts = _mult_vertices(family.levels, family.a)
        rng = np.random.default_rng(rng_seed)
        extra = rng.dirichlet(np.ones(family.levels), size=60)
        lo, hi = family.a, 1.0 - family.a
        extra = np.clip(extra, lo, hi)
        extra /= extra.sum(axis=1, keepdims=True)
        ok = np.all((extra >= lo - 1e-12) & (extra <= hi + 1e-12), axis=1)
        pts = np.vstack([verts, extra[ok]])
        for i in range(pts.shape[0]):
            for j in range(pts.shape[0]):
                if i == j:
                    continue
                p, q = pts[i], pts[j]
                r = np.log(p) - np.log(q)
                mean = float((p * r).sum())
                env.add_series(np.log(p), r - mean)
        return env.finalize()
    if isinstance(family, ZeroInflated):
        return _zi_envelope(family)
    raise SpecError(f"no envelope rule for family {family.name!r}")


def _zi_envelope(family: ZeroInflated, sp_points: int = 9, inner_points: int = 7) -> _Envelope:
    """Envelope for the full zero-inflated log ratio.

    Per parameter combination the centered variable is a two-component
    mixture: the zero branch with mass 1 - p and the nonzero branch
    whose conditional log-MGF comes from the inner family.  For series
    inners we assemble one explicit series per combination; for Gaussian
    inners the mixture MGF is evaluated through a dedicated block.
    """
    inner = family.inner
    sp_grid = np.linspace(family.a, 1.0 - family.a, sp_points)
    g_grid = _grid(inner, inner_points)
    env = _Envelope()
    if isinstance(inner, ZeroTruncatedPoisson):
        kmax = _ztp_kmax(*g_grid)
        for p_sp in sp_grid:
            for q_sp in sp_grid:
                for g in g_grid:
                    for g2 in g_grid:
                        if p_sp == q_sp and g == g2:
                            continue
                        y0 = math.log1p(-p_sp) - math.log1p(-q_sp)
                        base = math.log(p_sp) - math.log(q_sp)
                        k = np.arange(1.0, kmax + 1.0)
                        logw_nz = (
                            math.log(p_sp)
                            + k * math.log(g)
                            - gammaln(k + 1.0)
                            - math.log(math.expm1(g))
                        )
                        r_nz = base + k * (math.log(g) - math.log(g2)) - (
                            math.log(math.expm1(g)) - math.log(math.expm1(g2))
                        )
                        logw = np.concatenate([[math.log1p(-p_sp)], logw_nz])
                        vals = np.concatenate([[y0], r_nz])
                        mean = float(np.sum(np.exp(logw) * vals))
                        env.add_series(logw, vals - mean)
        return env.finalize()
    # Gaussian inners: mixture block with closed-form branch MGFs
    combos = []
    for p_sp in sp_grid:
        for q_sp in sp_grid:
            for g in g_grid:
                for g2 in g_grid:
                    if p_sp == q_sp and g == g2:
                        continue
                    combos.append((p_sp, q_sp, g, g2))

    class _ZiGaussEnv(_Envelope):
        def __init__(self, combos, inner):
            self._combos = combos
            self._inner = inner
            self._ca = np.array([])
            self._cb = np.array([])
            if isinstance(inner, GaussScale):
                lo, hi = inner.bounds
                self._lam_hi = (1.0 - 1e-9) / (hi / lo - 1.0)
            else:
                self._lam_hi = None

        def lam_hi(self):
            return self._lam_hi

        def value(self, lam):
            best = 0.0
            for p_sp, q_sp, g, g2 in self._combos:
                y0 = math.log1p(-p_sp) - math.log1p(-q_sp)
                base = math.log(p_sp) - math.log(q_sp)
                mean = (1.0 - p_sp) * y0 + p_sp * (
                    base + float(self._inner.cross_log_ratio(g, g2, g))
                )
                if isinstance(self._inner, GaussLocation):
                    s2 = self._inner.sigma2
                    mu_r = ((g - g2) * g + (g2 * g2 - g * g) / 2.0) / s2
                    var_r = (g - g2) ** 2 / s2
                    inner_mgf = math.exp(lam * (base + mu_r) + lam * lam * var_r / 2.0)
                else:  # GaussScale
                    a0 = 0.5 * (math.log(g2) - math.log(g))
                    b = -0.5 * (1.0 - g / g2)
                    arg = 1.0 - 2.0 * lam * b
                    if arg <= 1e-12:
                        return math.inf
                    inner_mgf = math.exp(lam * (base + a0)) / math.sqrt(arg)
                total = (1.0 - p_sp) * math.exp(lam * y0) + p_sp * inner_mgf
                best = max(best, math.log(total) - lam * mean)
            return best

        def two_sided(self, lam):
            return max(self.value(lam), self.value(-lam))

    return _ZiGaussEnv(combos, inner)


def exact_chernoff_rate(
    family: Family, mu_min: float, *, grid_points: int = 33, tol: float = 1e-9
) -> Callable[[float], float]:
    """Numerically exact Chernoff envelope, scaled by mu_min^2 / 8.

    Evaluates sup over lambda > 0 of lambda*x - psi_max(lambda), where
    psi_max is the two-sided uniform log-MGF envelope over a parameter
    pair grid including the box endpoints.  Closed-form rate functions
    are expected to stay below this envelope pointwise.
    """
    env = _family_envelope(family, grid_points)
    lam_hi = env.lam_hi()
    mu2 = mu_min**2

    def rate(x: float) -> float:
        xf = float(x)
        if xf <= 0.0:
            return 0.0
        val = _sup_positive_lambda(lambda lam: lam * xf - env.two_sided(lam), lam_hi, tol=tol)
        return mu2 / 8.0 * val

    return rate


# ----------------------------------------------------------------------
# zero-inflated inner rates (numeric) and sparse-regime scalings


def tilde_psi_star_max(inner: Family, *, grid_points: int = 7, tol: float = 1e-9):
    """Conditional-on-nonzero Chernoff rate of the inner family:
    sup over lambda of lambda*x - psi~_max(lambda)."""
    env = _inner_envelope(inner, grid_points)
    lam_hi = env.lam_hi()

    def rate(x: float) -> float:
        if x <= 0.0:
            return 0.0
        return _sup_positive_lambda(lambda lam: lam * x - env.two_sided(lam), lam_hi, tol=tol)

    return rate


def tilde_psi_star_sparse(inner: Family, *, grid_points: int = 7, tol: float = 1e-9):
    """Sparse-regime inner rate: the log-MGF is replaced by the larger
    quantity MGF - 1, giving the slower envelope required when only a
    vanishing fraction of cells is nonzero."""
    env = _inner_envelope(inner, grid_points)
    lam_hi = env.lam_hi()

    def rate(x: float) -> float:
        if x <= 0.0:
            return 0.0
        return _sup_positive_lambda(
            lambda lam: lam * x - env.two_sided_exp(lam) + 1.0, lam_hi, tol=tol
        )

    return rate


@dataclass(frozen=True)
class SparseScalings:
    """Vanishing-density scalings: lower bounds replacing the dense
    constants when connectivity entries shrink by a factor xi."""

    xi: float
    c_min: float
    kappa_lower: float
    lipschitz_pi_coeff: float
    lipschitz_gamma_coeff: float | None
    psi_lower: Callable[[float], float]
    tilde_kappa_min: float | None = None


def c_min_constant(pi_star_unscaled: np.ndarray, a: float) -> float:
    """(1/2)(a/(1-a))^2 min (p-p')^2/p over distinct unscaled entries."""
    flat = np.unique(np.asarray(pi_star_unscaled, dtype=float).reshape(-1))
    best = math.inf
    for p in flat:
        for p2 in flat:
            if p != p2:
                best = min(best, (p - p2) ** 2 / p)
    if not math.isfinite(best):
        raise TheoryPreconditionError("all sparsity entries identical: c_min undefined")
    return 0.5 * (a / (1.0 - a)) ** 2 * best


def sparse_scalings(
    pi_star: ConnectivityMatrix,
    xi: float,
    mu_min: float,
    *,
    tol: float = 1e-9,
) -> SparseScalings:
    """Scalings of the key constants in the vanishing-density regime.

    Binary cells: the minimal divergence of the xi-scaled matrix is at
    least xi*c_min, the integrated log-ratio is (xi/a)-Lipschitz in the
    unscaled entries, and the rate function at deviations of order xi is
    at least xi * breve_psi (Bernstein form, lemma-3 constants).

    Zero-inflated cells: the minimal divergence gains the inner term
    xi*a*tilde_kappa_min (valid when the minimizing entry pair differs
    in both coordinates), the Lipschitz bound splits into sparsity and
    inner coefficients, and the rate lower bound is the xi-scaled
    composite of the sparse inner rate and the Dirac-part rate.
    """
    if not (0.0 < xi <= 1.0):
        raise SpecError(f"scale factor must lie in (0, 1], got {xi}")
    fam = pi_star.family
    if isinstance(fam, Bernoulli):
        a = fam.a
        cmin = c_min_constant(pi_star.values, a)
        breve = breve_psi_lemma3(a, mu_min)
        return SparseScalings(
            xi=xi,
            c_min=cmin,
            kappa_lower=xi * cmin,
            lipschitz_pi_coeff=xi / a,
            lipschitz_gamma_coeff=None,
            psi_lower=lambda x: xi * float(breve(x)),
        )
    if isinstance(fam, ZeroInflated):
        a = fam.a
        sp = pi_star.values[..., 0]
        gm = pi_star.values[..., 1]
        cmin = c_min_constant(sp, a)
        gam_vals = np.unique(gm.reshape(-1))
        tk = math.inf
        for g in gam_vals:
            for g2 in gam_vals:
                if g != g2:
                    tk = min(tk, float(fam.inner.kl(g, g2)))
        if not math.isfinite(tk):
            raise TheoryPreconditionError(
                "all inner parameters identical: the inner minimal divergence is undefined"
            )
        ltilde = lipschitz_L0(fam.inner)
        tilde_rate = tilde_psi_star_sparse(fam.inner, tol=tol)
        breve = breve_psi_lemma4(a)
        mu2 = mu_min**2

        def psi_lower(x: float) -> float:
            half = float(x) / 2.0
            return xi * mu2 / 8.0 * min(tilde_rate(half), float(breve(half)))

        return SparseScalings(
            xi=xi,
            c_min=cmin,
            kappa_lower=xi * (cmin + a * tk),
            lipschitz_pi_coeff=xi / a,
            lipschitz_gamma_coeff=xi * ltilde,
            psi_lower=psi_lower,
            tilde_kappa_min=tk,
        )
    raise SpecError(
        f"sparse scalings apply to bernoulli or zero-inflated cells, not {fam.name!r}"
    )


def growth_product_bound(u: float, v: float, n: int, m: int) -> tuple[float, float]:
    """Both sides of the elementary growth inequality
    (1+u)^n (1+v)^m - 1 <= (nu+mv) exp(nu+mv) for u, v > 0."""
    if u <= 0 or v <= 0:
        raise SpecError("the growth inequality needs positive u and v")
    lhs = math.expm1(n * math.log1p(u) + m * math.log1p(v))
    s = n * u + m * v
    rhs = s * math.exp(s) if s < 700 else math.inf
    return lhs, rhs
