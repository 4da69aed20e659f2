"""Observation families for block models.

Each family describes the conditional distribution of one matrix cell
given its row/column groups: density evaluation, sampling, analytic
moments, and the closed-form information quantities used throughout the
package (Kullback-Leibler divergence and the cross log-ratio integral).

The cross log-ratio of a family is

    clr(p, q, r) = integral of log(f(x; p) / f(x; q)) f(x; r) dx,

so that ``kl(p, q) == clr(p, q, p)``.  Every closed form here is
unit-tested against numerical quadrature or series summation.

Parameters are scalars for most families, a length-``levels``
probability vector for the multinomial family, and a ``(sparsity,
inner)`` pair for the zero-inflated family.  Vectorised entry points
accept arrays whose trailing axis (when ``param_dim > 1``) holds the
parameter coordinates.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np
from scipy.special import gammaln

from .errors import SpecError

__all__ = [
    "Family",
    "Bernoulli",
    "Binomial",
    "Multinomial",
    "Poisson",
    "GaussLocation",
    "GaussScale",
    "ZeroTruncatedPoisson",
    "ZeroInflated",
    "family_from_dict",
]


def _as_float(x):
    return np.asarray(x, dtype=float)


class Family(ABC):
    """Abstract observation family.

    Concrete subclasses carry their parameter bounds (the set called the
    admissible parameter box in the docs) and expose vectorised density,
    sampling and divergence routines.
    """

    name: str = ""
    #: trailing parameter dimension; 1 means scalar parameters
    param_dim: int = 1
    #: True when the reference measure is counting measure
    discrete: bool = True

    # -- validation ----------------------------------------------------

    @abstractmethod
    def validate_param(self, param) -> None:
        """Raise :class:`SpecError` when ``param`` is outside the bounds."""

    @abstractmethod
    def support_contains(self, x) -> np.ndarray:
        """Elementwise membership of ``x`` in the family's support."""

    # -- densities and sampling ---------------------------------------

    @abstractmethod
    def log_density(self, x, param) -> np.ndarray:
        """log f(x; param), broadcasting ``param`` against ``x``."""

    @abstractmethod
    def sample(self, param, rng: np.random.Generator) -> np.ndarray:
        """One draw per entry of ``param`` (elementwise parameters)."""

    # -- analytic moments (test oracles live elsewhere) ----------------

    @abstractmethod
    def mean(self, param) -> np.ndarray: ...

    @abstractmethod
    def variance(self, param) -> np.ndarray: ...

    # -- information quantities ----------------------------------------

    @abstractmethod
    def cross_log_ratio(self, p, q, r) -> np.ndarray:
        """integral log(f(;p)/f(;q)) f(;r), closed form."""

    def kl(self, p, q) -> np.ndarray:
        """Kullback-Leibler divergence D(p || q)."""
        return self.cross_log_ratio(p, q, p)

    # -- misc -----------------------------------------------------------

    def params_equal(self, p, q) -> np.ndarray:
        """Exact elementwise parameter equality (reducing param axis)."""
        p = _as_float(p)
        q = _as_float(q)
        if self.param_dim == 1:
            return p == q
        return np.all(p == q, axis=-1)

    @abstractmethod
    def to_dict(self) -> dict: ...

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        items = ", ".join(f"{k}={v!r}" for k, v in self.to_dict().items() if k != "kind")
        return f"{type(self).__name__}({items})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Family) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(sorted(self.to_dict().items())))


def _check_interval(name, lo, hi, lo_open=False):
    if not (lo < hi):
        raise SpecError(f"{name}: need lower < upper, got [{lo}, {hi}]")
    if lo_open and lo <= 0:
        raise SpecError(f"{name}: lower bound must be positive, got {lo}")


class Bernoulli(Family):
    """Bernoulli cells with success probability in [a, 1-a], a in (0, 1/2)."""

    name = "bernoulli"
    param_dim = 1
    discrete = True

    def __init__(self, a: float = 0.05):
        if not (0.0 < a < 0.5):
            raise SpecError(f"bernoulli bound a must lie in (0, 1/2), got {a}")
        self.a = float(a)

    @property
    def bounds(self):
        return (self.a, 1.0 - self.a)

    def validate_param(self, param) -> None:
        p = _as_float(param)
        if np.any(p < self.a - 1e-15) or np.any(p > 1.0 - self.a + 1e-15):
            raise SpecError(f"bernoulli parameter outside [{self.a}, {1 - self.a}]")

    def support_contains(self, x):
        x = _as_float(x)
        return (x == 0.0) | (x == 1.0)

    def log_density(self, x, param):
        x = _as_float(x)
        p = _as_float(param)
        return x * np.log(p) + (1.0 - x) * np.log1p(-p)

    def sample(self, param, rng):
        p = _as_float(param)
        return (rng.random(p.shape) < p).astype(float)

    def mean(self, param):
        return _as_float(param)

    def variance(self, param):
        p = _as_float(param)
        return p * (1.0 - p)

    def cross_log_ratio(self, p, q, r):
        p, q, r = map(_as_float, (p, q, r))
        return r * (np.log(p) - np.log(q)) + (1.0 - r) * (np.log1p(-p) - np.log1p(-q))

    def to_dict(self):
        return {"kind": "bernoulli", "a": self.a}


class Binomial(Family):
    """Binomial(trials, p) cells, per-trial probability in [a, 1-a].

    The trial count is global: one value for every cell of the matrix.
    """

    name = "binomial"
    param_dim = 1
    discrete = True

    def __init__(self, trials: int, a: float = 0.05):
        if int(trials) != trials or trials < 1:
            raise SpecError(f"binomial trial count must be a positive integer, got {trials}")
        if not (0.0 < a < 0.5):
            raise SpecError(f"binomial bound a must lie in (0, 1/2), got {a}")
        self.trials = int(trials)
        self.a = float(a)

    @property
    def bounds(self):
        return (self.a, 1.0 - self.a)

    def validate_param(self, param):
        p = _as_float(param)
        if np.any(p < self.a - 1e-15) or np.any(p > 1.0 - self.a + 1e-15):
            raise SpecError(f"binomial parameter outside [{self.a}, {1 - self.a}]")

    def support_contains(self, x):
        x = _as_float(x)
        return (x == np.round(x)) & (x >= 0) & (x <= self.trials)

    def log_density(self, x, param):
        x = _as_float(x)
        p = _as_float(param)
        n = self.trials
        return (
            gammaln(n + 1.0)
            - gammaln(x + 1.0)
            - gammaln(n - x + 1.0)
            + x * np.log(p)
            + (n - x) * np.log1p(-p)
        )

    def sample(self, param, rng):
        p = _as_float(param)
        return rng.binomial(self.trials, p).astype(float)

    def mean(self, param):
        return self.trials * _as_float(param)

    def variance(self, param):
        p = _as_float(param)
        return self.trials * p * (1.0 - p)

    def cross_log_ratio(self, p, q, r):
        p, q, r = map(_as_float, (p, q, r))
        return self.trials * (
            r * (np.log(p) - np.log(q)) + (1.0 - r) * (np.log1p(-p) - np.log1p(-q))
        )

    def to_dict(self):
        return {"kind": "binomial", "trials": self.trials, "a": self.a}


class Multinomial(Family):
    """Single categorical draw over levels 1..p.

    The parameter is a probability vector with every coordinate in
    [a, 1-a]; observed values are the integers 1..levels.
    """

    name = "multinomial"
    discrete = True

    def __init__(self, levels: int, a: float = 0.05):
        if int(levels) != levels or levels < 2:
            raise SpecError(f"multinomial needs at least 2 levels, got {levels}")
        if not (0.0 < a < 0.5):
            raise SpecError(f"multinomial bound a must lie in (0, 1/2), got {a}")
        if levels * a > 1.0 or levels * (1.0 - a) < 1.0:
            raise SpecError(
                f"no probability vector with {levels} coordinates fits in [{a}, {1 - a}]"
            )
        self.levels = int(levels)
        self.a = float(a)

    @property
    def param_dim(self):
        return self.levels

    @property
    def bounds(self):
        return (self.a, 1.0 - self.a)

    def validate_param(self, param):
        p = _as_float(param)
        if p.shape[-1:] != (self.levels,):
            raise SpecError(f"multinomial parameter must have trailing length {self.levels}")
        if np.any(p < self.a - 1e-15) or np.any(p > 1.0 - self.a + 1e-15):
            raise SpecError(f"multinomial coordinate outside [{self.a}, {1 - self.a}]")
        s = p.sum(axis=-1)
        if np.any(np.abs(s - 1.0) > 1e-12):
            raise SpecError("multinomial parameter coordinates must sum to 1 within 1e-12")

    def support_contains(self, x):
        x = _as_float(x)
        return (x == np.round(x)) & (x >= 1) & (x <= self.levels)

    def log_density(self, x, param):
        x = np.asarray(x)
        p = _as_float(param)
        idx = (np.round(_as_float(x)).astype(int) - 1)[..., None]
        return np.log(np.take_along_axis(np.broadcast_to(p, x.shape + (self.levels,)), idx, axis=-1)[..., 0])

    def sample(self, param, rng):
        p = _as_float(param)
        base = p.shape[:-1]
        cum = np.cumsum(p, axis=-1)
        u = rng.random(base + (1,))
        return ((u > cum).sum(axis=-1) + 1).astype(float)

    def mean(self, param):
        p = _as_float(param)
        k = np.arange(1, self.levels + 1, dtype=float)
        return (p * k).sum(axis=-1)

    def variance(self, param):
        p = _as_float(param)
        k = np.arange(1, self.levels + 1, dtype=float)
        m = (p * k).sum(axis=-1)
        return (p * k * k).sum(axis=-1) - m * m

    def cross_log_ratio(self, p, q, r):
        p, q, r = map(_as_float, (p, q, r))
        return (r * (np.log(p) - np.log(q))).sum(axis=-1)

    def to_dict(self):
        return {"kind": "multinomial", "levels": self.levels, "a": self.a}


class Poisson(Family):
    """Poisson cells with intensity in [pi_min, pi_max], a compact subset of (0, inf)."""

    name = "poisson"
    param_dim = 1
    discrete = True

    def __init__(self, pi_min: float, pi_max: float):
        _check_interval("poisson bounds", pi_min, pi_max, lo_open=True)
        self.pi_min = float(pi_min)
        self.pi_max = float(pi_max)

    @property
    def bounds(self):
        return (self.pi_min, self.pi_max)

    def validate_param(self, param):
        p = _as_float(param)
        if np.any(p < self.pi_min - 1e-12) or np.any(p > self.pi_max + 1e-12):
            raise SpecError(f"poisson intensity outside [{self.pi_min}, {self.pi_max}]")

    def support_contains(self, x):
        x = _as_float(x)
        return (x == np.round(x)) & (x >= 0)

    def log_density(self, x, param):
        x = _as_float(x)
        p = _as_float(param)
        return x * np.log(p) - p - gammaln(x + 1.0)

    def sample(self, param, rng):
        return rng.poisson(_as_float(param)).astype(float)

    def mean(self, param):
        return _as_float(param)

    def variance(self, param):
        return _as_float(param)

    def cross_log_ratio(self, p, q, r):
        p, q, r = map(_as_float, (p, q, r))
        return r * (np.log(p) - np.log(q)) - (p - q)

    def to_dict(self):
        return {"kind": "poisson", "pi_min": self.pi_min, "pi_max": self.pi_max}


class GaussLocation(Family):
    """Homoscedastic Gaussian cells: mean is the parameter, variance fixed."""

    name = "gauss_location"
    param_dim = 1
    discrete = False

    def __init__(self, variance: float, pi_min: float, pi_max: float):
        if variance <= 0:
            raise SpecError(f"gauss_location variance must be positive, got {variance}")
        _check_interval("gauss_location bounds", pi_min, pi_max)
        self.sigma2 = float(variance)
        self.pi_min = float(pi_min)
        self.pi_max = float(pi_max)

    @property
    def bounds(self):
        return (self.pi_min, self.pi_max)

    def validate_param(self, param):
        p = _as_float(param)
        if np.any(p < self.pi_min - 1e-12) or np.any(p > self.pi_max + 1e-12):
            raise SpecError(f"gauss_location mean outside [{self.pi_min}, {self.pi_max}]")

    def support_contains(self, x):
        return np.isfinite(_as_float(x))

    def log_density(self, x, param):
        x = _as_float(x)
        m = _as_float(param)
        v = self.sigma2
        return -0.5 * math.log(2.0 * math.pi * v) - (x - m) ** 2 / (2.0 * v)

    def sample(self, param, rng):
        m = _as_float(param)
        return m + math.sqrt(self.sigma2) * rng.standard_normal(m.shape)

    def mean(self, param):
        return _as_float(param)

    def variance(self, param):
        return np.full_like(_as_float(param), self.sigma2)

    def cross_log_ratio(self, p, q, r):
        p, q, r = map(_as_float, (p, q, r))
        return ((r - q) ** 2 - (r - p) ** 2) / (2.0 * self.sigma2)

    def to_dict(self):
        return {
            "kind": "gauss_location",
            "variance": self.sigma2,
            "pi_min": self.pi_min,
            "pi_max": self.pi_max,
        }


class GaussScale(Family):
    """Gaussian cells with fixed mean; the parameter is the variance.

    Adopted convention: the parameter is the variance of the cell
    distribution (the standard scale family).
    """

    name = "gauss_scale"
    param_dim = 1
    discrete = False

    def __init__(self, mean: float, pi_min: float, pi_max: float):
        _check_interval("gauss_scale bounds", pi_min, pi_max, lo_open=True)
        self.fixed_mean = float(mean)
        self.pi_min = float(pi_min)
        self.pi_max = float(pi_max)

    @property
    def bounds(self):
        return (self.pi_min, self.pi_max)

    def validate_param(self, param):
        p = _as_float(param)
        if np.any(p < self.pi_min - 1e-12) or np.any(p > self.pi_max + 1e-12):
            raise SpecError(f"gauss_scale variance outside [{self.pi_min}, {self.pi_max}]")

    def support_contains(self, x):
        return np.isfinite(_as_float(x))

    def log_density(self, x, param):
        x = _as_float(x)
        v = _as_float(param)
        return -0.5 * np.log(2.0 * math.pi * v) - (x - self.fixed_mean) ** 2 / (2.0 * v)

    def sample(self, param, rng):
        v = _as_float(param)
        return self.fixed_mean + np.sqrt(v) * rng.standard_normal(v.shape)

    def mean(self, param):
        return np.full_like(_as_float(param), self.fixed_mean)

    def variance(self, param):
        return _as_float(param)

    def cross_log_ratio(self, p, q, r):
        p, q, r = map(_as_float, (p, q, r))
        return 0.5 * (np.log(q) - np.log(p)) - 0.5 * r * (1.0 / p - 1.0 / q)

    def to_dict(self):
        return {
            "kind": "gauss_scale",
            "mean": self.fixed_mean,
            "pi_min": self.pi_min,
            "pi_max": self.pi_max,
        }


class ZeroTruncatedPoisson(Family):
    """Poisson conditioned on being positive; the canonical discrete
    inner family for zero-inflated cells (no mass at zero)."""

    name = "zero_trunc_poisson"
    param_dim = 1
    discrete = True

    def __init__(self, gamma_min: float, gamma_max: float):
        _check_interval("zero-truncated poisson bounds", gamma_min, gamma_max, lo_open=True)
        self.gamma_min = float(gamma_min)
        self.gamma_max = float(gamma_max)

    @property
    def bounds(self):
        return (self.gamma_min, self.gamma_max)

    def validate_param(self, param):
        g = _as_float(param)
        if np.any(g < self.gamma_min - 1e-12) or np.any(g > self.gamma_max + 1e-12):
            raise SpecError(
                f"zero-truncated poisson rate outside [{self.gamma_min}, {self.gamma_max}]"
            )

    def support_contains(self, x):
        x = _as_float(x)
        return (x == np.round(x)) & (x >= 1)

    def log_density(self, x, param):
        x = _as_float(x)
        g = _as_float(param)
        # density k -> g^k / (k! (e^g - 1)) on k >= 1
        return x * np.log(g) - gammaln(x + 1.0) - np.log(np.expm1(g))

    def sample(self, param, rng):
        # rejection: redraw zeros; terminates since gamma >= gamma_min > 0
        g = np.atleast_1d(_as_float(param))
        out = rng.poisson(g).astype(float)
        mask = out == 0.0
        while np.any(mask):
            out[mask] = rng.poisson(g[mask])
            mask = out == 0.0
        return out.reshape(np.shape(_as_float(param)))

    def mean(self, param):
        g = _as_float(param)
        return g / (-np.expm1(-g))

    def variance(self, param):
        g = _as_float(param)
        denom = -np.expm1(-g)
        m = g / denom
        second = (g + g * g) / denom
        return second - m * m

    def cross_log_ratio(self, p, q, r):
        p, q, r = map(_as_float, (p, q, r))
        m_r = r / (-np.expm1(-r))
        return m_r * (np.log(p) - np.log(q)) - (np.log(np.expm1(p)) - np.log(np.expm1(q)))

    def to_dict(self):
        return {
            "kind": "zero_trunc_poisson",
            "gamma_min": self.gamma_min,
            "gamma_max": self.gamma_max,
        }


#: inner families structurally admissible for zero inflation: either a
#: continuous distribution or the zero-truncated Poisson, so the inner
#: c.d.f. is continuous at zero and the Dirac part stays identifiable.
_ZI_INNER_OK = ("zero_trunc_poisson", "gauss_location", "gauss_scale")


class ZeroInflated(Family):
    """Mixture of a point mass at zero with an inner family.

    The parameter is the pair ``(sparsity, inner)`` where the sparsity
    probability lies in [a, 1-a] and the inner scalar parameter lies in
    the inner family's bounds.  The density is taken with respect to the
    sum of a Dirac mass at zero and the inner reference measure.
    """

    name = "zero_inflated"
    param_dim = 2
    discrete = True  # mixed; reference measure handled explicitly

    def __init__(self, inner: Family, a: float = 0.05):
        if inner.name not in _ZI_INNER_OK:
            raise SpecError(
                f"zero-inflated inner family must be one of {_ZI_INNER_OK}, got {inner.name}"
            )
        if not (0.0 < a < 0.5):
            raise SpecError(f"zero-inflated bound a must lie in (0, 1/2), got {a}")
        self.inner = inner
        self.a = float(a)

    @property
    def bounds(self):
        return (self.a, 1.0 - self.a)

    def validate_param(self, param):
        p = _as_float(param)
        if p.shape[-1:] != (2,):
            raise SpecError("zero-inflated parameter must be a (sparsity, inner) pair")
        sp = p[..., 0]
        if np.any(sp < self.a - 1e-15) or np.any(sp > 1.0 - self.a + 1e-15):
            raise SpecError(f"zero-inflated sparsity outside [{self.a}, {1 - self.a}]")
        self.inner.validate_param(p[..., 1])

    def support_contains(self, x):
        x = _as_float(x)
        return (x == 0.0) | self.inner.support_contains(x)

    def log_density(self, x, param):
        x = _as_float(x)
        p = _as_float(param)
        sp = np.broadcast_to(p[..., 0], x.shape)
        g = np.broadcast_to(p[..., 1], x.shape)
        zero = x == 0.0
        safe_x = np.where(zero, 1.0, x)
        inner_ld = self.inner.log_density(safe_x, g)
        return np.where(zero, np.log1p(-sp), np.log(sp) + inner_ld)

    def sample(self, param, rng):
        p = _as_float(param)
        sp = p[..., 0]
        g = p[..., 1]
        nonzero = rng.random(sp.shape) < sp
        inner_draws = self.inner.sample(np.broadcast_to(g, sp.shape), rng)
        return np.where(nonzero, inner_draws, 0.0)

    def mean(self, param):
        p = _as_float(param)
        return p[..., 0] * self.inner.mean(p[..., 1])

    def variance(self, param):
        p = _as_float(param)
        sp = p[..., 0]
        m_in = self.inner.mean(p[..., 1])
        v_in = self.inner.variance(p[..., 1])
        second = sp * (v_in + m_in * m_in)
        return second - (sp * m_in) ** 2

    def cross_log_ratio(self, p, q, r):
        # Dirac part contributes the exact Bernoulli cross term; the
        # inner part is weighted by the measuring sparsity.
        p, q, r = map(_as_float, (p, q, r))
        sp, sq, sr = p[..., 0], q[..., 0], r[..., 0]
        bern = sr * (np.log(sp) - np.log(sq)) + (1.0 - sr) * (np.log1p(-sp) - np.log1p(-sq))
        inner = self.inner.cross_log_ratio(p[..., 1], q[..., 1], r[..., 1])
        return bern + sr * inner

    def to_dict(self):
        return {"kind": "zero_inflated", "a": self.a, "inner": self.inner.to_dict()}


_FAMILY_KINDS = {
    "bernoulli": Bernoulli,
    "binomial": Binomial,
    "multinomial": Multinomial,
    "poisson": Poisson,
    "gauss_location": GaussLocation,
    "gauss_scale": GaussScale,
    "zero_trunc_poisson": ZeroTruncatedPoisson,
    "zero_inflated": ZeroInflated,
}


def family_from_dict(d: dict) -> Family:
    """Build a family from its JSON-compatible dict representation."""
    if not isinstance(d, dict) or "kind" not in d:
        raise SpecError(f"family description must be a dict with a 'kind' key, got {d!r}")
    kind = d["kind"]
    if kind not in _FAMILY_KINDS:
        raise SpecError(f"unknown family kind {kind!r}")
    kwargs = {k: v for k, v in d.items() if k != "kind"}
    if kind == "zero_inflated":
        kwargs["inner"] = family_from_dict(kwargs["inner"])
    return _FAMILY_KINDS[kind](**kwargs)
