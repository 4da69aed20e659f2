"""Finite-size constants and bounds of the posterior-concentration
statements: the divergence constants, the Lipschitz constant, the
proportions gap, the rate function, and the explicit sequences that
bound the posterior mass of the true class and the failure probability.

All exponentials are evaluated with under/overflow clamped to 0/inf so
desk-scale and asymptotic-scale arguments both behave.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from .divergence import kappa_max, kappa_min, lipschitz_L0
from .errors import TheoryPreconditionError
from .model import ModelSpec
from .rates import RateFunction, rate_function
from .symmetry import SymmetryGroup, detect_symmetry_group

__all__ = ["BoundReport", "theorem_constants", "proportions_gap"]


def _exp(x: float) -> float:
    if x > 700.0:
        return math.inf
    if x < -745.0:
        return 0.0
    return math.exp(x)


def proportions_gap(spec: ModelSpec) -> float:
    """log(alpha_max/alpha_min) v log(beta_max/beta_min); zero exactly
    for uniform proportions (within 1e-12)."""
    ka = math.log(float(spec.alpha.max()) / float(spec.alpha.min()))
    kb = math.log(float(spec.beta.max()) / float(spec.beta.min()))
    gap = max(ka, kb)
    return 0.0 if gap <= 1e-12 else gap


@dataclass
class BoundReport:
    """Assembled constants and finite-size bound evaluators for a model.

    ``a_nm``/``b_nm`` bound the posterior mass of the true class from
    below/above through x e^x transforms, ``d_nm`` collects the union
    bound over distances and ``eps_nm`` is the failure probability of
    the event on which the two-sided posterior-ratio bounds hold.
    """

    spec: ModelSpec
    eta: float
    kappa_min: float
    kappa_max: float
    L0: float
    c: float
    C: float
    K: float
    sigma: SymmetryGroup
    rate: RateFunction
    rate_at_c_eta: float

    @property
    def c_eta(self) -> float:
        return self.c - 2.0 * self.L0 * self.eta

    def a_nm(self, n: int, m: int) -> float:
        if self.spec.variant.is_sbm:
            return n * _exp(-2.0 * n * self.c_eta + self.K)
        return n * _exp(-self.c_eta * m + self.K) + m * _exp(-self.c_eta * n + self.K)

    def b_nm(self, n: int, m: int) -> float:
        if self.spec.variant.is_sbm:
            return n * _exp(-2.0 * self.C * n - self.K)
        return n * _exp(-self.C * m - self.K) + m * _exp(-self.C * n - self.K)

    def d_nm(self, n: int, m: int) -> float:
        psi = self.rate_at_c_eta
        if self.spec.variant.is_sbm:
            return n * _exp(-2.0 * psi * n)
        return n * _exp(-psi * m) + m * _exp(-psi * n)

    def eps_nm(self, n: int, m: int) -> float:
        spec = self.spec
        d = self.d_nm(n, m)
        if spec.variant.is_sbm:
            a_min = float(spec.alpha.min())
            base = 2.0 * spec.Q * _exp(-n * a_min**2 / 2.0)
        else:
            base = 2.0 * spec.Q * spec.L * _exp(-min(n, m) * spec.mu_min**2 / 2.0)
        if math.isinf(d):
            return math.inf
        tail = 2.0 * self.sigma.order * d * _exp(d)
        return base + tail

    def class_mass_lower(self, n: int, m: int) -> float:
        """1 - |Sigma| a e^a, the lower bound on the true-class mass."""
        a = self.a_nm(n, m)
        if math.isinf(a):
            return -math.inf
        return 1.0 - self.sigma.order * a * _exp(a)

    def class_mass_upper(self, n: int, m: int) -> float:
        """(1 + |Sigma| b e^b)^{-1}, the upper bound on the true-class mass."""
        b = self.b_nm(n, m)
        return 1.0 / (1.0 + self.sigma.order * b * _exp(b))

    def psi_star_at(self, x: float) -> float:
        return float(self.rate(x))

    def summary(self) -> dict:
        return {
            "kappa_min": self.kappa_min,
            "kappa_max": self.kappa_max,
            "L0": self.L0,
            "c": self.c,
            "C": self.C,
            "K": self.K,
            "eta": self.eta,
            "eta_max": self.c / (2.0 * self.L0),
            "sigma_order": self.sigma.order,
            "rate_variant": self.rate.variant,
            "rate_at_c_eta": self.rate_at_c_eta,
        }


def theorem_constants(
    spec: ModelSpec,
    eta: float,
    rate_variant: str | None = None,
    sigma: SymmetryGroup | None = None,
) -> BoundReport:
    """Assemble every constant of the concentration statements.

    Preconditions: the connectivity matrix separates rows and columns,
    and the perturbation radius satisfies 0 <= eta < c / (2 L0) (zero
    means evaluation at the true parameter).
    """
    if not spec.identifiability_ok():
        raise TheoryPreconditionError(
            "connectivity matrix has identical rows or columns; the constants are undefined"
        )
    kmin = kappa_min(spec.pi)
    kmax = kappa_max(spec.family)
    L0 = lipschitz_L0(spec.family)
    mu = spec.mu_min
    c = mu**2 * kmin / 16.0
    C = 2.0 * kmax
    if kmin > kmax + 1e-9:
        raise TheoryPreconditionError("minimal divergence exceeds the family supremum")
    if not (c <= C / 2.0 + 1e-12):
        raise TheoryPreconditionError("constant ordering c <= C/2 violated")
    eta = float(eta)
    eta_max = c / (2.0 * L0)
    if eta < 0.0 or eta >= eta_max:
        raise TheoryPreconditionError(
            f"perturbation radius must satisfy 0 <= eta < c/(2 L0) = {eta_max:.6g}, got {eta}"
        )
    K = proportions_gap(spec)
    if sigma is None:
        sigma = detect_symmetry_group(spec.pi, spec.variant)
    rate = rate_function(spec.family, mu, rate_variant)
    c_eta = c - 2.0 * L0 * eta
    rate_at = float(rate(c_eta))
    return BoundReport(
        spec=spec,
        eta=eta,
        kappa_min=kmin,
        kappa_max=kmax,
        L0=L0,
        c=c,
        C=C,
        K=K,
        sigma=sigma,
        rate=rate,
        rate_at_c_eta=rate_at,
    )
