#!/usr/bin/env python3
"""Divergence constants and deviation rate functions.

Shows the closed-form Kullback-Leibler divergences, the extreme
constants over a parameter box, and each family's rate function
against the numerically exact Chernoff envelope.
"""

from blockpost import (
    Bernoulli,
    ConnectivityMatrix,
    GaussScale,
    Poisson,
    exact_chernoff_rate,
    kappa_max,
    kappa_min,
    kl_divergence,
    lipschitz_L0,
    rate_function,
)

fam = Bernoulli(a=0.25)
print("D(0.3 || 0.6) =", kl_divergence(fam, 0.3, 0.6))
print("D(0.6 || 0.3) =", kl_divergence(fam, 0.6, 0.3))

pi = ConnectivityMatrix([[0.3, 0.6], [0.6, 0.3]], fam)
print("\nsmallest divergence between distinct blocks:", kappa_min(pi))
print("largest divergence over the box [0.25, 0.75]:", kappa_max(fam))
print("Lipschitz constant of the integrated log-ratio:", lipschitz_L0(fam))

mu_min = 0.5
print("\nrate functions vs the exact Chernoff envelope (mu_min = 0.5)")
for family, label in [
    (Bernoulli(0.25), "binary (Hoeffding)"),
    (Poisson(1.0, 2.0), "Poisson (Bennett)"),
    (GaussScale(0.0, 1.0, 2.0), "Gaussian scale (chi-square)"),
]:
    rf = rate_function(family, mu_min)
    envelope = exact_chernoff_rate(family, mu_min)
    print(f"  {label}")
    for x in (0.25, 0.5, 1.0):
        print(f"    x={x}: formula {float(rf(x)):.6g}  envelope {envelope(x):.6g}")

# An alternative linear-plus-log form for the scale family is kept
# under variant="reference"; it exceeds the envelope at small
# deviations and is not used by default.
alt = rate_function(GaussScale(0.0, 1.0, 2.0), mu_min, "reference", scale_sigma2=1.0)
envelope = exact_chernoff_rate(GaussScale(0.0, 1.0, 2.0), mu_min)
print("\nreference scale-family form at x=0.1:", float(alt(0.1)), "> envelope", envelope(0.1))
