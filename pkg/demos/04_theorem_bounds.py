#!/usr/bin/env python3
"""Finite-size bound sequences.

Assembles every constant of the posterior-concentration statements for
a reference model, then tabulates the bound sequences over a size grid:
the class-mass bounds only become informative when the exponential
terms beat the polynomial factors, which this script makes visible.
"""

from blockpost import theorem_constants

from demo_specs import asymmetric_graph_spec

spec = asymmetric_graph_spec()
report = theorem_constants(spec, eta=0.0)
print("constants:")
for key, val in report.summary().items():
    print(f"  {key:>14}: {val}")

print("\nadmissible perturbation radius: eta <", report.c / (2 * report.L0))

print(f"\n{'n':>6} {'a_nm':>12} {'b_nm':>12} {'eps_nm':>12} {'mass lower':>12}")
for n in (100, 200, 400, 800, 1600, 3200):
    print(
        f"{n:>6} {report.a_nm(n, n):>12.4g} {report.b_nm(n, n):>12.4g} "
        f"{report.eps_nm(n, n):>12.4g} {report.class_mass_lower(n, n):>12.4g}"
    )

print(
    "\nthe failure probability eps_nm needs n of order 1/rate(c) = "
    f"{1.0 / report.rate_at_c_eta:,.0f} before it starts to vanish"
)
n_star = int(30.0 / report.rate_at_c_eta)
for n in (n_star, 2 * n_star, 4 * n_star):
    print(f"  n = {n:,}: eps_nm = {report.eps_nm(n, n):.3g}")
