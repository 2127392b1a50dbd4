"""Borel resummation on two divergent series.

1. The Euler series sum n! g^n: its Borel transform is 1/(1 - z), whose
   pole at z = 1 sits on the integration path.  The principal-value
   Laplace integral recovers exp(-1/g) Ei(1/g) / g.
2. The quartic integral Z(g) = int exp(-(x^2 + x^4)/g) dx: optimal
   truncation against Borel-Pade, checked against quadrature.

Run: python3 demos/borel_resummation.py
"""
import math

from surge.quartic_oracle import (
    euler_exact, euler_series_fixture, quartic_asymptotic_coeffs, verify_resummation,
)
from surge.series_core import borel_transform, laplace_resum, pade, pade_poles, ratio_test

fx = euler_series_fixture(12)
borel = borel_transform(fx.series)
print("Euler series, first Borel coefficients:", borel.coeffs[:6])
print("ratio test (radius, alternating):", ratio_test(borel, 3))
approx = pade(borel, 0, 1)
(pole,) = pade_poles(approx)
print(f"Pade [0/1] pole {pole.location:g}, residue {pole.residue:g}")

print("\n   g   partial sum (N=1/g)   resummed             exact")
for g in (0.05, 0.1, 0.2):
    n = round(1 / g)
    partial = fx.series.partial_sum(g, min(n, 12))
    print(f"{g:5.2f}  {partial:.12f}       {laplace_resum(approx, g):.12f}   {euler_exact(g):.12f}")

print("\nQuartic integral: Z(g)/sqrt(pi g) ~ sum a_k g^k with a_k =",
      [f"{a:.6g}" for a in quartic_asymptotic_coeffs(4)])
report = verify_resummation()
print(report.format_table())
print("The singularity estimate is negative: the quartic series alternates, so its")
print("Borel singularity lies on the negative axis and gives no positive target.")
print(f"Exponentially small scale at g = 0.1: exp(-|zeta1|/g) = {math.exp(-abs(report.zeta1) / 0.1):.2e}")
