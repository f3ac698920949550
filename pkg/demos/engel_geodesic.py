"""The explicit Engel geodesic, integrated and compared with its closed form.

Integrates the normal extremal with covector (0, 1, 2, 1) from (2, 0, 0, 0),
reports the error against ``engel_beta`` for a few step sizes, then prints
how fast the curve approaches its two asymptotic lines.
"""
import numpy as np

from carnot import engel
from carnot.asymptotics import asymptote_residual, engel_asymptote, log_slopes
from carnot.extremal import CovectorPair, engel_beta, engel_residuals, integrate_extremal

E = engel()
pair = CovectorPair([0, 1, 2, 1])

t = np.linspace(-10, 10, 10_001)
worst = {k: np.abs(v).max() for k, v in engel_residuals(t).items()}
print("closed-form residuals on [-10, 10]:")
for k, v in worst.items():
    print(f"  {k:16s} {v:.2e}")

print("\nRK4 against the closed form on [0, 10]:")
prev = None
for step in (0.1, 0.05, 0.025, 0.0125):
    c = integrate_extremal(E, pair, [2, 0, 0, 0], (0, 10), step)
    err = np.abs(c.points - engel_beta(c.times)).max()
    ratio = "" if prev is None else f"  (ratio {prev / err:.1f})"
    print(f"  step {step:<7g} error {err:.3e}{ratio}")
    prev = err

print("\nDistance to the asymptotic lines, fitted log-slopes on [5, 15]:")
s = np.linspace(5, 15, 201)
for sign in (+1, -1):
    z = asymptote_residual(E, engel_beta, engel_asymptote(sign), sign * s)
    slopes = ", ".join(f"{x:.2f}" for x in log_slopes(s, z))
    print(f"  t -> {'+' if sign > 0 else '-'}inf: {slopes}")
