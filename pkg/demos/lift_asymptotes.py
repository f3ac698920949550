"""Two asymptotes of the step-4 lift that never come close to each other.

The lift alpha of the Engel geodesic follows L+ as t -> +inf and L- as
t -> -inf.  On the wrong half-line the 1122-coordinate of L^{-1} alpha grows
linearly, and the two lines are not at finite Hausdorff distance.
"""
import numpy as np

from carnot import g_rank2_step4
from carnot.asymptotics import asymptote_residual, hausdorff_truncated, lift_asymptote, lines_finite_distance
from carnot.distance import provider_for
from carnot.extremal import lift_alpha

G = g_rank2_step4()
Lp, Lm = lift_asymptote(G, +1), lift_asymptote(G, -1)
k = G.index["1122"]

for t in (-40, -20, -10, 0, 10, 20, 40):
    zp = asymptote_residual(G, lift_alpha, Lp, float(t))
    zm = asymptote_residual(G, lift_alpha, Lm, float(t))
    print(f"t = {t:4d}   |z+| = {np.abs(zp).max():7.3f}  z+_1122 = {zp[k]:8.3f}   |z-| = {np.abs(zm).max():7.3f}")

print("\nlines at finite distance?", lines_finite_distance(G, Lp, Lm))

P = provider_for(G)
grid = np.arange(-40, 40.25, 0.5)
alpha = (grid, lift_alpha(grid))
print("\ntruncated Hausdorff distance between alpha and L+ on [-T, 0]:")
for T in (10, 20, 40):
    lo, hi = hausdorff_truncated(alpha, (grid, Lp(grid)), P, T, window=(-T, 0))
    print(f"  T = {T:2d}: [{lo:.2f}, {hi:.2f}]")
