"""Absorbing a central error into a horizontal word.

Picks a random configuration of r + 1 points in the step-4 group, solves for
the layer-3 corrections and checks that the corrected word lands exactly on
k x_r, first in floating point and then in rational arithmetic.
"""
import numpy as np

from carnot import g_rank2_step4
from carnot.correction import exact_word_residual, perturbation_product, random_instance, solve_correction

G = g_rank2_step4()
rng = np.random.default_rng(1)
xs, Z = random_instance(G, rng, min_size=0.2)
sol = solve_correction(G, xs, Z)
trace = perturbation_product(G, xs, Z)

print("configuration size", f"{sol.size:.4f}")
print("corrections Y_j (layer 3 coordinates):")
for j, y in enumerate(sol.Y, 1):
    print(f"  Y_{j} = {np.array2string(y[G.layer_slice(3)], precision=4)}")
print(f"sum [Y_j, X_j] - Z      {np.abs(sol.residual).max():.2e}")
print(f"word - k x_r (float)    {trace.residual:.2e}")
print(f"word - k x_r (exact)    {float(exact_word_residual(G, xs, sol)):.2e}")
print(f"added length {trace.added_cost:.4f} <= bound {trace.cost_bound:.4f}")
