"""Exact Heisenberg distances next to the generic interval bounds."""
import numpy as np

from carnot import heisenberg
from carnot.distance import heisenberg_norm, provider_for

H = heisenberg()
generic = provider_for(H, "interval")
for g in ([1, 0, 0], [0, 0, 1], [1, 1, 0.5], [0.1, 0, 3], [2, -1, -4]):
    g = np.array(g, dtype=float)
    lo, hi = generic.norm_bounds(g)
    print(f"g = {g}   exact {heisenberg_norm(g):.5f}   interval [{lo:.5f}, {hi:.5f}]")

print("\nvertical points: d(e, (0, 0, z)) = sqrt(4 pi z)")
for z in (0.25, 1.0, 4.0):
    print(f"  z = {z:<5g} {heisenberg_norm([0, 0, z]):.6f}  {np.sqrt(4 * np.pi * z):.6f}")
