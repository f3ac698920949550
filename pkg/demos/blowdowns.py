"""Blowups and blowdowns on three curves.

A Heisenberg circle collapses to a point under blowdown, the Engel geodesic
blows down to the x2-axis, and a noisy Euclidean line keeps a pair of
antipodal directions.
"""
import numpy as np

from carnot import engel, heisenberg
from carnot.asymptotics import blow, blowdown_estimate, euclidean_blowdown, DilatedCurveView, sampled_source
from carnot.extremal import CovectorPair, engel_beta, integrate_extremal

H, E = heisenberg(), engel()
circle = integrate_extremal(H, CovectorPair([1, 0, 1]), None, (0, 200), 0.01)
src, dom = sampled_source(circle)
rep = blowdown_estimate(H, src, [1, 10, 100], np.linspace(0, 1, 11), domain=dom)
print("Heisenberg circle, sup horizontal size of gamma_h on [0, 1]:")
for h, s in zip(rep.hs, rep.samples):
    print(f"  h = {h:5g}: {np.linalg.norm(s[:, :2], axis=1).max():.4f}")

rep = blowdown_estimate(E, engel_beta, [10, 100, 1000], np.linspace(0, 1, 5))
print("\nEngel geodesic, horizontal direction of gamma_h(1):")
for h, d in zip(rep.hs, rep.horizontal_directions):
    print(f"  h = {h:5g}: ({d[0]:+.4f}, {d[1]:+.4f})")
print("blowup at h = 1e-3:", np.round(blow(DilatedCurveView(E, engel_beta, 1e-3), 1.0), 4))

rng = np.random.default_rng(0)
t = np.linspace(-200, 200, 1601)
# noise in a disc of radius C/2 keeps the (1, C) bounds
ang, rad = rng.uniform(0, 2 * np.pi, len(t)), rng.uniform(0, 0.5, len(t))
noise = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
pts = np.outer(t, [0.8, 0.6]) + noise
bd = euclidean_blowdown(t, pts, 1.0)
print(f"\nnoisy line: v+ = {np.round(bd.v_plus, 4)}, v- = {np.round(bd.v_minus, 4)}, "
      f"|v+ + v-| = {bd.antipodal_error:.4f} (tolerance {bd.antipodal_tolerance:.3f})")
