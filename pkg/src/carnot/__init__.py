"""Geodesics, blowups and blowdowns in Carnot groups, in exponential coordinates."""
from .algebra import (
    StratifiedAlgebra,
    bch_product,
    bracket,
    catalog,
    dilate,
    engel,
    euclidean,
    free_step2,
    g_rank2_step4,
    group_inverse,
    heisenberg,
    load_algebra,
)
from .asymptotics import (
    DilatedCurveView,
    Line,
    blow,
    blowdown_estimate,
    euclidean_blowdown,
    hausdorff_truncated,
    lines_finite_distance,
)
from .correction import modified_triangle_rhs, perturbation_product, solve_correction
from .distance import DistanceBoundProvider, heisenberg_distance, provider_for
from .errors import CarnotError
from .extremal import CovectorPair, engel_beta, integrate_extremal, lift_alpha
from .hgeom import fit_hyperplane, min_height, size

__all__ = [
    "StratifiedAlgebra", "bch_product", "bracket", "catalog", "dilate", "engel",
    "euclidean", "free_step2", "g_rank2_step4", "group_inverse", "heisenberg",
    "load_algebra", "DilatedCurveView", "Line", "blow", "blowdown_estimate",
    "euclidean_blowdown", "hausdorff_truncated", "lines_finite_distance",
    "modified_triangle_rhs", "perturbation_product", "solve_correction",
    "DistanceBoundProvider", "heisenberg_distance", "provider_for", "CarnotError",
    "CovectorPair", "engel_beta", "integrate_extremal", "lift_alpha",
    "fit_hyperplane", "min_height", "size",
]
