"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set VARISTRAT_NO_EXT=1 to force the fallback (used by the benchmark and by
parity tests).
"""

import os

from . import fallback as _fallback

if os.environ.get("VARISTRAT_NO_EXT"):
    _impl = _fallback
else:
    try:
        from . import _impl
    except ImportError:
        _impl = _fallback

IS_COMPILED = _impl.IS_COMPILED

jacobi_eigh = _impl.jacobi_eigh
smallest_eigenvalue_sum = _impl.smallest_eigenvalue_sum
displacement_many = _impl.displacement_many
min_pairwise_distance = _impl.min_pairwise_distance
simplex_ball_mass = _impl.simplex_ball_mass
annulus_normal_defect = _impl.annulus_normal_defect
annulus_normal_moment = _impl.annulus_normal_moment
cone_pair_histogram = _impl.cone_pair_histogram

__all__ = [
    "IS_COMPILED",
    "jacobi_eigh",
    "smallest_eigenvalue_sum",
    "displacement_many",
    "min_pairwise_distance",
    "simplex_ball_mass",
    "annulus_normal_defect",
    "annulus_normal_moment",
    "cone_pair_histogram",
]
