"""varistrat: multiscale flatness and stratification analysis for discrete
measures and simplicial varifolds, with Reifenberg-type manifold construction
and covering/packing estimators, verified on analytic testbeds."""

from . import geom, measure, reifenberg, simons, stratify, varifold
from ._kernels import IS_COMPILED

__version__ = "0.1.0"

__all__ = ["geom", "measure", "varifold", "simons", "stratify", "reifenberg",
           "IS_COMPILED", "__version__"]
