"""Numerical laboratory for quantitative unique-continuation and
equidistribution estimates of second-order elliptic operators on cubes.

Submodules
----------
constants       explicit constants, admissibility margins, scaling transform
carleman        weight function, radial cutoffs, weighted-inequality checker
geometry        cubes, equidistributed ball sequences, dominating sites
fields          coefficient fields (ellipticity, Lipschitz, self-adjointness)
discretization  divergence-form finite differences, reflection/periodic extensions
spectral        eigensolves and spectral-projector samples
verifier        end-to-end observability experiments and sweeps
cli             command-line front end
"""

from uclab.constants import (
    FreeConstants,
    ModelParams,
    UcConstantReport,
    sampling_report,
    scale_parameters,
)

__version__ = "0.1.0"

__all__ = [
    "FreeConstants",
    "ModelParams",
    "UcConstantReport",
    "sampling_report",
    "scale_parameters",
    "__version__",
]
