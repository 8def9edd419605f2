"""Enclosure-method toolkit for inclusion detection in a fourth-order medium.

Builds synthetic boundary measurements for a perturbed plate-type equation,
constructs probe solutions with logarithmic phase, evaluates the indicator
functional, and reconstructs an enclosing region for the obstacle.
"""

from .geometry import (
    BallDomain,
    BallShape,
    BoxDomain,
    EllipsoidShape,
    GeometryError,
    Grid,
    SampledShape,
    UnionShape,
    build_grid,
    chi_D,
    support_log_distance,
)
from .media import AdmissibilityReport, MediumSpec, check_admissibility
from .forward import (
    DtNTrace,
    Field,
    ForwardSolver,
    NavierData,
    NavierSolution,
    SolverFailure,
    boundary_traces,
    extract_dtn,
)

__version__ = "0.1.0"
