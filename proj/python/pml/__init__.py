"""p-harmonic measure on planar domains: solver, boundary measure, local dimension
and half-plane map diagnostics."""

from ._pml import (
    BoundaryMeasure,
    Domain,
    DomainError,
    Error,
    Field,
    GeometryError,
    HalfPlaneMap,
    InternalError,
    PreconditionError,
    ResolutionError,
    ResourceError,
    SolverError,
    halfplane_distance,
    set_threads,
    threads,
)

try:
    from ._pml import run_cli
except ImportError:  # built without the command line tool
    run_cli = None

# Process exit status used by the command line tool for each error type.
EXIT_CODES = {
    DomainError: 1,
    PreconditionError: 1,
    ResourceError: 1,
    GeometryError: 2,
    SolverError: 3,
    ResolutionError: 4,
    InternalError: 5,
}

__all__ = [
    "BoundaryMeasure",
    "Domain",
    "Field",
    "HalfPlaneMap",
    "Error",
    "DomainError",
    "PreconditionError",
    "ResourceError",
    "GeometryError",
    "SolverError",
    "ResolutionError",
    "InternalError",
    "EXIT_CODES",
    "halfplane_distance",
    "run_cli",
    "set_threads",
    "threads",
]
