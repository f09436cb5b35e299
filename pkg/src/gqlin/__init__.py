"""Equivalent linear representations of convex invariant regions, with
provably bound-preserving finite-volume and discontinuous Galerkin schemes
whose preservation properties ship as executable checks."""

from .core import (
    AuxSample,
    ConstraintKind,
    DomainError,
    GqlRepresentation,
    InvariantRegion,
    Membership,
    NumericError,
    contains_direct,
    contains_gql,
    numeric_min_phi,
)

__version__ = "0.1.0"

__all__ = [
    "AuxSample",
    "ConstraintKind",
    "DomainError",
    "GqlRepresentation",
    "InvariantRegion",
    "Membership",
    "NumericError",
    "contains_direct",
    "contains_gql",
    "numeric_min_phi",
    "__version__",
]
