"""Achievable rate-distortion regions as linear systems: generation, membership, projection."""

from mdlab.region.bounds import (
    MAX_ACTIVE_FAMILIES,
    CapExceeded,
    bounds_for,
    covering_subset_count,
    egc_bounds,
    nested_coset_bounds,
    rewrite_reconstructions,
    ssc_bounds,
    stage2_bounds,
    stage3_bounds,
    stage4_bounds,
    zb_bounds,
)
from mdlab.region.spec import Decoding, RdVector, RegionSpec, Summation, distortion_name, rate_name
from mdlab.region.system import (
    FEASIBILITY_TOL,
    BoundSystem,
    ConditioningError,
    Inequality,
    Membership,
    ProjectionBlowup,
    check_membership,
    exact_feasible,
    project_region,
)


def is_member(spec: RegionSpec, vector: RdVector, **kw) -> Membership:
    """Generate the system for ``spec`` and decide membership of ``vector``."""
    return check_membership(bounds_for(spec), vector.assignment(), **kw)


__all__ = [
    "BoundSystem",
    "CapExceeded",
    "ConditioningError",
    "Decoding",
    "FEASIBILITY_TOL",
    "Inequality",
    "MAX_ACTIVE_FAMILIES",
    "Membership",
    "ProjectionBlowup",
    "RdVector",
    "RegionSpec",
    "Summation",
    "bounds_for",
    "check_membership",
    "covering_subset_count",
    "distortion_name",
    "egc_bounds",
    "exact_feasible",
    "is_member",
    "nested_coset_bounds",
    "project_region",
    "rate_name",
    "rewrite_reconstructions",
    "ssc_bounds",
    "stage2_bounds",
    "stage3_bounds",
    "stage4_bounds",
    "zb_bounds",
]
