"""Compute-forward rate regions for discrete memoryless multiple-access channels."""

from .achievability import (
    ComputeTask,
    algorithm1_sstar,
    corollary_two_user,
    gaussian_cf_rates,
    gaussian_cf_region,
    joint_region,
    joint_region_fixed_b,
    mac_region,
    multi_receiver_region,
    seq_region,
    span_bases,
)
from .channel import ChannelSpec, JointDist, SpecError, build_joint
from .gflin import BudgetExceeded, GfMatrix
from .regions import HalfSpace, Polytope, RateRegion, contains_point, contains_region

__all__ = [
    "BudgetExceeded",
    "ChannelSpec",
    "ComputeTask",
    "GfMatrix",
    "HalfSpace",
    "JointDist",
    "Polytope",
    "RateRegion",
    "SpecError",
    "algorithm1_sstar",
    "build_joint",
    "contains_point",
    "contains_region",
    "corollary_two_user",
    "gaussian_cf_rates",
    "gaussian_cf_region",
    "joint_region",
    "joint_region_fixed_b",
    "mac_region",
    "multi_receiver_region",
    "seq_region",
    "span_bases",
]
