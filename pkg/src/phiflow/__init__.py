"""Generalized (phi-deformed) entropies on one-dimensional weighted grids:
deformed logarithms, displacement convexity, functional inequalities,
concentration bounds and minimizing-movement gradient flows."""

from .phi_calculus import (PhiCalculus, PhiFunction, dc_membership, exp_phi, h_phi, ln_phi,
                           order_indices, u_phi)
from .space import (Density, InadmissibleError, Potential, ReferenceSystem, WeightedSpace,
                    bregman, build_reference, entropy_H, fisher_I, normalized_reference)
from .transport import Geodesic, SegmentMeasure, displacement_interpolate, w2, w2_lp_oracle
from .flow import FlowState, jko_step, pde_oracle_solve, run_jko
from .convexity import convexity_deficit, estimate_K, functional_inequality_report
from .concentration import concentration_alpha, general_estimate_slack, herbst_phi, m_normal_bounds
from .expfamily import PhiExpFamily, bregman_project, partition_lambda, pythagoras_residual

__all__ = [
    "PhiCalculus", "PhiFunction", "dc_membership", "exp_phi", "h_phi", "ln_phi", "order_indices", "u_phi",
    "Density", "InadmissibleError", "Potential", "ReferenceSystem", "WeightedSpace", "bregman",
    "build_reference", "entropy_H", "fisher_I", "normalized_reference",
    "Geodesic", "SegmentMeasure", "displacement_interpolate", "w2", "w2_lp_oracle",
    "FlowState", "jko_step", "pde_oracle_solve", "run_jko",
    "convexity_deficit", "estimate_K", "functional_inequality_report",
    "concentration_alpha", "general_estimate_slack", "herbst_phi", "m_normal_bounds",
    "PhiExpFamily", "bregman_project", "partition_lambda", "pythagoras_residual",
]

__version__ = "0.1.0"
