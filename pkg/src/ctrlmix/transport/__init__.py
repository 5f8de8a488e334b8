"""Metrics, costs and couplings between probability measures."""
from .coupling import maximal_coupling_densities
from .cost import d_eps, optimal_plan, plan_cost, transport_cost
from .dual_lipschitz import dual_lipschitz, dual_lipschitz_assignment, dual_lipschitz_line, dual_lipschitz_with_witness, merged_support
from .measures import CouplingPlan, DensityGrid, DiscreteMeasure, tv_distance_grid
from .shift import (
    ProductDensity,
    ShiftMap,
    cost_tv_inequality_check,
    invert_shift,
    pushforward_density,
    shift_tv,
    verify_shift_tv_bound,
)

__all__ = [
    "CouplingPlan", "DensityGrid", "DiscreteMeasure", "ProductDensity", "ShiftMap",
    "cost_tv_inequality_check", "d_eps", "dual_lipschitz", "dual_lipschitz_assignment", "dual_lipschitz_line", "dual_lipschitz_with_witness",
    "invert_shift", "maximal_coupling_densities", "merged_support", "optimal_plan", "plan_cost",
    "pushforward_density", "shift_tv", "transport_cost", "tv_distance_grid", "verify_shift_tv_bound",
]
