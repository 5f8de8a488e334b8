"""The threshold cost ``C_eps`` between discrete measures.

``d_eps(u1, u2)`` is 1 when the points are farther apart than ``eps`` and 0
otherwise; ``C_eps`` is the least probability of ``d_eps = 1`` over all
couplings.  It equals one minus the maximum mass that can be matched
through pairs at distance at most ``eps``.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .flow import bipartite_max_flow, interval_matching_1d
from .measures import CouplingPlan, DiscreteMeasure

# Dense Dinic is used up to this many atom pairs; larger 1-D problems take
# the interval sweep.
_DENSE_PAIRS = 250_000


def d_eps(u1, u2, eps: float) -> int:
    """Indicator of ``||u1 - u2|| > eps``; distance exactly ``eps`` gives 0."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    diff = np.atleast_1d(np.asarray(u1, dtype=float) - np.asarray(u2, dtype=float))
    return int(np.sqrt(np.sum(diff**2)) > eps)


def _near(mu1: DiscreteMeasure, mu2: DiscreteMeasure, eps: float) -> np.ndarray:
    return cdist(mu1.atoms, mu2.atoms) <= eps


def transport_cost(mu1: DiscreteMeasure, mu2: DiscreteMeasure, eps: float) -> float:
    """Exact ``C_eps(mu1, mu2)`` in ``[0, 1]``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if mu1.dim == 1 and mu1.size * mu2.size > _DENSE_PAIRS:
        matched = interval_matching_1d(mu1.atoms[:, 0], mu1.weights, mu2.atoms[:, 0], mu2.weights, eps)
    else:
        matched, _ = bipartite_max_flow(mu1.weights, mu2.weights, _near(mu1, mu2, eps))
    return float(min(1.0, max(0.0, 1.0 - matched)))


def optimal_plan(mu1: DiscreteMeasure, mu2: DiscreteMeasure, eps: float) -> CouplingPlan:
    """A coupling attaining ``C_eps``.

    Matched mass follows the max-flow; the unmatched remainders are coupled
    by their normalised product, which only charges far pairs (a near pair
    with mass left on both sides would be an augmenting path).
    """
    near = _near(mu1, mu2, eps)
    matched, flow = bipartite_max_flow(mu1.weights, mu2.weights, near)
    r1 = np.clip(mu1.weights - flow.sum(axis=1), 0.0, None)
    r2 = np.clip(mu2.weights - flow.sum(axis=0), 0.0, None)
    rest = 1.0 - matched
    plan = flow.copy()
    if rest > 0 and r1.sum() > 0 and r2.sum() > 0:
        plan += rest * np.outer(r1 / r1.sum(), r2 / r2.sum())
    return CouplingPlan(plan)


def plan_cost(plan: CouplingPlan, mu1: DiscreteMeasure, mu2: DiscreteMeasure, eps: float) -> float:
    """Mass a plan places on pairs farther apart than ``eps``."""
    return float(np.sum(plan.plan[~_near(mu1, mu2, eps)]))
