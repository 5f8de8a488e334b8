"""Maximal coupling of two densities by the accept/residual construction."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import PathologicalDensityError
from ..rng import as_generator

MAX_REJECTIONS = 10**6


def maximal_coupling_densities(p: Callable, q: Callable, sample_p: Callable, sample_q: Callable,
                               rng, size: int | None = None):
    """Draw ``(x, y, coalesced)`` with ``x ~ p``, ``y ~ q`` and maximal overlap.

    ``x`` is drawn from ``p`` and kept for ``y`` with probability
    ``min(1, q(x)/p(x))``; otherwise ``y`` is drawn from the normalised
    residual ``(q - min(p, q))+`` by rejection from ``q``.  Then
    ``P{x = y} = 1 - TV(p, q)``.

    Parameters
    ----------
    p, q : callable
        Density evaluators on ``(..., d)`` points.
    sample_p, sample_q : callable
        ``(gen, n) -> (n, d)`` samplers.
    size : int, optional
        Number of independent draws; a single draw when omitted.
    """
    gen = as_generator(rng)
    n = 1 if size is None else int(size)
    x = np.asarray(sample_p(gen, n), dtype=float)
    px, qx = p(x), q(x)
    coalesced = gen.random(n) * px <= qx
    y = x.copy()
    todo = np.flatnonzero(~coalesced)
    tries = 0
    while todo.size:
        tries += 1
        if tries > MAX_REJECTIONS:
            raise PathologicalDensityError(f"residual rejection exceeded {MAX_REJECTIONS} attempts")
        cand = np.asarray(sample_q(gen, todo.size), dtype=float)
        pc, qc = p(cand), q(cand)
        keep = gen.random(todo.size) * qc < qc - np.minimum(pc, qc)
        y[todo[keep]] = cand[keep]
        todo = todo[~keep]
    if size is None:
        return x[0], y[0], bool(coalesced[0])
    return x, y, coalesced
