"""Compiled kernel for the one-dimensional dual-Lipschitz program."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _push(key, val, size, k, v):
    i = size
    key[i] = k
    val[i] = v
    while i > 0:
        parent = (i - 1) // 2
        if key[parent] <= key[i]:
            break
        key[parent], key[i] = key[i], key[parent]
        val[parent], val[i] = val[i], val[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _pop(key, val, size):
    size -= 1
    key[0] = key[size]
    val[0] = val[size]
    i = 0
    while True:
        lft = 2 * i + 1
        rgt = lft + 1
        m = i
        if lft < size and key[lft] < key[m]:
            m = lft
        if rgt < size and key[rgt] < key[m]:
            m = rgt
        if m == i:
            break
        key[m], key[i] = key[i], key[m]
        val[m], val[i] = val[i], val[m]
        i = m
    return size


@njit(cache=True)
def line_value(gaps, w, M):
    """Max of ``sum w_i f_i`` over ``|f_i| <= M``, ``|f_{i+1} - f_i| <= (1 - M) gap_i``.

    The value function of the running prefix is concave and piecewise
    linear in the last ``f``.  Its slope changes are kept in two heaps
    around the argmax (left: max-heap, right: min-heap) with lazy offsets,
    so adding a linear term and taking the sup over a window each cost
    ``O(log n)`` amortised.
    """
    n = w.size
    slope_gap = 1.0 - M
    cap = 2 * n + 4
    lkey = np.empty(cap)
    lval = np.empty(cap)
    rkey = np.empty(cap)
    rval = np.empty(cap)
    ln = 0
    rn = 0
    off_l = 0.0
    off_r = 0.0
    xs = 0.0
    v = 0.0
    for i in range(n):
        s = w[i]
        v += s * xs
        cl = 0.0
        cr = 0.0
        if s > 0:
            while True:
                if rn > 0:
                    p = rkey[0] + off_r
                    if p >= M:
                        rn = 0
                        continue
                    a = rval[0]
                    rn = _pop(rkey, rval, rn)
                    v += s * (p - xs)
                    xs = p
                    if s - a > 0:
                        s -= a
                        ln = _push(lkey, lval, ln, -(p - off_l), a)
                    else:
                        cl = s
                        cr = a - s
                        break
                else:
                    v += s * (M - xs)
                    xs = M
                    cl = s
                    break
        elif s < 0:
            while True:
                if ln > 0:
                    p = -lkey[0] + off_l
                    if p <= -M:
                        ln = 0
                        continue
                    a = lval[0]
                    ln = _pop(lkey, lval, ln)
                    v += s * (p - xs)
                    xs = p
                    if s + a < 0:
                        s += a
                        rn = _push(rkey, rval, rn, p - off_r, a)
                    else:
                        cl = s + a
                        cr = -s
                        break
                else:
                    v += s * (-M - xs)
                    xs = -M
                    cr = -s
                    break
        if i < n - 1:
            ell = slope_gap * gaps[i]
            off_l -= ell
            off_r += ell
            if cl > 0:
                ln = _push(lkey, lval, ln, -(xs - ell - off_l), cl)
            if cr > 0:
                rn = _push(rkey, rval, rn, xs + ell - off_r, cr)
    return v
