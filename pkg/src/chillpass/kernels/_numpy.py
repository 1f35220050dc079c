"""Pure-numpy reference kernels.

Every function here has a twin with the same signature in ``_numba``; the
package binds one set at import time (see ``chillpass.kernels``).
"""
import numpy as np


def chill_runs(values, center, threshold, min_steps):
    """Maximal same-side runs with ``|v - center| > threshold``.

    Returns ``(starts, ends, sides)`` where ``ends`` are inclusive indices and
    ``sides`` is +1 (above) or -1 (below). Only runs spanning at least
    ``min_steps`` index steps are kept. NaN samples never qualify.
    """
    values = np.asarray(values, dtype=np.float64)
    dev = values - center
    side = np.zeros(values.shape[0], dtype=np.int64)
    side[dev > threshold] = 1
    side[dev < -threshold] = -1
    if side.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    cuts = np.flatnonzero(np.diff(side)) + 1
    starts = np.concatenate(([0], cuts))
    ends = np.concatenate((cuts, [side.size])) - 1
    sides = side[starts]
    keep = (sides != 0) & (ends - starts >= min_steps)
    return starts[keep].astype(np.int64), ends[keep].astype(np.int64), sides[keep]


def intersect_intervals(a_start, a_end, b_start, b_end):
    """Intersection of two sorted, disjoint closed-interval lists.

    Zero-length contacts are dropped.
    """
    a_start = np.asarray(a_start, dtype=np.float64)
    a_end = np.asarray(a_end, dtype=np.float64)
    b_start = np.asarray(b_start, dtype=np.float64)
    b_end = np.asarray(b_end, dtype=np.float64)
    if a_start.size == 0 or b_start.size == 0:
        return np.empty(0), np.empty(0)
    lo = np.maximum(a_start[:, None], b_start[None, :])
    hi = np.minimum(a_end[:, None], b_end[None, :])
    ii, jj = np.nonzero(lo < hi)
    order = np.lexsort((jj, ii))
    return lo[ii, jj][order], hi[ii, jj][order]


def mean_relative_difference(reference, probe, epsilon):
    reference = np.asarray(reference, dtype=np.float64)
    probe = np.asarray(probe, dtype=np.float64)
    denom = np.maximum(reference, epsilon)
    return float(np.mean(np.abs(probe - reference) / denom))


def bin_agreement(reference, probe, width):
    """Fraction of time indices where both samples fall in the same bin."""
    reference = np.asarray(reference, dtype=np.float64)
    probe = np.asarray(probe, dtype=np.float64)
    same = np.floor(reference / width) == np.floor(probe / width)
    return float(np.count_nonzero(same)) / reference.shape[0]


def longest_true_run(mask):
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return 0
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return int(np.max(edges[1::2] - edges[0::2]))
