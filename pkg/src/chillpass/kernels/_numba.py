"""numba-compiled kernels; signatures mirror ``_numpy``."""
import numpy as np
from numba import njit


@njit(cache=True)
def _chill_runs(values, center, threshold, min_steps):
    n = values.shape[0]
    starts = np.empty(n, dtype=np.int64)
    ends = np.empty(n, dtype=np.int64)
    sides = np.empty(n, dtype=np.int64)
    count = 0
    run_side = 0
    run_start = 0
    for i in range(n + 1):
        s = 0
        if i < n:
            d = values[i] - center
            if d > threshold:
                s = 1
            elif d < -threshold:
                s = -1
        if i == n or s != run_side:
            if run_side != 0 and (i - 1 - run_start) >= min_steps:
                starts[count] = run_start
                ends[count] = i - 1
                sides[count] = run_side
                count += 1
            run_side = s
            run_start = i
    return starts[:count].copy(), ends[:count].copy(), sides[:count].copy()


def chill_runs(values, center, threshold, min_steps):
    return _chill_runs(np.ascontiguousarray(values, dtype=np.float64),
                       float(center), float(threshold), int(min_steps))


@njit(cache=True)
def _intersect(a_start, a_end, b_start, b_end):
    na = a_start.shape[0]
    nb = b_start.shape[0]
    lo = np.empty(na + nb, dtype=np.float64)
    hi = np.empty(na + nb, dtype=np.float64)
    i = 0
    j = 0
    k = 0
    while i < na and j < nb:
        s = max(a_start[i], b_start[j])
        e = min(a_end[i], b_end[j])
        if s < e:
            lo[k] = s
            hi[k] = e
            k += 1
        if a_end[i] < b_end[j]:
            i += 1
        else:
            j += 1
    return lo[:k].copy(), hi[:k].copy()


def intersect_intervals(a_start, a_end, b_start, b_end):
    return _intersect(np.ascontiguousarray(a_start, dtype=np.float64),
                      np.ascontiguousarray(a_end, dtype=np.float64),
                      np.ascontiguousarray(b_start, dtype=np.float64),
                      np.ascontiguousarray(b_end, dtype=np.float64))


@njit(cache=True)
def _mean_relative_difference(reference, probe, epsilon):
    total = 0.0
    for i in range(reference.shape[0]):
        denom = reference[i] if reference[i] > epsilon else epsilon
        total += abs(probe[i] - reference[i]) / denom
    return total / reference.shape[0]


def mean_relative_difference(reference, probe, epsilon):
    return float(_mean_relative_difference(
        np.ascontiguousarray(reference, dtype=np.float64),
        np.ascontiguousarray(probe, dtype=np.float64), float(epsilon)))


@njit(cache=True)
def _bin_agreement(reference, probe, width):
    hits = 0
    for i in range(reference.shape[0]):
        if np.floor(reference[i] / width) == np.floor(probe[i] / width):
            hits += 1
    return hits / reference.shape[0]


def bin_agreement(reference, probe, width):
    return float(_bin_agreement(
        np.ascontiguousarray(reference, dtype=np.float64),
        np.ascontiguousarray(probe, dtype=np.float64), float(width)))


@njit(cache=True)
def _longest_true_run(mask):
    best = 0
    cur = 0
    for i in range(mask.shape[0]):
        if mask[i]:
            cur += 1
            if cur > best:
                best = cur
        else:
            cur = 0
    return best


def longest_true_run(mask):
    return int(_longest_true_run(np.ascontiguousarray(mask, dtype=np.bool_)))
