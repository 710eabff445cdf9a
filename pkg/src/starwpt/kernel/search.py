"""Monotone one-dimensional grid search and bisection."""

import math

import numpy as np


class SearchInfeasible(RuntimeError):
    pass


def one_dim_search(feasible, lo, hi, step):
    """Smallest grid point lo, lo+step, ... <= hi where feasible() holds."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = lo
    while x <= hi + 1e-12 * step:
        if feasible(x):
            return min(x, hi)
        x += step
    raise SearchInfeasible(f"no feasible point in [{lo}, {hi}]")


def scan_grid(flags, grid, direction="asc"):
    """Vectorized counterpart: flags[i] = feasible(grid[i]), grid ascending.

    asc: first feasible point.  desc: scan from the top; return the
    smallest point of the first contiguous feasible run met from above
    (the two directions land within one grid step of each other when the
    feasible set is an interval).
    """
    flags = np.asarray(flags, dtype=bool)
    if not flags.any():
        raise SearchInfeasible("no feasible grid point")
    if direction == "asc":
        return float(grid[int(np.argmax(flags))])
    rev = flags[::-1]
    i0 = int(np.argmax(rev))                 # first feasible from the top
    later = np.argmax(~rev[i0:])             # first infeasible after that
    run_len = int(later) if (~rev[i0:]).any() else len(rev) - i0
    idx = len(flags) - 1 - (i0 + run_len - 1)
    return float(grid[idx])


def bisect_monotone(f, target, lo, hi, tol):
    """Solve f(x) = target for monotone f on [lo, hi]; returns midpoint of
    the final bracket.  Iterations <= ceil(log2((hi-lo)/tol))."""
    flo, fhi = f(lo), f(hi)
    increasing = fhi >= flo
    if not (min(flo, fhi) <= target <= max(flo, fhi)):
        raise SearchInfeasible(
            f"target {target} not bracketed by f({lo})={flo}, f({hi})={fhi}")
    iters = max(0, math.ceil(math.log2((hi - lo) / tol))) if hi > lo else 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (f(mid) < target) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)
