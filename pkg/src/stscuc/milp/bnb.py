"""Best-first branch-and-bound over LP relaxations."""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .model import (GAP_REACHED, INFEASIBLE, OPTIMAL, TIME_LIMIT, UNBOUNDED, ModelError,
                    Solution)
from .simplex import LpResult, simplex

log = logging.getLogger(__name__)

INT_TOL = 1e-6
BRUTE_FORCE_CAP = 20


def solve_lp(arrays, lb, ub, method="highs"):
    """Solve the LP relaxation of ``arrays`` under the given bounds (stateless)."""
    return make_relaxation(arrays, method).solve(lb, ub)


def make_relaxation(arrays, method="highs"):
    if method == "highs":
        return HighsRelaxation(arrays)
    if method == "linprog":
        return LinprogRelaxation(arrays)
    if method == "simplex":
        return SimplexRelaxation(arrays)
    raise ValueError(f"unknown LP method {method!r}")


class SimplexRelaxation:
    """LP relaxations through the in-repo tableau simplex."""

    def __init__(self, arrays):
        self.arrays = arrays

    def solve(self, lb, ub):
        if np.any(lb > ub + 1e-9):
            return LpResult("infeasible")
        a = self.arrays
        return simplex(a.c, a.A_ub, a.b_ub, a.A_eq, a.b_eq, lb, ub)


class LinprogRelaxation:
    """Cold-started HiGHS through ``scipy.optimize.linprog``."""

    def __init__(self, arrays):
        self.arrays = arrays

    def solve(self, lb, ub):
        if np.any(lb > ub + 1e-9):
            return LpResult("infeasible")
        a = self.arrays
        res = linprog(a.c,
                      A_ub=a.A_ub if a.A_ub.shape[0] else None,
                      b_ub=a.b_ub if a.A_ub.shape[0] else None,
                      A_eq=a.A_eq if a.A_eq.shape[0] else None,
                      b_eq=a.b_eq if a.A_eq.shape[0] else None,
                      bounds=np.column_stack([lb, ub]), method="highs")
        if res.status == 0:
            return LpResult("optimal", res.x, float(res.fun), int(res.nit))
        if res.status == 2:
            return LpResult("infeasible")
        if res.status == 3:
            return LpResult("unbounded")
        raise RuntimeError(f"LP solver failed: {res.message}")


class HighsRelaxation:
    """One persistent HiGHS LP; each solve restarts from the previous basis."""

    def __init__(self, arrays):
        import highspy

        self._hs = highspy
        self.arrays = arrays
        a = sp.vstack([arrays.A_ub, arrays.A_eq]).tocsc()
        n_ub = arrays.A_ub.shape[0]
        lp = highspy.HighsLp()
        lp.num_col_ = a.shape[1]
        lp.num_row_ = a.shape[0]
        lp.col_cost_ = np.asarray(arrays.c, dtype=float)
        lp.col_lower_ = np.asarray(arrays.lb, dtype=float)
        lp.col_upper_ = np.asarray(arrays.ub, dtype=float)
        lp.row_lower_ = np.concatenate([np.full(n_ub, -highspy.kHighsInf), arrays.b_eq])
        lp.row_upper_ = np.concatenate([arrays.b_ub, arrays.b_eq])
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = a.indptr.astype(np.int32)
        lp.a_matrix_.index_ = a.indices.astype(np.int32)
        lp.a_matrix_.value_ = a.data.astype(float)
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.passModel(lp)
        self.h = h
        self._all = np.arange(a.shape[1], dtype=np.int32)

    def solve(self, lb, ub):
        if np.any(lb > ub + 1e-9):
            return LpResult("infeasible")
        hs, h = self._hs, self.h
        h.changeColsBounds(len(self._all), self._all, np.asarray(lb, dtype=float),
                           np.asarray(ub, dtype=float))
        h.run()
        status = h.getModelStatus()
        if status == hs.HighsModelStatus.kOptimal:
            x = np.array(h.getSolution().col_value)
            return LpResult("optimal", x, float(h.getInfo().objective_function_value))
        if status == hs.HighsModelStatus.kInfeasible:
            return LpResult("infeasible")
        # ambiguous or failed: settle it with a cold solve
        h.clearSolver()
        return LinprogRelaxation(self.arrays).solve(lb, ub)


def _most_fractional(x, int_idx):
    """Index of the integer variable whose value is closest to 0.5 (lowest index on ties)."""
    if int_idx.size == 0:
        return None
    vals = x[int_idx]
    frac = np.abs(vals - np.round(vals))
    if frac.max() <= INT_TOL:
        return None
    score = np.round(frac, 12)
    return int(int_idx[int(np.argmax(score))])


def _gap(incumbent, bound):
    if not math.isfinite(incumbent):
        return math.inf
    if not math.isfinite(bound):
        return math.inf
    diff = max(incumbent - bound, 0.0)
    if diff == 0.0:
        return 0.0
    return diff / max(abs(incumbent), 1e-10)


def _try_assignment(relax, lb, ub, int_idx, assignment):
    """LP-check a (possibly partial) binary assignment; return (x, obj) if integral & feasible."""
    lo, hi = lb.copy(), ub.copy()
    for j, v in assignment.items():
        v = float(round(v))
        if v < lb[j] - INT_TOL or v > ub[j] + INT_TOL:
            return None
        lo[j] = hi[j] = v
    res = relax.solve(lo, hi)
    if res.status != "optimal":
        return None
    if _most_fractional(res.x, int_idx) is None:
        return res.x, res.fun
    # round the leftover binaries once and re-check
    for j in int_idx:
        if lo[j] != hi[j]:
            lo[j] = hi[j] = float(round(res.x[j]))
    res = relax.solve(lo, hi)
    if res.status == "optimal":
        return res.x, res.fun
    return None


def solve(model, mip_gap=0.001, time_limit=math.inf, lp_method="highs"):
    """Branch-and-bound solve of a MilpModel.

    Parameters
    ----------
    model : MilpModel
    mip_gap : float
        Relative gap ``(incumbent - bound) / |incumbent|`` at which the search stops.
    time_limit : float
        Wall-clock seconds.  On expiry the incumbent (if any) and bound are returned.
    lp_method : {"highs", "simplex"}
        Backend for the LP relaxations.

    Returns
    -------
    Solution
        ``solve_time`` covers this call only; model construction is excluded.
    """
    start = time.perf_counter()
    arrays = model.arrays()
    int_idx = np.flatnonzero(arrays.integer)
    lb0, ub0 = arrays.lb.copy(), arrays.ub.copy()
    # integrality of bounds on integer variables
    lb0[int_idx] = np.ceil(lb0[int_idx] - INT_TOL)
    ub0[int_idx] = np.floor(ub0[int_idx] + INT_TOL)

    relax = make_relaxation(arrays, lp_method)
    incumbent_x, incumbent = None, math.inf
    nodes = 0

    def finish(status, bound):
        gap = _gap(incumbent, bound) if incumbent_x is not None else math.inf
        if status == OPTIMAL:
            gap = 0.0 if incumbent_x is not None else gap
        obj = incumbent + arrays.constant if incumbent_x is not None else math.nan
        return Solution(status, obj, incumbent_x, time.perf_counter() - start, nodes, gap,
                        bound + arrays.constant)

    warm = {j: v for j, v in model.warm_start.items() if arrays.integer[j]}
    if warm:
        found = _try_assignment(relax, lb0, ub0, int_idx, warm)
        if found is not None:
            incumbent_x, incumbent = found
            log.debug("warm start accepted, objective %.6g", incumbent)

    root = relax.solve(lb0, ub0)
    nodes += 1
    if root.status == "infeasible":
        return finish(INFEASIBLE, math.inf)
    if root.status == "unbounded":
        return finish(UNBOUNDED, -math.inf)

    counter = itertools.count()
    heap = []

    def consider(res, lo, hi):
        nonlocal incumbent_x, incumbent
        if res.status != "optimal":
            return
        if res.fun >= incumbent - 1e-9 * max(1.0, abs(incumbent)):
            return
        j = _most_fractional(res.x, int_idx)
        if j is None:
            incumbent_x, incumbent = res.x.copy(), res.fun
            return
        heapq.heappush(heap, (res.fun, next(counter), lo, hi, res.x, j))

    consider(root, lb0, ub0)
    if incumbent_x is None and heap:
        # cheap primal heuristic: round the root relaxation
        rounded = {int(j): root.x[j] for j in int_idx}
        found = _try_assignment(relax, lb0, ub0, int_idx, rounded)
        if found is not None and found[1] < incumbent:
            incumbent_x, incumbent = found

    while heap:
        bound = heap[0][0]
        if _gap(incumbent, bound) <= mip_gap:
            status = OPTIMAL if _gap(incumbent, bound) == 0.0 else GAP_REACHED
            return finish(status, bound)
        if time.perf_counter() - start > time_limit:
            return finish(TIME_LIMIT, bound)
        node_bound, _, lo, hi, x, j = heapq.heappop(heap)
        if node_bound >= incumbent - 1e-9 * max(1.0, abs(incumbent)):
            continue
        for value in (math.floor(x[j]), math.ceil(x[j])):
            clo, chi = lo.copy(), hi.copy()
            clo[j] = chi[j] = float(value)
            res = relax.solve(clo, chi)
            nodes += 1
            if res.status == "unbounded":
                raise ModelError("unbounded LP relaxation below the root")
            consider(res, clo, chi)

    if incumbent_x is None:
        return finish(INFEASIBLE, math.inf)
    return finish(OPTIMAL, incumbent)


def brute_force_oracle(model, lp_method="simplex"):
    """Enumerate every binary assignment and keep the best LP (test oracle)."""
    start = time.perf_counter()
    arrays = model.arrays()
    int_idx = np.flatnonzero(arrays.integer)
    if int_idx.size > BRUTE_FORCE_CAP:
        raise ModelError(f"brute force limited to {BRUTE_FORCE_CAP} binaries, model has {int_idx.size}")
    relax = make_relaxation(arrays, lp_method)
    best_x, best = None, math.inf
    count = 0
    unbounded = False
    for bits in itertools.product((0.0, 1.0), repeat=int(int_idx.size)):
        lo, hi = arrays.lb.copy(), arrays.ub.copy()
        if np.any(np.array(bits) < lo[int_idx] - INT_TOL) or np.any(np.array(bits) > hi[int_idx] + INT_TOL):
            continue
        lo[int_idx] = bits
        hi[int_idx] = bits
        res = relax.solve(lo, hi)
        count += 1
        if res.status == "unbounded":
            unbounded = True
            break
        if res.status == "optimal" and res.fun < best:
            best_x, best = res.x, res.fun
    elapsed = time.perf_counter() - start
    if unbounded:
        return Solution(UNBOUNDED, -math.inf, None, elapsed, count, math.inf)
    if best_x is None:
        return Solution(INFEASIBLE, math.nan, None, elapsed, count, math.inf)
    return Solution(OPTIMAL, best + arrays.constant, best_x, elapsed, count, 0.0,
                    best + arrays.constant)
