"""Dense two-phase tableau simplex for small LPs.

Solves ``min c.x  s.t.  A_ub x <= b_ub,  A_eq x == b_eq,  lb <= x <= ub``.
Pricing is Dantzig's rule; after a run of degenerate pivots the solver
switches to Bland's rule for the remainder of the phase, which rules out
cycling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
DEGENERATE_RUN = 50


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    fun: float = math.nan
    iterations: int = 0


class SimplexError(RuntimeError):
    pass


def _dense(a, ncols):
    if a is None:
        return np.zeros((0, ncols))
    if sp.issparse(a):
        return a.toarray().astype(float)
    return np.asarray(a, dtype=float).reshape(-1, ncols)


def _to_standard(c, a_ub, b_ub, a_eq, b_eq, lb, ub):
    """Rewrite with non-negative columns ``y`` where ``x = shift + transform @ y``."""
    n = len(c)
    cols = []  # (var, sign)
    shift = np.zeros(n)
    extra_rows = []  # (column index in y, upper bound)
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if math.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if math.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif math.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    transform = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        transform[j, k] = s
    cy = c @ transform
    rows, rhs, kinds = [], [], []
    for a, b, kind in ((a_ub, b_ub, "le"), (a_eq, b_eq, "eq")):
        if a.shape[0]:
            rows.append(a @ transform)
            rhs.append(b - a @ shift)
            kinds += [kind] * a.shape[0]
    for k, cap in extra_rows:
        r = np.zeros((1, len(cols)))
        r[0, k] = 1.0
        rows.append(r)
        rhs.append(np.array([cap]))
        kinds.append("le")
    a_std = np.vstack(rows) if rows else np.zeros((0, len(cols)))
    b_std = np.concatenate(rhs) if rhs else np.zeros(0)
    return cy, a_std, b_std, kinds, shift, transform


class _Tableau:
    def __init__(self, t, basis, n_cols):
        self.t = t
        self.basis = basis
        self.n_cols = n_cols  # columns eligible to enter
        self.iterations = 0

    def pivot(self, r, s):
        t = self.t
        t[r] /= t[r, s]
        col = t[:, s].copy()
        col[r] = 0.0
        t -= np.outer(col, t[r])
        self.basis[r] = s
        self.iterations += 1

    def run(self, max_iter):
        t = self.t
        degenerate = 0
        bland = False
        m = t.shape[0] - 1
        while True:
            if self.iterations >= max_iter:
                raise SimplexError("simplex iteration limit reached")
            red = t[-1, :self.n_cols]
            if bland:
                cand = np.flatnonzero(red < -PIVOT_TOL)
                if cand.size == 0:
                    return "optimal"
                s = int(cand[0])
            else:
                s = int(np.argmin(red))
                if red[s] >= -PIVOT_TOL:
                    return "optimal"
            col = t[:m, s]
            pos = col > PIVOT_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(m, np.inf)
            ratios[pos] = t[:m, -1][pos] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + PIVOT_TOL * max(1.0, abs(best)))
            r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            if best <= PIVOT_TOL:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, s)


def simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None, max_iter=50_000):
    """Solve a small LP with the dense two-phase tableau method."""
    c = np.asarray(c, dtype=float)
    n = c.size
    a_ub = _dense(A_ub, n)
    a_eq = _dense(A_eq, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    if np.any(lb > ub + FEAS_TOL):
        return LpResult("infeasible")

    cy, a, b, kinds, shift, transform = _to_standard(c, a_ub, b_ub, a_eq, b_eq, lb, ub)
    m, ny = a.shape
    n_slack = sum(k == "le" for k in kinds)
    # columns: y | slacks | artificials
    slack_of = {}
    s = 0
    for i, k in enumerate(kinds):
        if k == "le":
            slack_of[i] = ny + s
            s += 1
    neg = b < 0
    a = a.copy()
    b = b.copy()
    a[neg] *= -1
    b[neg] *= -1
    needs_art = [i for i in range(m) if kinds[i] == "eq" or neg[i]]
    n_art = len(needs_art)
    width = ny + n_slack + n_art
    t = np.zeros((m + 1, width + 1))
    t[:m, :ny] = a
    for i, col in slack_of.items():
        t[i, col] = -1.0 if neg[i] else 1.0
    t[:m, -1] = b
    basis = [0] * m
    for i, col in slack_of.items():
        if not neg[i]:
            basis[i] = col
    for k, i in enumerate(needs_art):
        col = ny + n_slack + k
        t[i, col] = 1.0
        basis[i] = col

    tab = _Tableau(t, basis, width)
    if n_art:
        # phase 1: minimise the sum of artificials
        t[-1, :] = 0.0
        t[-1, ny + n_slack:width] = 1.0
        for i in needs_art:
            t[-1] -= t[i]
        tab.run(max_iter)
        if t[-1, -1] < -FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            return LpResult("infeasible", iterations=tab.iterations)
        # drive remaining artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if tab.basis[i] >= ny + n_slack:
                row = t[i, :ny + n_slack]
                cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if cand.size:
                    tab.pivot(i, int(cand[0]))
                    keep.append(i)
            else:
                keep.append(i)
        t = np.vstack([t[keep][:, list(range(ny + n_slack)) + [width]], np.zeros((1, ny + n_slack + 1))])
        tab = _Tableau(t, [tab.basis[i] for i in keep], ny + n_slack)
        tab.iterations = 0
        m = len(keep)
    # phase 2
    t = tab.t
    t[-1, :] = 0.0
    t[-1, :ny] = cy
    for i, col in enumerate(tab.basis):
        if t[-1, col] != 0.0:
            t[-1] -= t[-1, col] * t[i]
    status = tab.run(max_iter)
    if status == "unbounded":
        return LpResult("unbounded", iterations=tab.iterations)
    y = np.zeros(t.shape[1] - 1)
    for i, col in enumerate(tab.basis):
        y[col] = t[i, -1]
    x = shift + transform @ y[:ny]
    return LpResult("optimal", x, float(c @ x), tab.iterations)
