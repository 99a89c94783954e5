"""Solver-agnostic linear model and solution containers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<=", "==", ">="
_SENSES = (LE, EQ, GE)


class ModelError(ValueError):
    pass


class MilpModel:
    """Variables, linear constraints and a linear objective, with keyed registries.

    Variables and constraints are addressed by integer handles.  Builders may
    attach a hashable key to each (e.g. ``("u", g, t)``) so that downstream code
    can find them without knowing the build order.
    """

    def __init__(self, name="model"):
        self.name = name
        self.var_names = []
        self.lb = []
        self.ub = []
        self.integer = []
        self.obj = []
        self.obj_constant = 0.0
        self.warm_start = {}
        self.var_index = {}
        self.con_names = []
        self.senses = []
        self.rhs = []
        self.con_index = {}
        self._rows = []
        self._cols = []
        self._vals = []

    # -- construction ------------------------------------------------------
    def add_var(self, key=None, lb=0.0, ub=math.inf, integer=False, obj=0.0, name=None):
        if lb > ub:
            raise ModelError(f"variable {key or name}: lb {lb} > ub {ub}")
        if integer and (lb < 0 or ub > 1):
            # only binaries are needed here; general integers are not supported
            raise ModelError(f"integer variable {key or name} must have bounds within [0, 1]")
        idx = len(self.var_names)
        if key is not None:
            if key in self.var_index:
                raise ModelError(f"duplicate variable key {key!r}")
            self.var_index[key] = idx
        self.var_names.append(name or _name_of(key, "x", idx))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        self.obj.append(float(obj))
        return idx

    def add_binary(self, key=None, obj=0.0, name=None):
        return self.add_var(key, 0.0, 1.0, integer=True, obj=obj, name=name)

    def add_constraint(self, coeffs, sense, rhs, key=None, name=None):
        """Add ``sum(coef * x[idx]) <sense> rhs``; ``coeffs`` maps handle -> coefficient."""
        if sense not in _SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        row = len(self.senses)
        if key is not None:
            if key in self.con_index:
                raise ModelError(f"duplicate constraint key {key!r}")
            self.con_index[key] = row
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        nvar = len(self.var_names)
        for j, a in items:
            if not 0 <= j < nvar:
                raise ModelError(f"constraint {key or name}: unknown variable handle {j}")
            if a != 0.0:
                self._rows.append(row)
                self._cols.append(j)
                self._vals.append(float(a))
        self.con_names.append(name or _name_of(key, "c", row))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        return row

    def fix(self, handle, value):
        self.lb[handle] = float(value)
        self.ub[handle] = float(value)

    def var(self, *key):
        return self.var_index[key]

    def has_var(self, *key):
        return key in self.var_index

    # -- views -------------------------------------------------------------
    @property
    def n_vars(self):
        return len(self.var_names)

    @property
    def n_constraints(self):
        return len(self.senses)

    def matrix(self):
        """Constraint matrix as CSR (duplicate entries are summed)."""
        return sp.csr_matrix((self._vals, (self._rows, self._cols)),
                             shape=(self.n_constraints, self.n_vars))

    def arrays(self):
        return StandardArrays.from_model(self)

    def row(self, r):
        a = self.matrix().getrow(r)
        return dict(zip(a.indices.tolist(), a.data.tolist()))

    def objective_value(self, x):
        return float(np.dot(self.obj, x) + self.obj_constant)

    def keys_of_kind(self, kind):
        return [k for k in self.var_index if isinstance(k, tuple) and k and k[0] == kind]

    def constraint_keys_of_kind(self, kind):
        return [k for k in self.con_index if isinstance(k, tuple) and k and k[0] == kind]

    def max_violation(self, x, tol=0.0):
        """Largest constraint or bound violation of a point."""
        x = np.asarray(x, dtype=float)
        act = self.matrix() @ x
        rhs = np.asarray(self.rhs)
        senses = np.asarray(self.senses)
        viol = np.zeros_like(act)
        le = senses == LE
        ge = senses == GE
        eq = senses == EQ
        viol[le] = act[le] - rhs[le]
        viol[ge] = rhs[ge] - act[ge]
        viol[eq] = np.abs(act[eq] - rhs[eq])
        bound = np.maximum(np.asarray(self.lb) - x, x - np.asarray(self.ub))
        worst = max(viol.max(initial=0.0), bound.max(initial=0.0))
        return max(worst - tol, 0.0)


def _name_of(key, prefix, idx):
    if key is None:
        return f"{prefix}{idx}"
    if isinstance(key, tuple):
        return "_".join(str(p) for p in key)
    return str(key)


@dataclass
class StandardArrays:
    """Model split into ``A_ub x <= b_ub`` and ``A_eq x == b_eq`` blocks."""

    c: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    constant: float = 0.0

    @classmethod
    def from_model(cls, model):
        a = model.matrix()
        senses = np.asarray(model.senses, dtype=object)
        rhs = np.asarray(model.rhs, dtype=float)
        le = np.flatnonzero(senses == LE)
        ge = np.flatnonzero(senses == GE)
        eq = np.flatnonzero(senses == EQ)
        a_ub = sp.vstack([a[le], -a[ge]]).tocsr()
        b_ub = np.concatenate([rhs[le], -rhs[ge]])
        return cls(np.asarray(model.obj, dtype=float), a_ub, b_ub, a[eq].tocsr(), rhs[eq],
                   np.asarray(model.lb, dtype=float), np.asarray(model.ub, dtype=float),
                   np.asarray(model.integer, dtype=bool), model.obj_constant)


OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
GAP_REACHED = "GapReached"
TIME_LIMIT = "TimeLimit"


@dataclass
class Solution:
    status: str
    objective: float = math.nan
    x: np.ndarray = field(default=None, repr=False)
    solve_time: float = 0.0
    node_count: int = 0
    final_gap: float = math.inf
    bound: float = -math.inf

    @property
    def has_solution(self):
        return self.x is not None

    def value(self, handle):
        return float(self.x[handle])

    def values(self, model, kind):
        """Dict ``key -> value`` for every registered variable of ``kind``."""
        return {k: float(self.x[i]) for k, i in model.var_index.items()
                if isinstance(k, tuple) and k[0] == kind}
