"""Turn predicted probabilities into commitment fixings, warm starts and
thermal-limit removals, and assemble the reduced SCUC variants."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import CRITICAL_LOADING, FORMAT_VERSION
from .network import compute_ptdf
from .scuc import BTHETA, BuildOptions, build, extract_schedule

CR, VR, VCR = "C-R", "V-R", "VC-R"
VARIANTS = (CR, VR, VCR)
VARIANT_ALIASES = {"cr": CR, "vr": VR, "vcr": VCR}


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    fix_on: float = 0.90
    fix_off: float = 0.10
    warm_boundary: float = 0.50
    line_active: float = 0.50

    def __post_init__(self):
        if not 0 < self.fix_off <= 0.5 <= self.warm_boundary <= self.fix_on < 1:
            raise ReductionError("thresholds must satisfy 0 < fix_off <= 0.5 <= warm_boundary "
                                 "<= fix_on < 1")
        if not 0 < self.line_active < 1:
            raise ReductionError("line_active must lie in (0, 1)")

    def to_dict(self):
        return {"fix_on": self.fix_on, "fix_off": self.fix_off,
                "warm_boundary": self.warm_boundary, "line_active": self.line_active}


@dataclass
class ReductionPlan:
    """Fixings and warm starts keyed by ``(g, t)`` with ``t`` starting at 1.

    ``None`` marks a component that was never planned, which is different
    from an empty plan.
    """

    fixed: dict | None = None
    warm: dict | None = None
    inactive_lines: frozenset | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.fixed is not None and self.warm is not None and set(self.fixed) & set(self.warm):
            raise ReductionError("fixed and warm assignments overlap")

    @property
    def has_variables(self):
        return self.fixed is not None and self.warm is not None

    @property
    def has_lines(self):
        return self.inactive_lines is not None

    def merged(self, other):
        return ReductionPlan(
            self.fixed if self.fixed is not None else other.fixed,
            self.warm if self.warm is not None else other.warm,
            self.inactive_lines if self.inactive_lines is not None else other.inactive_lines,
            {**other.provenance, **self.provenance})

    def to_dict(self):
        def entries(d):
            return None if d is None else [[g, t, int(v)] for (g, t), v in sorted(d.items())]
        return {
            "format": FORMAT_VERSION,
            "fixed": entries(self.fixed),
            "warm": entries(self.warm),
            "inactive_lines": None if self.inactive_lines is None else sorted(self.inactive_lines),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict) or doc.get("format") != FORMAT_VERSION:
            raise ValueError("plan: unsupported or missing format version")

        def entries(items):
            return None if items is None else {(int(g), int(t)): int(v) for g, t, v in items}
        lines = doc.get("inactive_lines")
        return cls(entries(doc.get("fixed")), entries(doc.get("warm")),
                   None if lines is None else frozenset(int(k) for k in lines),
                   doc.get("provenance", {}))


def _check_probs(probs, what):
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2:
        raise ReductionError(f"{what} probabilities must be a 2-D array")
    if np.isnan(probs).any() or probs.min(initial=0.0) < 0 or probs.max(initial=0.0) > 1:
        raise ReductionError(f"{what} probabilities must lie in [0, 1]")
    return probs


def plan_variable_reduction(probs, thresholds=None):
    """Split every ``(g, t)`` into a fixing or a warm start.

    ``P >= fix_on`` fixes 1, ``P <= fix_off`` fixes 0, ``P < warm_boundary``
    warm-starts 0 and anything else warm-starts 1.
    """
    th = thresholds or Thresholds()
    probs = _check_probs(probs, "commitment")
    fixed, warm = {}, {}
    for g in range(probs.shape[0]):
        for t in range(probs.shape[1]):
            p = probs[g, t]
            key = (g, t + 1)
            if p >= th.fix_on:
                fixed[key] = 1
            elif p <= th.fix_off:
                fixed[key] = 0
            elif p < th.warm_boundary:
                warm[key] = 0
            else:
                warm[key] = 1
    return ReductionPlan(fixed=fixed, warm=warm, provenance={"thresholds": th.to_dict()})


def plan_constraint_reduction(probs, thresholds=None):
    """Lines whose predicted probability stays below ``line_active`` in every period."""
    th = thresholds or Thresholds()
    probs = _check_probs(probs, "line")
    if probs.shape[1] == 0:
        return frozenset()
    return frozenset(int(k) for k in np.nonzero(probs.max(axis=1) < th.line_active)[0])


def make_plan(commitment_probs=None, line_probs=None, thresholds=None):
    th = thresholds or Thresholds()
    plan = ReductionPlan(provenance={"thresholds": th.to_dict(), "source": "prediction"})
    if commitment_probs is not None:
        plan = plan_variable_reduction(commitment_probs, th).merged(plan)
    if line_probs is not None:
        plan.inactive_lines = plan_constraint_reduction(line_probs, th)
    return plan


def oracle_plan(commitment, flows, network):
    """Plan built from a known solution: every commitment fixed to its solved value,
    and lines never loaded above 75% marked inactive."""
    commitment = np.asarray(commitment, dtype=int)
    fixed = {(g, t + 1): int(commitment[g, t])
             for g in range(commitment.shape[0]) for t in range(commitment.shape[1])}
    limits = np.array([ln.limit for ln in network.lines], dtype=float)[:, None]
    loading = np.abs(np.asarray(flows, dtype=float)) / limits
    inactive = frozenset(int(k) for k in np.nonzero(~(loading > CRITICAL_LOADING).any(axis=1))[0])
    return ReductionPlan(fixed, {}, inactive, {"source": "oracle",
                                               "critical_loading": CRITICAL_LOADING})


def assemble(variant, plan, network, demand=None, formulation=BTHETA, reserve_enabled=True):
    """Build the reduced model for ``variant``.

    C-R removes thermal limits of inactive lines, V-R applies fixings and warm
    starts, VC-R applies both.
    """
    variant = VARIANT_ALIASES.get(variant, variant)
    if variant not in VARIANTS:
        raise ReductionError(f"unknown variant {variant!r}")
    use_lines = variant in (CR, VCR)
    use_vars = variant in (VR, VCR)
    if use_lines and not plan.has_lines:
        raise ReductionError(f"{variant} needs a constraint plan")
    if use_vars and not plan.has_variables:
        raise ReductionError(f"{variant} needs fixings and warm starts")
    options = BuildOptions(
        formulation=formulation,
        reserve_enabled=reserve_enabled,
        fixed_commitments=dict(plan.fixed) if use_vars else {},
        warm_starts=dict(plan.warm) if use_vars else {},
        inactive_thermal=frozenset(plan.inactive_lines) if use_lines else frozenset(),
    )
    return build(network, demand, options)


@dataclass(frozen=True)
class Violation:
    line: int
    period: int
    flow: float
    limit: float

    @property
    def overload(self):
        return abs(self.flow) - self.limit


def verify_reduced_solution(model, solution, network, demand=None, removed_lines=(), tol=1e-6):
    """Recompute flows on removed lines from the reduced dispatch and list overloads.

    Flows come from PTDF times net injection, independent of how the model
    represented the network.  ``period`` is 1-based.
    """
    removed = sorted(set(removed_lines))
    if not removed or not solution.has_solution:
        return []
    demand = network.base_demand if demand is None else np.asarray(demand, dtype=float)
    horizon = demand.shape[1]
    _, pg, _ = extract_schedule(model, solution, network, horizon)
    inj = -demand.copy()
    for g, gen in enumerate(network.generators):
        inj[gen.bus] += pg[g]
    flows = compute_ptdf(network).values @ inj
    out = []
    for k in removed:
        limit = network.lines[k].limit
        for t in range(horizon):
            if abs(flows[k, t]) > limit + tol:
                out.append(Violation(k, t + 1, float(flows[k, t]), float(limit)))
    return out
