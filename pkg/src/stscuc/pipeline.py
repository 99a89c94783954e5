"""Base versus reduced SCUC solves for a batch of samples."""
from __future__ import annotations

import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor

from .metrics import VerificationRecord
from .milp import GAP_REACHED, OPTIMAL, solve
from .reduction import VARIANT_ALIASES, assemble, verify_reduced_solution
from .scuc import BTHETA, BuildOptions, InconsistentFixingError, build

log = logging.getLogger(__name__)


def timed_solve(model, mip_gap=0.001, time_limit=math.inf, repeats=1):
    """Solve ``repeats`` times and report the median solve time on the last solution."""
    times = []
    sol = None
    for _ in range(max(1, repeats)):
        sol = solve(model, mip_gap=mip_gap, time_limit=time_limit)
        times.append(sol.solve_time)
    sol.solve_time = statistics.median(times)
    return sol


def _ok(sol):
    return sol.status in (OPTIMAL, GAP_REACHED)


def verify_sample(network, demand, plan, variant, sample_id=0, formulation=BTHETA,
                  mip_gap=0.001, time_limit=math.inf, repeats=1, wrong_preds=0, repair=False):
    """Solve the base and reduced models for one demand profile.

    Returns
    -------
    record : VerificationRecord
    violations : list of Violation
        Overloads on lines whose limits were removed, before any repair.

    With ``repair`` set, lines found overloaded get their limits back and the
    reduced model is solved again.  The reported cost is the repaired one but
    the reported time is the first reduced solve only.
    """
    variant = VARIANT_ALIASES.get(variant, variant)
    base_sol = timed_solve(build(network, demand, BuildOptions(formulation=formulation)),
                           mip_gap, time_limit, repeats)
    if not _ok(base_sol):
        raise RuntimeError(f"sample {sample_id}: base model is {base_sol.status}")
    try:
        model = assemble(variant, plan, network, demand, formulation)
    except InconsistentFixingError as exc:
        log.info("sample %d: reduced model rejected (%s)", sample_id, exc)
        return VerificationRecord(sample_id, variant, False, base_sol.objective,
                                  base_sol.solve_time, math.nan, 0.0, wrong_preds,
                                  "InconsistentFixing"), []
    red = timed_solve(model, mip_gap, time_limit, repeats)
    if not _ok(red):
        return VerificationRecord(sample_id, variant, False, base_sol.objective,
                                  base_sol.solve_time, math.nan, red.solve_time, wrong_preds,
                                  red.status), []
    removed = plan.inactive_lines if variant != "V-R" and plan.inactive_lines else ()
    violations = verify_reduced_solution(model, red, network, demand, removed)
    cost, status = red.objective, red.status
    if violations and repair:
        keep = {v.line for v in violations}
        plan_fixed = type(plan)(plan.fixed, plan.warm, frozenset(plan.inactive_lines) - keep,
                                plan.provenance)
        again = solve(assemble(variant, plan_fixed, network, demand, formulation),
                      mip_gap=mip_gap, time_limit=time_limit)
        if _ok(again):
            cost, status = again.objective, "repaired"
    return VerificationRecord(sample_id, variant, True, base_sol.objective, base_sol.solve_time,
                              cost, red.solve_time, wrong_preds, status), violations


def _worker(args):
    return verify_sample(*args[0], **args[1])


def verify_samples(network, demands, plans, variant, sample_ids=None, wrong_preds=None, jobs=1,
                   **kwargs):
    """Run :func:`verify_sample` over aligned lists; output order follows the inputs."""
    sample_ids = list(range(len(demands))) if sample_ids is None else list(sample_ids)
    wrong_preds = [0] * len(demands) if wrong_preds is None else list(wrong_preds)
    tasks = [((network, d, p, variant, sid), dict(kwargs, wrong_preds=int(w)))
             for d, p, sid, w in zip(demands, plans, sample_ids, wrong_preds)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_worker, tasks))
    return [_worker(t) for t in tasks]
