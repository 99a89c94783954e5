"""B-theta and PTDF security-constrained unit commitment MILPs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .milp.model import EQ, GE, LE, MilpModel
from .network import compute_ptdf

BTHETA = "btheta"
PTDF = "ptdf"
FORMULATIONS = (BTHETA, PTDF)


class BuildError(ValueError):
    pass


class InconsistentFixingError(BuildError):
    def __init__(self, g, t, reason):
        self.g, self.t = g, t
        super().__init__(f"inconsistent fixing at (g={g}, t={t}): {reason}")


@dataclass(frozen=True)
class BuildOptions:
    formulation: str = BTHETA
    reserve_enabled: bool = True
    fixed_commitments: dict = field(default_factory=dict)
    warm_starts: dict = field(default_factory=dict)
    inactive_thermal: frozenset = frozenset()

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise BuildError(f"unknown formulation {self.formulation!r}")
        overlap = set(self.fixed_commitments) & set(self.warm_starts)
        if overlap:
            raise BuildError(f"fixed_commitments and warm_starts overlap on {sorted(overlap)[:5]}")
        object.__setattr__(self, "inactive_thermal", frozenset(self.inactive_thermal))


def _check_fixings(network, fixed, horizon):
    """Reject fixings that contradict the min up/down constraints as built."""
    for gi, gen in enumerate(network.generators):
        known = {0: 1 if gen.initial_on else 0}
        known.update({t: int(v) for (g, t), v in fixed.items() if g == gi})
        for t in range(1, horizon + 1):
            if known.get(t) != 1:
                continue
            # start-up at t forced: stays on for min_up periods (truncated at the horizon)
            if known.get(t - 1) == 0:
                for s in range(t + 1, min(horizon, t + gen.min_up - 1) + 1):
                    if known.get(s) == 0:
                        raise InconsistentFixingError(
                            gi, s, f"started at t={t} but min_up={gen.min_up}")
            # on at t: no start-up within the following min_down periods
            if t <= horizon - gen.min_down:
                for q in range(t + 2, t + gen.min_down + 1):
                    if known.get(q - 1) == 0 and known.get(q) == 1:
                        raise InconsistentFixingError(
                            gi, q, f"restart within min_down={gen.min_down} after t={t}")


def build(network, demand=None, options=None):
    """Build the SCUC MILP for ``network`` under an N x T ``demand`` matrix.

    Periods are numbered 1..T in constraint keys; variable keys use the same
    numbering (``("u", g, t)``, ``("v", g, t)``, ``("p", g, t)``, ``("r", g, t)``,
    ``("f", k, t)``, ``("theta", n, t)``).
    """
    options = options or BuildOptions()
    demand = network.base_demand if demand is None else np.asarray(demand, dtype=float)
    if demand.ndim != 2 or demand.shape[0] != network.n_buses:
        raise BuildError(f"demand must be {network.n_buses} x T, got {demand.shape}")
    horizon = demand.shape[1]
    if horizon < 1:
        raise BuildError("horizon must be at least one period")
    for (g, t), v in list(options.fixed_commitments.items()) + list(options.warm_starts.items()):
        if not (0 <= g < network.n_generators and 1 <= t <= horizon) or v not in (0, 1):
            raise BuildError(f"bad commitment entry ({g}, {t}) -> {v}")
    unknown = set(options.inactive_thermal) - set(range(network.n_lines))
    if unknown:
        raise BuildError(f"inactive_thermal references unknown lines {sorted(unknown)}")
    _check_fixings(network, options.fixed_commitments, horizon)

    m = MilpModel(f"scuc_{options.formulation}")
    gens = network.generators
    periods = range(1, horizon + 1)

    u, v, p, r = {}, {}, {}, {}
    for gi, gen in enumerate(gens):
        for t in periods:
            u[gi, t] = m.add_binary(("u", gi, t), obj=gen.cost_no_load)
            v[gi, t] = m.add_binary(("v", gi, t), obj=gen.cost_startup)
            p[gi, t] = m.add_var(("p", gi, t), 0.0, math.inf, obj=gen.cost_linear)
            r[gi, t] = m.add_var(("r", gi, t), 0.0, math.inf)

    fixed = options.fixed_commitments
    for (gi, t), val in fixed.items():
        m.fix(u[gi, t], val)
    for (gi, t), val in options.warm_starts.items():
        m.warm_start[u[gi, t]] = float(val)
    # v pinned by (10) only where both neighbouring commitments are known
    for gi, gen in enumerate(gens):
        for t in periods:
            prev = (1 if gen.initial_on else 0) if t == 1 else fixed.get((gi, t - 1))
            cur = fixed.get((gi, t))
            if prev is not None and cur is not None:
                m.fix(v[gi, t], 1 if (cur == 1 and prev == 0) else 0)

    for gi, gen in enumerate(gens):
        u0 = 1.0 if gen.initial_on else 0.0
        p0 = gen.initial_output
        for t in periods:
            m.add_constraint({p[gi, t]: 1.0, u[gi, t]: -gen.p_min}, GE, 0.0, key=("pmin", gi, t))
            m.add_constraint({p[gi, t]: 1.0, r[gi, t]: 1.0, u[gi, t]: -gen.p_max}, LE, 0.0,
                             key=("pmax", gi, t))
            if options.reserve_enabled:
                m.add_constraint({r[gi, t]: 1.0, u[gi, t]: -gen.ramp_10}, LE, 0.0,
                                 key=("ramp10", gi, t))
            # hourly ramping, with the initial state as period 0
            up = {p[gi, t]: 1.0, v[gi, t]: -gen.ramp_su}
            # P_{t-1} - P_t <= R_hr u_t + R_sd (v_t - u_t + u_{t-1})
            down = {p[gi, t]: -1.0, u[gi, t]: gen.ramp_sd - gen.ramp_hr, v[gi, t]: -gen.ramp_sd}
            rhs_up, rhs_down = 0.0, 0.0
            if t == 1:
                rhs_up = p0 + gen.ramp_hr * u0
                rhs_down = -p0 + gen.ramp_sd * u0
            else:
                up[p[gi, t - 1]] = -1.0
                up[u[gi, t - 1]] = -gen.ramp_hr
                down[p[gi, t - 1]] = 1.0
                down[u[gi, t - 1]] = -gen.ramp_sd
            m.add_constraint(up, LE, rhs_up, key=("ramp_up", gi, t))
            m.add_constraint(down, LE, rhs_down, key=("ramp_down", gi, t))
            # (8) min up, window truncated at t = 1
            window = range(max(1, t - gen.min_up + 1), t + 1)
            coeffs = {v[gi, q]: 1.0 for q in window}
            coeffs[u[gi, t]] = coeffs.get(u[gi, t], 0.0) - 1.0
            m.add_constraint(coeffs, LE, 0.0, key=("min_up", gi, t))
            # (9) min down, for t <= T - DT as printed
            if t <= horizon - gen.min_down:
                coeffs = {v[gi, q]: 1.0 for q in range(t + 1, t + gen.min_down + 1)}
                coeffs[u[gi, t]] = 1.0
                m.add_constraint(coeffs, LE, 1.0, key=("min_down", gi, t))
            # (10) start-up definition
            if t == 1:
                m.add_constraint({v[gi, t]: 1.0, u[gi, t]: -1.0}, GE, -u0, key=("startup", gi, t))
            else:
                m.add_constraint({v[gi, t]: 1.0, u[gi, t]: -1.0, u[gi, t - 1]: 1.0}, GE, 0.0,
                                 key=("startup", gi, t))

    if options.reserve_enabled:
        for t in periods:
            for gi in range(len(gens)):
                coeffs = {r[q, t]: 1.0 for q in range(len(gens))}
                coeffs[r[gi, t]] -= 1.0  # the self term cancels
                coeffs[p[gi, t]] = -1.0
                m.add_constraint(coeffs, GE, 0.0, key=("reserve", gi, t))

    _network_constraints(m, network, demand, options, p)
    return m


def _network_constraints(m, network, demand, options, p):
    horizon = demand.shape[1]
    periods = range(1, horizon + 1)
    gen_at = [[] for _ in range(network.n_buses)]
    for gi, gen in enumerate(network.generators):
        gen_at[gen.bus].append(gi)
    lines = network.lines
    f = {}
    for k in range(len(lines)):
        for t in periods:
            f[k, t] = m.add_var(("f", k, t), -math.inf, math.inf)

    if options.formulation == BTHETA:
        theta = {}
        for n in range(network.n_buses):
            for t in periods:
                theta[n, t] = m.add_var(("theta", n, t), -math.inf, math.inf)
        for k, ln in enumerate(lines):
            for t in periods:
                m.add_constraint({f[k, t]: 1.0, theta[ln.from_bus, t]: -ln.susceptance,
                                  theta[ln.to_bus, t]: ln.susceptance}, EQ, 0.0,
                                 key=("flow", k, t))
        for n in range(network.n_buses):
            for t in periods:
                coeffs = {p[gi, t]: 1.0 for gi in gen_at[n]}
                for k, ln in enumerate(lines):
                    if ln.to_bus == n:
                        coeffs[f[k, t]] = coeffs.get(f[k, t], 0.0) + 1.0
                    elif ln.from_bus == n:
                        coeffs[f[k, t]] = coeffs.get(f[k, t], 0.0) - 1.0
                m.add_constraint(coeffs, EQ, float(demand[n, t - 1]), key=("balance", n, t))
        for t in periods:
            m.add_constraint({theta[network.slack, t]: 1.0}, EQ, 0.0, key=("slack", t))
    else:
        ptdf = compute_ptdf(network).values
        for k in range(len(lines)):
            row = ptdf[k]
            for t in periods:
                coeffs = {f[k, t]: 1.0}
                for n in range(network.n_buses):
                    if row[n] != 0.0:
                        for gi in gen_at[n]:
                            coeffs[p[gi, t]] = -row[n]
                m.add_constraint(coeffs, EQ, -float(row @ demand[:, t - 1]), key=("flow", k, t))
        for t in periods:
            m.add_constraint({p[gi, t]: 1.0 for gi in range(network.n_generators)}, EQ,
                             float(demand[:, t - 1].sum()), key=("system_balance", t))

    for k, ln in enumerate(lines):
        if k in options.inactive_thermal:
            continue
        for t in periods:
            m.add_constraint({f[k, t]: 1.0}, LE, ln.limit, key=("thermal_max", k, t))
            m.add_constraint({f[k, t]: 1.0}, GE, -ln.limit, key=("thermal_min", k, t))


def model_stats(model):
    """Counts of free binaries, continuous variables and constraints.

    Binaries pinned by equal bounds are reported separately as ``n_fixed_binaries``.
    """
    integer = np.asarray(model.integer, dtype=bool)
    pinned = np.asarray(model.lb) == np.asarray(model.ub)
    thermal = sum(1 for k in model.con_index if k[0] in ("thermal_max", "thermal_min"))
    return {
        "n_binaries": int(np.sum(integer & ~pinned)),
        "n_fixed_binaries": int(np.sum(integer & pinned)),
        "n_continuous": int(np.sum(~integer)),
        "n_constraints": model.n_constraints,
        "n_thermal_constraints": thermal,
    }


def extract_schedule(model, solution, network, horizon):
    """Commitment (G x T), dispatch (G x T) and line flows (K x T) of a solved model."""
    x = solution.x
    g_count, k_count = network.n_generators, network.n_lines
    u = np.array([[x[model.var("u", g, t)] for t in range(1, horizon + 1)] for g in range(g_count)])
    pg = np.array([[x[model.var("p", g, t)] for t in range(1, horizon + 1)] for g in range(g_count)])
    flows = np.array([[x[model.var("f", k, t)] for t in range(1, horizon + 1)]
                      for k in range(k_count)]).reshape(k_count, horizon)
    return np.round(u).astype(int).reshape(g_count, horizon), pg.reshape(g_count, horizon), flows
