"""Random instance generators shared by the test modules."""
import numpy as np

from stscuc.milp import GE, LE, MilpModel
from stscuc.network import Bus, Generator, Line, Network

# acceptance results by criterion number: (passed, detail), printed in the terminal summary
ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    return ok


def random_network(rng, max_buses=6, max_gens=4, max_horizon=8, limit_scale=(0.3, 1.0)):
    n = int(rng.integers(2, max_buses + 1))
    g_count = int(rng.integers(2, max_gens + 1))
    horizon = int(rng.integers(1, max_horizon + 1))
    edges = set()
    for b in range(1, n):
        edges.add((int(rng.integers(0, b)), b))
    for _ in range(int(rng.integers(0, n))):
        a, b = sorted(rng.choice(n, 2, replace=False).tolist())
        edges.add((a, b))
    gens = []
    for gi in range(g_count):
        pmax = float(rng.uniform(40, 120))
        on = bool(rng.random() < 0.5)
        gens.append(Generator(
            id=gi, bus=int(rng.integers(0, n)), p_min=float(rng.uniform(0, 0.3) * pmax), p_max=pmax,
            cost_linear=float(rng.uniform(5, 40)), cost_no_load=float(rng.uniform(0, 80)),
            cost_startup=float(rng.uniform(0, 200)), ramp_hr=float(rng.uniform(0.3, 1.0) * pmax),
            ramp_10=float(rng.uniform(0.5, 1.0) * pmax), ramp_su=pmax, ramp_sd=pmax,
            min_up=int(rng.integers(1, 4)), min_down=int(rng.integers(1, 4)),
            initial_on=on, initial_output=float(0.5 * pmax) if on else 0.0))
    caps = sorted(g.p_max for g in gens)
    firm = sum(caps[:-1])
    load = rng.uniform(0.2, 0.6, size=(n, horizon))
    load *= rng.uniform(0.3, 0.7) * firm / load.sum(axis=0)
    total = load.sum(axis=0).max()
    lines = tuple(Line(k, a, b, float(rng.uniform(2, 20)),
                       float(rng.uniform(*limit_scale) * total))
                  for k, (a, b) in enumerate(sorted(edges)))
    buses = tuple(Bus(i, i == 0) for i in range(n))
    return Network(buses, tuple(gens), lines, load)


def random_milp(rng, max_binaries=12, max_continuous=20):
    nb = int(rng.integers(1, max_binaries + 1))
    nc = int(rng.integers(0, max_continuous + 1))
    m = MilpModel("random")
    for _ in range(nb):
        m.add_binary(obj=float(rng.normal(0, 5)))
    for _ in range(nc):
        m.add_var(lb=0.0, ub=float(rng.uniform(1, 10)), obj=float(rng.normal(0, 3)))
    n = nb + nc
    for _ in range(int(rng.integers(1, 8))):
        coeffs = {j: float(rng.normal()) for j in range(n) if rng.random() < 0.6}
        if not coeffs:
            continue
        sense = LE if rng.random() < 0.7 else GE
        act = sum(coeffs.values())
        rhs = float(rng.uniform(-1, 1) + (0.3 * act if sense == LE else -0.3 * abs(act)))
        m.add_constraint(coeffs, sense, rhs)
    return m
