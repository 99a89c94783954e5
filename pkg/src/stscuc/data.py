"""Perturbed-demand sample generation and graph snapshots for node/edge classification."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .milp import GAP_REACHED, OPTIMAL, solve
from .network import merge_parallel_lines
from .scuc import BTHETA, BuildOptions, build, extract_schedule

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
CRITICAL_LOADING = 0.75
NC, EC = "NC", "EC"


class SampleGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Perturbation:
    """Multiplicative demand noise: one global factor times one factor per bus.

    Factors are uniform on ``[1 - amplitude, 1 + amplitude]``.
    """

    global_amplitude: float = 0.10
    bus_amplitude: float = 0.05

    def draw(self, base_demand, rng):
        n = base_demand.shape[0]
        s = rng.uniform(1 - self.global_amplitude, 1 + self.global_amplitude)
        per_bus = rng.uniform(1 - self.bus_amplitude, 1 + self.bus_amplitude, size=(n, 1))
        return base_demand * s * per_bus


@dataclass
class SampleSet:
    demand: np.ndarray       # M x N x T
    commitment: np.ndarray   # M x G x T
    flows: np.ndarray        # M x K x T
    objective: np.ndarray    # M
    solve_time: np.ndarray   # M
    draw_index: np.ndarray   # M
    draws: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.objective)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return SampleSet(self.demand[idx], self.commitment[idx], self.flows[idx],
                         self.objective[idx], self.solve_time[idx], self.draw_index[idx],
                         self.draws, dict(self.meta))

    def to_dict(self):
        return {
            "format": FORMAT_VERSION,
            "meta": self.meta,
            "draws": int(self.draws),
            "samples": [
                {"id": i, "draw": int(self.draw_index[i]),
                 "demand": self.demand[i].tolist(),
                 "commitment": self.commitment[i].astype(int).tolist(),
                 "flows": self.flows[i].tolist(),
                 "objective": float(self.objective[i]),
                 "solve_time": float(self.solve_time[i])}
                for i in range(len(self))],
        }

    @classmethod
    def from_dict(cls, doc):
        _check_format(doc, "samples")
        items = doc["samples"]
        if not items:
            raise ValueError("sample file holds no samples")
        return cls(
            demand=np.array([s["demand"] for s in items], dtype=float),
            commitment=np.array([s["commitment"] for s in items], dtype=int),
            flows=np.array([s["flows"] for s in items], dtype=float).reshape(
                len(items), -1, len(items[0]["demand"][0])),
            objective=np.array([s["objective"] for s in items], dtype=float),
            solve_time=np.array([s["solve_time"] for s in items], dtype=float),
            draw_index=np.array([s["draw"] for s in items], dtype=int),
            draws=int(doc.get("draws", len(items))),
            meta=doc.get("meta", {}),
        )


def _check_format(doc, what):
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_VERSION:
        raise ValueError(f"{what}: unsupported or missing format version")


def _solve_draw(args):
    network, demand, formulation, mip_gap, time_limit = args
    model = build(network, demand, BuildOptions(formulation=formulation))
    sol = solve(model, mip_gap=mip_gap, time_limit=time_limit)
    if sol.status not in (OPTIMAL, GAP_REACHED):
        return None
    u, _, flows = extract_schedule(model, sol, network, demand.shape[1])
    return u, flows, sol.objective, sol.solve_time


def draw_demand(network, perturbation, seed, index):
    rng = np.random.default_rng([seed, index])
    return perturbation.draw(network.base_demand, rng)


def generate_samples(network, m_total, perturbation=None, seed=0, formulation=BTHETA,
                     mip_gap=0.001, time_limit=math.inf, jobs=1):
    """Solve SCUC on perturbed demand until ``m_total`` feasible samples exist.

    Draw ``i`` always uses the generator seeded with ``(seed, i)`` and samples are
    kept in draw order, so the result does not depend on ``jobs``.

    Raises
    ------
    SampleGenerationError
        When ``10 * m_total`` draws do not yield enough feasible samples.
    """
    if m_total < 1:
        raise ValueError("m_total must be at least 1")
    perturbation = perturbation or Perturbation()
    cap = 10 * m_total
    kept = []
    next_draw = 0
    pool = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        while len(kept) < m_total:
            if next_draw >= cap:
                rate = len(kept) / max(next_draw, 1)
                raise SampleGenerationError(
                    f"retry cap of {cap} draws exceeded with {len(kept)} feasible samples "
                    f"(feasibility rate {rate:.1%})")
            batch = range(next_draw, min(cap, next_draw + max(m_total - len(kept), jobs)))
            demands = [draw_demand(network, perturbation, seed, i) for i in batch]
            args = [(network, d, formulation, mip_gap, time_limit) for d in demands]
            results = pool.map(_solve_draw, args) if pool else map(_solve_draw, args)
            for i, d, res in zip(batch, demands, results):
                if res is None:
                    log.info("draw %d infeasible, discarded", i)
                    continue
                if len(kept) < m_total:
                    kept.append((i, d, res))
            next_draw = batch.stop
    finally:
        if pool:
            pool.shutdown()
    return SampleSet(
        demand=np.array([d for _, d, _ in kept]),
        commitment=np.array([r[0] for _, _, r in kept]),
        flows=np.array([r[1] for _, _, r in kept]),
        objective=np.array([r[2] for _, _, r in kept]),
        solve_time=np.array([r[3] for _, _, r in kept]),
        draw_index=np.array([i for i, _, _ in kept]),
        draws=next_draw,
        meta={"formulation": formulation, "mip_gap": mip_gap, "seed": seed,
              "global_amplitude": perturbation.global_amplitude,
              "bus_amplitude": perturbation.bus_amplitude},
    )


@dataclass
class GraphSnapshot:
    nf: np.ndarray          # N x T nodal demand
    ef: np.ndarray          # E x 2 [susceptance, limit]
    adjacency: np.ndarray   # N x N symmetric 0/1
    edge_index: np.ndarray  # E x 2 endpoints, row order matches ef
    gen_bus: np.ndarray     # G
    labels: np.ndarray      # G x T (NC) or E x T (EC)
    mode: str = NC

    def to_dict(self):
        return {"nf": self.nf.tolist(), "labels": self.labels.astype(int).tolist()}


def build_graphs(samples, network, mode=NC):
    """One graph snapshot per sample; topology and edge features are shared."""
    if mode not in (NC, EC):
        raise ValueError(f"mode must be NC or EC, got {mode!r}")
    n, horizon = network.n_buses, samples.demand.shape[2]
    if samples.demand.shape[1] != n:
        raise ValueError("sample demand does not match the network's bus count")
    if samples.commitment.shape[1] != network.n_generators:
        raise ValueError("sample commitments do not match the network's generators")
    lines = merge_parallel_lines(network.lines)
    if samples.flows.shape[1] != len(lines):
        raise ValueError("sample flows do not match the merged line count")
    ef = np.array([[ln.susceptance, ln.limit] for ln in lines], dtype=float).reshape(-1, 2)
    edge_index = np.array([[ln.from_bus, ln.to_bus] for ln in lines], dtype=int).reshape(-1, 2)
    adjacency = np.zeros((n, n), dtype=int)
    adjacency[edge_index[:, 0], edge_index[:, 1]] = 1
    adjacency[edge_index[:, 1], edge_index[:, 0]] = 1
    limits = ef[:, 1][:, None]
    graphs = []
    for m in range(len(samples)):
        if mode == NC:
            labels = samples.commitment[m].astype(int)
        else:
            labels = (np.abs(samples.flows[m]) / limits > CRITICAL_LOADING).astype(int)
        graphs.append(GraphSnapshot(samples.demand[m].reshape(n, horizon).copy(), ef, adjacency,
                                    edge_index, network.gen_bus, labels, mode))
    return graphs


def graphs_to_dict(graphs):
    if not graphs:
        return {"format": FORMAT_VERSION, "mode": None, "count": 0, "graphs": []}
    g0 = graphs[0]
    return {
        "format": FORMAT_VERSION,
        "mode": g0.mode,
        "count": len(graphs),
        "shape": {"N": int(g0.nf.shape[0]), "T": int(g0.nf.shape[1]), "E": int(g0.ef.shape[0]),
                  "G": int(g0.gen_bus.shape[0])},
        "ef": g0.ef.tolist(),
        "edge_index": g0.edge_index.tolist(),
        "adjacency": g0.adjacency.tolist(),
        "gen_bus": g0.gen_bus.tolist(),
        "graphs": [g.to_dict() for g in graphs],
    }


def graphs_from_dict(doc):
    _check_format(doc, "graphs")
    ef = np.array(doc["ef"], dtype=float).reshape(-1, 2)
    edge_index = np.array(doc["edge_index"], dtype=int).reshape(-1, 2)
    adjacency = np.array(doc["adjacency"], dtype=int)
    gen_bus = np.array(doc["gen_bus"], dtype=int)
    return [GraphSnapshot(np.array(g["nf"], dtype=float), ef, adjacency, edge_index, gen_bus,
                          np.array(g["labels"], dtype=int), doc["mode"])
            for g in doc["graphs"]]


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    val: tuple
    test: tuple

    def to_dict(self):
        return {"format": FORMAT_VERSION, "train": list(self.train), "val": list(self.val),
                "test": list(self.test)}

    @classmethod
    def from_dict(cls, doc):
        _check_format(doc, "split")
        return cls(tuple(doc["train"]), tuple(doc["val"]), tuple(doc["test"]))


def split_dataset(n_samples, ratios=(0.70, 0.15, 0.15), seed=0):
    """Shuffle ``range(n_samples)`` under ``seed`` and cut it at cumulative ratio boundaries.

    Cut points are ``floor(n * r_train)`` and ``floor(n * (r_train + r_val))``:
    1800 -> (1260, 270, 270), 200 -> (140, 30, 30), 10 -> (7, 1, 2).
    """
    if hasattr(n_samples, "__len__"):
        n_samples = len(n_samples)
    if n_samples < 3:
        raise ValueError("need at least 3 samples to split")
    if len(ratios) != 3 or min(ratios) < 0 or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError("ratios must be three non-negative numbers summing to 1")
    order = np.random.default_rng(seed).permutation(n_samples)
    cut1 = math.floor(n_samples * ratios[0] + 1e-9)
    cut2 = math.floor(n_samples * (ratios[0] + ratios[1]) + 1e-9)
    return DatasetSplit(tuple(int(i) for i in order[:cut1]),
                        tuple(int(i) for i in order[cut1:cut2]),
                        tuple(int(i) for i in order[cut2:]))
