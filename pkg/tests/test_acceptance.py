"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the pytest terminal summary)
before asserting, so a failing criterion still reports its measured values.
"""
import json
import math
import time

import numpy as np
import pytest

from helpers import random_milp, random_network, record
from test_neural import ecc_oracle, randomize, random_graph, sig, xenet_oracle
from stscuc.cases import tutorial_case
from stscuc.cli import main
from stscuc.data import GraphSnapshot, generate_samples
from stscuc.metrics import accuracy, bnc, bnts
from stscuc.milp import INFEASIBLE, OPTIMAL, brute_force_oracle, solve
from stscuc.neural import (EccLayer, EcModel, LstmLayer, ModelConfig, NcModel, XenetLayer,
                           gradient_check, model_gradient_check, topology_from_edges)
from stscuc.neural import autograd as ag
from stscuc.reduction import (CR, VR, ReductionPlan, assemble, oracle_plan, plan_variable_reduction,
                              verify_reduced_solution)
from stscuc.scuc import BTHETA, PTDF, BuildOptions, build, extract_schedule


def test_criterion_01_formulation_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, count, mismatched = 0.0, 0, 0
    while count < 20:
        net = random_network(rng, max_buses=6, max_gens=4, max_horizon=8)
        a = solve(build(net, options=BuildOptions(formulation=BTHETA)), mip_gap=0.0)
        b = solve(build(net, options=BuildOptions(formulation=PTDF)), mip_gap=0.0)
        if a.status != b.status:
            mismatched += 1
            continue
        if a.status != OPTIMAL:
            continue
        worst = max(worst, abs(a.objective - b.objective) / max(abs(a.objective), 1e-12))
        count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and mismatched == 0 and elapsed < 60
    record(1, ok, f"{count} instances, worst rel diff {worst:.2e}, status mismatches "
                  f"{mismatched}, {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_02_milp_vs_oracle():
    rng = np.random.default_rng(77)
    start = time.perf_counter()
    worst, bad = 0.0, 0
    for _ in range(50):
        m = random_milp(rng, max_binaries=12)
        got, want = solve(m, mip_gap=0.0), brute_force_oracle(m)
        if want.status == INFEASIBLE or got.status == INFEASIBLE:
            bad += got.status != want.status
            continue
        worst = max(worst, abs(got.objective - want.objective) / max(abs(want.objective), 1e-9))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and bad == 0 and elapsed < 120
    record(2, ok, f"50 MILPs, worst rel diff {worst:.2e}, status mismatches {bad}, "
                  f"{elapsed:.1f}s (< 120s)")
    assert ok


@pytest.fixture(scope="module")
def desk_instances():
    """Perturbed tutorial-case samples plus random small networks, solved at gap 0."""
    out = []
    case = tutorial_case()
    s = generate_samples(case, 6, seed=5, mip_gap=0.0)
    for i in range(len(s)):
        out.append((case, s.demand[i], s.commitment[i], s.flows[i], s.objective[i]))
    rng = np.random.default_rng(31)
    while len(out) < 16:
        net = random_network(rng, limit_scale=(0.3, 0.8))
        m = build(net)
        sol = solve(m, mip_gap=0.0)
        if sol.status != OPTIMAL:
            continue
        u, _, flows = extract_schedule(m, sol, net, net.horizon)
        out.append((net, net.base_demand, u, flows, sol.objective))
    return out


def test_criterion_03_oracle_constraint_screening(desk_instances):
    worst, violations, removed = 0.0, 0, 0
    for net, demand, u, flows, base in desk_instances:
        plan = oracle_plan(u, flows, net)
        model = assemble(CR, plan, net, demand)
        sol = solve(model, mip_gap=0.0)
        worst = max(worst, bnc(base, sol.objective) if sol.has_solution else math.inf)
        violations += len(verify_reduced_solution(model, sol, net, demand, plan.inactive_lines))
        removed += len(plan.inactive_lines)
    ok = f"{worst:.2f}" == "0.00" and violations == 0
    record(3, ok, f"{len(desk_instances)} instances, {removed} limits removed, max BNC "
                  f"{worst:.2e}% (prints {worst:.2f}), violations {violations}")
    assert ok


def test_criterion_04_oracle_variable_fixing(desk_instances):
    worst, checked, not_fewer = 0.0, 0, []
    for k, (net, demand, u, flows, _) in enumerate(desk_instances):
        base = solve(build(net, demand), mip_gap=0.001)
        fixed = {(g, t + 1): int(u[g, t]) for g in range(u.shape[0]) for t in range(u.shape[1])}
        red = solve(assemble(VR, ReductionPlan(fixed, {}, None), net, demand), mip_gap=0.001)
        worst = max(worst, bnc(base.objective, red.objective))
        if base.node_count > 1:
            checked += 1
            if not red.node_count < base.node_count:
                not_fewer.append(k)
    ok = worst <= 0.1 and not not_fewer and checked > 0
    record(4, ok, f"max BNC {worst:.4f}% (<= 0.1), fewer nodes on {checked - len(not_fewer)}"
                  f"/{checked} multi-node instances")
    assert ok


def test_criterion_05_gradients():
    rng = np.random.default_rng(55)
    errs = {}
    topo = topology_from_edges(random_graph(rng, 4), 4)
    ecc = EccLayer(3, 2, mlp_hidden=4, rng=rng)
    x = rng.normal(size=(2, 4, 3))
    e = rng.normal(size=(topo.n_edges, 2))
    y = rng.integers(0, 2, (2, 4, 2))
    errs["ECC"] = gradient_check(
        lambda: ag.binary_cross_entropy(ag.sigmoid(ecc(x, e, topo)), y), ecc.parameters())
    xen = XenetLayer(3, 2, 3, 3, 2, rng=rng)
    yn, ye = rng.integers(0, 2, (2, 4, 3)), rng.integers(0, 2, (2, topo.n_edges, 2))

    def xen_loss():
        nodes, edges = xen(x, e, topo)
        return ag.binary_cross_entropy(nodes, yn) + ag.binary_cross_entropy(edges, ye)

    errs["XENET"] = gradient_check(xen_loss, xen.parameters())
    cell = LstmLayer(2, 3, rng=rng)
    seq = rng.normal(size=(2, 5, 2))
    yl = rng.integers(0, 2, (2, 5, 3))
    errs["LSTM"] = gradient_check(
        lambda: ag.binary_cross_entropy(ag.sigmoid(cell(seq)), yl), cell.parameters())
    edges4 = np.array([(0, 1), (1, 2), (2, 3), (0, 2)])
    ef4 = rng.uniform(1, 5, (4, 2))
    for gnn in ("ecc", "xenet"):
        nc = NcModel(4, edges4, 4, [0, 2, 3], ModelConfig(gnn=gnn, depth=2, width=3,
                                                          mlp_hidden=3, lstm_hidden=3, seed=1))
        for _, p in nc.head.parameters():
            p.data = rng.normal(size=p.shape)
        graphs = [GraphSnapshot(rng.uniform(0, 2, (4, 4)), ef4, None, edges4, None,
                                rng.integers(0, 2, (3, 4))) for _ in range(2)]
        errs[f"NC/{gnn}"] = model_gradient_check(nc, graphs)
    edges3 = np.array([(0, 1), (1, 2), (0, 2)])
    ec = EcModel(3, edges3, 4, ModelConfig(gnn="xenet", depth=2, width=3, seed=2))
    for _, p in ec.head.parameters():
        p.data = rng.normal(size=p.shape)
    graphs = [GraphSnapshot(rng.uniform(0, 2, (3, 4)), rng.uniform(1, 5, (3, 2)), None, edges3,
                            None, rng.integers(0, 2, (3, 4)), "EC")]
    errs["EC"] = model_gradient_check(ec, graphs)
    ok = max(errs.values()) < 1e-4
    record(5, ok, "max rel error " + ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
           + " (< 1e-4)")
    assert ok


def test_criterion_06_layer_oracles():
    cell = LstmLayer(1, 1)
    for name, p in cell.parameters():
        p.data[:] = 1.0 if name.startswith("W_") else 0.0
    h, c = cell.step(np.ones((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
    c_want = sig(1.0) * math.tanh(1.0)
    h_want = sig(1.0) * math.tanh(c_want)
    lstm_err = max(abs(c.data.item() - c_want), abs(h.data.item() - h_want))
    rng = np.random.default_rng(66)
    ecc_err = xen_err = 0.0
    for _ in range(5):
        edges = random_graph(rng, 4)
        topo = topology_from_edges(edges, 4)
        layer = EccLayer(3, 2, mlp_hidden=4, rng=rng)
        randomize(layer, rng)
        x = rng.normal(size=(4, 3))
        ef = rng.normal(size=(len(edges), 2))
        got = layer(x, topo.directed_features(ef), topo).data
        ecc_err = max(ecc_err, np.abs(got - ecc_oracle(layer, x, edges, ef)).max())
        edges = random_graph(rng, 3, p=0.8)
        topo = topology_from_edges(edges, 3)
        xl = XenetLayer(2, 3, 4, 3, 2, rng=rng)
        randomize(xl, rng)
        x = rng.normal(size=(3, 2))
        e = rng.normal(size=(topo.n_edges, 3))
        nodes, e_out = xl(x, e, topo)
        e_dir = {(int(topo.senders[k]), int(topo.receivers[k])): e[k] for k in range(topo.n_edges)}
        want_n, want_e = xenet_oracle(xl, x, edges, e_dir)
        xen_err = max(xen_err, np.abs(nodes.data - want_n).max())
        for k in range(topo.n_edges):
            key = (int(topo.senders[k]), int(topo.receivers[k]))
            xen_err = max(xen_err, np.abs(e_out.data[k] - want_e[key]).max())
    ok = max(lstm_err, ecc_err, xen_err) <= 1e-9
    record(6, ok, f"LSTM c={c.data.item():.6f} h={h.data.item():.6f} err {lstm_err:.1e}; "
                  f"ECC err {ecc_err:.1e}; XENET err {xen_err:.1e} (<= 1e-9)")
    assert ok


def test_criterion_07_rule_boundaries():
    cases = [(0.95, "fixed", 1), (0.07, "fixed", 0), (0.30, "warm", 0), (0.60, "warm", 1),
             (0.90, "fixed", 1), (0.10, "fixed", 0), (0.50, "warm", 1)]
    passed = 0
    for p, kind, value in cases:
        plan = plan_variable_reduction(np.array([[p]]))
        passed += getattr(plan, kind) == {(0, 1): value}
    ok = passed == len(cases)
    record(7, ok, f"{passed}/{len(cases)} threshold cases as printed")
    assert ok


def test_criterion_08_metric_examples():
    one = np.zeros((2, 3, 4), dtype=int)
    two = one.copy()
    two[0, 1, 2] = 1
    x = np.random.default_rng(8).integers(0, 2, (2, 3, 4))
    checks = [
        (accuracy(x, x), 1.0), (accuracy(one, two), 1 - 1 / 24), (accuracy(x, 1 - x), 0.0),
        (bnc(1000, 1000), 0.0), (bnc(1000, 1001), 0.1), (bnc(1000, 999), 0.1),
        (bnts(10, 6), 40.0), (bnts(10, 10), 0.0),
    ]
    worst = max(abs(got - want) for got, want in checks)
    ok = worst <= 1e-12
    record(8, ok, f"{len(checks)} metric examples, worst abs error {worst:.1e} (<= 1e-12)")
    assert ok


END_TO_END = {"samples": 200, "seed": 0, "variant": "vcr", "jobs": 1}


def _end_to_end(outdir):
    start = time.perf_counter()
    cfg = outdir / "config.json"
    cfg.parent.mkdir(parents=True, exist_ok=True)
    cfg.write_text(json.dumps({**END_TO_END, "outdir": str(outdir / "out")}))
    assert main(["all", "--config", str(cfg)]) == 0
    out = outdir / "out"
    pred = json.loads((out / "plans" / "predictions.json").read_text())
    verify = json.loads((out / "reports" / "verification_vcr.json").read_text())
    split = json.loads((out / "graphs" / "split.json").read_text())
    plans = {p.name: p.read_text() for p in sorted((out / "plans").glob("plan_*.json"))}
    return {"pred": pred, "verify": verify, "split": split, "plans": plans,
            "elapsed": time.perf_counter() - start}


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    return _end_to_end(tmp_path_factory.mktemp("e2e_a"))


@pytest.mark.slow
def test_criterion_09_end_to_end(first_run):
    r = first_run
    sizes = tuple(len(r["split"][k]) for k in ("train", "val", "test"))
    nc_acc, ec_acc = r["pred"]["nc"]["accuracy"], r["pred"]["ec"]["accuracy"]
    s = r["verify"]["summary"]["VC-R"]
    feasible = s["feasible_rate"]
    med_bnc = s["bnc_pct"]["median"]
    med_saved = s["time_saved_pct"]["median"]
    ok = (sizes == (140, 30, 30) and nc_acc >= 0.90 and ec_acc >= 0.90 and feasible >= 0.95
          and med_bnc is not None and med_bnc <= 0.1 and med_saved is not None and med_saved > 0
          and r["elapsed"] <= 1800)
    record(9, ok, f"split {sizes}, NC acc {nc_acc:.4f}, EC acc {ec_acc:.4f} (>= 0.90); VC-R "
                  f"feasible {feasible:.0%} (>= 95%), median BNC {med_bnc:.4f}% (<= 0.1), "
                  f"median time saved {med_saved:.1f}% (> 0); {r['elapsed']:.0f}s (<= 1800s)")
    assert ok


@pytest.mark.slow
def test_criterion_10_determinism(first_run, tmp_path_factory):
    second = _end_to_end(tmp_path_factory.mktemp("e2e_b"))
    same_acc = all(first_run["pred"][k]["accuracy"] == second["pred"][k]["accuracy"]
                   for k in ("nc", "ec"))
    same_probs = all(first_run["pred"][k]["probs"] == second["pred"][k]["probs"]
                     for k in ("nc", "ec"))
    same_plans = first_run["plans"] == second["plans"] and len(second["plans"]) == 30
    ok = same_acc and same_plans and same_probs
    record(10, ok, f"accuracies identical {same_acc}, probabilities identical {same_probs}, "
                   f"{len(second['plans'])} reduction plans identical {same_plans}")
    assert ok
