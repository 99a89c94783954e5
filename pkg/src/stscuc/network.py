"""Physical network model: buses, generators, lines, parallel-line merging and PTDF."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg


class NetworkError(ValueError):
    pass


class DisconnectedNetworkError(NetworkError):
    def __init__(self, isolated):
        self.isolated = sorted(int(b) for b in isolated)
        super().__init__(
            f"disconnected network: buses {self.isolated} are not connected to the slack bus")


@dataclass(frozen=True)
class Bus:
    id: int
    is_slack: bool = False


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    cost_linear: float
    cost_no_load: float
    cost_startup: float
    ramp_hr: float
    ramp_10: float
    ramp_su: float
    ramp_sd: float
    min_up: int = 1
    min_down: int = 1
    initial_on: bool = False
    initial_output: float = 0.0

    def __post_init__(self):
        if not 0 <= self.p_min <= self.p_max:
            raise NetworkError(f"generator {self.id}: need 0 <= p_min <= p_max")
        if min(self.ramp_hr, self.ramp_10, self.ramp_su, self.ramp_sd) < 0:
            raise NetworkError(f"generator {self.id}: ramps must be non-negative")
        if self.min_up < 1 or self.min_down < 1:
            raise NetworkError(f"generator {self.id}: min_up/min_down must be >= 1")
        if not 0 <= self.initial_output <= self.p_max:
            raise NetworkError(f"generator {self.id}: initial_output outside [0, p_max]")
        if not self.initial_on and self.initial_output != 0:
            raise NetworkError(f"generator {self.id}: initial_output must be 0 when initially off")


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float
    limit: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise NetworkError(f"line {self.id}: endpoints coincide (bus {self.from_bus})")
        if not self.susceptance > 0:
            raise NetworkError(f"line {self.id}: susceptance must be positive")
        if not self.limit > 0:
            raise NetworkError(f"line {self.id}: limit must be positive")

    @property
    def endpoints(self):
        return frozenset((self.from_bus, self.to_bus))


def merge_parallel_lines(raw_lines):
    """Collapse lines sharing an unordered endpoint pair into one equivalent line.

    The merged line keeps the orientation and position of the first member;
    susceptances add and the limit is the smallest member limit.
    """
    merged = {}
    order = []
    for line in raw_lines:
        key = line.endpoints
        if key not in merged:
            merged[key] = line
            order.append(key)
        else:
            first = merged[key]
            merged[key] = Line(first.id, first.from_bus, first.to_bus,
                               first.susceptance + line.susceptance,
                               min(first.limit, line.limit))
    return [merged[k] for k in order]


@dataclass(frozen=True, eq=False)
class Network:
    buses: tuple
    generators: tuple
    lines: tuple
    base_demand: np.ndarray = field(repr=False)
    name: str = "network"

    def __post_init__(self):
        ids = [b.id for b in self.buses]
        if ids != list(range(len(ids))):
            raise NetworkError("bus ids must be contiguous 0..N-1")
        if sum(b.is_slack for b in self.buses) != 1:
            raise NetworkError("exactly one slack bus is required")
        n = len(self.buses)
        for g in self.generators:
            if not 0 <= g.bus < n:
                raise NetworkError(f"generator {g.id} references unknown bus {g.bus}")
        seen = set()
        for ln in self.lines:
            for b in (ln.from_bus, ln.to_bus):
                if not 0 <= b < n:
                    raise NetworkError(f"line {ln.id} references unknown bus {b}")
            if ln.endpoints in seen:
                raise NetworkError(f"line {ln.id} duplicates a parallel line; merge first")
            seen.add(ln.endpoints)
        demand = np.array(self.base_demand, dtype=float)
        if demand.ndim != 2 or demand.shape[0] != n:
            raise NetworkError(f"base_demand must be N x T with N={n}, got {demand.shape}")
        demand.setflags(write=False)
        object.__setattr__(self, "base_demand", demand)

    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def n_generators(self):
        return len(self.generators)

    @property
    def n_lines(self):
        return len(self.lines)

    @property
    def horizon(self):
        return self.base_demand.shape[1]

    @property
    def slack(self):
        return next(b.id for b in self.buses if b.is_slack)

    @property
    def gen_bus(self):
        return np.array([g.bus for g in self.generators], dtype=int)

    @property
    def line_endpoints(self):
        return np.array([(ln.from_bus, ln.to_bus) for ln in self.lines], dtype=int).reshape(-1, 2)

    def incidence(self):
        """K x N branch-bus incidence: +1 at from_bus, -1 at to_bus."""
        c = np.zeros((self.n_lines, self.n_buses))
        for k, ln in enumerate(self.lines):
            c[k, ln.from_bus] = 1.0
            c[k, ln.to_bus] = -1.0
        return c

    def susceptance_matrix(self):
        c = self.incidence()
        b = np.array([ln.susceptance for ln in self.lines])
        return c.T @ (b[:, None] * c)

    def with_demand(self, demand):
        return Network(self.buses, self.generators, self.lines, demand, self.name)


@dataclass(frozen=True, eq=False)
class PtdfMatrix:
    values: np.ndarray
    ref_bus: int

    def flows(self, injections):
        """Line flows for net nodal injections (N or N x T)."""
        return self.values @ np.asarray(injections, dtype=float)


def _components(n, lines):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for ln in lines:
        parent[find(ln.from_bus)] = find(ln.to_bus)
    return [find(i) for i in range(n)]


def compute_ptdf(network):
    """Power transfer distribution factors relative to the slack bus.

    ``values[k, n]`` is the flow on line ``k`` (positive from ``from_bus`` to
    ``to_bus``) caused by injecting 1 MW at bus ``n`` and withdrawing it at the
    slack.

    Raises
    ------
    DisconnectedNetworkError
        If some bus has no path to the slack bus.
    """
    n = network.n_buses
    ref = network.slack
    roots = _components(n, network.lines)
    isolated = [i for i in range(n) if roots[i] != roots[ref]]
    if isolated:
        raise DisconnectedNetworkError(isolated)
    values = np.zeros((network.n_lines, n))
    if n > 1 and network.n_lines:
        keep = [i for i in range(n) if i != ref]
        bbus = network.susceptance_matrix()[np.ix_(keep, keep)]
        try:
            lu = scipy.linalg.lu_factor(bbus, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:  # pragma: no cover - caught above
            raise DisconnectedNetworkError(keep) from exc
        x_red = scipy.linalg.lu_solve(lu, np.eye(n - 1))
        b = np.array([ln.susceptance for ln in network.lines])
        values[:, keep] = (b[:, None] * network.incidence()[:, keep]) @ x_red
    values.setflags(write=False)
    return PtdfMatrix(values, ref)


def dc_flows_direct(network, injections):
    """Solve the B-theta system directly for balanced injections (reference path)."""
    p = np.asarray(injections, dtype=float)
    n = network.n_buses
    ref = network.slack
    keep = [i for i in range(n) if i != ref]
    theta = np.zeros(p.shape)
    if keep:
        bbus = network.susceptance_matrix()[np.ix_(keep, keep)]
        theta[keep] = np.linalg.solve(bbus, p[keep])
    b = np.array([ln.susceptance for ln in network.lines])
    ends = network.line_endpoints
    return b.reshape((-1,) + (1,) * (p.ndim - 1)) * (theta[ends[:, 0]] - theta[ends[:, 1]])


# --- case ingestion -------------------------------------------------------

def network_from_dict(doc, name="network"):
    """Build a Network from the case JSON schema (reactances converted to susceptances)."""
    raw_buses = doc["buses"]
    index = {}
    for pos, b in enumerate(raw_buses):
        if b["id"] in index:
            raise NetworkError(f"duplicate bus id {b['id']}")
        index[b["id"]] = pos
    buses = tuple(Bus(i, bool(b.get("slack", False))) for i, b in enumerate(raw_buses))

    def bus_of(ref, what):
        try:
            return index[ref]
        except KeyError:
            raise NetworkError(f"{what} references unknown bus {ref}") from None

    gens = []
    for i, g in enumerate(doc.get("generators", [])):
        gens.append(Generator(
            id=i, bus=bus_of(g["bus"], f"generator {g.get('id', i)}"),
            p_min=float(g["pmin"]), p_max=float(g["pmax"]),
            cost_linear=float(g["c"]), cost_no_load=float(g["c_nl"]),
            cost_startup=float(g["c_su"]),
            ramp_hr=float(g["ramp_hr"]), ramp_10=float(g["ramp_10"]),
            ramp_su=float(g["ramp_su"]), ramp_sd=float(g["ramp_sd"]),
            min_up=int(g["min_up"]), min_down=int(g["min_down"]),
            initial_on=bool(g["init_on"]), initial_output=float(g["init_p"])))
    raw_lines = []
    for i, ln in enumerate(doc.get("lines", [])):
        x = float(ln["x"])
        if not x > 0:
            raise NetworkError(f"line {ln.get('id', i)}: reactance must be positive")
        raw_lines.append(Line(i, bus_of(ln["from"], f"line {ln.get('id', i)}"),
                              bus_of(ln["to"], f"line {ln.get('id', i)}"), 1.0 / x,
                              float(ln["limit"])))
    lines = tuple(Line(k, ln.from_bus, ln.to_bus, ln.susceptance, ln.limit)
                  for k, ln in enumerate(merge_parallel_lines(raw_lines)))
    demand = np.array(doc["demand"], dtype=float)
    if demand.ndim != 2 or demand.shape[1] != len(buses):
        raise NetworkError("demand must be a list of hours, each listing MW per bus")
    return Network(buses, tuple(gens), lines, demand.T, name=doc.get("name", name))


def network_to_dict(network):
    return {
        "name": network.name,
        "buses": [{"id": b.id, "slack": b.is_slack} for b in network.buses],
        "generators": [
            {"id": g.id, "bus": g.bus, "pmin": g.p_min, "pmax": g.p_max,
             "c": g.cost_linear, "c_nl": g.cost_no_load, "c_su": g.cost_startup,
             "ramp_hr": g.ramp_hr, "ramp_10": g.ramp_10, "ramp_su": g.ramp_su,
             "ramp_sd": g.ramp_sd, "min_up": g.min_up, "min_down": g.min_down,
             "init_on": g.initial_on, "init_p": g.initial_output}
            for g in network.generators],
        "lines": [{"id": ln.id, "from": ln.from_bus, "to": ln.to_bus,
                   "x": 1.0 / ln.susceptance, "limit": ln.limit} for ln in network.lines],
        "demand": network.base_demand.T.tolist(),
    }


def load_case(path):
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    return network_from_dict(doc, name=path.stem)
