"""ISL topology generators: demand-aware (dynamic and static), +Grid and random."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import geometry as geo
from . import kernels
from .constellation import (Ephemeris, RangeGraph, ShellConfig, generate_shell, inter_orbit_partner,
                            range_graph, time_grid)
from .demand import DemandMatrix, FieldParams, FlowSet, GroundStation, flow_fields_at

MODES = {"plain": kernels.PLAIN, "prioritized": kernels.PRIORITIZED}


class TopologyError(ValueError):
    """A generator could not satisfy its constraints."""


@dataclass
class Topology:
    """Undirected, degree-bounded ISL edge set over flat satellite indices."""

    num_sats: int
    edges: np.ndarray  # (E, 2) int, a < b, lexicographically sorted
    kappa: int
    generator: str
    params: dict = field(default_factory=dict)
    isolated: list = field(default_factory=list)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if np.any(e[:, 0] == e[:, 1]):
            raise TopologyError("self-loop in edge set")
        e = np.sort(e, axis=1)
        e = np.unique(e, axis=0) if len(e) else e
        self.edges = e

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.num_sats)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.edges}

    def check(self, rgraph: RangeGraph | None = None) -> None:
        """Raise if the degree bound or range membership is violated."""
        deg = self.degree()
        if deg.max(initial=0) > self.kappa:
            raise TopologyError(f"degree {deg.max()} exceeds kappa={self.kappa}")
        if rgraph is not None and len(self.edges):
            ok = rgraph.adjacency[self.edges[:, 0], self.edges[:, 1]]
            if not ok.all():
                bad = self.edges[~ok][0]
                raise TopologyError(f"edge {tuple(bad)} is not in the range graph")

    def to_csv(self, path, config: ShellConfig, provenance: dict | None = None) -> None:
        meta = {"generator": self.generator, "kappa": self.kappa, "params": self.params}
        if provenance:
            meta.update(provenance)
        n_s = config.sats_per_orbit
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(meta, sort_keys=True, default=str) + "\n")
            w = csv.writer(fh)
            w.writerow(["orbit_a", "slot_a", "orbit_b", "slot_b"])
            for a, b in self.edges:
                w.writerow([a // n_s, a % n_s, b // n_s, b % n_s])

    @classmethod
    def from_csv(cls, path, config: ShellConfig) -> "Topology":
        with open(path) as fh:
            first = fh.readline()
            meta = json.loads(first[1:]) if first.startswith("#") else {}
            if not first.startswith("#"):
                fh.seek(0)
            rows = list(csv.DictReader(fh))
        n_s = config.sats_per_orbit
        edges = [(int(r["orbit_a"]) * n_s + int(r["slot_a"]), int(r["orbit_b"]) * n_s + int(r["slot_b"]))
                 for r in rows]
        return cls(config.num_sats, np.array(edges, dtype=np.int64).reshape(-1, 2),
                   int(meta.get("kappa", 4)), meta.get("generator", "unknown"), meta.get("params", {}))


def link_distance(s, s_prime, f, mode: str = "plain", length_unit: float = 1.0) -> float:
    """Per-flow link distance of s→s′ under field ``f`` sampled at ``s``.

    plain: |f⊥·Δ|; prioritized: |f⊥·Δ| / ‖Δ‖^(2·exp(−‖f‖)), with
    f⊥ = (f × s)/ρ and Δ = s − s′ measured in ``length_unit``.
    """
    s = np.asarray(s, dtype=float)
    s_prime = np.asarray(s_prime, dtype=float)
    if np.linalg.norm(s - s_prime) == 0.0:
        raise geo.GeometryError("coincident satellites have no link")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {tuple(MODES)}")
    cost = kernels.link_costs(s, np.asarray(f, dtype=float)[None], s_prime[None], length_unit, MODES[mode], 0.0)
    return float(cost[0])


@dataclass(frozen=True)
class StarfieldParams:
    kappa: int = 4
    K: float = 1e7
    eta: float = 1.0
    omega: float = 10.0
    crown: bool = True
    eps: float = 1e-12
    mode: str = "prioritized"
    length_unit: float = 1000.0
    min_distance: float | None = None  # defaults to the shell's intra-orbit spacing

    def __post_init__(self):
        if self.kappa < 2:
            raise ValueError("kappa must be >= 2")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {tuple(MODES)}")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")

    def field_params(self, config: ShellConfig) -> FieldParams:
        md = config.intra_orbit_spacing if self.min_distance is None else self.min_distance
        return FieldParams(self.K, self.eta, self.omega, self.crown, config.inclination,
                           self.length_unit, md)


def _aggregate_costs(pos, s, cands, flows, fp, params):
    fields = flow_fields_at(pos[s], flows, fp)
    return kernels.link_costs(pos[s], fields, pos[cands], params.length_unit,
                              MODES[params.mode], params.eps)


def starfield(rgraph: RangeGraph, eph: Ephemeris, demand: DemandMatrix,
              stations: Sequence[GroundStation], params: StarfieldParams = StarfieldParams()) -> Topology:
    """Demand-aware link selection at the window midpoint.

    Each satellite, in flat-index order, links to the in-range neighbour with
    the smallest aggregate link distance, then to ⌊κ/2⌋−1 angular neighbours at
    multiples of π/(⌊κ/2⌋). When the preferred partner is saturated the next
    best is tried, up to κ attempts. A link that already exists counts as chosen.
    """
    config = eph.config
    pos = eph.midpoint_positions()
    n = config.num_sats
    flows = FlowSet.from_demand(demand, stations, config.radius)
    fp = params.field_params(config)
    k_ang = params.kappa // 2 - 1
    deg = np.zeros(n, dtype=np.int64)
    adj: list[set] = [set() for _ in range(n)]
    isolated = []

    def try_link(s, ranked):
        for c in ranked[: params.kappa]:
            c = int(c)
            if c in adj[s]:
                return c
            if deg[s] < params.kappa and deg[c] < params.kappa:
                adj[s].add(c)
                adj[c].add(s)
                deg[s] += 1
                deg[c] += 1
                return c
        return None

    for s in range(n):
        nb = rgraph.neighbors(s)
        if len(nb) == 0:
            isolated.append(s)
            continue
        costs = _aggregate_costs(pos, s, nb, flows, fp, params)
        ranked = nb[np.argsort(costs, kind="stable")]
        chosen = try_link(s, ranked)
        s_star = ranked[0] if chosen is None else chosen
        others = nb[nb != s_star]
        if k_ang < 1 or len(others) == 0:
            continue
        ok = geo.orientation_ok(pos[s], pos[s_star], pos[others])
        pool = others[ok]
        if len(pool) == 0:
            continue
        for j in range(1, k_ang + 1):
            beta = j * math.pi / (k_ang + 1)
            scores = geo.angular_scores(pos[s], pos[s_star], beta, pos[pool])
            try_link(s, pool[np.argsort(scores, kind="stable")])

    edges = [(a, b) for a in range(n) for b in adj[a] if a < b]
    p = asdict(params)
    return Topology(n, np.array(edges, dtype=np.int64).reshape(-1, 2), params.kappa, "starfield", p, isolated)


def _feasible_offsets(config: ShellConfig, rgraph: RangeGraph, eph: Ephemeris, orbit: int) -> list[int]:
    """Offsets p for which every slot of ``orbit`` reaches its partner in the next orbit.

    Checks the range graph plus the exact window start, middle and end.
    """
    n_s = config.sats_per_orbit
    r2 = config.isl_range ** 2
    checks = [eph.at(eph.times[0]), eph.midpoint_positions(), eph.at(eph.times[-1])]
    slots = np.arange(n_s)
    a = orbit * n_s + slots
    out = []
    for p in range(n_s):
        b = np.array([_partner(config, orbit, j, p) for j in slots])
        if not rgraph.adjacency[a, b].all():
            continue
        if all(np.all(np.sum((P[a] - P[b]) ** 2, axis=1) <= r2) for P in checks):
            out.append(p)
    return out


def _partner(config: ShellConfig, orbit: int, slot: int, offset: int) -> int:
    return inter_orbit_partner(config, orbit, slot, offset)


def _orbit_pairs(config: ShellConfig) -> range:
    n_o = config.num_orbits
    if n_o < 2:
        return range(0)
    return range(n_o if n_o > 2 else 1)


def _intra_edges(config: ShellConfig, step: int = 1) -> list[tuple[int, int]]:
    n_s = config.sats_per_orbit
    out = []
    if n_s < 2:
        return out
    for o in range(config.num_orbits):
        for j in range(n_s):
            a, b = o * n_s + j, o * n_s + (j + step) % n_s
            if a != b:
                out.append((a, b))
    return out


def static_starfield(rgraph: RangeGraph, eph: Ephemeris, demand: DemandMatrix,
                     stations: Sequence[GroundStation], params: StarfieldParams = StarfieldParams()) -> Topology:
    """One inter-orbit offset per adjacent orbit pair, chosen by aggregate link distance.

    Intra-orbit links join slot neighbours j±1. For each orbit pair the offset
    p minimizing Σ_flows Σ_j D(O_j → O′_{j+p}) among window-feasible offsets is
    applied to every slot.
    """
    if params.kappa != 4:
        raise TopologyError("the static variant uses a fixed 2 intra + 2 inter split (kappa=4)")
    config = eph.config
    n_s = config.sats_per_orbit
    pos = eph.midpoint_positions()
    flows = FlowSet.from_demand(demand, stations, config.radius)
    fp = params.field_params(config)
    edges = _intra_edges(config)
    offsets = {}
    for o in _orbit_pairs(config):
        feasible = _feasible_offsets(config, rgraph, eph, o)
        if not feasible:
            raise TopologyError(f"no feasible inter-orbit offset between orbits {o} and {(o + 1) % config.num_orbits}")
        total = np.zeros(n_s)
        partners = np.array([[_partner(config, o, j, p) for p in range(n_s)] for j in range(n_s)])
        for j in range(n_s):
            s = o * n_s + j
            total += _aggregate_costs(pos, s, partners[j], flows, fp, params)
        best = min(feasible, key=lambda p: (total[p], p))
        offsets[o] = best
        edges += [(o * n_s + j, int(partners[j, best])) for j in range(n_s)]
    p = asdict(params)
    p["offsets"] = offsets
    topo = Topology(config.num_sats, np.array(edges, dtype=np.int64).reshape(-1, 2), 4, "static_starfield", p)
    return topo


def plus_grid(num_orbits: int, sats_per_orbit: int, seam_shift: int = 0) -> Topology:
    """Each satellite links to slot j±1 in its orbit and slot j in orbits i±1.

    ``seam_shift`` re-aligns the link between the last orbit and orbit 0 when
    inter-orbit phasing does not wrap around evenly.
    """
    n_o, n_s = num_orbits, sats_per_orbit
    edges = []
    for i in range(n_o):
        for j in range(n_s):
            a = i * n_s + j
            edges.append((a, i * n_s + (j + 1) % n_s))
            nxt = (i + 1) % n_o
            shift = seam_shift if nxt == 0 else 0
            edges.append((a, nxt * n_s + (j + shift) % n_s))
    edges = [(a, b) for a, b in edges if a != b]
    return Topology(n_o * n_s, np.array(edges, dtype=np.int64).reshape(-1, 2), 4, "plus_grid",
                    {"seam_shift": seam_shift})


def plus_grid_for(config: ShellConfig) -> Topology:
    return plus_grid(config.num_orbits, config.sats_per_orbit, config.seam_shift)


def random_topology(rgraph: RangeGraph, eph: Ephemeris, kappa: int = 4, seed: int = 0) -> Topology:
    """Seeded static random pattern: random intra/inter split, per-orbit intra step,
    per-orbit-pair random feasible inter offsets."""
    if kappa % 2 or kappa < 4:
        raise TopologyError("random topology needs an even kappa >= 4")
    config = eph.config
    n_s = config.sats_per_orbit
    rng = np.random.default_rng(seed)
    intra = 2 * int(rng.integers(1, kappa // 2))  # 2 .. kappa-2
    inter = kappa - intra
    edges = []
    steps_used = {}
    max_step = (n_s - 1) // 2
    for o in range(config.num_orbits):
        # orbits are rigid circles, so one slot's reach holds for all of them
        steps = [q for q in range(1, max_step + 1) if rgraph.adjacency[o * n_s, o * n_s + q]]
        if len(steps) < intra // 2:
            raise TopologyError(f"orbit {o} has too few in-range intra-orbit steps")
        chosen = rng.choice(steps, size=intra // 2, replace=False)
        steps_used[o] = sorted(int(q) for q in chosen)
        for q in chosen:
            edges += _intra_edges_orbit(o, n_s, int(q))
    offsets = {}
    for o in _orbit_pairs(config):
        feasible = _feasible_offsets(config, rgraph, eph, o)
        if len(feasible) < inter // 2:
            raise TopologyError(f"no feasible inter-orbit offset between orbits {o} and {(o + 1) % config.num_orbits}")
        chosen = rng.choice(feasible, size=inter // 2, replace=False)
        offsets[o] = sorted(int(p) for p in chosen)
        for p in chosen:
            edges += [(o * n_s + j, _partner(config, o, j, int(p))) for j in range(n_s)]
    return Topology(config.num_sats, np.array(edges, dtype=np.int64).reshape(-1, 2), kappa, "random",
                    {"seed": seed, "intra": intra, "inter": inter, "steps": steps_used, "offsets": offsets})


def _intra_edges_orbit(o: int, n_s: int, q: int) -> list[tuple[int, int]]:
    return [(o * n_s + j, o * n_s + (j + q) % n_s) for j in range(n_s)]


def dynamic_schedule(epochs: Sequence[tuple[float, float]], config: ShellConfig, demand: DemandMatrix,
                     stations: Sequence[GroundStation], params: StarfieldParams = StarfieldParams(),
                     step: float = 1.0) -> list[tuple[tuple[float, float], Topology]]:
    """One demand-aware topology per epoch, each from that epoch's own window."""
    out = []
    prev_end = None
    for start, end in epochs:
        if end <= start:
            raise ValueError("epoch end must follow its start")
        if prev_end is not None and abs(start - prev_end) > 1e-9:
            raise ValueError("epochs must be contiguous and non-overlapping")
        prev_end = end
        eph = generate_shell(config, time_grid(start, end, step))
        rg = range_graph(eph, config.isl_range)
        out.append(((start, end), starfield(rg, eph, demand, stations, params)))
    return out
