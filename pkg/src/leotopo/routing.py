"""Graph-level routing: station attachment, destination-rooted shortest paths, stretch reports."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry as geo
from . import kernels
from .demand import DemandMatrix, GroundStation, station_positions, surface_distances
from .topology import Topology

MIN_ELEVATION = math.radians(25.0)
HOP_BUCKETS = (("short", 1, 4), ("midsize", 5, 10), ("long", 11, 15), ("very_long", 16, None))
PERCENTILES = (50, 75, 90, 99)


@dataclass
class WeightedNet:
    """Satellites plus ground stations at one instant.

    Edge weights are lengths in meters; dividing by the speed of light gives
    the propagation delay, so shortest paths are identical under either.
    """

    sat_pos: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    station_pos: np.ndarray
    visible: list  # per station: sorted satellite indices with elevation >= min_elev
    gsl_length: list  # per station: matching slant ranges (m)

    @property
    def num_sats(self) -> int:
        return self.sat_pos.shape[0]

    @property
    def num_stations(self) -> int:
        return self.station_pos.shape[0]

    def unreachable_stations(self) -> list[int]:
        return [i for i, v in enumerate(self.visible) if len(v) == 0]

    def isl_length(self, a: int, b: int) -> float:
        return float(np.linalg.norm(self.sat_pos[a] - self.sat_pos[b]))


def csr_from_edges(n: int, edges: np.ndarray, pos: np.ndarray):
    """Symmetric CSR adjacency with Euclidean edge lengths; neighbours sorted by index."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    w = np.linalg.norm(pos[src] - pos[dst], axis=1) if len(src) else np.zeros(0)
    return indptr, dst.astype(np.int64), w


def attach_stations(topology: Topology, sat_pos: np.ndarray, stations: Sequence[GroundStation],
                    min_elevation: float = MIN_ELEVATION) -> WeightedNet:
    """Add ground–satellite links to every satellite at or above ``min_elevation``."""
    sat_pos = np.asarray(sat_pos, dtype=float)
    indptr, indices, weights = csr_from_edges(sat_pos.shape[0], topology.edges, sat_pos)
    gpos = station_positions(stations) if len(stations) else np.zeros((0, 3))
    visible, lengths = [], []
    for g in gpos:
        d = sat_pos - g
        rng = np.linalg.norm(d, axis=1)
        elev = np.arcsin(np.clip(d @ g / (rng * np.linalg.norm(g)), -1.0, 1.0))
        idx = np.flatnonzero(elev >= min_elevation - 1e-12)
        visible.append(idx)
        lengths.append(rng[idx])
    return WeightedNet(sat_pos, indptr, indices, weights, gpos, visible, lengths)


@dataclass
class DestinationTree:
    """Shortest-path tree toward one ground station.

    ``dist[s]`` is the path length from satellite s down to the station and
    ``next_hop[s]`` the next satellite, or −1 when s downlinks directly.
    """

    dst: int
    dist: np.ndarray
    next_hop: np.ndarray

    def uplink(self, net: WeightedNet, src: int) -> tuple[int, float]:
        """Best entry satellite for ``src`` and the full path length; (−1, inf) if none."""
        vis = net.visible[src]
        if len(vis) == 0:
            return -1, math.inf
        total = net.gsl_length[src] + self.dist[vis]
        k = int(np.argmin(total))
        if not np.isfinite(total[k]):
            return -1, math.inf
        return int(vis[k]), float(total[k])

    def sat_path(self, first: int) -> list[int]:
        path = [first]
        while self.next_hop[path[-1]] >= 0:
            path.append(int(self.next_hop[path[-1]]))
            if len(path) > len(self.dist):
                raise RuntimeError("routing loop")
        return path


def destination_tree(net: WeightedNet, dst: int) -> DestinationTree:
    """Dijkstra rooted at station ``dst`` through its visible satellites.

    Other stations never appear inside the tree, so they cannot relay.
    """
    vis = net.visible[dst]
    dist, pred = kernels.dijkstra(net.indptr, net.indices, net.weights, net.num_sats,
                                  np.asarray(vis, dtype=np.int64), np.asarray(net.gsl_length[dst], dtype=float))
    return DestinationTree(dst, dist, pred)


@dataclass
class FlowPathStats:
    src: int
    dst: int
    path: list  # ["g<src>", sat, ..., sat, "g<dst>"]
    path_length: float
    geodesic: float
    stretch: float
    hops: int


def flow_path(net: WeightedNet, tree: DestinationTree, src: int, geodesic: float) -> FlowPathStats | None:
    if src == tree.dst:
        return FlowPathStats(src, src, [f"g{src}"], 0.0, 0.0, 1.0, 0)
    first, length = tree.uplink(net, src)
    if first < 0:
        return None
    sats = tree.sat_path(first)
    path = [f"g{src}"] + sats + [f"g{tree.dst}"]
    stretch = length / geodesic if geodesic > 0 else math.inf
    return FlowPathStats(src, tree.dst, path, length, geodesic, stretch, len(path) - 1)


def shortest_paths(net: WeightedNet, src: int, stations: Sequence[GroundStation]) -> dict[int, FlowPathStats]:
    """Paths from ``src`` to every other reachable station."""
    geod = surface_distances(stations)
    out = {}
    for dst in range(net.num_stations):
        tree = destination_tree(net, dst)
        fp = flow_path(net, tree, src, float(geod[src, dst]))
        if fp is not None:
            out[dst] = fp
    return out


def _percentile(x: np.ndarray, q: float) -> float:
    return float(np.percentile(x, q)) if len(x) else math.nan


def cdf_points(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v = np.sort(np.asarray(values, dtype=float))
    return v, np.arange(1, len(v) + 1) / max(len(v), 1)


def hop_histogram(hops: np.ndarray) -> dict[str, int]:
    hops = np.asarray(hops)
    out = {}
    for name, lo, hi in HOP_BUCKETS:
        m = hops >= lo if hi is None else (hops >= lo) & (hops <= hi)
        out[name] = int(m.sum())
    return out


@dataclass
class StretchReport:
    src: np.ndarray
    dst: np.ndarray
    stretch: np.ndarray
    hops: np.ndarray
    path_length: np.ndarray
    geodesic: np.ndarray
    unreachable: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.stretch)

    @property
    def mean_stretch(self) -> float:
        return float(self.stretch.mean()) if len(self) else math.nan

    @property
    def mean_hops(self) -> float:
        return float(self.hops.mean()) if len(self) else math.nan

    def percentile(self, q: float, metric: str = "stretch") -> float:
        return _percentile(getattr(self, metric), q)

    def summary(self) -> dict:
        return {
            "flows": len(self),
            "unreachable": len(self.unreachable),
            "mean_stretch": self.mean_stretch,
            "mean_hops": self.mean_hops,
            "stretch_percentiles": {str(q): self.percentile(q) for q in PERCENTILES},
            "hop_percentiles": {str(q): self.percentile(q, "hops") for q in PERCENTILES},
            "hop_buckets": hop_histogram(self.hops),
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["src", "dst", "stretch", "hops", "path_length_m", "geodesic_m"])
            for row in zip(self.src, self.dst, self.stretch, self.hops, self.path_length, self.geodesic):
                w.writerow([int(row[0]), int(row[1]), repr(float(row[2])), repr(float(row[3])),
                            repr(float(row[4])), repr(float(row[5]))])

    def cdf_to_csv(self, path, metric: str = "stretch") -> None:
        v, c = cdf_points(getattr(self, metric))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value", "cumulative_fraction"])
            for a, b in zip(v, c):
                w.writerow([repr(float(a)), repr(float(b))])


def stretch_report(topology: Topology, positions: np.ndarray | Sequence[np.ndarray],
                   stations: Sequence[GroundStation], demand: DemandMatrix,
                   min_elevation: float = MIN_ELEVATION) -> StretchReport:
    """Stretch and hop count of every nonzero flow.

    ``positions`` is one (n, 3) snapshot or a stack of them; with several
    snapshots each flow's stretch and hop count are averaged over the
    snapshots where it is reachable.
    """
    snaps = np.asarray(positions, dtype=float)
    if snaps.ndim == 2:
        snaps = snaps[None]
    src, dst, _ = demand.flows()
    geod = surface_distances(stations)
    n_f = len(src)
    acc_len = np.zeros(n_f)
    acc_hops = np.zeros(n_f)
    count = np.zeros(n_f, dtype=int)
    for pos in snaps:
        net = attach_stations(topology, pos, stations, min_elevation)
        for d in np.unique(dst):
            tree = destination_tree(net, int(d))
            for k in np.flatnonzero(dst == d):
                fp = flow_path(net, tree, int(src[k]), float(geod[src[k], d]))
                if fp is None:
                    continue
                acc_len[k] += fp.path_length
                acc_hops[k] += fp.hops
                count[k] += 1
    ok = count > 0
    unreachable = [(int(a), int(b)) for a, b in zip(src[~ok], dst[~ok])]
    length = acc_len[ok] / count[ok]
    g = geod[src[ok], dst[ok]]
    return StretchReport(src[ok], dst[ok], length / g, acc_hops[ok] / count[ok], length, g, unreachable)
