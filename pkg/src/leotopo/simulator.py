"""Packet-level discrete-event simulation over time-varying ISL topologies."""
from __future__ import annotations

import csv
import heapq
import json
import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constellation import ShellConfig, positions_at
from .demand import DemandMatrix, GroundStation, surface_distances
from .geometry import C_LIGHT
from .routing import MIN_ELEVATION, attach_stations, destination_tree, hop_histogram
from .topology import Topology

ISL, GSL = "isl", "gsl"
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class NetParams:
    """Link and traffic knobs; defaults follow the Phase-1 setup.

    ``rate_scale`` converts demand intensity into packets per second so that
    desk-scale runs stay tractable; ``route_refresh`` is how often (s) the
    positions snapshot and routing tables are rebuilt.
    """

    isl_bandwidth: float = 1e12
    gsl_bandwidth: float = 1e11
    isl_noise: float = 0.1
    gsl_noise: float = 0.001
    buffer_size: int = 1000
    packet_size: int = 12_000  # bytes
    isl_ref_distance: float | None = None  # default: intra-orbit spacing of the shell
    gsl_ref_distance: float = 550_000.0
    min_elevation: float = MIN_ELEVATION
    rate_scale: float = 4e-3
    route_refresh: float = 1.0
    max_hops: int = 255

    def __post_init__(self):
        for name in ("isl_bandwidth", "gsl_bandwidth", "isl_noise", "gsl_noise", "buffer_size",
                     "packet_size", "gsl_ref_distance", "route_refresh", "max_hops"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.isl_ref_distance is not None and self.isl_ref_distance <= 0:
            raise ValueError("isl_ref_distance must be positive")
        if self.rate_scale < 0:
            raise ValueError("rate_scale must be nonnegative")

    @property
    def packet_bits(self) -> float:
        return 8.0 * self.packet_size


def _log2_1p_snr(log2_snr):
    # log2(1 + 2^x) without overflow
    return np.logaddexp2(0.0, log2_snr)


def link_capacity(d, kind: str, params: NetParams, isl_ref: float | None = None):
    """Shannon rate B·ν·log2(1 + (2^(1/ν) − 1)(d_ref/d)²) in bits/s.

    Equals the nominal bandwidth at d = d_ref and decreases with distance.
    Evaluated in log space since 2^(1/ν) overflows for small ν.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("link length must be positive")
    if kind == ISL:
        bw, nu = params.isl_bandwidth, params.isl_noise
        ref = params.isl_ref_distance if params.isl_ref_distance is not None else isl_ref
        if ref is None:
            raise ValueError("ISL reference distance is not set")
    elif kind == GSL:
        bw, nu, ref = params.gsl_bandwidth, params.gsl_noise, params.gsl_ref_distance
    else:
        raise ValueError(f"unknown link kind {kind!r}")
    inv = 1.0 / nu
    # log2(2^(1/ν) − 1) = 1/ν + log2(1 − 2^(−1/ν))
    log2_k = inv + math.log1p(-math.exp(-inv * _LN2)) / _LN2
    cap = bw * nu * _log2_1p_snr(log2_k + 2.0 * np.log2(ref / d))
    return float(cap) if cap.ndim == 0 else cap


@dataclass
class FlowRecord:
    src: int
    dst: int
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    stretch_sum: float = 0.0
    hops_sum: int = 0
    rtt: list = field(default_factory=list)

    @property
    def mean_stretch(self) -> float:
        return self.stretch_sum / self.delivered if self.delivered else math.nan

    @property
    def mean_hops(self) -> float:
        return self.hops_sum / self.delivered if self.delivered else math.nan

    @property
    def jitter(self) -> float:
        return float(np.std(self.rtt)) if len(self.rtt) > 1 else math.nan


@dataclass
class Counters:
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    in_flight: int = 0


@dataclass
class SimReport:
    duration: float
    flows: dict  # (src, dst) -> FlowRecord
    link_forwards: dict  # (a, b) with a < b satellite indices -> packets forwarded
    data: Counters
    echo: Counters
    drops_by_cause: dict
    trace: list | None = None  # per-hop records when tracing is on

    @property
    def packets_routed(self) -> int:
        """Packets injected into the network, data and echoes alike."""
        return self.data.generated + self.echo.generated

    def link_usage(self) -> dict:
        total = self.packets_routed
        return {k: v / total for k, v in self.link_forwards.items()} if total else {}

    def _delivered_flows(self):
        return [f for f in self.flows.values() if f.delivered]

    @property
    def mean_stretch(self) -> float:
        """Average over delivered data packets."""
        fl = self._delivered_flows()
        n = sum(f.delivered for f in fl)
        return sum(f.stretch_sum for f in fl) / n if n else math.nan

    @property
    def mean_hops(self) -> float:
        fl = self._delivered_flows()
        n = sum(f.delivered for f in fl)
        return sum(f.hops_sum for f in fl) / n if n else math.nan

    def rtt_samples(self) -> np.ndarray:
        out = [r for f in self.flows.values() for r in f.rtt]
        return np.asarray(out, dtype=float)

    @property
    def mean_rtt(self) -> float:
        r = self.rtt_samples()
        return float(r.mean()) if len(r) else math.nan

    @property
    def mean_jitter(self) -> float:
        j = [f.jitter for f in self.flows.values() if len(f.rtt) > 1]
        return float(np.mean(j)) if j else math.nan

    def summary(self) -> dict:
        return {
            "duration_s": self.duration,
            "packets_routed": self.packets_routed,
            "data": vars(self.data),
            "echo": vars(self.echo),
            "drops_by_cause": dict(self.drops_by_cause),
            "mean_stretch": self.mean_stretch,
            "mean_hops": self.mean_hops,
            "mean_rtt_s": self.mean_rtt,
            "mean_jitter_s": self.mean_jitter,
        }


class _Link:
    __slots__ = ("busy_until", "finish", "forwards")

    def __init__(self):
        self.busy_until = 0.0
        self.finish = deque()
        self.forwards = 0


class _Tables:
    """Routing state for one refresh interval, frozen at its start time."""

    def __init__(self, sim: "_Sim", t0: float):
        cfg = sim.config
        self.pos = positions_at(cfg, t0)
        self.topology = sim.topology_at(t0)
        self.net = attach_stations(self.topology, self.pos, sim.stations, sim.params.min_elevation)
        self.trees = {}
        self.sim = sim

    def tree(self, dst: int):
        tr = self.trees.get(dst)
        if tr is None:
            tr = destination_tree(self.net, dst)
            self.trees[dst] = tr
        return tr


class _Sim:
    def __init__(self, schedule, config, stations, demand, params, duration, seed, trace):
        self.schedule = sorted(schedule, key=lambda e: e[0][0])
        self.config = config
        self.stations = list(stations)
        self.demand = demand
        self.params = params
        self.duration = float(duration)
        self.seed = seed
        self.n = config.num_sats
        self.isl_ref = config.intra_orbit_spacing
        self.geod = surface_distances(self.stations) if self.stations else np.zeros((0, 0))
        self.tables: dict[int, _Tables] = {}
        self.links: dict[tuple[int, int], _Link] = {}
        self.cap_cache: dict = {}
        self.heap: list = []
        self.seq = 0
        self.trace = [] if trace else None
        self.data = Counters()
        self.echo = Counters()
        self.drops = {"buffer": 0, "no_route": 0, "ttl": 0}
        self.flows: dict[tuple[int, int], FlowRecord] = {}

    def topology_at(self, t: float) -> Topology:
        for (start, end), topo in self.schedule:
            if start - 1e-9 <= t < end - 1e-9:
                return topo
        return self.schedule[-1][1]

    def tables_at(self, t: float) -> _Tables:
        k = int(math.floor(t / self.params.route_refresh + 1e-12))
        tb = self.tables.get(k)
        if tb is None:
            tb = _Tables(self, k * self.params.route_refresh)
            self.tables[k] = tb
        return tb

    def push(self, t, kind, pkt):
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, kind, pkt))

    def _capacity(self, tb, key, length):
        ck = (id(tb), key)
        cap = self.cap_cache.get(ck)
        if cap is None:
            kind = ISL if key[0] < self.n and key[1] < self.n else GSL
            cap = link_capacity(length, kind, self.params, self.isl_ref)
            self.cap_cache[ck] = cap
        return cap

    def transmit(self, t, pkt, a, b, length, tb):
        """Enqueue ``pkt`` on directed link a→b at time t; schedule arrival at b."""
        key = (a, b)
        link = self.links.get(key)
        if link is None:
            link = _Link()
            self.links[key] = link
        fin = link.finish
        while fin and fin[0] <= t:
            fin.popleft()
        if len(fin) >= self.params.buffer_size:
            self.drop(pkt, "buffer")
            return
        cap = self._capacity(tb, key, length)
        start = t if t > link.busy_until else link.busy_until
        done = start + self.params.packet_bits / cap
        link.busy_until = done
        fin.append(done)
        link.forwards += 1
        pkt[4] += length
        pkt[5] += 1
        if self.trace is not None:
            self.trace.append((pkt[0], a, b, t, done, done + length / C_LIGHT))
        self.push(done + length / C_LIGHT, 1, (pkt, b))

    def drop(self, pkt, cause):
        self.drops[cause] += 1
        counters = self.echo if pkt[6] else self.data
        counters.dropped += 1
        if not pkt[6]:
            self.flows[(pkt[1], pkt[2])].dropped += 1

    def at_node(self, t, pkt, node):
        """Forward a packet sitting at satellite ``node`` or station ``n + i``."""
        if pkt[5] >= self.params.max_hops:
            self.drop(pkt, "ttl")
            return
        tb = self.tables_at(t)
        dst = pkt[2]
        tree = tb.tree(dst)
        n = self.n
        if node >= n:
            src = node - n
            first, _ = tree.uplink(tb.net, src)
            if first < 0:
                self.drop(pkt, "no_route")
                return
            length = float(np.linalg.norm(tb.pos[first] - tb.net.station_pos[src]))
            self.transmit(t, pkt, node, first, length, tb)
            return
        if not math.isfinite(tree.dist[node]):
            self.drop(pkt, "no_route")
            return
        nxt = int(tree.next_hop[node])
        if nxt < 0:
            length = float(np.linalg.norm(tb.pos[node] - tb.net.station_pos[dst]))
            self.transmit(t, pkt, node, n + dst, length, tb)
        else:
            self.transmit(t, pkt, node, nxt, float(np.linalg.norm(tb.pos[node] - tb.pos[nxt])), tb)

    def deliver(self, t, pkt):
        src, dst = pkt[1], pkt[2]
        if pkt[6]:
            self.echo.delivered += 1
            # echo of flow (dst→src) returns to the data packet's source
            self.flows[(dst, src)].rtt.append(t - pkt[3])
            return
        self.data.delivered += 1
        rec = self.flows[(src, dst)]
        rec.delivered += 1
        g = self.geod[src, dst]
        rec.stretch_sum += pkt[4] / g if g > 0 else math.inf
        rec.hops_sum += pkt[5]
        self.echo.generated += 1
        echo = [pkt[0], dst, src, pkt[3], 0.0, 0, True]
        self.at_node(t, echo, self.n + dst)

    def run(self) -> SimReport:
        src, dst, lam = self.demand.flows()
        rates = lam * self.params.rate_scale
        rng = np.random.default_rng(self.seed)
        arrivals = []
        for k, (a, b, r) in enumerate(zip(src, dst, rates)):
            self.flows[(int(a), int(b))] = FlowRecord(int(a), int(b))
            if r <= 0 or self.duration <= 0:
                continue
            n_exp = int(r * self.duration + 10.0 * math.sqrt(r * self.duration) + 10)
            ts = np.cumsum(rng.exponential(1.0 / r, size=n_exp))
            while ts[-1] < self.duration:
                ts = np.concatenate([ts, ts[-1] + np.cumsum(rng.exponential(1.0 / r, size=n_exp))])
            ts = ts[ts < self.duration]
            arrivals.extend((float(t), k) for t in ts)
        arrivals.sort()
        pid = 0
        for t, k in arrivals:
            pid += 1
            # [id, src, dst, created, length, hops, is_echo]
            self.push(t, 0, [pid, int(src[k]), int(dst[k]), t, 0.0, 0, False])
        while self.heap:
            t, _, kind, item = heapq.heappop(self.heap)
            if t > self.duration:
                heapq.heappush(self.heap, (t, 0, kind, item))
                break
            if kind == 0:
                pkt = item
                self.data.generated += 1
                self.flows[(pkt[1], pkt[2])].generated += 1
                self.at_node(t, pkt, self.n + pkt[1])
            else:
                pkt, node = item
                if node >= self.n:
                    self.deliver(t, pkt)
                else:
                    self.at_node(t, pkt, node)
        for t, _, kind, item in self.heap:
            if kind == 1:
                pkt = item[0]
                (self.echo if pkt[6] else self.data).in_flight += 1
        usage = {}
        for (a, b), link in self.links.items():
            if a < self.n and b < self.n:
                key = (a, b) if a < b else (b, a)
                usage[key] = usage.get(key, 0) + link.forwards
        return SimReport(self.duration, self.flows, dict(sorted(usage.items())), self.data, self.echo,
                         self.drops, self.trace)


def run(schedule: Sequence[tuple[tuple[float, float], Topology]], config: ShellConfig,
        stations: Sequence[GroundStation], demand: DemandMatrix, params: NetParams = NetParams(),
        duration: float = 10.0, seed: int = 0, trace: bool = False) -> SimReport:
    """Simulate ``duration`` seconds of Poisson traffic over the scheduled topologies.

    Each flow (i, j) emits packets at rate Δ_ij·rate_scale. Links are FIFO
    with a B-packet buffer; serialization takes b·8/capacity and propagation
    length/c. Every delivered data packet is echoed straight back and its
    round trip recorded at the source. Positions, capacities and routing
    tables are frozen per ``route_refresh`` interval.
    """
    if not schedule:
        raise ValueError("schedule is empty")
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    return _Sim(schedule, config, stations, demand, params, duration, seed, trace).run()


def static_schedule(topology: Topology, duration: float) -> list:
    return [((0.0, max(duration, 1e-9)), topology)]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _cdf_rows(values):
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    return [(repr(float(x)), repr((i + 1) / n)) for i, x in enumerate(v)]


def replay_metrics(report: SimReport, out_dir, usage_bins: int = 20, header: str | None = None) -> dict:
    """Write CDF/histogram CSVs and return the percentile markers."""
    os.makedirs(out_dir, exist_ok=True)
    per_flow_stretch = [f.mean_stretch for f in report.flows.values() if f.delivered]
    per_flow_hops = [f.mean_hops for f in report.flows.values() if f.delivered]
    rtt = report.rtt_samples()
    usage = np.array(list(report.link_usage().values()), dtype=float)
    markers = {
        "stretch_p90": float(np.percentile(per_flow_stretch, 90)) if per_flow_stretch else None,
        "rtt_p75_s": float(np.percentile(rtt, 75)) if len(rtt) else None,
    }
    _write_csv(os.path.join(out_dir, "cdf_stretch.csv"), ["value", "cumulative_fraction"], _cdf_rows(per_flow_stretch))
    _write_csv(os.path.join(out_dir, "cdf_rtt.csv"), ["value", "cumulative_fraction"], _cdf_rows(rtt))
    hist = hop_histogram(np.rint(per_flow_hops).astype(int)) if per_flow_hops else {}
    _write_csv(os.path.join(out_dir, "hops.csv"), ["bucket", "flows"], sorted(hist.items()))
    rows = []
    if len(usage):
        counts, edges = np.histogram(usage, bins=usage_bins)
        rows = [(repr(float(a)), repr(float(b)), int(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)]
    _write_csv(os.path.join(out_dir, "link_usage_hist.csv"), ["bin_lo", "bin_hi", "links"], rows)
    _write_csv(os.path.join(out_dir, "flows.csv"),
               ["src", "dst", "generated", "delivered", "dropped", "mean_stretch", "mean_hops", "mean_rtt_s", "jitter_s"],
               [(f.src, f.dst, f.generated, f.delivered, f.dropped, repr(f.mean_stretch), repr(f.mean_hops),
                 repr(float(np.mean(f.rtt)) if f.rtt else math.nan), repr(f.jitter))
                for f in report.flows.values()])
    _write_csv(os.path.join(out_dir, "links.csv"), ["sat_a", "sat_b", "forwards", "usage_ratio"],
               [(a, b, c, repr(c / report.packets_routed)) for (a, b), c in report.link_forwards.items()])
    summary = report.summary()
    summary["markers"] = markers
    if header:
        summary["provenance"] = header
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
    return markers
