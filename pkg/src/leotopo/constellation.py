"""Walker-style shells: satellite placement, circular motion, in-range graphs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import EARTH_RADIUS

ISL_RANGE_CAP = 5_000_000.0


@dataclass(frozen=True)
class ShellConfig:
    """One orbital shell. Angles in radians, lengths in meters."""

    altitude: float = 550_000.0
    inclination: float = math.radians(53.0)
    num_orbits: int = 72
    sats_per_orbit: int = 22
    phase_offset: float = 0.5
    mean_motion: float = 3.98 / 3600.0
    isl_max_range: float | None = None
    min_altitude_clearance: float = 80_000.0
    earth_radius: float = EARTH_RADIUS

    def __post_init__(self):
        if self.num_orbits < 1 or self.sats_per_orbit < 1:
            raise ValueError("num_orbits and sats_per_orbit must be >= 1")
        if not 0.0 < self.inclination <= math.pi / 2 + 1e-12:
            raise ValueError("inclination must lie in (0, pi/2]")
        if self.altitude <= 0:
            raise ValueError("altitude must be positive")

    @classmethod
    def phase1(cls, **overrides) -> "ShellConfig":
        return cls(**overrides)

    @property
    def radius(self) -> float:
        return self.earth_radius + self.altitude

    @property
    def num_sats(self) -> int:
        return self.num_orbits * self.sats_per_orbit

    @property
    def isl_range(self) -> float:
        if self.isl_max_range is not None:
            return self.isl_max_range
        return max_isl_range(self.radius, self.min_altitude_clearance, self.earth_radius)

    @property
    def intra_orbit_spacing(self) -> float:
        """Chord between consecutive satellites of one orbit."""
        return 2.0 * self.radius * math.sin(math.pi / self.sats_per_orbit)

    @property
    def seam_shift(self) -> int:
        """Slot shift that phase-aligns orbit N_O−1 with orbit 0.

        Phasing accumulates ``phase_offset`` steps per orbit, so after a full
        turn orbit 0 sits N_O·phase_offset steps behind where orbit N_O would.
        """
        return int(round(self.num_orbits * self.phase_offset)) % self.sats_per_orbit

    def flat_index(self, orbit, slot):
        return np.asarray(orbit) * self.sats_per_orbit + np.asarray(slot)

    def orbit_slot(self, index):
        return np.divmod(np.asarray(index), self.sats_per_orbit)


def max_isl_range(radius: float, clearance_altitude: float, earth_radius: float = EARTH_RADIUS,
                  cap: float = ISL_RANGE_CAP) -> float:
    """Longest chord on the shell whose midpoint stays above the clearance sphere."""
    rc = earth_radius + clearance_altitude
    if rc >= radius:
        return 0.0
    return min(2.0 * math.sqrt(radius * radius - rc * rc), cap)


def positions_at(config: ShellConfig, t: float | np.ndarray) -> np.ndarray:
    """Satellite positions at time(s) ``t``; shape (n, 3) or (len(t), n, 3).

    Slot j of orbit i starts at phase 2πj/N_S + i·phase_offset·2π/N_S in the
    equatorial plane, advances at ``mean_motion``, is tilted about X by the
    inclination and turned about Z by the orbit's RAAN 2πi/N_O. Both turns use
    right-handed rotation matrices, so satellites ascend northward with
    increasing phase.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    n_o, n_s = config.num_orbits, config.sats_per_orbit
    step = 2.0 * math.pi / n_s
    orbit = np.repeat(np.arange(n_o), n_s)
    slot = np.tile(np.arange(n_s), n_o)
    phase0 = slot * step + orbit * config.phase_offset * step
    u = phase0[None, :] + config.mean_motion * t_arr[:, None]
    raan = 2.0 * math.pi * orbit / n_o
    ci, si = math.cos(config.inclination), math.sin(config.inclination)
    x_orb = np.cos(u)
    y_orb = np.sin(u) * ci
    z = np.sin(u) * si
    cr, sr = np.cos(raan)[None, :], np.sin(raan)[None, :]
    x = x_orb * cr - y_orb * sr
    y = x_orb * sr + y_orb * cr
    pos = config.radius * np.stack([x, y, z], axis=-1)
    return pos[0] if np.ndim(t) == 0 else pos


@dataclass
class Ephemeris:
    config: ShellConfig
    times: np.ndarray
    positions: np.ndarray  # (len(times), n, 3)

    @property
    def num_sats(self) -> int:
        return self.positions.shape[1]

    def at(self, t: float) -> np.ndarray:
        """Exact positions at any time, sampled grid or not."""
        return positions_at(self.config, float(t))

    def window(self, start: float, end: float) -> "Ephemeris":
        mask = (self.times >= start - 1e-9) & (self.times <= end + 1e-9)
        return Ephemeris(self.config, self.times[mask], self.positions[mask])

    def midpoint_positions(self) -> np.ndarray:
        return self.at(0.5 * (self.times[0] + self.times[-1]))

    def to_csv(self, path) -> None:
        n_s = self.config.sats_per_orbit
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "orbit", "slot", "x", "y", "z"])
            for ti, t in enumerate(self.times):
                for k, (x, y, z) in enumerate(self.positions[ti]):
                    w.writerow([f"{t:.6f}", k // n_s, k % n_s, f"{x:.3f}", f"{y:.3f}", f"{z:.3f}"])


def generate_shell(config: ShellConfig, times: Sequence[float]) -> Ephemeris:
    times = np.asarray(list(times) if not isinstance(times, np.ndarray) else times, dtype=float)
    if times.size == 0:
        raise ValueError("time grid is empty")
    return Ephemeris(config, times, positions_at(config, times))


def time_grid(start: float, end: float, step: float = 1.0) -> np.ndarray:
    n = int(math.floor((end - start) / step + 1e-9))
    grid = start + step * np.arange(n + 1)
    if grid[-1] < end - 1e-9:
        grid = np.append(grid, end)
    return grid


@dataclass
class RangeGraph:
    """Satellite pairs within ISL range at every sampled time of a window."""

    adjacency: np.ndarray  # (n, n) bool, symmetric, False diagonal
    _neighbors: list = field(default=None, repr=False)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, s: int) -> np.ndarray:
        if self._neighbors is None:
            self._neighbors = [np.flatnonzero(row) for row in self.adjacency]
        return self._neighbors[s]

    def has_edge(self, a: int, b: int) -> bool:
        return bool(self.adjacency[a, b])

    def edges(self) -> np.ndarray:
        a, b = np.nonzero(np.triu(self.adjacency, 1))
        return np.stack([a, b], axis=1)

    def degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


def pairwise_sq_distances(pos: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", pos, pos)
    d2 = sq[:, None] + sq[None, :] - 2.0 * pos @ pos.T
    np.maximum(d2, 0.0, out=d2)
    return d2


def range_graph(eph: Ephemeris, r: float) -> RangeGraph:
    """Edges present at every sampled time (order of samples is irrelevant)."""
    n = eph.num_sats
    adj = np.ones((n, n), dtype=bool)
    r2 = r * r
    for pos in eph.positions:
        adj &= pairwise_sq_distances(pos) <= r2
    np.fill_diagonal(adj, False)
    adj &= adj.T
    return RangeGraph(adj)


def crown_latitude(config: ShellConfig) -> float:
    """Highest latitude reached by the shell (the coverage boundary)."""
    return config.inclination


def orbit_pairs(config: ShellConfig) -> Iterable[tuple[int, int]]:
    n_o = config.num_orbits
    if n_o < 2:
        return []
    return [(i, (i + 1) % n_o) for i in range(n_o if n_o > 2 else 1)]


def inter_orbit_partner(config: ShellConfig, orbit: int, slot: int, offset: int) -> int:
    """Flat index of slot ``slot + offset`` in the next orbit, seam-corrected."""
    n_o, n_s = config.num_orbits, config.sats_per_orbit
    nxt = (orbit + 1) % n_o
    shift = config.seam_shift if nxt == 0 and n_o > 1 else 0
    return nxt * n_s + (slot + offset + shift) % n_s
