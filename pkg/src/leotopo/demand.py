"""Ground stations, demand patterns, the demand vector field, regional flow stats."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from . import geometry as geo
from . import kernels

PATTERNS = ("uniform", "hotspot", "distance", "population", "merged", "distance_population")


@dataclass(frozen=True)
class GroundStation:
    id: int
    name: str
    latitude: float
    longitude: float
    population: float | None = None

    def __post_init__(self):
        if abs(self.latitude) > 90.0:
            raise ValueError(f"latitude out of range for {self.name}")
        if not -180.0 <= self.longitude < 180.0:
            raise ValueError(f"longitude must lie in [-180, 180) for {self.name}")

    @property
    def position(self) -> np.ndarray:
        return geo.latlon_to_cartesian(self.latitude, self.longitude, geo.EARTH_RADIUS)

    def shell_position(self, shell_radius: float) -> np.ndarray:
        return geo.scale_to_shell(self.position, geo.EARTH_RADIUS, shell_radius)


def load_stations(path=None) -> list[GroundStation]:
    """Read ``name,lat_deg,lon_deg,population`` rows; ``#`` lines are comments."""
    if path is None:
        text = resources.files("leotopo").joinpath("data/cities.csv").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    stations = []
    for i, row in enumerate(csv.DictReader(lines)):
        pop = row.get("population")
        lon = float(row["lon_deg"])
        if lon >= 180.0:
            lon -= 360.0
        stations.append(GroundStation(i, row["name"], float(row["lat_deg"]), lon,
                                      float(pop) if pop not in (None, "") else None))
    return stations


def station_positions(stations: Sequence[GroundStation], radius: float = geo.EARTH_RADIUS) -> np.ndarray:
    lat = np.array([s.latitude for s in stations], dtype=float)
    lon = np.array([s.longitude for s in stations], dtype=float)
    return geo.latlon_to_cartesian(lat, lon, radius)


def surface_distances(stations: Sequence[GroundStation]) -> np.ndarray:
    """Pairwise great-circle distances on the Earth sphere (m)."""
    pos = station_positions(stations)
    chord = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    return 2.0 * geo.EARTH_RADIUS * np.arcsin(np.clip(chord / (2.0 * geo.EARTH_RADIUS), 0.0, 1.0))


@dataclass
class DemandMatrix:
    """m×m nonnegative traffic intensities with a zero diagonal."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("demand matrix must be square")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("demand entries must be finite and nonnegative")
        np.fill_diagonal(v, 0.0)
        self.values = v

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def flows(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nonzero flows as (src, dst, intensity), row-major order."""
        src, dst = np.nonzero(self.values)
        return src, dst, self.values[src, dst]

    def scaled(self, factor: float) -> "DemandMatrix":
        return DemandMatrix(self.values * factor)

    def total(self) -> float:
        return float(self.values.sum())

    def to_csv(self, path) -> None:
        src, dst, val = self.flows()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["src_id", "dst_id", "intensity"])
            for a, b, x in zip(src, dst, val):
                w.writerow([int(a), int(b), repr(float(x))])

    @classmethod
    def from_csv(cls, path, size: int) -> "DemandMatrix":
        v = np.zeros((size, size))
        with open(path) as fh:
            for row in csv.DictReader(fh):
                v[int(row["src_id"]), int(row["dst_id"])] = float(row["intensity"])
        return cls(v)


def _normalize(w: np.ndarray) -> np.ndarray:
    off = ~np.eye(w.shape[0], dtype=bool)
    nz = off & (w > 0)
    if not nz.any():
        return np.zeros_like(w)
    out = np.where(off, w, 0.0) / w[nz].mean()
    return out


def pattern_weights(stations: Sequence[GroundStation], pattern: str) -> np.ndarray:
    """Unit-mean pattern weights Ŵ (zero diagonal)."""
    m = len(stations)
    if pattern not in PATTERNS:
        raise ValueError(f"unknown demand pattern {pattern!r}; expected one of {PATTERNS}")
    idx = np.arange(1, m + 1, dtype=float)

    def population():
        if any(s.population is None for s in stations):
            raise ValueError("population pattern needs every station's population")
        p = np.array([s.population for s in stations], dtype=float)
        return _normalize(np.outer(p, p))

    if pattern == "uniform":
        return _normalize(np.ones((m, m)))
    if pattern == "hotspot":
        return _normalize(np.exp(-(idx[:, None] + idx[None, :]) / m))
    if pattern == "distance":
        return _normalize(surface_distances(stations))
    if pattern == "population":
        return population()
    dist = _normalize(surface_distances(stations))
    if pattern == "merged":
        return _normalize(0.5 * (dist + population()))
    return _normalize(dist * population())


def build_demand(stations: Sequence[GroundStation], pattern: str = "uniform",
                 base_intensity: float = 1000.0, seed: int = 0,
                 constant: bool = True) -> DemandMatrix:
    """Δ_ij = c_ij·Ŵ_ij with c_ij ~ U(0, base_intensity] drawn from ``seed``.

    ``constant=False`` drops the random component (c_ij = base_intensity).
    """
    w = pattern_weights(stations, pattern)
    m = len(stations)
    if constant:
        rng = np.random.default_rng(seed)
        c = base_intensity * (1.0 - rng.random((m, m)))
    else:
        c = np.full((m, m), float(base_intensity))
    return DemandMatrix(c * w)


def perturb_demand(demand: DemandMatrix, mu: float, sigma: float, seed: int = 0) -> DemandMatrix:
    """Scale each nonzero entry by max(0, 1 + N(mu, sigma))."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    v = demand.values
    factor = np.maximum(0.0, 1.0 + rng.normal(mu, sigma, size=v.shape)) if sigma > 0 else \
        np.full(v.shape, max(0.0, 1.0 + mu))
    return DemandMatrix(np.where(v > 0, v * factor, 0.0))


@dataclass(frozen=True)
class FieldParams:
    """Demand-field knobs.

    ``length_unit`` is the length (m) in which geodesic distances and link
    vectors enter the field and the prioritized link metric; ``min_distance``
    floors the squared-distance denominators near the endpoints.
    """

    K: float = 1e7
    eta: float = 1.0
    omega: float = 10.0
    crown: bool = True
    inclination: float = math.radians(53.0)
    length_unit: float = 1000.0
    min_distance: float = 1_969_922.0


@dataclass
class FlowSet:
    """Nonzero flows with endpoints lifted to a shell."""

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    U: np.ndarray
    V: np.ndarray

    @classmethod
    def from_demand(cls, demand: DemandMatrix, stations: Sequence[GroundStation],
                    shell_radius: float) -> "FlowSet":
        src, dst, w = demand.flows()
        pos = station_positions(stations, shell_radius)
        return cls(src, dst, w, pos[src].reshape(-1, 3), pos[dst].reshape(-1, 3))

    def __len__(self) -> int:
        return len(self.weight)


def demand_field(p, u, v, intensity: float, K: float, length_unit: float = 1.0,
                 min_distance: float = 0.0) -> np.ndarray:
    """Field of one flow u→v at shell point ``p`` (no crown term).

    K·Δ·[τ̂(p,u)/d²(p,v) − τ̂(p,v)/d²(p,u)] with τ̂ the ``unit_tangent`` of the
    geodesic at ``p`` and d the shell geodesic distance in ``length_unit``.

    Raises
    ------
    GeometryError
        If ``p`` coincides with ``u`` or ``v`` and no ``min_distance`` floor is set.
    """
    p, u, v = (np.asarray(x, dtype=float) for x in (p, u, v))
    rho = float(np.linalg.norm(p))
    du = float(geo.geodesic_distance(p, u, rho))
    dv = float(geo.geodesic_distance(p, v, rho))
    if min(du, dv) <= 1e-9 * rho and min_distance <= 0.0:
        raise geo.GeometryError("field is singular at the flow endpoints")
    if intensity == 0.0:
        return np.zeros(3)
    f = kernels.flow_fields(p, u[None], v[None], np.array([intensity]), K, length_unit,
                            min_distance, 0.0, 0.0, 0.0, False)
    return f[0]


def crown_adjust(f, p, inclination: float, eta: float, omega: float) -> np.ndarray:
    """Boost the east-west component of ``f`` near the coverage boundary."""
    f = np.asarray(f, dtype=float)
    p = np.asarray(p, dtype=float)
    rho = float(np.linalg.norm(p))
    _, phi = geo.lat_lon_unit_vectors(p)
    gain = eta * math.exp(-omega * (math.sin(inclination) - abs(p[2]) / rho))
    return f + gain * float(f @ phi) * phi


@dataclass
class FieldSample:
    point: np.ndarray
    f: np.ndarray
    f_perp: np.ndarray
    per_flow: np.ndarray = field(repr=False)


def flow_fields_at(p, flows: FlowSet, params: FieldParams) -> np.ndarray:
    return kernels.flow_fields(np.asarray(p, dtype=float), flows.U, flows.V, flows.weight,
                               params.K, params.length_unit, params.min_distance,
                               math.sin(params.inclination), params.eta, params.omega,
                               params.crown)


def aggregate_field(p, flows: FlowSet, params: FieldParams) -> FieldSample:
    """Sum of crown-adjusted per-flow fields at ``p`` and its rotated twin."""
    p = np.asarray(p, dtype=float)
    per_flow = flow_fields_at(p, flows, params)
    f = per_flow.sum(axis=0) if len(flows) else np.zeros(3)
    rho = float(np.linalg.norm(p))
    f = f - (f @ p) / (rho * rho) * p
    return FieldSample(p, f, np.cross(f, p) / rho, per_flow)


# -- regional directional statistics -------------------------------------------------


@dataclass
class RegionGrid:
    l_theta: float
    l_phi: float
    theta_component: np.ndarray  # (n_lat, n_lon)
    phi_component: np.ndarray
    weight: np.ndarray
    resultant: np.ndarray  # per-region mean resultant length, 0 where empty
    global_resultant: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lat_idx", "lon_idx", "theta_component", "phi_component", "weight"])
            for i in range(self.weight.shape[0]):
                for j in range(self.weight.shape[1]):
                    w.writerow([i, j, repr(float(self.theta_component[i, j])),
                                repr(float(self.phi_component[i, j])), repr(float(self.weight[i, j]))])


def _region_index(lat, lon, l_theta, l_phi, n_lat, n_lon):
    i = np.minimum(np.floor((lat + 90.0) / l_theta).astype(int), n_lat - 1)
    j = np.floor(np.mod(lon, 360.0) / l_phi).astype(int) % n_lon
    return i, j


ORIENTATIONS = ("folded", "directional", "axial")


def regional_flow_stats(demand: DemandMatrix, stations: Sequence[GroundStation],
                        l_theta: float = 20.0, l_phi: float = 30.0,
                        orientation: str = "folded") -> RegionGrid:
    """Per-region traffic-weighted flow directions and the weighted mean resultant length.

    A flow belongs to a region when the projection of the region's centre onto
    the flow's great circle lands inside the region and on the minor arc from
    source to destination.

    Parameters
    ----------
    orientation : {"folded", "directional", "axial"}
        How a flow's tangent enters the sum. ``directional`` keeps the u→v sign,
        so a symmetric demand cancels to zero. ``folded`` flips every tangent
        onto the eastward half-plane (northward when due north/south), giving
        one arrow per traffic axis. ``axial`` doubles the angle, the usual
        treatment of undirected lines.
    """
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}")
    if abs(180.0 / l_theta - round(180.0 / l_theta)) > 1e-9 or abs(360.0 / l_phi - round(360.0 / l_phi)) > 1e-9:
        raise ValueError("l_theta must divide 180 and l_phi must divide 360")
    n_lat, n_lon = int(round(180.0 / l_theta)), int(round(360.0 / l_phi))
    src, dst, w = demand.flows()
    pos = station_positions(stations, 1.0)
    U, V = pos[src].reshape(-1, 3), pos[dst].reshape(-1, 3)
    n = np.cross(U, V)
    nn = np.linalg.norm(n, axis=1)
    keep = nn > 1e-12
    U, V, n, w = U[keep], V[keep], n[keep] / nn[keep, None], w[keep]
    duv = 2.0 * np.arcsin(np.clip(np.linalg.norm(U - V, axis=1) / 2.0, 0.0, 1.0))

    th_c = np.zeros((n_lat, n_lon))
    ph_c = np.zeros((n_lat, n_lon))
    wt = np.zeros((n_lat, n_lon))
    for i in range(n_lat):
        lat_mid = -90.0 + (i + 0.5) * l_theta
        for j in range(n_lon):
            lon_mid = (j + 0.5) * l_phi
            p = geo.latlon_to_cartesian(lat_mid, lon_mid, 1.0)
            q = p[None, :] - (n @ p)[:, None] * n
            qn = np.linalg.norm(q, axis=1)
            ok = qn > 1e-12
            q[ok] /= qn[ok, None]
            qlat, qlon = geo.cartesian_to_latlon(q)
            qi, qj = _region_index(qlat, qlon, l_theta, l_phi, n_lat, n_lon)
            duq = 2.0 * np.arcsin(np.clip(np.linalg.norm(U - q, axis=1) / 2.0, 0.0, 1.0))
            dqv = 2.0 * np.arcsin(np.clip(np.linalg.norm(q - V, axis=1) / 2.0, 0.0, 1.0))
            member = ok & (qi == i) & (qj == j) & (duq + dqv <= duv + 1e-9)
            h = np.hypot(q[:, 0], q[:, 1])
            member &= h > 1e-9
            if not member.any():
                continue
            qm, nm, wm = q[member], n[member], w[member]
            direction = np.cross(nm, qm)  # motion from u toward v at q
            theta_hat, phi_hat = geo.lat_lon_unit_vectors(qm)
            a = np.sum(direction * theta_hat, axis=1)
            b = np.sum(direction * phi_hat, axis=1)
            norm2 = np.hypot(a, b)
            a, b = a / norm2, b / norm2
            if orientation == "folded":
                flip = (b < -1e-12) | ((np.abs(b) <= 1e-12) & (a < 0))
                a, b = np.where(flip, -a, a), np.where(flip, -b, b)
            elif orientation == "axial":
                a, b = a * a - b * b, 2.0 * a * b
            th_c[i, j] = float(np.sum(wm * a))
            ph_c[i, j] = float(np.sum(wm * b))
            wt[i, j] = float(wm.sum())
    resultant = np.zeros_like(wt)
    nz = wt > 0
    resultant[nz] = np.hypot(th_c[nz], ph_c[nz]) / wt[nz]
    glob = float(np.sum(wt * resultant) / wt.sum()) if wt.sum() > 0 else 0.0
    return RegionGrid(l_theta, l_phi, th_c, ph_c, wt, resultant, glob)
