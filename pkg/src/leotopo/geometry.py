"""Spherical and vector primitives on a constellation shell.

All positions are Cartesian ECI vectors in meters. Functions broadcast over
leading axes: a ``(..., 3)`` array is a stack of points.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

EARTH_RADIUS = 6_371_000.0
C_LIGHT = 299_792_458.0

UNIT_TOL = 1e-9
SHELL_TOL = 1e-6


class GeometryError(ValueError):
    """Degenerate or inconsistent geometric input."""


class NoAngularNeighbor(GeometryError):
    """Every candidate failed the orientation filter."""


@dataclass(frozen=True)
class SpherePoint:
    position: np.ndarray
    radius: float

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise GeometryError(f"bad position {self.position!r}")
        if abs(np.linalg.norm(pos) - self.radius) > SHELL_TOL * self.radius:
            raise GeometryError("point is not on the shell")
        object.__setattr__(self, "position", pos)

    @classmethod
    def from_vector(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        return cls(v, float(np.linalg.norm(v)))

    @classmethod
    def from_latlon(cls, lat_deg: float, lon_deg: float, radius: float) -> "SpherePoint":
        return cls(latlon_to_cartesian(lat_deg, lon_deg, radius), radius)


def _pos(p) -> np.ndarray:
    if isinstance(p, SpherePoint):
        return p.position
    return np.asarray(p, dtype=float)


def norm(v: np.ndarray) -> np.ndarray:
    return np.linalg.norm(v, axis=-1)


def latlon_to_cartesian(lat_deg, lon_deg, radius: float = EARTH_RADIUS) -> np.ndarray:
    lat = np.radians(np.asarray(lat_deg, dtype=float))
    lon = np.radians(np.asarray(lon_deg, dtype=float))
    c = np.cos(lat)
    return radius * np.stack([c * np.cos(lon), c * np.sin(lon), np.sin(lat)], axis=-1)


def cartesian_to_latlon(v) -> tuple[np.ndarray, np.ndarray]:
    """Return (lat_deg, lon_deg) with longitude in [-180, 180)."""
    v = np.asarray(v, dtype=float)
    r = norm(v)
    lat = np.degrees(np.arcsin(np.clip(v[..., 2] / r, -1.0, 1.0)))
    lon = np.degrees(np.arctan2(v[..., 1], v[..., 0]))
    lon = np.where(lon >= 180.0, lon - 360.0, lon)
    return lat, lon


def _shell_radius(p: np.ndarray, q: np.ndarray, radius: float | None) -> np.ndarray:
    rp, rq = norm(p), norm(q)
    ref = rp if radius is None else np.full_like(rp, radius)
    if np.any(np.abs(rp - rq) > SHELL_TOL * ref) or np.any(np.abs(rp - ref) > SHELL_TOL * ref):
        raise GeometryError("points lie on different shells")
    return ref


def geodesic_distance(p, q, radius: float | None = None):
    """Great-circle distance 2ρ·asin(‖p−q‖/2ρ) between points on one shell.

    Raises
    ------
    GeometryError
        If the radii of ``p`` and ``q`` differ by more than 1e-6·ρ.
    """
    p, q = _pos(p), _pos(q)
    rho = _shell_radius(p, q, radius)
    chord = norm(p - q)
    return 2.0 * rho * np.arcsin(np.clip(chord / (2.0 * rho), 0.0, 1.0))


def unit_tangent(p, q) -> np.ndarray:
    """Unit tangent at ``p`` of the great circle through ``p`` and ``q``.

    Evaluates ((q×p)×p)/‖(q×p)×p‖, which equals the normalized
    p(p·q) − q‖p‖²: the tangent at ``p`` pointing away from ``q``. The
    demand field combines these so that flows point from source to sink.
    """
    p, q = _pos(p), _pos(q)
    t = np.cross(np.cross(q, p), p)
    n = norm(t)
    scale = norm(p) * norm(q)
    if np.any(n <= 1e-12 * scale * norm(p)):
        raise GeometryError("coincident or antipodal points have no unique geodesic")
    return t / n[..., None] if t.ndim > 1 else t / n


def lat_lon_unit_vectors(p) -> tuple[np.ndarray, np.ndarray]:
    """Local (θ̂ north, φ̂ east) unit vectors at ``p``; θ̂ × φ̂ = −p̂."""
    p = _pos(p)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    h = np.hypot(x, y)
    if np.any(h <= UNIT_TOL * norm(p)):
        raise GeometryError("lat/lon frame is undefined at the poles")
    rho = norm(p)
    zero = np.zeros_like(x)
    phi_hat = np.stack([-y / h, x / h, zero], axis=-1)
    theta_hat = np.stack([-x * z / (rho * h), -y * z / (rho * h), h / rho], axis=-1)
    return theta_hat, phi_hat


def orientation_ok(s, s_star, candidates) -> np.ndarray:
    """Clockwise-policy mask: sgn[((s−s′)×(s−s*))·s] > 0 per candidate."""
    s, s_star = _pos(s), _pos(s_star)
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    return np.cross(s - cand, s - s_star) @ s > 0.0


def angular_scores(s, s_star, beta: float, candidates) -> np.ndarray:
    """|cos∠(s−s′, s−s*) − cos β| per candidate (no orientation filter)."""
    s, s_star = _pos(s), _pos(s_star)
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    a = s - cand
    b = s - s_star
    cosang = (a @ b) / (norm(a) * np.linalg.norm(b))
    return np.abs(cosang - np.cos(beta))


def angular_select(s, s_star, beta: float, candidates: Sequence) -> int:
    """Index of the candidate whose link from ``s`` best matches angle ``beta``.

    Candidates failing the orientation criterion are discarded first; ties go
    to the lowest index.
    """
    if not 0.0 < beta < np.pi:
        raise GeometryError("beta must lie in (0, pi)")
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    ok = orientation_ok(s, s_star, cand)
    if not ok.any():
        raise NoAngularNeighbor("no candidate on the clockwise side")
    scores = np.where(ok, angular_scores(s, s_star, beta, cand), np.inf)
    return int(np.argmin(scores))


def project_to_geodesic(p, u, v) -> np.ndarray:
    """Closest point to ``p`` on the great circle through ``u`` and ``v``."""
    p, u, v = _pos(p), _pos(u), _pos(v)
    n = np.cross(u, v)
    nn = norm(n)
    if np.any(nn <= 1e-12 * norm(u) * norm(v)):
        raise GeometryError("u and v do not define a great circle")
    n_hat = n / nn[..., None] if n.ndim > 1 else n / nn
    w = p - np.sum(p * n_hat, axis=-1, keepdims=True) * n_hat
    wn = norm(w)
    rho = norm(p)
    if np.any(wn <= 1e-12 * rho):
        raise GeometryError("point is a pole of the great circle")
    return (rho / wn)[..., None] * w if w.ndim > 1 else rho * w / wn


def scale_to_shell(ground_pos, earth_radius: float, shell_radius: float) -> np.ndarray:
    """Radially lift a ground position onto the shell (× ρ/ρ_E)."""
    g = _pos(ground_pos)
    r = norm(g)
    if np.any(r == 0.0):
        raise GeometryError("zero vector cannot be scaled to the shell")
    if np.any(np.abs(r - earth_radius) > SHELL_TOL * earth_radius):
        raise GeometryError("ground position is not on the Earth sphere")
    return g * (shell_radius / earth_radius)


def on_minor_arc(q, u, v, tol: float = 1e-9) -> np.ndarray:
    """True where ``q`` (on the u–v great circle) lies between ``u`` and ``v``."""
    q, u, v = _pos(q), _pos(u), _pos(v)
    rho = norm(u)
    duq = _arc(u, q, rho)
    dqv = _arc(q, v, rho)
    duv = _arc(u, v, rho)
    return duq + dqv <= duv + tol * rho


def _arc(a, b, rho):
    chord = norm(np.asarray(a) - np.asarray(b))
    return 2.0 * rho * np.arcsin(np.clip(chord / (2.0 * rho), 0.0, 1.0))


def haversine(lat1, lon1, lat2, lon2, radius: float = EARTH_RADIUS):
    """Great-circle distance from latitudes/longitudes in degrees."""
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2.0 * radius * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def elevation_angle(ground, sat) -> np.ndarray:
    """Angle (rad) of ``sat`` above the local horizon plane at ``ground``."""
    ground, sat = _pos(ground), _pos(sat)
    d = sat - ground
    up = ground / norm(ground)[..., None] if ground.ndim > 1 else ground / np.linalg.norm(ground)
    return np.arcsin(np.clip(np.sum(d * up, axis=-1) / norm(d), -1.0, 1.0))
