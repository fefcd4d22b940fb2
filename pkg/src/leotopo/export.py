"""GeoJSON and CZML export of satellites, links, demand flows and routed paths."""
from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from .constellation import Ephemeris, ShellConfig
from .demand import DemandMatrix, GroundStation
from .geometry import EARTH_RADIUS, cartesian_to_latlon
from .topology import Topology


def _lonlatalt(p: np.ndarray) -> list[float]:
    lat, lon = cartesian_to_latlon(p)
    return [float(lon), float(lat), float(np.linalg.norm(p) - EARTH_RADIUS)]


def link_role(config: ShellConfig, a: int, b: int) -> str:
    return "intra" if a // config.sats_per_orbit == b // config.sats_per_orbit else "inter"


def _great_circle(a: GroundStation, b: GroundStation, n: int = 16) -> list[list[float]]:
    pa, pb = a.position / np.linalg.norm(a.position), b.position / np.linalg.norm(b.position)
    omega = np.arccos(np.clip(pa @ pb, -1.0, 1.0))
    if omega < 1e-12:
        return [[a.longitude, a.latitude], [b.longitude, b.latitude]]
    out = []
    for t in np.linspace(0.0, 1.0, n):
        p = (np.sin((1 - t) * omega) * pa + np.sin(t * omega) * pb) / np.sin(omega)
        lat, lon = cartesian_to_latlon(p)
        out.append([float(lon), float(lat)])
    return out


def geojson(config: ShellConfig, positions: np.ndarray, topology: Topology | None = None,
            stations: Sequence[GroundStation] = (), demand: DemandMatrix | None = None,
            paths: Sequence[Sequence[int]] = (), include_satellites: bool = True) -> dict:
    """FeatureCollection of one snapshot.

    Every feature carries a ``role`` property: satellite, station, intra,
    inter, demand or selected. Coordinates are [lon, lat, altitude_m].
    """
    feats = []
    if include_satellites:
        for i, p in enumerate(positions):
            o, s = divmod(i, config.sats_per_orbit)
            feats.append({"type": "Feature", "geometry": {"type": "Point", "coordinates": _lonlatalt(p)},
                          "properties": {"role": "satellite", "id": i, "orbit": o, "slot": s}})
    for st in stations:
        feats.append({"type": "Feature",
                      "geometry": {"type": "Point", "coordinates": [st.longitude, st.latitude, 0.0]},
                      "properties": {"role": "station", "id": st.id, "name": st.name}})
    if topology is not None:
        for a, b in topology.edges:
            a, b = int(a), int(b)
            feats.append({"type": "Feature",
                          "geometry": {"type": "LineString",
                                       "coordinates": [_lonlatalt(positions[a]), _lonlatalt(positions[b])]},
                          "properties": {"role": link_role(config, a, b), "sat_a": a, "sat_b": b}})
    if demand is not None:
        src, dst, w = demand.flows()
        for i, j, x in zip(src, dst, w):
            if i > j and demand.values[j, i] > 0:
                continue  # one polyline per unordered pair
            feats.append({"type": "Feature",
                          "geometry": {"type": "LineString",
                                       "coordinates": _great_circle(stations[i], stations[j])},
                          "properties": {"role": "demand", "src": int(i), "dst": int(j),
                                         "intensity": float(x)}})
    for k, path in enumerate(paths):
        feats.append({"type": "Feature",
                      "geometry": {"type": "LineString",
                                   "coordinates": [_lonlatalt(positions[int(s)]) for s in path]},
                      "properties": {"role": "selected", "path": k, "hops": len(path) - 1}})
    return {"type": "FeatureCollection", "features": feats}


def czml(eph: Ephemeris, topology: Topology | None = None, epoch: str = "2025-01-01T00:00:00Z") -> list:
    """CZML document: sampled satellite positions plus ISL polylines bound to them."""
    config = eph.config
    t = eph.times
    doc = [{"id": "document", "name": "constellation", "version": "1.0",
            "clock": {"currentTime": epoch, "multiplier": 1}}]
    for i in range(config.num_sats):
        samples = []
        for k, tk in enumerate(t):
            p = eph.positions[k, i]
            samples += [float(tk), float(p[0]), float(p[1]), float(p[2])]
        doc.append({
            "id": f"sat{i}",
            "properties": {"role": "satellite", "orbit": i // config.sats_per_orbit},
            "position": {"epoch": epoch, "referenceFrame": "INERTIAL", "cartesian": samples},
            "point": {"pixelSize": 3},
        })
    if topology is not None:
        for a, b in topology.edges:
            a, b = int(a), int(b)
            doc.append({
                "id": f"isl{a}-{b}",
                "properties": {"role": link_role(config, a, b)},
                "polyline": {"positions": {"references": [f"sat{a}#position", f"sat{b}#position"]},
                             "width": 1},
            })
    return doc


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, separators=(",", ":"))
