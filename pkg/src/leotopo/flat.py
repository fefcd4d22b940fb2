"""Flat-plane satellite model: distorted lattices, rotated-grid topologies and stretch bounds."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

SQRT2 = math.sqrt(2.0)


@dataclass
class FlatField:
    """One satellite within ``eta`` of each lattice point (i/ρ, j/ρ) of a window."""

    rho: float
    eta: float
    width: float
    height: float
    positions: np.ndarray  # (N, 2)
    lattice: np.ndarray  # (N, 2) integer lattice indices
    seed: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.lattice[:, 0].max()) + 1, int(self.lattice[:, 1].max()) + 1

    def index(self, i: int, j: int) -> int:
        ny = self.shape[1]
        return i * ny + j


def gen_flat_field(rho: float, eta: float, window: tuple[float, float], seed: int = 0) -> FlatField:
    """Sample one satellite uniformly in the η-disk around every lattice point."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if not 0.0 <= eta < 1.0 / (2.0 * rho):
        raise ValueError("eta must lie in [0, 1/(2 rho))")
    w, h = window
    nx = int(math.floor(w * rho + 1e-9)) + 1
    ny = int(math.floor(h * rho + 1e-9)) + 1
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    lattice = np.stack([ii.ravel(), jj.ravel()], axis=1)
    base = lattice / rho
    rng = np.random.default_rng(seed)
    r = eta * np.sqrt(rng.random(len(base)))
    a = 2.0 * math.pi * rng.random(len(base))
    pos = base + np.stack([r * np.cos(a), r * np.sin(a)], axis=1)
    return FlatField(rho, eta, w, h, pos, lattice, seed)


@dataclass
class FlatTopology:
    positions: np.ndarray
    edges: np.ndarray  # (E, 2), a < b
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        e = e[e[:, 0] != e[:, 1]]
        e = np.sort(e, axis=1)
        self.edges = np.unique(e, axis=0) if len(e) else e

    @property
    def num_nodes(self) -> int:
        return len(self.positions)

    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.num_nodes)

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.positions[self.edges[:, 0]] - self.positions[self.edges[:, 1]], axis=1)

    def shortest_path_length(self, s: int, d: int, allowed: np.ndarray | None = None) -> float:
        """Euclidean-weighted shortest path, optionally restricted to ``allowed`` nodes."""
        e = self.edges
        if allowed is not None:
            keep = allowed[e[:, 0]] & allowed[e[:, 1]]
            e = e[keep]
        n = self.num_nodes
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        w = np.linalg.norm(self.positions[src] - self.positions[dst], axis=1) if len(src) else np.zeros(0)
        dist, _ = kernels.dijkstra(indptr, dst.astype(np.int64), w, n, np.array([s], dtype=np.int64),
                                   np.zeros(1))
        return float(dist[d])

    def stretch(self, s: int, d: int, allowed: np.ndarray | None = None) -> float:
        return self.shortest_path_length(s, d, allowed) / float(np.linalg.norm(self.positions[s] - self.positions[d]))


@dataclass
class FlatDemandSet:
    """Ordered (source, destination) satellite pairs over one field."""

    positions: np.ndarray
    pairs: list

    def __post_init__(self):
        for s, d in self.pairs:
            if s == d:
                raise ValueError("demand endpoints must differ")

    def vectors(self) -> np.ndarray:
        p = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        return self.positions[p[:, 1]] - self.positions[p[:, 0]]

    def angles(self) -> np.ndarray:
        v = self.vectors()
        return np.mod(np.arctan2(v[:, 1], v[:, 0]), 2.0 * math.pi)

    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.vectors(), axis=1)


# -- the 7×7 example --------------------------------------------------------------


def _grid7():
    n = 7
    pos = np.array([(c, r) for r in range(n) for c in range(n)], dtype=float)
    return n, pos, lambda r, c: r * n + c


def plus_grid_7x7() -> FlatTopology:
    n, pos, idx = _grid7()
    edges = []
    for r in range(n):
        for c in range(n):
            if c + 1 < n:
                edges.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < n:
                edges.append((idx(r, c), idx(r + 1, c)))
    return FlatTopology(pos, np.array(edges), {"name": "plus_grid"})


def diagonal_7x7() -> FlatTopology:
    """Perimeter ring with unit spokes inward, diagonal links across the interior.

    Degree stays ≤ 4: the 5×5 interior only links to its diagonal neighbours
    plus the spokes arriving from the ring.
    """
    n, pos, idx = _grid7()
    edges = []
    on_ring = lambda r, c: r in (0, n - 1) or c in (0, n - 1)
    for r in range(n):
        for c in range(n):
            for dr, dc in ((0, 1), (1, 0)):
                r2, c2 = r + dr, c + dc
                if r2 < n and c2 < n and on_ring(r, c) and on_ring(r2, c2):
                    edges.append((idx(r, c), idx(r2, c2)))
    for r in range(n):
        for c in range(n):
            if not on_ring(r, c) or (r in (0, n - 1) and c in (0, n - 1)):
                continue
            r2 = min(max(r, 1), n - 2)
            c2 = min(max(c, 1), n - 2)
            edges.append((idx(r, c), idx(r2, c2)))
    for r in range(1, n - 1):
        for c in range(1, n - 1):
            for dc in (-1, 1):
                r2, c2 = r + 1, c + dc
                if 1 <= r2 <= n - 2 and 1 <= c2 <= n - 2:
                    edges.append((idx(r, c), idx(r2, c2)))
    return FlatTopology(pos, np.array(edges), {"name": "diagonal"})


def motivating_example() -> tuple[float, float]:
    """Corner-to-corner (A1→G7) stretch on the 7×7 grid: +Grid vs diagonal layout."""
    a1, g7 = 0, 48
    return plus_grid_7x7().stretch(a1, g7), diagonal_7x7().stretch(a1, g7)


def lattice_stretch(theta: float, size: int = 200) -> float:
    """Stretch of an exact unit +Grid between two lattice points at angle ≈ θ."""
    dx = size * math.cos(theta)
    dy = size * math.sin(theta)
    i, j = int(round(dx)), int(round(dy))
    return (abs(i) + abs(j)) / math.hypot(i, j)


# -- lower bound ----------------------------------------------------------------------


def theorem1_lower_bound(alpha: float, rho: float, delta: int, R: float, eps: float,
                         num_demands: int, lam: int, l_sd: float) -> float:
    """Stretch lower bound (L + (l − L)/|cos ε|)/l with L = min(l, Rλ(2αρ²+1)δ/|D|).

    Returns +inf when cos ε = 0 and L < l.
    """
    if not 0.0 <= eps < math.pi:
        raise ValueError("eps must lie in [0, pi)")
    if num_demands < 1 or l_sd <= 0 or R <= 0 or rho <= 0 or alpha <= 0:
        raise ValueError("bound inputs must be positive")
    L = min(l_sd, R * lam * (2.0 * alpha * rho * rho + 1.0) * delta / num_demands)
    c = abs(math.cos(eps))
    if L >= l_sd:
        return 1.0
    if c < 1e-15:
        return math.inf
    return (L + (l_sd - L) / c) / l_sd


def max_aligned_demands(angles: np.ndarray, eps: float) -> int:
    """λ: largest number of orientations within ε of one reference direction."""
    a = np.sort(np.mod(np.asarray(angles, dtype=float), 2.0 * math.pi))
    if len(a) == 0:
        return 0
    ext = np.concatenate([a, a + 2.0 * math.pi])
    hi = np.searchsorted(ext, a + 2.0 * eps + 1e-12, side="right")
    return int(np.max(hi - np.arange(len(a))))


def corridor_mask(points: np.ndarray, a: np.ndarray, b: np.ndarray, R: float) -> np.ndarray:
    """Points within R of segment ab."""
    ab = b - a
    t = np.clip(((points - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(points - (a + t[:, None] * ab), axis=1) <= R + 1e-12


# -- rotated-grid construction --------------------------------------------------------------


@dataclass
class Region:
    i: int
    j: int
    lo: np.ndarray  # Q lower-left corner
    hi: np.ndarray  # Q upper-right corner
    direction: float  # primary direction angle
    points: np.ndarray = None  # grid intersection points Q̄
    boundary: np.ndarray = None  # bool per point
    sats: np.ndarray = None  # nearest satellite per point

    def contains(self, x, tol=1e-9) -> bool:
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))


def _clip_line(origin, u, lo, hi):
    """Parameter interval of {origin + t·u} inside the box, or None."""
    t0, t1 = -math.inf, math.inf
    for k in range(2):
        if abs(u[k]) < 1e-15:
            if origin[k] < lo[k] - 1e-12 or origin[k] > hi[k] + 1e-12:
                return None
            continue
        a = (lo[k] - origin[k]) / u[k]
        b = (hi[k] - origin[k]) / u[k]
        t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
    return (t0, t1) if t1 >= t0 - 1e-12 else None


def _region_grid(reg: Region, spacing: float):
    """Intersection points of a rotated square grid with the box, plus edges."""
    p = np.array([math.cos(reg.direction), math.sin(reg.direction)])
    s = np.array([-p[1], p[0]])
    centre = 0.5 * (reg.lo + reg.hi)
    half_diag = float(np.linalg.norm(reg.hi - reg.lo)) / 2.0
    m = int(math.ceil(half_diag / spacing)) + 1
    pts: list[np.ndarray] = []
    keys: dict = {}

    def add(x, on_boundary):
        key = (round(float(x[0]), 9), round(float(x[1]), 9))
        if key not in keys:
            keys[key] = len(pts)
            pts.append((np.array(x, dtype=float), on_boundary))
        elif on_boundary:
            k = keys[key]
            pts[k] = (pts[k][0], True)
        return keys[key]

    edges = []
    for fam, (along, across) in enumerate(((p, s), (s, p))):
        for k in range(-m, m + 1):
            origin = centre + k * spacing * across
            seg = _clip_line(origin, along, reg.lo, reg.hi)
            if seg is None:
                continue
            t0, t1 = seg
            ts = [t0]
            first = int(math.ceil(t0 / spacing - 1e-9))
            last = int(math.floor(t1 / spacing + 1e-9))
            ts += [q * spacing for q in range(first, last + 1) if t0 + 1e-9 < q * spacing < t1 - 1e-9]
            if t1 > t0 + 1e-9:
                ts.append(t1)
            if len(ts) < 3:
                # corner clip without an interior crossing: would be an isolated pair
                continue
            ids = []
            for q, t in enumerate(ts):
                on_b = q == 0 or q == len(ts) - 1
                ids.append(add(origin + t * along, on_b))
            for a, b in zip(ids, ids[1:]):
                edges.append((a, b))
    points = np.array([x for x, _ in pts])
    is_b = np.array([b for _, b in pts])
    return points, is_b, edges


def range_margin(R: float, rho: float, eta: float) -> float:
    """R − (R/2 + 2(2η + 1/(√2ρ))); must be positive."""
    return R - (R / 2.0 + 2.0 * (2.0 * eta + 1.0 / (SQRT2 * rho)))


def rotated_grid_topology(ff: FlatField, tau: float, directions: np.ndarray, R: float) -> tuple[FlatTopology, list]:
    """Per-region rotated grids of spacing R/2 mapped onto nearest satellites, stitched across regions.

    ``directions[i, j]`` is region (i, j)'s primary direction angle. Regions are
    squares of side τ on the lattice; satellites belong to the region of their
    lattice point.
    """
    margin = range_margin(R, ff.rho, ff.eta)
    if margin <= 0:
        raise ValueError(f"range condition violated: margin {margin:.6g} <= 0")
    k = tau * ff.rho
    if abs(k - round(k)) > 1e-9 or round(k) < 2:
        raise ValueError("tau must be an integer multiple (>= 2) of 1/rho")
    k = int(round(k))
    directions = np.asarray(directions, dtype=float)
    nri, nrj = directions.shape
    spacing = R / 2.0
    edges = []
    regions = []
    for i in range(nri):
        row = []
        for j in range(nrj):
            lo = np.array([i * tau, j * tau])
            hi = lo + (k - 1) / ff.rho
            reg = Region(i, j, lo, hi, float(directions[i, j]))
            in_reg = (ff.lattice[:, 0] // k == i) & (ff.lattice[:, 1] // k == j)
            members = np.flatnonzero(in_reg)
            pts, is_b, ledges = _region_grid(reg, spacing)
            d2 = ((pts[:, None, :] - ff.positions[members][None, :, :]) ** 2).sum(-1)
            reg.points, reg.boundary = pts, is_b
            reg.sats = members[np.argmin(d2, axis=1)]
            edges += [(int(reg.sats[a]), int(reg.sats[b])) for a, b in ledges
                      if reg.sats[a] != reg.sats[b]]
            row.append(reg)
        regions.append(row)
    intra = FlatTopology(ff.positions, np.array(edges, dtype=np.int64).reshape(-1, 2))
    region_degree = int(intra.degree().max()) if len(intra.edges) else 0
    if region_degree > 4:
        raise ValueError(f"in-region degree {region_degree} exceeds 4")
    stitches = 0
    for i in range(nri):
        for j in range(nrj):
            for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
                i2, j2 = i + di, j + dj
                if not (0 <= i2 < nri and 0 <= j2 < nrj):
                    continue
                a, b = regions[i][j], regions[i2][j2]
                new = _stitch(a, b)
                stitches += len(new)
                edges += new
    topo = FlatTopology(ff.positions, np.array(edges, dtype=np.int64).reshape(-1, 2),
                        {"tau": tau, "R": R, "stitches": stitches, "region_degree": region_degree})
    return topo, regions


def _stitch(a: Region, b: Region) -> list:
    """Join each facing boundary point to its nearest counterpart across the gap."""
    pa = np.flatnonzero(a.boundary)
    pb = np.flatnonzero(b.boundary)
    if len(pa) == 0 or len(pb) == 0:
        return []
    xa, xb = a.points[pa], b.points[pb]
    gap = np.linalg.norm(b.lo - a.hi) if (b.i != a.i and b.j != a.j) else None
    d = np.linalg.norm(xa[:, None, :] - xb[None, :, :], axis=-1)
    if gap is not None:
        # diagonal neighbours meet at one corner only
        k = np.unravel_index(np.argmin(d), d.shape)
        return [(int(a.sats[pa[k[0]]]), int(b.sats[pb[k[1]]]))]
    axis = 0 if b.i != a.i else 1
    face_a = np.abs(xa[:, axis] - a.hi[axis]) < 1e-9
    face_b = np.abs(xb[:, axis] - b.lo[axis]) < 1e-9
    out = []
    if not face_a.any() or not face_b.any():
        return out
    fa, fb = pa[face_a], pb[face_b]
    da = d[np.ix_(face_a, face_b)]
    for r, kk in enumerate(np.argmin(da, axis=1)):
        out.append((int(a.sats[fa[r]]), int(b.sats[fb[kk]])))
    for c, kk in enumerate(np.argmin(da, axis=0)):
        out.append((int(a.sats[fa[kk]]), int(b.sats[fb[c]])))
    return out


def _nearest_point(reg: Region, x: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(reg.points - x, axis=1)
    best = np.flatnonzero(d <= d.min() + 1e-12)
    cand = reg.points[best]
    k = np.lexsort((cand[:, 1], cand[:, 0]))[0]
    return cand[k]


def line_regions(regions: list, xs: np.ndarray, xd: np.ndarray) -> list:
    """Regions met by segment xs→xd in order, with entry/exit points."""
    u = xd - xs
    hits = []
    for row in regions:
        for reg in row:
            seg = _clip_line(xs, u, reg.lo, reg.hi)
            if seg is None:
                continue
            t0, t1 = max(seg[0], 0.0), min(seg[1], 1.0)
            if t1 < t0 - 1e-12:
                continue
            hits.append((t0, t1, reg))
    hits.sort(key=lambda h: (h[0], h[1]))
    return [(reg, xs + t0 * u, xs + t1 * u) for t0, t1, reg in hits]


def _gain(v: np.ndarray, direction: float) -> float:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        return 0.0
    c = abs(v[0] * math.cos(direction) + v[1] * math.sin(direction)) / n
    s = math.sqrt(max(0.0, 1.0 - c * c))
    return n * (c + s)


def theorem2_upper_bound(xs: np.ndarray, xd: np.ndarray, crossings: list, R: float, rho: float,
                         eta: float, aligned: bool = False) -> float:
    """Upper bound on the s→d shortest-path length over the rotated-grid topology.

    ``crossings`` is the output of :func:`line_regions`. With ``aligned`` the
    per-segment factor |cos θ| + |sin θ| is replaced by 1 + R/(2√2‖segment‖),
    the form valid when every primary direction is parallel to d − s.
    """
    if not crossings:
        raise ValueError("the segment crosses no region")
    xs, xd = np.asarray(xs, float), np.asarray(xd, float)
    k = len(crossings)
    scale = 1.0 + (4.0 / R) * (2.0 * eta + 1.0 / (SQRT2 * rho))

    def term(v, direction):
        n = float(np.linalg.norm(v))
        if aligned:
            return R + n + (R / (2.0 * SQRT2) if n > 0 else 0.0)
        return R + _gain(v, direction)

    if k == 1:
        total = term(xd - xs, crossings[0][0].direction)
    else:
        reg1, _, out1 = crossings[0]
        total = term(xs - _nearest_point(reg1, out1), reg1.direction)
        for reg, x_in, x_out in crossings[1:-1]:
            total += term(_nearest_point(reg, x_in) - _nearest_point(reg, x_out), reg.direction)
        regk, ink, _ = crossings[-1]
        total += term(xd - _nearest_point(regk, ink), regk.direction)
    return scale * total + (k - 1) * R / 2.0


# -- serialization -----------------------------------------------------------------------


def dump_instance(path, ff: FlatField, demands=None, directions=None, extra: dict | None = None) -> None:
    doc = {
        "rho": ff.rho, "eta": ff.eta, "width": ff.width, "height": ff.height, "seed": ff.seed,
        "positions": ff.positions.tolist(), "lattice": ff.lattice.tolist(),
        "demands": [list(map(int, d)) for d in demands] if demands is not None else [],
        "directions": np.asarray(directions).tolist() if directions is not None else None,
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_instance(path) -> tuple[FlatField, list, np.ndarray | None]:
    with open(path) as fh:
        doc = json.load(fh)
    ff = FlatField(doc["rho"], doc["eta"], doc["width"], doc["height"], np.array(doc["positions"]),
                   np.array(doc["lattice"], dtype=np.int64), doc["seed"])
    dirs = np.array(doc["directions"]) if doc.get("directions") is not None else None
    return ff, [tuple(d) for d in doc["demands"]], dirs


# -- seeded bound checks -----------------------------------------------------------------------


@dataclass
class BoundCheck:
    seed: int
    theorem1_bound: float
    theorem1_best_stretch: float
    theorem2_checked: int
    theorem2_violations: int
    worst_ratio: float  # max measured / bound over theorem-2 demands

    @property
    def ok(self) -> bool:
        return self.theorem1_best_stretch >= self.theorem1_bound - 1e-9 and self.theorem2_violations == 0


def check_instance(seed: int, rho: float = 1.0, n_regions: int = 3, tau: float = 8.0,
                   num_demands: int = 40) -> BoundCheck:
    """Build one seeded rotated-grid instance and test both bounds on random demands."""
    rng = np.random.default_rng(seed)
    eta = float(rng.uniform(0.0, 0.45 / rho))
    R = float(4.0 * (2.0 * eta + 1.0 / (SQRT2 * rho)) * rng.uniform(1.1, 1.6))
    side = n_regions * tau
    ff = gen_flat_field(rho, eta, (side - 1.0 / rho, side - 1.0 / rho), seed)
    dirs = rng.uniform(0.0, math.pi, size=(n_regions, n_regions))
    topo, regions = rotated_grid_topology(ff, tau, dirs, R)
    used = np.unique(topo.edges)
    # Theorem 2: shortest path never exceeds the bound
    violations, worst, checked = 0, 0.0, 0
    pairs = []
    while len(pairs) < num_demands:
        a, b = rng.choice(used, size=2, replace=False)
        pairs.append((int(a), int(b)))
    for a, b in pairs:
        xs, xd = ff.positions[a], ff.positions[b]
        cr = line_regions(regions, xs, xd)
        if not cr:
            continue
        bound = theorem2_upper_bound(xs, xd, cr, R, rho, eta)
        length = topo.shortest_path_length(a, b)
        checked += 1
        worst = max(worst, length / bound)
        if length > bound + 1e-9:
            violations += 1
    # Theorem 1: some demand in the box meets the lower bound, paths confined to corridors
    R_edges = float(topo.edge_lengths().max())
    lo, hi = np.zeros(2), np.full(2, side - 1.0 / rho)
    inside = [(a, b) for a, b in pairs
              if np.all(ff.positions[[a, b]] >= lo + R_edges) and np.all(ff.positions[[a, b]] <= hi - R_edges)]
    if not inside:
        inside = pairs[:1]
    eps = float(rng.uniform(0.05, math.pi / 3))
    lam = max_aligned_demands(FlatDemandSet(ff.positions, inside).angles(), eps)
    cells = int(math.ceil((hi[0] - lo[0]) * rho)) + 2
    alpha = cells * cells / (rho * rho)
    delta = int(topo.degree().max())
    best, best_bound = -math.inf, math.inf
    for a, b in inside:
        l_sd = float(np.linalg.norm(ff.positions[a] - ff.positions[b]))
        bound = theorem1_lower_bound(alpha, rho, delta, R_edges, eps, len(inside), lam, l_sd)
        mask = corridor_mask(ff.positions, ff.positions[a], ff.positions[b], R_edges)
        st = topo.stretch(a, b, mask)
        if st - bound > best - best_bound:
            best, best_bound = st, bound
    return BoundCheck(seed, best_bound, best, checked, violations, worst)


def write_bound_checks(path, checks: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "theorem1_bound", "theorem1_best_stretch", "theorem2_checked",
                    "theorem2_violations", "worst_ratio", "ok"])
        for c in checks:
            w.writerow([c.seed, repr(float(c.theorem1_bound)), repr(float(c.theorem1_best_stretch)),
                        c.theorem2_checked, c.theorem2_violations, repr(float(c.worst_ratio)), int(c.ok)])
