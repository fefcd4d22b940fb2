"""Pure numpy/heapq kernels. Reference semantics for the compiled twins."""
from __future__ import annotations

import heapq

import numpy as np

PLAIN = 0
PRIORITIZED = 1


def _tangents(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # ((q×p)×p) = p(p·q) − q‖p‖²; zero rows where p, q are (anti)parallel
    pp = p @ p
    t = np.outer(q @ p, p) - q * pp
    n = np.linalg.norm(t, axis=1)
    good = n > 1e-12 * pp * np.sqrt(pp)
    out = np.zeros_like(t)
    out[good] = t[good] / n[good, None]
    return out


def flow_fields(p, U, V, w, K, unit, min_dist, sin_incl, eta, omega, crown):
    """Per-flow demand field at satellite position ``p``; returns (F, 3)."""
    p = np.asarray(p, dtype=float)
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    w = np.asarray(w, dtype=float)
    if U.shape[0] == 0:
        return np.zeros((0, 3))
    rho = float(np.sqrt(p @ p))
    tu = _tangents(p, U)
    tv = _tangents(p, V)
    du = 2.0 * rho * np.arcsin(np.clip(np.linalg.norm(U - p, axis=1) / (2.0 * rho), 0.0, 1.0))
    dv = 2.0 * rho * np.arcsin(np.clip(np.linalg.norm(V - p, axis=1) / (2.0 * rho), 0.0, 1.0))
    du = np.maximum(du, min_dist) / unit
    dv = np.maximum(dv, min_dist) / unit
    f = (K * w)[:, None] * (tu / (dv * dv)[:, None] - tv / (du * du)[:, None])
    ph = p / rho
    f -= np.outer(f @ ph, ph)
    if crown:
        h = np.hypot(p[0], p[1])
        if h > 0.0:
            phi = np.array([-p[1] / h, p[0] / h, 0.0])
            gain = eta * np.exp(-omega * (sin_incl - abs(p[2]) / rho))
            f += gain * np.outer(f @ phi, phi)
    return f


def link_costs(p, fields, cands, unit, mode, eps):
    """Aggregate link distance Σ_flows D(p→c) + ε·max(F,1)·‖p−c‖ per candidate."""
    p = np.asarray(p, dtype=float)
    fields = np.asarray(fields, dtype=float)
    cands = np.atleast_2d(np.asarray(cands, dtype=float))
    rho = float(np.sqrt(p @ p))
    diff = p - cands
    length_m = np.linalg.norm(diff, axis=1)
    n_flows = fields.shape[0]
    reg = eps * max(n_flows, 1) * length_m
    if n_flows == 0:
        return reg
    fperp = np.cross(fields, p) / rho
    delta = diff / unit
    proj = np.abs(fperp @ delta.T)
    if mode == PLAIN:
        return proj.sum(axis=0) + reg
    a = 2.0 * np.exp(-np.linalg.norm(fields, axis=1))
    log_len = np.log(length_m / unit)
    return (proj * np.exp(-np.outer(a, log_len))).sum(axis=0) + reg


def dijkstra(indptr, indices, weights, n, sources, init_dist):
    """Multi-source Dijkstra over CSR adjacency.

    Heap entries are (distance, node), so equal-distance pops go in node order
    and predecessors only change on strict improvement.
    """
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    heap = []
    for s, d0 in zip(sources, init_dist):
        s = int(s)
        if d0 < dist[s]:
            dist[s] = d0
            heapq.heappush(heap, (float(d0), s))
    done = [False] * n
    ip = indptr.tolist() if hasattr(indptr, "tolist") else indptr
    ix = indices.tolist() if hasattr(indices, "tolist") else indices
    wt = weights.tolist() if hasattr(weights, "tolist") else weights
    dl = dist.tolist()
    pl = pred.tolist()
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for k in range(ip[u], ip[u + 1]):
            v = ix[k]
            nd = d + wt[k]
            if nd < dl[v]:
                dl[v] = nd
                pl[v] = u
                heapq.heappush(heap, (nd, v))
    return np.asarray(dl), np.asarray(pl, dtype=np.int64)
