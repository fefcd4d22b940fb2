# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of ``_kernels_py``; same signatures and semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, asin, exp, log, fabs, hypot, INFINITY

cnp.import_array()

DEF PLAIN = 0


cdef inline double _arc(double px, double py, double pz,
                        double qx, double qy, double qz, double rho) nogil:
    cdef double dx = px - qx, dy = py - qy, dz = pz - qz
    cdef double c = sqrt(dx * dx + dy * dy + dz * dz) / (2.0 * rho)
    if c > 1.0:
        c = 1.0
    return 2.0 * rho * asin(c)


cdef inline void _tangent(double px, double py, double pz, double pp,
                          double qx, double qy, double qz, double tol,
                          double* out) nogil:
    cdef double pq = px * qx + py * qy + pz * qz
    cdef double tx = px * pq - qx * pp
    cdef double ty = py * pq - qy * pp
    cdef double tz = pz * pq - qz * pp
    cdef double n = sqrt(tx * tx + ty * ty + tz * tz)
    if n > tol:
        out[0] = tx / n
        out[1] = ty / n
        out[2] = tz / n
    else:
        out[0] = 0.0
        out[1] = 0.0
        out[2] = 0.0


def flow_fields(p, U, V, w, double K, double unit, double min_dist,
                double sin_incl, double eta, double omega, bint crown):
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64).reshape(-1, 3)
    cdef double[:, ::1] Vv = np.ascontiguousarray(V, dtype=np.float64).reshape(-1, 3)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t F = Uv.shape[0], k
    out = np.zeros((F, 3), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double px = pv[0], py = pv[1], pz = pv[2]
    cdef double pp = px * px + py * py + pz * pz
    cdef double rho = sqrt(pp)
    cdef double tol = 1e-12 * pp * rho
    cdef double tu[3]
    cdef double tv[3]
    cdef double du, dv, s, fx, fy, fz, fr, hx, hy, hz
    cdef double h = hypot(px, py)
    cdef double phx = 0.0, phy = 0.0, gain = 0.0, fp
    hx = px / rho
    hy = py / rho
    hz = pz / rho
    if crown and h > 0.0:
        phx = -py / h
        phy = px / h
        gain = eta * exp(-omega * (sin_incl - fabs(pz) / rho))
    with nogil:
        for k in range(F):
            _tangent(px, py, pz, pp, Uv[k, 0], Uv[k, 1], Uv[k, 2], tol, tu)
            _tangent(px, py, pz, pp, Vv[k, 0], Vv[k, 1], Vv[k, 2], tol, tv)
            du = _arc(px, py, pz, Uv[k, 0], Uv[k, 1], Uv[k, 2], rho)
            dv = _arc(px, py, pz, Vv[k, 0], Vv[k, 1], Vv[k, 2], rho)
            if du < min_dist:
                du = min_dist
            if dv < min_dist:
                dv = min_dist
            du = du / unit
            dv = dv / unit
            s = K * wv[k]
            fx = s * (tu[0] / (dv * dv) - tv[0] / (du * du))
            fy = s * (tu[1] / (dv * dv) - tv[1] / (du * du))
            fz = s * (tu[2] / (dv * dv) - tv[2] / (du * du))
            fr = fx * hx + fy * hy + fz * hz
            fx = fx - fr * hx
            fy = fy - fr * hy
            fz = fz - fr * hz
            if gain != 0.0:
                fp = gain * (fx * phx + fy * phy)
                fx = fx + fp * phx
                fy = fy + fp * phy
            o[k, 0] = fx
            o[k, 1] = fy
            o[k, 2] = fz
    return out


def link_costs(p, fields, cands, double unit, int mode, double eps):
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] fv = np.ascontiguousarray(fields, dtype=np.float64).reshape(-1, 3)
    cdef double[:, ::1] cv = np.ascontiguousarray(np.atleast_2d(cands), dtype=np.float64)
    cdef Py_ssize_t F = fv.shape[0], C = cv.shape[0], k, c
    out = np.zeros(C, dtype=np.float64)
    cdef double[::1] o = out
    cdef double px = pv[0], py = pv[1], pz = pv[2]
    cdef double rho = sqrt(px * px + py * py + pz * pz)
    # f⊥ = f × p / ρ, precomputed per flow
    fp_arr = np.empty((F, 3), dtype=np.float64)
    ex_arr = np.empty(F, dtype=np.float64)
    cdef double[:, ::1] fp = fp_arr
    cdef double[::1] ex = ex_arr
    cdef double fx, fy, fz, dx, dy, dz, lm, ll, acc, d, reg, x
    cdef Py_ssize_t nf = F if F > 0 else 1
    with nogil:
        for k in range(F):
            fx = fv[k, 0]
            fy = fv[k, 1]
            fz = fv[k, 2]
            fp[k, 0] = (fy * pz - fz * py) / rho
            fp[k, 1] = (fz * px - fx * pz) / rho
            fp[k, 2] = (fx * py - fy * px) / rho
            ex[k] = 2.0 * exp(-sqrt(fx * fx + fy * fy + fz * fz))
        for c in range(C):
            dx = px - cv[c, 0]
            dy = py - cv[c, 1]
            dz = pz - cv[c, 2]
            lm = sqrt(dx * dx + dy * dy + dz * dz)
            reg = eps * nf * lm
            dx = dx / unit
            dy = dy / unit
            dz = dz / unit
            acc = 0.0
            if mode == PLAIN:
                for k in range(F):
                    acc += fabs(fp[k, 0] * dx + fp[k, 1] * dy + fp[k, 2] * dz)
            else:
                ll = log(lm / unit)
                for k in range(F):
                    d = fabs(fp[k, 0] * dx + fp[k, 1] * dy + fp[k, 2] * dz)
                    x = ex[k] * ll
                    # exp(-x) rounds to exactly 1.0 below this
                    if fabs(x) < 1e-17:
                        acc += d
                    elif d != 0.0:
                        acc += d * exp(-x)
            o[c] = acc + reg
    return out


cdef inline void _sift_up(double* hd, long* hn, Py_ssize_t i) nogil:
    cdef Py_ssize_t parent
    cdef double d = hd[i]
    cdef long n = hn[i]
    while i > 0:
        parent = (i - 1) >> 1
        if hd[parent] < d or (hd[parent] == d and hn[parent] <= n):
            break
        hd[i] = hd[parent]
        hn[i] = hn[parent]
        i = parent
    hd[i] = d
    hn[i] = n


cdef inline void _sift_down(double* hd, long* hn, Py_ssize_t size) nogil:
    cdef Py_ssize_t i = 0, child, right
    cdef double d = hd[0]
    cdef long n = hn[0]
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        right = child + 1
        if right < size and (hd[right] < hd[child] or (hd[right] == hd[child] and hn[right] < hn[child])):
            child = right
        if d < hd[child] or (d == hd[child] and n <= hn[child]):
            break
        hd[i] = hd[child]
        hn[i] = hn[child]
        i = child
    hd[i] = d
    hn[i] = n


def dijkstra(indptr, indices, weights, Py_ssize_t n, sources, init_dist):
    cdef long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef long[::1] src = np.ascontiguousarray(sources, dtype=np.int64)
    cdef double[::1] d0 = np.ascontiguousarray(init_dist, dtype=np.float64)
    dist_arr = np.full(n, np.inf)
    pred_arr = np.full(n, -1, dtype=np.int64)
    cdef double[::1] dist = dist_arr
    cdef long[::1] pred = pred_arr
    cdef Py_ssize_t cap = ix.shape[0] + src.shape[0] + 1
    hd_arr = np.empty(cap, dtype=np.float64)
    hn_arr = np.empty(cap, dtype=np.int64)
    done_arr = np.zeros(n, dtype=np.uint8)
    cdef double[::1] hd = hd_arr
    cdef long[::1] hn = hn_arr
    cdef unsigned char[::1] done = done_arr
    cdef Py_ssize_t size = 0, i, k
    cdef long u, v
    cdef double d, nd
    with nogil:
        for i in range(src.shape[0]):
            u = src[i]
            if d0[i] < dist[u]:
                dist[u] = d0[i]
                hd[size] = d0[i]
                hn[size] = u
                size += 1
                _sift_up(&hd[0], &hn[0], size - 1)
        while size > 0:
            d = hd[0]
            u = hn[0]
            size -= 1
            if size > 0:
                hd[0] = hd[size]
                hn[0] = hn[size]
                _sift_down(&hd[0], &hn[0], size)
            if done[u]:
                continue
            done[u] = 1
            for k in range(ip[u], ip[u + 1]):
                v = ix[k]
                nd = d + wt[k]
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = u
                    hd[size] = nd
                    hn[size] = v
                    size += 1
                    _sift_up(&hd[0], &hn[0], size - 1)
    return dist_arr, pred_arr
