"""Time the compiled kernels against the pure-Python fallback on Phase-1 sized inputs.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from leotopo import _kernels_py
from leotopo.constellation import ShellConfig, generate_shell, range_graph
from leotopo.demand import FlowSet, build_demand, load_stations
from leotopo.routing import csr_from_edges
from leotopo.topology import plus_grid_for

try:
    from leotopo import _ckernels
except ImportError:
    _ckernels = None


def _inputs():
    cfg = ShellConfig.phase1()
    eph = generate_shell(cfg, [0.0])
    pos = eph.positions[0]
    stations = load_stations()
    flows = FlowSet.from_demand(build_demand(stations, "distance"), stations, cfg.radius)
    rg = range_graph(eph, cfg.isl_range)
    nb = rg.neighbors(0)
    indptr, indices, w = csr_from_edges(cfg.num_sats, plus_grid_for(cfg).edges, pos)
    return cfg, pos, flows, nb, (indptr, indices, w)


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    cfg, pos, flows, nb, (indptr, indices, w) = _inputs()
    p = pos[0]
    sin_i = float(np.sin(cfg.inclination))
    md = cfg.intra_orbit_spacing

    def cases(mod):
        fields = mod.flow_fields(p, flows.U, flows.V, flows.weight, 1e7, 1000.0, md, sin_i, 1.0, 10.0, True)
        return {
            "flow_fields (9900 flows)": lambda: mod.flow_fields(p, flows.U, flows.V, flows.weight, 1e7, 1000.0,
                                                                md, sin_i, 1.0, 10.0, True),
            f"link_costs ({len(nb)} cands)": lambda: mod.link_costs(p, fields, pos[nb], 1000.0, 1, 1e-12),
            "dijkstra (1584 sats)": lambda: mod.dijkstra(indptr, indices, w, cfg.num_sats,
                                                         np.array([0], dtype=np.int64), np.zeros(1)),
        }

    py = cases(_kernels_py)
    cy = cases(_ckernels) if _ckernels is not None else {}
    print(f"{'kernel':28s} {'python (ms)':>12s} {'cython (ms)':>12s} {'speedup':>8s}")
    for name, fn in py.items():
        t_py = _time(fn, args.repeat) * 1e3
        if name in cy:
            t_cy = _time(cy[name], args.repeat) * 1e3
            print(f"{name:28s} {t_py:12.2f} {t_cy:12.2f} {t_py / t_cy:8.1f}")
        else:
            print(f"{name:28s} {t_py:12.2f} {'n/a':>12s}")


if __name__ == "__main__":
    main()
