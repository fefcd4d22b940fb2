"""Command-line entry point: ``leotopo <command> --config run.yaml [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__, export, flat, routing, simulator
from .config import ConfigError, RunConfig
from .constellation import generate_shell, range_graph, time_grid
from .demand import build_demand, load_stations, perturb_demand, regional_flow_stats
from .geometry import GeometryError
from .topology import (Topology, TopologyError, dynamic_schedule, plus_grid_for, random_topology,
                       starfield, static_starfield)

log = logging.getLogger("leotopo")


def provenance(cfg: RunConfig, command: str) -> dict:
    return {"tool": "leotopo", "version": __version__, "command": command, "config_sha256": cfg.digest(),
            "seed": cfg["seed"]}


def _stamp_csv(path, prov: dict) -> None:
    with open(path) as fh:
        body = fh.read()
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(prov, sort_keys=True) + "\n" + body)


def _write_report(path, summary: dict, prov: dict) -> None:
    summary = dict(summary)
    summary["provenance"] = prov
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)


def _json_ready(x):
    if isinstance(x, dict):
        return {str(k): _json_ready(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_ready(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _window(cfg: RunConfig, start: float, end: float):
    shell = cfg.shell()
    return generate_shell(shell, time_grid(start, end, cfg["shell"]["time_step"]))


def _demand(cfg: RunConfig, stations, noisy: bool = False):
    d = cfg["demand"]
    dm = build_demand(stations, d["pattern"], d["base_intensity"], d["seed"], d["constant"])
    if noisy and (d["noise_mu"] != 0 or d["noise_sigma"] != 0):
        dm = perturb_demand(dm, d["noise_mu"], d["noise_sigma"], d["noise_seed"])
    return dm


def build_schedule(cfg: RunConfig, stations, demand) -> list[tuple[tuple[float, float], Topology]]:
    """Topologies with their validity windows over [0, duration]."""
    duration = max(cfg["duration"], cfg["shell"]["time_step"])
    t = cfg["topology"]
    gen = t["generator"]
    shell = cfg.shell()
    if gen == "plus_grid":
        return [((0.0, duration), plus_grid_for(shell))]
    if gen == "starfield" and t["epoch_length"] is not None:
        edges = list(np.arange(0.0, duration, t["epoch_length"])) + [duration]
        epochs = [(float(a), float(b)) for a, b in zip(edges, edges[1:]) if b > a + 1e-9]
        return dynamic_schedule(epochs, shell, demand, stations, cfg.starfield_params(),
                                cfg["shell"]["time_step"])
    eph = _window(cfg, 0.0, duration)
    rg = range_graph(eph, shell.isl_range)
    if gen == "starfield":
        topo = starfield(rg, eph, demand, stations, cfg.starfield_params())
    elif gen == "static_starfield":
        topo = static_starfield(rg, eph, demand, stations, cfg.starfield_params())
    else:
        topo = random_topology(rg, eph, int(t["kappa"]), cfg["seed"])
    topo.check(rg)
    return [((0.0, duration), topo)]


def cmd_constellation(cfg: RunConfig, out: str) -> dict:
    if cfg["duration"] <= 0:
        raise ConfigError("empty time grid: duration must be positive")
    eph = _window(cfg, 0.0, cfg["duration"])
    prov = provenance(cfg, "constellation")
    path = os.path.join(out, "ephemeris.csv")
    eph.to_csv(path)
    _stamp_csv(path, prov)
    rg = range_graph(eph, eph.config.isl_range)
    deg = rg.degree()
    summary = {"num_sats": eph.num_sats, "samples": len(eph.times), "isl_range_m": eph.config.isl_range,
               "range_degree_min": int(deg.min()), "range_degree_mean": float(deg.mean())}
    _write_report(os.path.join(out, "report.json"), summary, prov)
    return summary


def cmd_topology(cfg: RunConfig, out: str) -> dict:
    stations = load_stations()
    demand = _demand(cfg, stations)
    schedule = build_schedule(cfg, stations, demand)
    prov = provenance(cfg, "topology")
    shell = cfg.shell()
    n_snap = int(cfg["topology"]["snapshots"])
    stretch, hops, degs, edges = [], [], [], []
    per_epoch = []
    for k, ((a, b), topo) in enumerate(schedule):
        name = "topology.csv" if len(schedule) == 1 else f"topology_{k:03d}.csv"
        topo.to_csv(os.path.join(out, name), shell, prov)
        snaps = np.stack([generate_shell(shell, [t]).positions[0] for t in np.linspace(a, b, n_snap)])
        rep = routing.stretch_report(topo, snaps, stations, demand)
        stretch.append(rep.stretch)
        hops.append(rep.hops)
        degs.append(int(topo.degree().max(initial=0)))
        edges.append(topo.num_edges)
        per_epoch.append({"window": [a, b], "num_edges": topo.num_edges, **rep.summary()})
        if len(schedule) == 1:
            rep.to_csv(os.path.join(out, "flows.csv"))
    s, h = np.concatenate(stretch), np.concatenate(hops)
    for metric, values in (("stretch", s), ("hops", h)):
        path = os.path.join(out, f"cdf_{metric}.csv")
        v, c = routing.cdf_points(values)
        with open(path, "w") as fh:
            fh.write(f"# p90_marker={float(np.percentile(values, 90))!r}\n")
            fh.write("value,cumulative_fraction\n")
            fh.writelines(f"{x!r},{y!r}\n" for x, y in zip(v.tolist(), c.tolist()))
        _stamp_csv(path, prov)
    if os.path.exists(os.path.join(out, "flows.csv")):
        _stamp_csv(os.path.join(out, "flows.csv"), prov)
    summary = {
        "generator": cfg["topology"]["generator"],
        "epochs": len(schedule),
        "max_degree": max(degs),
        "num_edges": edges,
        "mean_stretch": float(s.mean()),
        "mean_hops": float(h.mean()),
        "stretch_p90": float(np.percentile(s, 90)),
        "hops_p90": float(np.percentile(h, 90)),
        "per_epoch": per_epoch,
    }
    _write_report(os.path.join(out, "report.json"), _json_ready(summary), prov)
    return summary


def cmd_simulate(cfg: RunConfig, out: str) -> dict:
    stations = load_stations()
    demand = _demand(cfg, stations)
    schedule = build_schedule(cfg, stations, demand)
    traffic = _demand(cfg, stations, noisy=True)
    rep = simulator.run(schedule, cfg.shell(), stations, traffic, cfg.net_params(), cfg["duration"],
                        cfg["seed"], trace=bool(cfg["network"]["trace"]))
    prov = provenance(cfg, "simulate")
    markers = simulator.replay_metrics(rep, out, header=None)
    for name in ("cdf_stretch.csv", "cdf_rtt.csv", "hops.csv", "link_usage_hist.csv", "flows.csv", "links.csv"):
        _stamp_csv(os.path.join(out, name), prov)
    if rep.trace is not None:
        path = os.path.join(out, "trace.csv")
        with open(path, "w") as fh:
            fh.write("packet,from,to,enqueued_s,sent_s,arrived_s\n")
            fh.writelines(",".join(repr(x) for x in row) + "\n" for row in rep.trace)
        _stamp_csv(path, prov)
    summary = rep.summary()
    summary["markers"] = markers
    _write_report(os.path.join(out, "report.json"), _json_ready(summary), prov)
    return summary


def cmd_flat(cfg: RunConfig, out: str) -> dict:
    f = cfg["flat"]
    prov = provenance(cfg, "flat")
    grid, diag = flat.motivating_example()
    seeds = [cfg["seed"] + k for k in range(int(f["instances"]))]
    checks = [flat.check_instance(s, f["rho"], int(f["n_regions"]), f["tau"], int(f["num_demands"]))
              for s in seeds]
    path = os.path.join(out, "flat_bounds.csv")
    flat.write_bound_checks(path, checks)
    _stamp_csv(path, prov)
    if seeds:
        ff = flat.gen_flat_field(f["rho"], 0.25 / f["rho"], (f["tau"] * f["n_regions"] - 1.0 / f["rho"],) * 2,
                                 seeds[0])
        flat.dump_instance(os.path.join(out, "instance.json"), ff, extra={"provenance": prov})
    summary = {
        "motivating_grid_stretch": grid,
        "motivating_diagonal_stretch": diag,
        "instances": len(checks),
        "violations": sum(not c.ok for c in checks),
        "theorem2_worst_ratio": max((float(c.worst_ratio) for c in checks), default=None),
    }
    _write_report(os.path.join(out, "report.json"), summary, prov)
    print(f"+Grid corner stretch {grid:.8f}  diagonal {diag:.4f}")
    print(f"bound violations: {summary['violations']} / {len(checks)}")
    return summary


def cmd_export_viz(cfg: RunConfig, out: str, topology_csv: str | None = None) -> dict:
    stations = load_stations()
    shell = cfg.shell()
    prov = provenance(cfg, "export-viz")
    if topology_csv:
        topo = Topology.from_csv(topology_csv, shell)
    else:
        topo = build_schedule(cfg, stations, _demand(cfg, stations))[0][1]
    eph = _window(cfg, 0.0, max(cfg["duration"], cfg["shell"]["time_step"]))
    gj = export.geojson(shell, eph.positions[0], topo, stations, _demand(cfg, stations))
    gj["provenance"] = prov
    export.write_json(os.path.join(out, "network.geojson"), gj)
    cz = export.czml(eph, topo)
    cz[0]["provenance"] = prov
    export.write_json(os.path.join(out, "network.czml"), cz)
    roles: dict = {}
    for feat in gj["features"]:
        r = feat["properties"]["role"]
        roles[r] = roles.get(r, 0) + 1
    return {"features": roles}


def cmd_analyze_demand(cfg: RunConfig, out: str) -> dict:
    a = cfg["analysis"]
    stations = load_stations()
    demand = _demand(cfg, stations)
    grid = regional_flow_stats(demand, stations, a["l_theta"], a["l_phi"], a["orientation"])
    prov = provenance(cfg, "analyze-demand")
    path = os.path.join(out, "regions.csv")
    grid.to_csv(path)
    _stamp_csv(path, prov)
    summary = {"pattern": cfg["demand"]["pattern"], "orientation": a["orientation"],
               "l_theta": a["l_theta"], "l_phi": a["l_phi"], "weighted_resultant": grid.global_resultant}
    _write_report(os.path.join(out, "report.json"), summary, prov)
    print(f"weighted mean resultant length: {grid.global_resultant:.4f}")
    return summary


COMMANDS = {
    "constellation": cmd_constellation,
    "topology": cmd_topology,
    "simulate": cmd_simulate,
    "flat": cmd_flat,
    "export-viz": cmd_export_viz,
    "analyze-demand": cmd_analyze_demand,
}


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leotopo", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML run file; omitted keys take the Phase-1 defaults")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "export-viz":
            sp.add_argument("--topology", help="topology CSV to export instead of generating one")
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = args.out or cfg["out"]
        os.makedirs(out, exist_ok=True)
        fn = COMMANDS[args.command]
        if args.command == "export-viz":
            result = fn(cfg, out, args.topology)
        else:
            result = fn(cfg, out)
    except (ConfigError, TopologyError, GeometryError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    log.info(json.dumps(_json_ready(result), default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
