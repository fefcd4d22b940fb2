import math
from collections import defaultdict

import numpy as np
import pytest

from leotopo import constellation as c
from leotopo import demand as dm
from leotopo import geometry as geo
from leotopo import simulator as sim
from leotopo import topology as tp

BITS = 96_000.0


@pytest.fixture(scope="module")
def toy():
    """Frozen single orbit; one station under satellite 0 and one under satellite 1."""
    cfg = c.ShellConfig(num_orbits=1, sats_per_orbit=22, mean_motion=0.0)
    pos = c.positions_at(cfg, 0.0)
    stations = []
    for k in (0, 1):
        lat, lon = geo.cartesian_to_latlon(pos[k])
        stations.append(dm.GroundStation(k, f"g{k}", float(lat), float(lon)))
    topo = tp.Topology(cfg.num_sats, np.array([[0, 1]]), 4, "toy")
    return cfg, stations, topo


def one_flow(rate):
    return dm.DemandMatrix(np.array([[0.0, rate], [0.0, 0.0]]))


def test_capacity_calibration():
    p = sim.NetParams()
    assert sim.link_capacity(550e3, sim.GSL, p) == pytest.approx(1e11, rel=1e-12)
    assert sim.link_capacity(2e6, sim.ISL, p, isl_ref=2e6) == pytest.approx(1e12, rel=1e-12)
    d = np.linspace(1e5, 5e6, 50)
    cap = sim.link_capacity(d, sim.ISL, p, isl_ref=2e6)
    assert np.all(np.diff(cap) < 0) and np.all(np.isfinite(cap))
    # ν = 0.001 would overflow 2^(1/ν) in linear space
    assert np.isfinite(sim.link_capacity(1e7, sim.GSL, p))
    with pytest.raises(ValueError):
        sim.link_capacity(0.0, sim.ISL, p, 1.0)
    with pytest.raises(ValueError):
        sim.link_capacity(1.0, "laser", p)


def test_rtt_closed_form(toy):
    cfg, stations, topo = toy
    p = sim.NetParams(rate_scale=1.0)
    rep = sim.run(sim.static_schedule(topo, 20.0), cfg, stations, one_flow(2.0), p, duration=20.0, seed=1)
    up = cfg.altitude
    isl = cfg.intra_orbit_spacing
    one_way = (2 * up + isl) / geo.C_LIGHT + 2 * BITS / p.gsl_bandwidth + BITS / p.isl_bandwidth
    rtt = rep.rtt_samples()
    assert len(rtt) > 10
    np.testing.assert_allclose(rtt, 2 * one_way, rtol=0.01)
    assert rep.mean_hops == pytest.approx(3.0)
    g = dm.surface_distances(stations)[0, 1]
    assert rep.mean_stretch == pytest.approx((2 * up + isl) / g, rel=1e-9)


def test_conservation_and_determinism(toy):
    cfg, stations, topo = toy
    p = sim.NetParams(rate_scale=1.0)
    a = sim.run(sim.static_schedule(topo, 5.0), cfg, stations, one_flow(50.0), p, duration=5.0, seed=7)
    b = sim.run(sim.static_schedule(topo, 5.0), cfg, stations, one_flow(50.0), p, duration=5.0, seed=7)
    for cnt in (a.data, a.echo):
        assert cnt.generated == cnt.delivered + cnt.dropped + cnt.in_flight
    assert a.echo.generated == a.data.delivered
    assert a.summary() == b.summary()
    assert a.link_forwards == b.link_forwards
    c2 = sim.run(sim.static_schedule(topo, 5.0), cfg, stations, one_flow(50.0), p, duration=5.0, seed=8)
    assert c2.data.generated != a.data.generated or c2.rtt_samples().tolist() != a.rtt_samples().tolist()


def test_drop_rate_under_overload(toy):
    cfg, stations, topo = toy
    # the ISL serves 10 packets/s, the flow offers 20
    p = sim.NetParams(isl_bandwidth=10 * BITS, buffer_size=5, rate_scale=1.0)
    rep = sim.run(sim.static_schedule(topo, 300.0), cfg, stations, one_flow(20.0), p, duration=300.0, seed=2)
    drop = rep.data.dropped / rep.data.generated
    assert drop == pytest.approx(1 - 10 / 20, abs=0.03)
    assert rep.drops_by_cause["buffer"] >= rep.data.dropped


def test_fifo_order(toy):
    cfg, stations, topo = toy
    p = sim.NetParams(isl_bandwidth=30 * BITS, buffer_size=50, rate_scale=1.0)
    rep = sim.run(sim.static_schedule(topo, 20.0), cfg, stations, one_flow(25.0), p, duration=20.0,
                  seed=3, trace=True)
    per_link = defaultdict(list)
    for pid, a, b, t_enq, done, arrive in rep.trace:
        per_link[(a, b)].append((t_enq, done, arrive))
    assert per_link
    queued = 0
    for rows in per_link.values():
        enq = [r[0] for r in rows]
        done = [r[1] for r in rows]
        arr = [r[2] for r in rows]
        assert enq == sorted(enq)
        assert all(x < y for x, y in zip(done, done[1:]))
        assert arr == sorted(arr)
        queued += sum(d - e > BITS / (30 * BITS) + 1e-12 for e, d in zip(enq, done))
    assert queued > 0  # the check exercised real queueing


def test_zero_duration(toy):
    cfg, stations, topo = toy
    rep = sim.run(sim.static_schedule(topo, 0.0), cfg, stations, one_flow(5.0), sim.NetParams(), duration=0.0)
    assert rep.packets_routed == 0 and math.isnan(rep.mean_stretch)


def test_no_route_drops(toy):
    cfg, stations, _ = toy
    empty = tp.Topology(cfg.num_sats, np.zeros((0, 2), dtype=np.int64), 4, "empty")
    rep = sim.run(sim.static_schedule(empty, 3.0), cfg, stations, one_flow(5.0),
                  sim.NetParams(rate_scale=1.0), duration=3.0)
    assert rep.data.generated > 0
    assert rep.data.dropped == rep.data.generated == rep.drops_by_cause["no_route"]


def test_bad_inputs(toy):
    cfg, stations, topo = toy
    with pytest.raises(ValueError):
        sim.run([], cfg, stations, one_flow(1.0))
    with pytest.raises(ValueError):
        sim.NetParams(buffer_size=0)


def test_replay_metrics(tmp_path, toy):
    cfg, stations, topo = toy
    rep = sim.run(sim.static_schedule(topo, 5.0), cfg, stations, one_flow(5.0),
                  sim.NetParams(rate_scale=1.0), duration=5.0)
    markers = sim.replay_metrics(rep, tmp_path)
    for name in ("cdf_stretch.csv", "cdf_rtt.csv", "hops.csv", "link_usage_hist.csv", "flows.csv",
                 "links.csv", "report.json"):
        assert (tmp_path / name).exists()
    assert markers["rtt_p75_s"] == pytest.approx(np.percentile(rep.rtt_samples(), 75))
    assert sum(rep.link_usage().values()) > 0
