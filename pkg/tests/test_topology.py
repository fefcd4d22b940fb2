import math

import numpy as np
import pytest

from leotopo import constellation as c
from leotopo import demand as dm
from leotopo import geometry as geo
from leotopo import topology as tp

RHO = 6_921_000.0


@pytest.fixture(scope="module")
def small(small_shell):
    eph = c.generate_shell(small_shell, c.time_grid(0, 10, 1))
    return eph, c.range_graph(eph, small_shell.isl_range)


def test_plus_grid_phase1(phase1):
    g = tp.plus_grid_for(phase1)
    assert g.num_edges == 3168
    assert np.all(g.degree() == 4)
    eph = c.generate_shell(phase1, c.time_grid(0, 10, 1))
    g.check(c.range_graph(eph, phase1.isl_range))


def test_plus_grid_without_seam_fix_leaves_range(phase1):
    eph = c.generate_shell(phase1, [0.0])
    rg = c.range_graph(eph, phase1.isl_range)
    with pytest.raises(tp.TopologyError):
        tp.plus_grid(72, 22, 0).check(rg)


def test_topology_rejects_self_loop():
    with pytest.raises(tp.TopologyError):
        tp.Topology(3, np.array([[1, 1]]), 4, "x")


def test_topology_dedupes():
    t = tp.Topology(3, np.array([[1, 0], [0, 1], [2, 1]]), 4, "x")
    assert t.edge_set() == {(0, 1), (1, 2)}


def test_link_distance_plain_oracle():
    s = geo.latlon_to_cartesian(0, 0, RHO)
    s2 = geo.latlon_to_cartesian(3, 4, RHO)
    f = 5.0 * geo.lat_lon_unit_vectors(s)[1]
    fperp = np.cross(f, s) / RHO
    ref = abs(fperp @ (s - s2) / 1000.0)
    assert tp.link_distance(s, s2, f, "plain", 1000.0) == pytest.approx(ref, rel=1e-12)
    # links along the field cost nothing, links across it cost the most
    east = geo.latlon_to_cartesian(0, 4, RHO)
    north = geo.latlon_to_cartesian(4, 0, RHO)
    assert tp.link_distance(s, east, f) < 1e-6 * tp.link_distance(s, north, f)


def test_link_distance_prioritized_oracle():
    s = geo.latlon_to_cartesian(0, 0, RHO)
    s2 = geo.latlon_to_cartesian(3, 4, RHO)
    for mag in (0.0, 0.3, 2.0, 50.0):
        f = mag * geo.lat_lon_unit_vectors(s)[1] + 0.1 * geo.lat_lon_unit_vectors(s)[0]
        fperp = np.cross(f, s) / RHO
        L = np.linalg.norm(s - s2) / 1000.0
        ref = abs(fperp @ (s - s2) / 1000.0) * L ** (-2 * math.exp(-np.linalg.norm(f)))
        assert tp.link_distance(s, s2, f, "prioritized", 1000.0) == pytest.approx(ref, rel=1e-9)


def test_link_distance_errors():
    s = geo.latlon_to_cartesian(0, 0, RHO)
    with pytest.raises(geo.GeometryError):
        tp.link_distance(s, s, np.zeros(3))
    with pytest.raises(ValueError):
        tp.link_distance(s, -s, np.zeros(3), mode="nope")


def test_starfield_small(small, stations):
    eph, rg = small
    d = dm.build_demand(stations, "distance")
    t = tp.starfield(rg, eph, d, stations)
    t.check(rg)
    assert t.degree().max() <= 4
    assert t.num_edges > eph.num_sats  # most satellites fill several ports
    again = tp.starfield(rg, eph, d, stations)
    assert again.edge_set() == t.edge_set()


def test_starfield_kappa_6(small, stations):
    eph, rg = small
    t = tp.starfield(rg, eph, dm.build_demand(stations, "uniform"), stations, tp.StarfieldParams(kappa=6))
    t.check(rg)
    assert t.degree().max() <= 6


def test_starfield_plain_scale_invariance(small, stations):
    eph, rg = small
    d = dm.build_demand(stations, "hotspot")
    p = tp.StarfieldParams(mode="plain")
    assert tp.starfield(rg, eph, d, stations, p).edge_set() == \
        tp.starfield(rg, eph, d.scaled(10.0), stations, p).edge_set()


def test_static_starfield_small(small, small_shell, stations):
    eph, rg = small
    d = dm.build_demand(stations, "distance")
    t = tp.static_starfield(rg, eph, d, stations)
    t.check(rg)
    assert np.all(t.degree() == 4)
    offs = t.params["offsets"]
    assert len(offs) == small_shell.num_orbits
    # the chosen offset is the cheapest feasible one for an orbit pair
    o = 3
    pos = eph.midpoint_positions()
    params = tp.StarfieldParams()
    flows = dm.FlowSet.from_demand(d, stations, small_shell.radius)
    fp = params.field_params(small_shell)
    n_s = small_shell.sats_per_orbit
    totals = {}
    for p in tp._feasible_offsets(small_shell, rg, eph, o):
        totals[p] = sum(tp._aggregate_costs(pos, o * n_s + j, np.array([c.inter_orbit_partner(small_shell, o, j, p)]),
                                            flows, fp, params)[0] for j in range(n_s))
    assert offs[o] == min(totals, key=lambda p: (totals[p], p))


def test_static_requires_kappa4(small, stations):
    eph, rg = small
    with pytest.raises(tp.TopologyError):
        tp.static_starfield(rg, eph, dm.build_demand(stations), stations, tp.StarfieldParams(kappa=6))


def test_random_topology(small):
    eph, rg = small
    a = tp.random_topology(rg, eph, seed=5)
    a.check(rg)
    assert np.all(a.degree() == 4)
    assert tp.random_topology(rg, eph, seed=5).edge_set() == a.edge_set()
    with pytest.raises(tp.TopologyError):
        tp.random_topology(rg, eph, kappa=3)


def test_csv_roundtrip(tmp_path, small_shell):
    g = tp.plus_grid_for(small_shell)
    path = tmp_path / "t.csv"
    g.to_csv(path, small_shell, {"note": 1})
    back = tp.Topology.from_csv(path, small_shell)
    assert back.edge_set() == g.edge_set() and back.generator == "plus_grid"


def test_dynamic_schedule(small_shell, stations):
    d = dm.build_demand(stations[:20], "uniform")
    sched = tp.dynamic_schedule([(0, 5), (5, 10)], small_shell, d, stations[:20])
    assert [w for w, _ in sched] == [(0, 5), (5, 10)]
    with pytest.raises(ValueError):
        tp.dynamic_schedule([(0, 5), (6, 10)], small_shell, d, stations[:20])
    with pytest.raises(ValueError):
        tp.dynamic_schedule([(5, 5)], small_shell, d, stations[:20])
