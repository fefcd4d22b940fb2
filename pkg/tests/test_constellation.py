import csv
import math

import numpy as np
import pytest

from leotopo import constellation as c


def rot_x(a):
    return np.array([[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]])


def rot_z(a):
    return np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])


def test_phase1_numbers(phase1):
    assert phase1.num_sats == 1584
    assert phase1.radius == pytest.approx(6_921_000.0)
    assert phase1.intra_orbit_spacing == pytest.approx(1_969_922, abs=1.0)
    assert phase1.seam_shift == 14
    # the clearance chord is ~5016 km, capped at 5000 km
    assert 2 * math.sqrt(phase1.radius ** 2 - (c.EARTH_RADIUS + 80e3) ** 2) > 5e6
    assert phase1.isl_range == 5e6


def test_positions_match_rotation_oracle(phase1):
    t = 123.4
    pos = c.positions_at(phase1, t)
    rng = np.random.default_rng(0)
    for k in rng.integers(0, phase1.num_sats, 50):
        o, s = divmod(int(k), phase1.sats_per_orbit)
        u = 2 * math.pi * (s + 0.5 * o) / 22 + phase1.mean_motion * t
        ref = rot_z(2 * math.pi * o / 72) @ rot_x(phase1.inclination) @ np.array([math.cos(u), math.sin(u), 0.0])
        np.testing.assert_allclose(pos[k], phase1.radius * ref, atol=1e-6)


def test_shell_invariants(phase1):
    eph = c.generate_shell(phase1, c.time_grid(0, 600, 60))
    r = np.linalg.norm(eph.positions, axis=-1)
    assert np.max(np.abs(r - phase1.radius)) < 1e-6 * phase1.radius
    assert np.max(np.abs(eph.positions[..., 2])) <= phase1.radius * math.sin(phase1.inclination) + 1e-6
    # consecutive slots are one intra-orbit spacing apart
    p = eph.positions[0]
    d = np.linalg.norm(p[1] - p[0])
    assert d == pytest.approx(phase1.intra_orbit_spacing, rel=1e-9)


def test_orbital_period(phase1):
    period = 2 * math.pi / phase1.mean_motion
    np.testing.assert_allclose(c.positions_at(phase1, period), c.positions_at(phase1, 0.0), atol=1e-3)


def test_ephemeris_at_matches_samples(phase1):
    eph = c.generate_shell(phase1, [0.0, 5.0])
    np.testing.assert_allclose(eph.at(5.0), eph.positions[1])
    np.testing.assert_allclose(eph.midpoint_positions(), eph.at(2.5))


def test_empty_grid(phase1):
    with pytest.raises(ValueError):
        c.generate_shell(phase1, [])


def test_time_grid():
    np.testing.assert_allclose(c.time_grid(0, 10, 1), np.arange(11))
    np.testing.assert_allclose(c.time_grid(0, 2.5, 1), [0, 1, 2, 2.5])


def test_range_graph_phase1(phase1):
    eph = c.generate_shell(phase1, c.time_grid(0, 10, 1))
    rg = c.range_graph(eph, phase1.isl_range)
    a = rg.adjacency
    assert (a == a.T).all() and not a.diagonal().any()
    deg = rg.degree()
    assert deg.min() >= 4
    # intra-orbit neighbours are always in range
    assert rg.has_edge(0, 1) and rg.has_edge(0, 21)
    # brute force check on a sample of pairs
    rng = np.random.default_rng(0)
    for a_, b_ in rng.integers(0, 1584, (200, 2)):
        if a_ == b_:
            continue
        within = all(np.linalg.norm(p[a_] - p[b_]) <= phase1.isl_range for p in eph.positions)
        assert rg.has_edge(a_, b_) == within


def test_range_graph_window_monotone(small_shell):
    short = c.range_graph(c.generate_shell(small_shell, [0.0]), small_shell.isl_range)
    long = c.range_graph(c.generate_shell(small_shell, c.time_grid(0, 300, 30)), small_shell.isl_range)
    assert not (long.adjacency & ~short.adjacency).any()


def test_inter_orbit_partner_seam(phase1):
    assert c.inter_orbit_partner(phase1, 0, 3, 0) == 22 + 3
    assert c.inter_orbit_partner(phase1, 71, 3, 0) == (3 + 14) % 22
    assert len(list(c.orbit_pairs(phase1))) == 72


def test_seam_alignment_is_nearest(phase1):
    # with the seam shift the 71→0 partner is the closest satellite of orbit 0
    pos = c.positions_at(phase1, 0.0)
    for s in range(22):
        a = 71 * 22 + s
        partner = c.inter_orbit_partner(phase1, 71, s, 0)
        d = np.linalg.norm(pos[:22] - pos[a], axis=1)
        assert d[partner] <= np.sort(d)[1] + 1.0


def test_ephemeris_csv(tmp_path, small_shell):
    eph = c.generate_shell(small_shell, [0.0, 1.0])
    path = tmp_path / "e.csv"
    eph.to_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 2 * small_shell.num_sats
    assert float(rows[0]["x"]) == pytest.approx(eph.positions[0, 0, 0], abs=1e-3)


def test_bad_shell():
    with pytest.raises(ValueError):
        c.ShellConfig(num_orbits=0)
    with pytest.raises(ValueError):
        c.ShellConfig(inclination=2.0)
    assert c.max_isl_range(7e6, 1e6, 6.5e6) == 0.0
