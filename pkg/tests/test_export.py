import numpy as np

from leotopo import constellation as c
from leotopo import demand as dm
from leotopo import export
from leotopo import topology as tp


def test_empty_collection(small_shell):
    gj = export.geojson(small_shell, np.zeros((0, 3)), include_satellites=False)
    assert gj == {"type": "FeatureCollection", "features": []}


def test_roles_and_counts(small_shell, stations):
    pos = c.positions_at(small_shell, 0.0)
    g = tp.plus_grid_for(small_shell)
    d = dm.build_demand(stations[:4], "uniform")
    gj = export.geojson(small_shell, pos, g, stations[:4], d, paths=[[0, 1, 2]])
    roles = [f["properties"]["role"] for f in gj["features"]]
    assert roles.count("satellite") == small_shell.num_sats
    assert roles.count("intra") == small_shell.num_sats
    assert roles.count("inter") == g.num_edges - small_shell.num_sats
    assert roles.count("demand") == 6 and roles.count("selected") == 1
    dem = [f for f in gj["features"] if f["properties"]["role"] == "demand"]
    assert all(f["properties"]["intensity"] == d.values[f["properties"]["src"], f["properties"]["dst"]] for f in dem)
    lon, lat, alt = gj["features"][0]["geometry"]["coordinates"]
    assert abs(alt - small_shell.altitude) < 1e-3


def test_czml(small_shell, tmp_path):
    eph = c.generate_shell(small_shell, [0.0, 10.0])
    doc = export.czml(eph, tp.plus_grid_for(small_shell))
    assert doc[0]["id"] == "document"
    sats = [p for p in doc if p["id"].startswith("sat")]
    assert len(sats) == small_shell.num_sats
    assert len(sats[0]["position"]["cartesian"]) == 2 * 4
    export.write_json(tmp_path / "x.czml", doc)
