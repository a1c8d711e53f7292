import json

import numpy as np
import pytest

from hemifss.errors import DataFormatError, DomainError, InfeasibleArtworkError, KindError, UsageError
from hemifss.goldberg_tess import TessCell, cell_p2
from hemifss.pattern_mapper import (LawOverrides, LayerArtwork, PentagonGeom, TracePrimitive, build_layer,
                                    capacitive_cell_artwork, drc_check, grid_components, inductive_cell_artwork,
                                    inset_polygon, pentagon_artwork, segment_distances)


def flat_cell(n, circumradius, cell_id=0, height=10.0):
    """Regular n-gon in the plane z = height, counter-clockwise seen from +z."""
    angles = 2 * np.pi * np.arange(n) / n
    vertices = np.column_stack([circumradius * np.cos(angles), circumradius * np.sin(angles), np.full(n, height)])
    kind = {5: "pentagon", 6: "hexagon"}[n]
    cell = TessCell(cell_id, kind, vertices, center=[0.0, 0.0, height], surface="plane")
    if kind == "hexagon":
        cell.p2 = cell_p2(cell)
    return cell


def across_flats(points):
    midpoints = (points + np.roll(points, -1, axis=0)) / 2
    return float(np.linalg.norm(midpoints[:3] - midpoints[3:], axis=1).mean())


@pytest.fixture
def reference_cell():
    return flat_cell(6, 4.5 / np.sqrt(3))


def test_wheel_spoke_dimensions(reference_cell):
    traces = capacitive_cell_artwork(reference_cell, w_C=0.25, g=0.8)
    rim = traces[0]

    assert reference_cell.p2 == pytest.approx(4.5)
    assert [t.role for t in traces] == ["rim"] + ["spoke"] * 6
    assert rim.closed
    assert across_flats(rim.points) == pytest.approx(3.45)
    assert across_flats(rim.points) + rim.width == pytest.approx(3.7)
    for spoke in traces[1:]:
        assert np.allclose(spoke.points[0], [0, 0, 10])
        assert np.linalg.norm(spoke.points[1] - spoke.points[0]) == pytest.approx(3.45 / np.sqrt(3))
        assert spoke.width == 0.25


def test_wheel_spoke_infeasible(reference_cell):
    with pytest.raises(InfeasibleArtworkError):
        capacitive_cell_artwork(reference_cell, w_C=0.25, g=4.6)
    with pytest.raises(InfeasibleArtworkError):
        capacitive_cell_artwork(reference_cell, w_C=0.25, g=4.4)
    with pytest.raises(KindError):
        capacitive_cell_artwork(flat_cell(5, 2.0), w_C=0.25, g=0.8)


def test_inset_polygon():
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)

    assert np.allclose(inset_polygon(square, 0.1), [[0.1, 0.1], [0.9, 0.1], [0.9, 0.9], [0.1, 0.9]])
    with pytest.raises(InfeasibleArtworkError):
        inset_polygon(square, 0.5)
    with pytest.raises(DomainError):
        inset_polygon(square[::-1], 0.1)


def test_pentagon_outlines():
    geom = PentagonGeom()
    outer = geom.outline("outer_cap")
    inner = geom.outline("inner_cap")
    ring = geom.outline("mid_ind")

    assert np.linalg.norm(outer[0] - outer[2]) == pytest.approx(2.22)
    assert np.linalg.norm(inner[0] - inner[2]) == pytest.approx(2.13)
    assert np.linalg.norm(ring[0] - ring[1]) == pytest.approx(1.51)
    with pytest.raises(DomainError):
        geom.outline("top")


def test_pentagon_artwork():
    cell = flat_cell(5, 6.0, cell_id=3)
    patch = pentagon_artwork(cell, "outer_cap")
    ring = pentagon_artwork(cell, "mid_ind")

    assert [t.role for t in patch] == ["rim"] + ["spoke"] * 5
    assert all(t.width == 0.25 for t in patch)
    assert len(ring) == 1 and ring[0].closed
    sides = np.linalg.norm(np.diff(np.vstack([ring[0].points, ring[0].points[:1]]), axis=0), axis=1)
    assert np.allclose(sides, 1.51)
    with pytest.raises(KindError):
        pentagon_artwork(flat_cell(6, 3.0), "outer_cap")


@pytest.mark.parametrize("g_p", [0.38, 0.6])
def test_pentagon_rim_sits_inside_the_gap(g_p):
    cell = flat_cell(5, 6.0)
    geom = PentagonGeom(g_p=g_p)
    rim = pentagon_artwork(cell, "outer_cap", geom)[0].points
    outline_inradius = geom.outline("outer_cap")[0, 0] * np.cos(np.pi / 5)
    rim_inradius = np.linalg.norm(rim[0] - [0.0, 0.0, 10.0]) * np.cos(np.pi / 5)

    assert rim_inradius == pytest.approx(outline_inradius - (g_p + 0.25) / 2)


def test_trace_checks():
    with pytest.raises(InfeasibleArtworkError):
        TracePrimitive([[0, 0, 0], [1, 0, 0]], 0.0, "mid_ind", [1], "edge")
    with pytest.raises(DomainError):
        TracePrimitive([[0, 0, 0]], 0.2, "mid_ind", [1], "edge")
    with pytest.raises(DomainError):
        TracePrimitive([[0, 0, 0], [0, 0, 0], [1, 0, 0]], 0.2, "mid_ind", [1], "edge")

    square = TracePrimitive([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], 0.2, "outer_cap", [4, 2], "rim", closed=True)
    assert square.cell_id == 4
    assert square.segments().shape == (4, 2, 3)


def test_inductive_edges_are_drawn_once():
    a, b = np.array([0.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0])
    traces = inductive_cell_artwork([((1, 2), a, b), ((2, 1), b, a)], [0.22, 0.22])

    assert len(traces) == 1
    assert traces[0].cells == (1, 2)
    with pytest.raises(InfeasibleArtworkError):
        inductive_cell_artwork([((1, 2), a, b)], [-0.1])


def test_overrides():
    table = LawOverrides.reference()

    assert table.lookup("mid_ind", "w_L", 3.2) == 0.22
    assert table.lookup("outer_cap", "g", 4.7) == 0.8
    assert table.lookup("mid_ind", "g", 4.5) is None

    ramp = LawOverrides({"inner_cap": {"g": [[4.0, 0.6], [3.0, 0.4]]}})
    assert ramp.lookup("inner_cap", "g", 3.5) == pytest.approx(0.5)
    assert LawOverrides.from_json(json.dumps(ramp.to_json())).lookup("inner_cap", "g", 3.5) == pytest.approx(0.5)


def test_override_errors(tmp_path):
    with pytest.raises(DomainError):
        LawOverrides({"mid_ind": {"g": [[4.5, 0.8]]}})
    with pytest.raises(InfeasibleArtworkError):
        LawOverrides({"mid_ind": {"w_L": [[4.5, 0.0]]}})
    with pytest.raises(DataFormatError):
        LawOverrides.from_json("{not json")
    with pytest.raises(DataFormatError):
        LawOverrides.from_json('{"tables": {}}')
    with pytest.raises(UsageError):
        LawOverrides.from_json(tmp_path / "missing.json")


def test_build_capacitive_layer(dome_m4, caplog):
    artwork = build_layer(dome_m4, "outer_cap")
    n_pent, n_hex = dome_m4.counts

    assert len(artwork.traces) == 7 * n_hex + 6 * n_pent
    assert len(artwork.provenance) == len(dome_m4.cells)
    hexagon = next(record for record in artwork.provenance.values() if record["kind"] == "hexagon")
    assert hexagon["source"] == "law+default"
    assert hexagon["w_C"] == 0.25
    hexagon_id = next(cell_id for cell_id, record in artwork.provenance.items() if record["kind"] == "hexagon")
    assert len(artwork.traces_for(hexagon_id)) == 7
    assert "outside the validated range" in caplog.text

    radius = np.linalg.norm(artwork.traces[0].points, axis=1)
    on_dome = artwork.traces[0].points[:, 2] >= 0
    assert np.allclose(radius[on_dome], dome_m4.radius)


def test_build_layer_with_overrides(dome_m4):
    artwork = build_layer(dome_m4, "inner_cap", LawOverrides.reference())
    records = [record for record in artwork.provenance.values() if record["kind"] == "hexagon"]

    assert all(record["source"] == "override" and record["g"] == 0.8 for record in records)
    pentagon = next(record for record in artwork.provenance.values() if record["kind"] == "pentagon")
    assert pentagon == {"kind": "pentagon", "w_p": 0.25, "source": "fixed", "g_p": 0.38}


def test_build_grid_layer(dome_m4):
    artwork = build_layer(dome_m4, "mid_ind")
    edges = [trace for trace in artwork.traces if trace.role == "edge"]
    rings = [trace for trace in artwork.traces if trace.role == "ring"]

    assert len(edges) == len(dome_m4.adjacency)
    assert len(rings) == 6
    assert grid_components(artwork) == 1
    pentagon_ids = {cell.id for cell in dome_m4.cells if cell.kind == "pentagon"}
    for trace in edges:
        if pentagon_ids & set(trace.cells):
            assert trace.width == 0.25
        else:
            assert trace.width > 0.25


def test_unknown_layer(dome_m4):
    with pytest.raises(DomainError):
        build_layer(dome_m4, "ground")


def test_segment_distances():
    p1 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    q1 = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    p2 = np.array([[0.5, -1.0, 1.0], [2.0, 1.0, 0.0]])
    q2 = np.array([[0.5, 1.0, 1.0], [3.0, 1.0, 0.0]])

    assert np.allclose(segment_distances(p1, q1, p2, q2), [1.0, np.sqrt(2)])


def test_drc_flags_violations():
    close = [TracePrimitive([[0, 0, 0], [1, 0, 0]], 0.1, "outer_cap", [1], "spoke"),
             TracePrimitive([[0, 0.1, 0], [1, 0.1, 0]], 0.1, "outer_cap", [2], "spoke")]
    bow_tie = TracePrimitive([[5, 0, 0], [6, 1, 0], [6, 0, 0], [5, 1, 0]], 0.2, "outer_cap", [3], "rim", closed=True)
    report = drc_check(LayerArtwork("outer_cap", 75.0, close + [bow_tie], {}), min_width=0.15, min_gap=0.125)

    assert not report.ok
    assert report.count("width") == 2
    assert report.count("clearance") == 1
    assert report.count("self_intersection") == 1
    assert report.cells("clearance") == [1, 2]
    assert list(report.violations.columns) == report.COLUMNS


def test_drc_small_dome_is_clean(dome_m4):
    for layer_id in ("inner_cap", "mid_ind", "outer_cap"):
        assert drc_check(build_layer(dome_m4, layer_id), 0.15, 0.125).ok


def test_drc_full_dome_is_clean(dome_m20):
    artwork = build_layer(dome_m20, "outer_cap")

    assert drc_check(artwork, 0.15, 0.125).ok
