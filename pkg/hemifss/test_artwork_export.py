import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from hemifss.artwork_export import (ARTWORK_SCHEMA, export, flatten_azimuthal, parse_geometry_json,
                                    parse_triangle_mesh, ribbon_triangles, signed_volume, svg_preview)
from hemifss.errors import DataFormatError, UsageError
from hemifss.pattern_mapper import LayerArtwork, TracePrimitive, build_layer

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def layers(dome_m4):
    return [build_layer(dome_m4, layer_id) for layer_id in ("inner_cap", "mid_ind", "outer_cap")]


def test_export_formats(layers):
    with pytest.raises(UsageError):
        export(layers, "gerber")
    with pytest.raises(UsageError):
        export(layers, "svg-preview")
    assert export(layers[:1], "svg-preview").startswith(b"<?xml")


def test_geometry_json(layers):
    data = export(layers, "geometry-json")
    document = json.loads(data)
    parsed = parse_geometry_json(data)

    assert document["schema"] == ARTWORK_SCHEMA
    assert [layer["layer_id"] for layer in document["layers"]] == ["inner_cap", "mid_ind", "outer_cap"]
    assert export(layers, "geometry-json") == data
    for original, again in zip(layers, parsed):
        assert len(again.traces) == len(original.traces)
        assert again.provenance.keys() == original.provenance.keys()
        assert np.allclose(again.traces[5].points, original.traces[5].points, atol=1e-6)
        assert again.traces[5].cells == original.traces[5].cells


def test_geometry_json_rejects_other_files():
    with pytest.raises(DataFormatError):
        parse_geometry_json(b'{"schema": "hemifss.tessellation/1", "layers": []}')
    with pytest.raises(DataFormatError):
        parse_geometry_json(b"[1, 2")
    with pytest.raises(DataFormatError):
        parse_geometry_json(json.dumps({"schema": ARTWORK_SCHEMA, "layers": [{"layer_id": "top"}]}))


def test_flatten_azimuthal():
    radius = 75.0
    flat = flatten_azimuthal(np.array([[0.0, 0.0, radius], [radius, 0.0, 0.0], [0.0, radius, -10.0]]), radius)

    assert np.allclose(flat[0], [0, 0])
    assert np.allclose(flat[1], [radius * np.pi / 2, 0])
    assert np.allclose(flat[2], [0, -(radius * np.pi / 2 + 10)], atol=1e-9)


def test_svg_preview(layers):
    artwork = layers[2]
    root = ET.fromstring(svg_preview(artwork))
    polygons = root.findall(".//{}polygon".format(SVG))
    polylines = root.findall(".//{}polyline".format(SVG))

    assert len(polygons) == sum(trace.closed for trace in artwork.traces)
    assert len(polylines) == sum(not trace.closed for trace in artwork.traces)
    assert polygons[0].get("stroke-width") == "{:.4f}".format(artwork.traces[0].width)
    assert root.find("{}title".format(SVG)).text.startswith("outer_cap")


def test_ribbon_is_a_closed_outward_box():
    radius = 75.0
    trace = TracePrimitive([[-1.0, 0.0, radius], [1.0, 0.0, radius]], 0.25, "mid_ind", [0], "edge")
    triangles = ribbon_triangles(trace, radius, thickness=0.01)

    assert triangles.shape == (12, 3, 3)
    assert signed_volume(triangles) == pytest.approx(2.0 * 0.25 * 0.01)
    assert triangles[..., 2].max() == pytest.approx(radius + 0.01)


def test_triangle_mesh(layers):
    mesh = parse_triangle_mesh(export(layers, "triangle-mesh"))

    assert list(mesh) == ["inner_cap", "mid_ind", "outer_cap"]
    for artwork in layers:
        n_segments = sum(len(trace.segments()) for trace in artwork.traces)
        assert mesh[artwork.layer_id].shape == (12 * n_segments, 3, 3)
        assert signed_volume(mesh[artwork.layer_id]) > 0


def test_empty_layer_mesh():
    mesh = parse_triangle_mesh(export([LayerArtwork("mid_ind", 73.75, [], {})], "triangle-mesh"))

    assert mesh["mid_ind"].shape == (0, 3, 3)
