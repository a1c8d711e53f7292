"""
Writers for layer artwork: structured geometry (JSON), an SVG preview per layer and an ASCII triangle mesh.
"""
import json
import xml.etree.ElementTree as ET

import numpy as np
from param.parameterized import get_logger

from .errors import DataFormatError, UsageError
from .pattern_mapper import LAYER_IDS, LayerArtwork, TracePrimitive
from .tables import json_bytes, rounded

logger = get_logger(name=__name__)

FORMATS = ("geometry-json", "svg-preview", "triangle-mesh")
EXTENSIONS = {"geometry-json": "json", "svg-preview": "svg", "triangle-mesh": "stl"}
ARTWORK_SCHEMA = "hemifss.artwork/1"

# Copper thickness of the mesh ribbons, mm
RIBBON_THICKNESS = 0.01


def export(artworks, fmt) -> bytes:
    """
    Serialize a list of LayerArtwork. ``svg-preview`` takes exactly one layer; the other formats take any number.
    """
    if fmt not in FORMATS:
        raise UsageError("unknown export format {!r}; expected one of {}".format(fmt, ", ".join(FORMATS)))
    artworks = list(artworks)
    if fmt == "geometry-json":
        return geometry_json(artworks)
    if fmt == "svg-preview":
        if len(artworks) != 1:
            raise UsageError("an svg preview shows one layer, got {}".format(len(artworks)))
        return svg_preview(artworks[0])
    return triangle_mesh(artworks)


# geometry-json

def geometry_json(artworks) -> bytes:
    """
    Schema ``hemifss.artwork/1``, lengths in mm:

        layers  [{layer_id, radius,
                  traces [{cells, role, width, closed, points [[x, y, z], ...]}],
                  provenance {cell_id: {kind, p2, g | w_C | w_L | w_p, source}}}]
    """
    document = {"schema": ARTWORK_SCHEMA, "units": "mm", "layers": [{
        "layer_id": artwork.layer_id,
        "radius": artwork.radius,
        "traces": [{"cells": list(trace.cells), "role": trace.role, "width": round(trace.width, 9),
                    "closed": trace.closed, "points": rounded(trace.points)} for trace in artwork.traces],
        "provenance": {str(cell_id): record for cell_id, record in sorted(artwork.provenance.items())},
    } for artwork in artworks]}
    return json_bytes(document)


def parse_geometry_json(data) -> list:
    """LayerArtwork list back from ``geometry_json`` output."""
    try:
        document = json.loads(data)
        if document.get("schema") != ARTWORK_SCHEMA:
            raise DataFormatError("not an artwork file (schema {!r})".format(document.get("schema")))
        artworks = []
        for layer in document["layers"]:
            if layer["layer_id"] not in LAYER_IDS:
                raise DataFormatError("unknown layer {!r}".format(layer["layer_id"]))
            traces = [TracePrimitive(t["points"], t["width"], layer["layer_id"], t["cells"], t["role"], t["closed"])
                      for t in layer["traces"]]
            provenance = {int(cell_id): record for cell_id, record in layer["provenance"].items()}
            artworks.append(LayerArtwork(layer["layer_id"], float(layer["radius"]), traces, provenance))
    except DataFormatError:
        raise
    except (ValueError, KeyError, TypeError, AttributeError) as err:
        raise DataFormatError("malformed artwork file: {}".format(err)) from err
    return artworks


# svg-preview

def flatten_azimuthal(points, radius):
    """
    Azimuthal-equidistant map of dome points: the distance from the pole is the meridian arc length, continued
    down the skirt as R pi/2 + depth below the equator. Returns (x, y) in mm with y pointing down the page.
    """
    points = np.asarray(points, dtype=float)
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    rho = np.hypot(x, y)
    polar = np.arctan2(rho, z)
    s = np.where(z >= 0, radius * polar, radius * np.pi / 2 - z)
    phi = np.arctan2(y, x)
    return np.column_stack([s * np.cos(phi), -s * np.sin(phi)])


def svg_preview(artwork: LayerArtwork) -> bytes:
    """One stroke per trace at true width; closed traces become polygons, the rest polylines."""
    flat = [flatten_azimuthal(trace.points, artwork.radius) for trace in artwork.traces]
    extent = max((np.abs(xy).max() for xy in flat), default=artwork.radius) + 1.0

    svg = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg", "version": "1.1",
        "width": "{:.1f}mm".format(2 * extent), "height": "{:.1f}mm".format(2 * extent),
        "viewBox": "{0:.4f} {0:.4f} {1:.4f} {1:.4f}".format(-extent, 2 * extent),
    })
    ET.SubElement(svg, "title").text = "{} r={:.3f} mm".format(artwork.layer_id, artwork.radius)
    group = ET.SubElement(svg, "g", {"fill": "none", "stroke": "black", "stroke-linejoin": "round",
                                      "id": artwork.layer_id})
    for trace, xy in zip(artwork.traces, flat):
        tag = "polygon" if trace.closed else "polyline"
        ET.SubElement(group, tag, {
            "points": " ".join("{:.4f},{:.4f}".format(u, v) for u, v in xy),
            "stroke-width": "{:.4f}".format(trace.width),
            "data-cells": " ".join(str(c) for c in trace.cells),
        })
    return ET.tostring(svg, encoding="utf-8", xml_declaration=True) + b"\n"


# triangle-mesh

# Box corners as (along, across, up) unit offsets and the outward quads of a box.
_CORNERS = np.array([(i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=float)
_QUADS = [
    ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)),
    ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)),
    ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)),
    ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)),
    ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)),
    ((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)),
]
_TRIANGLES = np.array([[4 * i + 2 * j + k for i, j, k in (q[0], q[1], q[2])] for q in _QUADS]
                      + [[4 * i + 2 * j + k for i, j, k in (q[0], q[2], q[3])] for q in _QUADS])


def _surface_normals(points, radius):
    normals = points.copy()
    below = points[:, 2] < 0
    normals[below, 2] = 0.0
    return normals / np.linalg.norm(normals, axis=1)[:, None]


def ribbon_triangles(trace: TracePrimitive, radius, thickness=RIBBON_THICKNESS):
    """
    Closed boxes, one per straight piece of the trace: ``width`` wide across the piece, ``thickness`` thick along
    the outward surface normal. Returns an (n, 3, 3) array of triangles wound counter-clockwise seen from outside.
    """
    segments = trace.segments()
    a, b = segments[:, 0], segments[:, 1]
    along = b - a
    unit = along / np.linalg.norm(along, axis=1)[:, None]
    up = _surface_normals((a + b) / 2, radius)
    up -= np.sum(up * unit, axis=1)[:, None] * unit
    up /= np.linalg.norm(up, axis=1)[:, None]
    across = np.cross(up, unit)

    corners = (a[:, None, :]
               + _CORNERS[None, :, 0:1] * along[:, None, :]
               + (_CORNERS[None, :, 1:2] - 0.5) * trace.width * across[:, None, :]
               + _CORNERS[None, :, 2:3] * thickness * up[:, None, :])
    return corners[:, _TRIANGLES].reshape(-1, 3, 3)


def signed_volume(triangles):
    """Volume enclosed by a closed triangle set; positive when every face is wound outwards."""
    v0, v1, v2 = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    return float(np.sum(v0 * np.cross(v1, v2)) / 6)


def triangle_mesh(artworks) -> bytes:
    """ASCII STL, one solid per layer; every straight trace piece is a closed 12-triangle box."""
    lines = []
    for artwork in artworks:
        lines.append("solid {} units=mm radius={:.6f}".format(artwork.layer_id, artwork.radius))
        triangles = [ribbon_triangles(trace, artwork.radius) for trace in artwork.traces]
        if triangles:
            triangles = np.concatenate(triangles)
            normals = np.cross(triangles[:, 1] - triangles[:, 0], triangles[:, 2] - triangles[:, 0])
            normals /= np.linalg.norm(normals, axis=1)[:, None]
            for normal, triangle in zip(normals, triangles):
                lines.append("facet normal {:.6e} {:.6e} {:.6e}".format(*normal))
                lines.append("outer loop")
                lines.extend("vertex {:.6f} {:.6f} {:.6f}".format(*vertex) for vertex in triangle)
                lines.append("endloop")
                lines.append("endfacet")
        lines.append("endsolid {}".format(artwork.layer_id))
    logger.info("mesh of %d layers, %d lines", len(artworks), len(lines))
    return ("\n".join(lines) + "\n").encode("ascii")


def parse_triangle_mesh(data):
    """Triangles of an ASCII STL as {solid name: (n, 3, 3) array}."""
    solids, current, vertices = {}, None, []
    for line in data.decode("ascii").splitlines():
        words = line.split()
        if not words:
            continue
        if words[0] == "solid":
            current, vertices = words[1], []
        elif words[0] == "vertex":
            vertices.append([float(w) for w in words[1:4]])
        elif words[0] == "endsolid":
            solids[current] = np.array(vertices).reshape(-1, 3, 3)
    return solids
