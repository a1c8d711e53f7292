"""
Per-cell metal artwork of the three dome layers.

Capacitive layers (innermost and outermost) carry one wheel-spoke patch per hexagon: a rim inset from the cell
boundary by half the inter-patch gap plus spokes from the cell centre to the rim corners. The middle layer is a wire
grid whose traces follow the shared cell edges. The six pentagons of each layer get fixed-size artwork.

Artwork is laid out on the flat facet of each cell and then projected onto the layer surface.
"""
import json
from pathlib import Path

import numpy as np
import pandas
import param as pm
from param.parameterized import get_logger
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .base import Record
from .element_synth import gap_for_size, in_validated_range, wire_for_size
from .errors import (DataFormatError, DomainError, InfeasibleArtworkError, InfeasibleGeometryError, KindError,
                     UsageError)
from .goldberg_tess import cell_p2

logger = get_logger(name=__name__)

LAYER_IDS = ("inner_cap", "mid_ind", "outer_cap")
LAYER_KIND = {"inner_cap": "capacitive", "mid_ind": "inductive", "outer_cap": "capacitive"}
ROLES = ("rim", "spoke", "edge", "ring")

DEFAULT_W_C = 0.25

REFERENCE_OVERRIDES = Path(__file__).parent / "data" / "reference_overrides.json"


def _check_layer(layer_id):
    if layer_id not in LAYER_KIND:
        raise DomainError("unknown layer {!r}; expected one of {}".format(layer_id, LAYER_IDS))
    return LAYER_KIND[layer_id]


class PentagonGeom(Record):
    """Fixed artwork of the pentagonal cells, mm."""
    w_p = pm.Number(0.25, bounds=(0, None), inclusive_bounds=(False, True), constant=True, doc="trace width")
    g_p = pm.Number(0.38, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                   doc="capacitive patch gap; the rim centreline sits (g_p + w_p)/2 inside the outline")
    inductive_side = pm.Number(1.51, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                               doc="side length of the inductive ring (centreline)")
    outer_diagonal = pm.Number(2.22, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                               doc="outer diagonal of the outermost-layer capacitive patch")
    inner_diagonal = pm.Number(2.13, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                               doc="outer diagonal of the innermost-layer capacitive patch")

    def outline(self, layer_id):
        """
        Regular pentagon in the facet plane, first corner on the +u axis: the patch outline on capacitive layers,
        the ring centreline on the inductive one.
        """
        kind = _check_layer(layer_id)
        if kind == "inductive":
            circumradius = self.inductive_side / (2 * np.sin(np.pi / 5))
        else:
            diagonal = self.outer_diagonal if layer_id == "outer_cap" else self.inner_diagonal
            circumradius = diagonal / (2 * np.sin(2 * np.pi / 5))
        angles = 2 * np.pi * np.arange(5) / 5
        return circumradius * np.column_stack([np.cos(angles), np.sin(angles)])


class TracePrimitive:
    """
    One metal trace: a polyline of 3D points (mm) drawn at ``width``.

    ``closed`` traces return to their first point. ``cells`` lists every cell the trace belongs to (two for a
    shared grid edge); ``cell_id`` is the first of them.
    """

    def __init__(self, points, width, layer_id, cells, role, closed=False):
        self.points = np.asarray(points, dtype=float)
        self.width = float(width)
        self.layer_id = layer_id
        self.cells = tuple(int(c) for c in cells)
        self.role = role
        self.closed = closed
        if self.width <= 0:
            raise InfeasibleArtworkError("trace width {:.4g} mm on cell {} is not positive".format(width, self.cell_id))
        if len(self.points) < 2:
            raise DomainError("a trace needs at least two points")
        if np.any(np.linalg.norm(np.diff(self.points, axis=0), axis=1) <= 1e-12):
            raise DomainError("consecutive trace points coincide on cell {}".format(self.cell_id))

    @property
    def cell_id(self):
        return self.cells[0]

    def segments(self):
        """(n, 2, 3) array of straight pieces, closing piece included."""
        points = np.vstack([self.points, self.points[:1]]) if self.closed else self.points
        return np.stack([points[:-1], points[1:]], axis=1)

    def __repr__(self):
        return "TracePrimitive({}, cell={}, width={:.4g}, points={})".format(
            self.role, self.cell_id, self.width, len(self.points))


class LayerArtwork:
    """Traces of one layer and the dimensions used for every cell."""

    def __init__(self, layer_id, radius, traces, provenance):
        self.layer_id = layer_id
        self.radius = radius
        self.traces = traces
        self.provenance = provenance

    @property
    def kind(self):
        return LAYER_KIND[self.layer_id]

    def traces_for(self, cell_id):
        return [trace for trace in self.traces if cell_id in trace.cells]

    def __repr__(self):
        return "LayerArtwork({}, radius={}, traces={})".format(self.layer_id, self.radius, len(self.traces))


class LawOverrides:
    """
    Per-layer anchor tables replacing the scaling laws.

    ``tables[layer_id][quantity]`` is a list of (p2, value) pairs; lookups interpolate linearly between anchors and
    hold the end values beyond them. Quantities are ``g`` and ``w_C`` on capacitive layers, ``w_L`` on the
    inductive one.
    """
    QUANTITIES = {"capacitive": ("g", "w_C"), "inductive": ("w_L",)}

    def __init__(self, tables=None):
        self.tables = {}
        for layer_id, quantities in (tables or {}).items():
            kind = _check_layer(layer_id)
            for quantity, anchors in quantities.items():
                if quantity not in self.QUANTITIES[kind]:
                    raise DomainError("{} is not a {} layer quantity".format(quantity, kind))
                anchors = np.asarray(sorted((float(p2), float(v)) for p2, v in anchors))
                if anchors.ndim != 2 or anchors.shape[1] != 2 or len(anchors) == 0:
                    raise DomainError("{}.{} needs (p2, value) anchors".format(layer_id, quantity))
                if np.any(anchors[:, 1] <= 0):
                    raise InfeasibleArtworkError("{}.{} anchors must be positive".format(layer_id, quantity))
                self.tables.setdefault(layer_id, {})[quantity] = anchors

    def lookup(self, layer_id, quantity, p2):
        anchors = self.tables.get(layer_id, {}).get(quantity)
        if anchors is None:
            return None
        return float(np.interp(p2, anchors[:, 0], anchors[:, 1]))

    @classmethod
    def from_json(cls, source):
        """Load from JSON bytes, text or a file path: ``{"layers": {layer_id: {quantity: [[p2, value], ...]}}}``."""
        if isinstance(source, Path):
            if not source.is_file():
                raise UsageError("override table not found: {}".format(source))
            source = source.read_bytes()
        try:
            document = json.loads(source)
            layers = document["layers"]
        except (ValueError, KeyError, TypeError) as err:
            raise DataFormatError("malformed override table: {}".format(err)) from err
        return cls(layers)

    @classmethod
    def reference(cls):
        """Anchors reproducing the published cell table (w_L = 0.22, g = 0.8, w_C = 0.25 mm at p2 = 4.5 mm)."""
        return cls.from_json(REFERENCE_OVERRIDES)

    def to_json(self):
        return {"layers": {layer: {q: a.tolist() for q, a in quantities.items()}
                           for layer, quantities in sorted(self.tables.items())}}


# Facet geometry

class _Facet:
    """Orthonormal frame in the plane of a cell: origin at the corner mean, normal pointing away from the origin."""

    def __init__(self, vertices):
        self.origin = vertices.mean(axis=0)
        nxt = np.roll(vertices, -1, axis=0)
        # Newell normal
        normal = np.array([
            np.sum((vertices[:, 1] - nxt[:, 1]) * (vertices[:, 2] + nxt[:, 2])),
            np.sum((vertices[:, 2] - nxt[:, 2]) * (vertices[:, 0] + nxt[:, 0])),
            np.sum((vertices[:, 0] - nxt[:, 0]) * (vertices[:, 1] + nxt[:, 1])),
        ])
        normal /= np.linalg.norm(normal)
        if np.dot(normal, self.origin) < 0:
            normal = -normal
        u = vertices[0] - self.origin
        u -= np.dot(u, normal) * normal
        self.u = u / np.linalg.norm(u)
        self.v = np.cross(normal, self.u)
        self.normal = normal

    def flatten(self, points):
        d = np.asarray(points) - self.origin
        return np.column_stack([d @ self.u, d @ self.v])

    def lift(self, uv):
        uv = np.asarray(uv)
        return self.origin + uv[:, :1] * self.u + uv[:, 1:] * self.v


def _signed_area(polygon):
    x, y = polygon[:, 0], polygon[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def inset_polygon(polygon, distance):
    """
    Offset a counter-clockwise polygon inwards by ``distance`` (mitred corners).

    Raises InfeasibleArtworkError when an edge collapses or flips, which happens once the offset reaches the
    polygon's inradius.
    """
    polygon = np.asarray(polygon, dtype=float)
    if _signed_area(polygon) <= 0:
        raise DomainError("polygon must be counter-clockwise with positive area")
    edges = np.roll(polygon, -1, axis=0) - polygon
    lengths = np.linalg.norm(edges, axis=1)
    inward = np.column_stack([-edges[:, 1], edges[:, 0]]) / lengths[:, None]
    previous = np.roll(inward, 1, axis=0)
    miter = (previous + inward) / (1 + np.sum(previous * inward, axis=1))[:, None]
    result = polygon + distance * miter

    new_edges = np.roll(result, -1, axis=0) - result
    if np.any(np.sum(new_edges * edges, axis=1) <= 1e-9 * lengths ** 2) or _signed_area(result) <= 0:
        raise InfeasibleArtworkError("inset of {:.4g} mm collapses the polygon".format(distance))
    return result


def _identity(points):
    return points


def _spokes(hub, corners):
    return [np.vstack([hub, corner]) for corner in corners]


def capacitive_cell_artwork(cell, w_C, g, layer_id="outer_cap", project=None):
    """
    Wheel-spoke patch of a hexagonal cell: the rim centreline sits (g + w_C)/2 inside the cell boundary, so facing
    rims of neighbouring cells are g apart edge to edge; spokes of width w_C join the cell centre to each rim corner.
    """
    if cell.kind != "hexagon":
        raise KindError("wheel-spoke patches are drawn on hexagons; use pentagon_artwork for cell {}".format(cell.id))
    if not (w_C > 0 and g > 0):
        raise DomainError("w_C and g must be positive (w_C = {}, g = {})".format(w_C, g))
    p2 = cell.p2 if cell.p2 is not None else cell_p2(cell)
    if g >= p2:
        raise InfeasibleArtworkError("gap {:.4g} mm does not fit cell {} with p2 = {:.4g} mm".format(g, cell.id, p2))
    project = project or _identity

    facet = _Facet(cell.vertices)
    boundary = facet.flatten(cell.vertices)
    try:
        inset_polygon(boundary, g / 2 + w_C)
        rim = inset_polygon(boundary, (g + w_C) / 2)
    except InfeasibleArtworkError as err:
        raise InfeasibleArtworkError("cell {} is too small for g = {:.4g} mm: {}".format(cell.id, g, err)) from err

    rim3 = project(facet.lift(rim))
    hub = project(facet.origin[None, :])[0]
    traces = [TracePrimitive(rim3, w_C, layer_id, [cell.id], "rim", closed=True)]
    traces += [TracePrimitive(spoke, w_C, layer_id, [cell.id], "spoke") for spoke in _spokes(hub, rim3)]
    return traces


def inductive_cell_artwork(edges, widths, layer_id="mid_ind"):
    """
    One grid trace per shared edge, centreline on the edge.

    ``edges`` is a sequence of (cells, start, end) with the ids of the bordering cells and the edge end points;
    ``widths`` gives w_L for each edge. Repeated edges (same end points in either order) are drawn once.
    """
    traces, seen = [], set()
    for (cells, start, end), width in zip(edges, widths):
        if not width > 0:
            raise InfeasibleArtworkError("wire width {:.4g} mm on the edge of cells {} is not positive"
                                         .format(width, tuple(cells)))
        key = tuple(sorted([tuple(np.round(start, 9)), tuple(np.round(end, 9))]))
        if key in seen:
            continue
        seen.add(key)
        traces.append(TracePrimitive(np.vstack([start, end]), width, layer_id, sorted(cells), "edge"))
    return traces


def pentagon_artwork(cell, layer_id, geom: PentagonGeom = None, project=None):
    """
    Fixed artwork of a pentagonal cell, centred on it and turned towards its first corner: a wheel-spoke patch in a
    pentagon of diagonal 2.22 mm (outermost layer) or 2.13 mm (innermost), or the 1.51 mm-side ring of the grid layer.
    The patch rim sits (g_p + w_p)/2 inside that pentagon, as hexagon rims sit (g + w_C)/2 inside their cell.
    """
    if cell.kind != "pentagon":
        raise KindError("cell {} is a {}, not a pentagon".format(cell.id, cell.kind))
    kind = _check_layer(layer_id)
    geom = geom or PentagonGeom()
    project = project or _identity

    facet = _Facet(cell.vertices)
    outline = geom.outline(layer_id)
    if kind == "inductive":
        ring = project(facet.lift(outline))
        return [TracePrimitive(ring, geom.w_p, layer_id, [cell.id], "ring", closed=True)]

    rim = project(facet.lift(inset_polygon(outline, (geom.g_p + geom.w_p) / 2)))
    hub = project(facet.origin[None, :])[0]
    traces = [TracePrimitive(rim, geom.w_p, layer_id, [cell.id], "rim", closed=True)]
    traces += [TracePrimitive(spoke, geom.w_p, layer_id, [cell.id], "spoke") for spoke in _spokes(hub, rim)]
    return traces


def _edge_width(owners, p2_of, w_L_for, pentagon):
    hexagons = [p2_of[c] for c in owners if p2_of[c] is not None]
    if len(hexagons) < len(owners):
        return pentagon.w_p, None
    p2 = float(np.mean(hexagons))
    return w_L_for(p2), p2


def build_layer(tess, layer_id, overrides: LawOverrides = None, pentagon: PentagonGeom = None,
                w_C=DEFAULT_W_C) -> LayerArtwork:
    """
    Artwork of every cell of ``tess`` for one layer.

    Dimensions come from the override table when it has anchors for the layer, otherwise from the scaling laws
    evaluated at each cell's p2. Grid edges between two hexagons use the mean p2 of the pair; edges touching a
    pentagon use the pentagon trace width.
    """
    kind = _check_layer(layer_id)
    overrides = overrides or LawOverrides()
    pentagon = pentagon or PentagonGeom()
    traces, provenance = [], {}
    out_of_range = 0

    def law(quantity, p2):
        value = overrides.lookup(layer_id, quantity, p2)
        if value is not None:
            return value, "override"
        if quantity == "w_C":
            return w_C, "default"
        scaled = gap_for_size if quantity == "g" else wire_for_size
        try:
            return scaled(p2, warn=False), "law"
        except InfeasibleGeometryError as err:
            raise InfeasibleArtworkError(str(err)) from err

    for cell in tess.cells:
        if cell.kind == "pentagon":
            traces += pentagon_artwork(cell, layer_id, pentagon, tess.project)
            record = {"kind": "pentagon", "w_p": pentagon.w_p, "source": "fixed"}
            if kind == "capacitive":
                record["g_p"] = pentagon.g_p
            provenance[cell.id] = record
            continue
        out_of_range += not in_validated_range(cell.p2)
        if kind == "capacitive":
            g, g_source = law("g", cell.p2)
            width, w_source = law("w_C", cell.p2)
            traces += capacitive_cell_artwork(cell, width, g, layer_id, tess.project)
            provenance[cell.id] = {"kind": "hexagon", "p2": cell.p2, "g": g, "w_C": width,
                                   "source": g_source if g_source == w_source else g_source + "+" + w_source}
        else:
            w_L, source = law("w_L", cell.p2)
            provenance[cell.id] = {"kind": "hexagon", "p2": cell.p2, "w_L": w_L, "source": source}

    if kind == "inductive":
        p2_of = {cell.id: cell.p2 for cell in tess.cells}
        edges, widths = [], []
        for (a, b), owners in tess.adjacency.items():
            width, _ = _edge_width(owners, p2_of, lambda p2: law("w_L", p2)[0], pentagon)
            edges.append((owners, tess.vertices[a], tess.vertices[b]))
            widths.append(width)
        traces = inductive_cell_artwork(edges, widths, layer_id) + traces

    if out_of_range:
        logger.warning("%s: %d cells have p2 outside the validated range %s", layer_id, out_of_range,
                       (3.22, 4.76))
    logger.info("%s at %.3f mm: %d traces over %d cells", layer_id, tess.radius, len(traces), len(tess.cells))
    return LayerArtwork(layer_id, tess.radius, traces, provenance)


def grid_components(artwork: LayerArtwork) -> int:
    """Number of connected pieces formed by the edge traces of a grid layer (traces joined at shared ends)."""
    edges = [trace for trace in artwork.traces if trace.role == "edge"]
    if not edges:
        return 0
    ends = np.round(np.concatenate([trace.points[[0, -1]] for trace in edges]), 6)
    _, node = np.unique(ends, axis=0, return_inverse=True)
    node = node.ravel()
    n = node.max() + 1
    graph = coo_matrix((np.ones(len(edges)), (node[0::2], node[1::2])), shape=(n, n))
    return int(connected_components(graph, directed=False)[0])


# Design-rule checks

class DrcReport:
    """Violations as a table with columns check, trace_a, trace_b, cell_a, cell_b, value_mm, limit_mm."""
    COLUMNS = ["check", "trace_a", "trace_b", "cell_a", "cell_b", "value_mm", "limit_mm"]

    def __init__(self, layer_id, violations):
        self.layer_id = layer_id
        self.violations = pandas.DataFrame(violations, columns=self.COLUMNS)

    @property
    def ok(self):
        return len(self.violations) == 0

    def count(self, check=None):
        if check is None:
            return len(self.violations)
        return int((self.violations["check"] == check).sum())

    def cells(self, check=None):
        rows = self.violations if check is None else self.violations[self.violations["check"] == check]
        return sorted(set(rows["cell_a"]) | set(rows["cell_b"].dropna().astype(int)))


def segment_distances(p1, q1, p2, q2):
    """Closest distance between segment pairs [p1, q1] and [p2, q2], all (n, 3) arrays."""
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    denom = a * e - b * b

    parallel = denom <= 1e-12 * a * e
    s = np.where(parallel, 0.0, np.clip((b * f - c * e) / np.where(parallel, 1, denom), 0, 1))
    t = (b * s + f) / e
    low, high = t < 0, t > 1
    s = np.where(low, np.clip(-c / a, 0, 1), np.where(high, np.clip((b - c) / a, 0, 1), s))
    t = np.clip(t, 0, 1)
    return np.linalg.norm(p1 + d1 * s[:, None] - (p2 + d2 * t[:, None]), axis=-1)


def drc_check(artwork: LayerArtwork, min_width, min_gap) -> DrcReport:
    """
    Width, clearance and self-intersection checks. Segments that share an end point are joined metal and are not
    checked against each other.
    """
    violations = []
    for n, trace in enumerate(artwork.traces):
        if trace.width < min_width - 1e-12:
            violations.append(("width", n, None, trace.cell_id, None, trace.width, min_width))
    if not artwork.traces:
        return DrcReport(artwork.layer_id, violations)

    pieces = [trace.segments() for trace in artwork.traces]
    owner = np.concatenate([np.full(len(p), n) for n, p in enumerate(pieces)])
    segments = np.concatenate(pieces)
    widths = np.array([trace.width for trace in artwork.traces])[owner]
    start, end = segments[:, 0], segments[:, 1]
    lengths = np.linalg.norm(end - start, axis=1)

    reach = lengths.max() + widths.max() + min_gap
    pairs = cKDTree((start + end) / 2).query_pairs(reach, output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        touching = np.zeros(len(i), dtype=bool)
        for x in (start, end):
            for y in (start, end):
                touching |= np.linalg.norm(x[i] - y[j], axis=1) <= 1e-9
        i, j = i[~touching], j[~touching]
        distance = segment_distances(start[i], end[i], start[j], end[j])

        same = owner[i] == owner[j]
        crossing = same & (distance <= 1e-9)
        for a, b, d in zip(i[crossing], j[crossing], distance[crossing]):
            trace = artwork.traces[owner[a]]
            violations.append(("self_intersection", int(owner[a]), int(owner[a]), trace.cell_id, trace.cell_id,
                               float(d), 0.0))

        clearance = distance - (widths[i] + widths[j]) / 2
        close = ~same & (clearance < min_gap - 1e-12)
        seen = set()
        for a, b, gap in zip(owner[i][close], owner[j][close], clearance[close]):
            key = (min(a, b), max(a, b))
            if key in seen:
                continue
            seen.add(key)
            violations.append(("clearance", int(key[0]), int(key[1]), artwork.traces[key[0]].cell_id,
                               artwork.traces[key[1]].cell_id, float(gap), min_gap))

    report = DrcReport(artwork.layer_id, violations)
    if not report.ok:
        logger.warning("%s: %d design-rule violations (%d width, %d clearance, %d self-intersection)",
                       artwork.layer_id, report.count(), report.count("width"), report.count("clearance"),
                       report.count("self_intersection"))
    return report
