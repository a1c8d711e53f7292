"""
Goldberg tessellation of the dome.

GP(m, 0) is built as the dual of the frequency-m geodesic icosahedron: every icosahedron face is split into m^2
triangles, the lattice points are pushed radially onto the sphere, and each lattice point becomes a cell whose
corners are the circumcentres of the triangles around it. The twelve icosahedron vertices turn into the twelve
pentagons, every other lattice point into a hexagon.

With an icosahedron vertex on the +z pole the upper hemisphere holds six pentagons. Cutting at the equator and
continuing the equatorial row down a cylinder of the same radius gives the conformal dome-plus-skirt surface the
artwork is drawn on.
"""
import numpy as np
import pandas
import param as pm
from param.parameterized import get_logger
from scipy.spatial import ConvexHull, cKDTree

from .base import Record
from .errors import DomainError, GeometryError, KindError, OrientationError, SymmetryError
from .tables import json_bytes, rounded

logger = get_logger(name=__name__)

DEFAULT_LAYER_RADII = (72.5, 73.75, 75.0)

# Irreducible wedge: from the yz mirror plane to the neighbouring mirror plane 36 degrees further on
SECTION_AZIMUTHS = (np.pi / 2, np.pi / 2 + np.pi / 5)


class GoldbergSpec(Record):
    m = pm.Integer(20, bounds=(0, None), constant=True, doc="subdivision frequency of the class-I polyhedron GP(m, 0)")
    n = pm.Integer(0, bounds=(0, 0), constant=True, doc="second Goldberg index (class I only)")
    radius = pm.Number(75.0, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                       doc="sphere radius, mm")
    vertex_at_pole = pm.Boolean(True, constant=True, doc="place an icosahedron vertex on the +z pole")

    def _validate(self):
        if self.m < 1:
            raise DomainError("GP(m, 0) needs m >= 1")


class TessCell:
    """
    One face of the tessellation.

    ``vertices`` are the ordered corners, counter-clockwise seen from outside. ``center`` is the generating lattice
    point on the surface and ``centroid`` the mean of the corners. ``surface`` is ``sphere``, ``cylinder`` or
    ``plane`` (free-standing cells built for measurements).
    """

    def __init__(self, id, kind, vertices, vertex_ids=None, center=None, surface="sphere", radius=None, p2=None,
                 symmetry_class=None):
        self.id = id
        self.kind = kind
        self.vertices = np.asarray(vertices, dtype=float)
        self.vertex_ids = tuple(range(len(self.vertices))) if vertex_ids is None else tuple(vertex_ids)
        self.center = self.vertices.mean(axis=0) if center is None else np.asarray(center, dtype=float)
        self.surface = surface
        self.radius = radius
        self.p2 = p2
        self.symmetry_class = symmetry_class

    @property
    def centroid(self):
        return self.vertices.mean(axis=0)

    def __repr__(self):
        return "TessCell(id={}, kind={}, surface={}, p2={})".format(self.id, self.kind, self.surface, self.p2)


class SymmetryOperation:
    """An orthogonal map of the dome onto itself: a rotation about z, optionally after the yz mirror."""

    def __init__(self, name, matrix):
        self.name = name
        self.matrix = np.asarray(matrix, dtype=float)

    def apply(self, points):
        return np.asarray(points, dtype=float) @ self.matrix.T

    def __repr__(self):
        return "SymmetryOperation({})".format(self.name)


class GoldbergTessellation:
    """
    Cells sharing one vertex table.

    Cell corners refer to rows of ``vertices``; two cells share an edge when they share the pair of vertex ids.
    """

    def __init__(self, spec, vertices, cells, hemisphere=False, skirt_height=0.0, skirt_rows=0):
        self.spec = spec
        self.radius = spec.radius
        self.vertices = vertices
        self.cells = cells
        self.hemisphere = hemisphere
        self.skirt_height = skirt_height
        self.skirt_rows = skirt_rows
        self._adjacency = None
        self._by_id = {cell.id: cell for cell in cells}

    def cell(self, cell_id):
        return self._by_id[cell_id]

    @property
    def adjacency(self):
        """Shared-edge map: sorted vertex-id pair -> ids of the (one or two) cells bordering that edge."""
        if self._adjacency is None:
            edges = {}
            for cell in self.cells:
                ids = cell.vertex_ids
                for a, b in zip(ids, ids[1:] + ids[:1]):
                    edges.setdefault((min(a, b), max(a, b)), []).append(cell.id)
            for edge, owners in edges.items():
                if len(owners) > 2:
                    raise GeometryError("edge {} is shared by {} cells".format(edge, len(owners)))
            self._adjacency = {edge: tuple(owners) for edge, owners in sorted(edges.items())}
        return self._adjacency

    @property
    def counts(self):
        n_pent = sum(cell.kind == "pentagon" for cell in self.cells)
        return n_pent, len(self.cells) - n_pent

    @property
    def euler(self):
        used = {v for cell in self.cells for v in cell.vertex_ids}
        return len(used), len(self.adjacency), len(self.cells)

    def centers(self):
        return np.array([cell.center for cell in self.cells])

    def p2_values(self):
        return np.array([cell.p2 for cell in self.cells if cell.kind == "hexagon"])

    def project(self, points):
        """Radial projection onto the layer surface: sphere above the equator, cylinder below it."""
        points = np.array(points, dtype=float)
        flat = points.reshape(-1, 3)
        out = self.radius * flat / np.linalg.norm(flat, axis=1)[:, None]
        if self.hemisphere:
            lower = flat[:, 2] < 0
            rho = np.hypot(flat[lower, 0], flat[lower, 1])
            out[lower, :2] = self.radius * flat[lower, :2] / rho[:, None]
            out[lower, 2] = flat[lower, 2]
        return out.reshape(points.shape)

    def surface_normals(self, points):
        points = np.array(points, dtype=float)
        flat = points.reshape(-1, 3)
        normals = flat / np.linalg.norm(flat, axis=1)[:, None]
        if self.hemisphere:
            lower = flat[:, 2] < 0
            rho = np.hypot(flat[lower, 0], flat[lower, 1])
            normals[lower] = np.column_stack([flat[lower, 0] / rho, flat[lower, 1] / rho, np.zeros(lower.sum())])
        return normals.reshape(points.shape)

    def symmetry_operations(self):
        if not self.spec.vertex_at_pole:
            raise OrientationError("symmetry operations need the vertex-at-pole orientation")
        return c5v_operations()


# Construction

def _icosahedron(vertex_at_pole):
    if vertex_at_pole:
        z, rho = 1 / np.sqrt(5), 2 / np.sqrt(5)
        upper = [(rho * np.cos(a), rho * np.sin(a), z) for a in np.pi / 2 + 2 * np.pi * np.arange(5) / 5]
        lower = [(rho * np.cos(a), rho * np.sin(a), -z) for a in np.pi / 2 + np.pi / 5 + 2 * np.pi * np.arange(5) / 5]
        vertices = np.array([(0.0, 0.0, 1.0)] + upper + lower + [(0.0, 0.0, -1.0)])
    else:
        phi = (1 + np.sqrt(5)) / 2
        base = [(0, s1, s2 * phi) for s1 in (-1, 1) for s2 in (-1, 1)]
        vertices = np.array([p[k:] + p[:k] for p in base for k in range(3)], dtype=float)
        vertices /= np.linalg.norm(vertices, axis=1)[:, None]

    faces = []
    for a, b, c in ConvexHull(vertices).simplices:
        va, vb, vc = vertices[[a, b, c]]
        if np.dot(np.cross(vb - va, vc - va), va + vb + vc) < 0:
            b, c = c, b
        face = (int(a), int(b), int(c))
        k = face.index(min(face))
        faces.append(face[k:] + face[:k])
    if len(faces) != 20:
        raise GeometryError("icosahedron hull has {} faces".format(len(faces)))
    return vertices, sorted(faces)


def _lattice_key(face_no, face, i, j, m):
    weighted = [(v, w) for v, w in zip(face, (m - i - j, i, j)) if w]
    if len(weighted) == 1:
        return ("v", weighted[0][0])
    if len(weighted) == 2:
        (u, _), (v, wv) = sorted(weighted)
        return ("e", u, v, wv)
    return ("f", face_no, i, j)


def _geodesic(base, faces, m):
    """Frequency-m subdivision: unit lattice points and outward-oriented triangles."""
    index, points, triangles = {}, [], []
    for face_no, face in enumerate(faces):
        a, b, c = (base[v] for v in face)
        ids = {}
        for i in range(m + 1):
            for j in range(m + 1 - i):
                key = _lattice_key(face_no, face, i, j, m)
                if key not in index:
                    index[key] = len(points)
                    points.append(((m - i - j) * a + i * b + j * c) / m)
                ids[i, j] = index[key]
        for i in range(m):
            for j in range(m - i):
                triangles.append((ids[i, j], ids[i + 1, j], ids[i, j + 1]))
                if i + j < m - 1:
                    triangles.append((ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]))
    points = np.array(points)
    return points / np.linalg.norm(points, axis=1)[:, None], np.array(triangles)


def _rings(n_points, triangles):
    """For every lattice point, the ids of its surrounding triangles in counter-clockwise order."""
    edge_owner, first = {}, {}
    for t, (p, q, r) in enumerate(triangles.tolist()):
        edge_owner[p, q] = edge_owner[q, r] = edge_owner[r, p] = t
        for v in (p, q, r):
            first.setdefault(v, t)

    rings = []
    for v in range(n_points):
        start = t = first[v]
        ring = []
        while True:
            ring.append(t)
            p, q, r = triangles[t]
            x = r if p == v else p if q == v else q
            t = edge_owner[v, x]
            if t == start:
                break
            if len(ring) > 6:
                raise GeometryError("lattice point {} has more than six triangles".format(v))
        rings.append(ring)
    return rings


def cell_p2(cell: TessCell) -> float:
    """
    Short-diagonal size of a hexagonal cell: mean distance between midpoints of opposite edges (across-flats).

    Skirt cells are measured on the developed cylinder.
    """
    if cell.kind != "hexagon" or len(cell.vertices) != 6:
        raise KindError("p2 is defined for hexagons only (cell {} is a {})".format(cell.id, cell.kind))
    points = _developed(cell) if cell.surface == "cylinder" else cell.vertices
    distances = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    scale = distances.max()
    if not scale > 0 or distances[~np.eye(6, dtype=bool)].min() <= 1e-9 * scale:
        raise GeometryError("cell {} has repeated vertices".format(cell.id))
    midpoints = (points + np.roll(points, -1, axis=0)) / 2
    return float(np.linalg.norm(midpoints[:3] - midpoints[3:], axis=1).mean())


def _developed(cell):
    """Corners of a cylinder cell unrolled to (arc length, z, 0)."""
    phi0 = np.arctan2(cell.center[1], cell.center[0])
    phi = np.arctan2(cell.vertices[:, 1], cell.vertices[:, 0])
    dphi = (phi - phi0 + np.pi) % (2 * np.pi) - np.pi
    return np.column_stack([cell.radius * dphi, cell.vertices[:, 2], np.zeros(len(phi))])


def facet_flatness(cell: TessCell) -> float:
    """Largest distance of a corner from the least-squares plane of the cell."""
    points = cell.vertices - cell.vertices.mean(axis=0)
    normal = np.linalg.svd(points)[2][-1]
    return float(np.abs(points @ normal).max())


def _make_cell(cell_id, ring, vertices, center, surface, radius):
    kind = {5: "pentagon", 6: "hexagon"}.get(len(ring))
    if kind is None:
        raise GeometryError("cell {} has {} corners".format(cell_id, len(ring)))
    cell = TessCell(cell_id, kind, vertices[list(ring)], vertex_ids=ring, center=center, surface=surface,
                    radius=radius)
    if kind == "hexagon":
        cell.p2 = cell_p2(cell)
    return cell


def c5v_operations():
    """Rotations by multiples of 72 degrees about z, with and without the mirror across the yz plane."""
    mirror = np.diag([-1.0, 1.0, 1.0])
    operations = []
    for k in range(5):
        a = 2 * np.pi * k / 5
        rotation = np.array([[np.cos(a), -np.sin(a), 0.0], [np.sin(a), np.cos(a), 0.0], [0.0, 0.0, 1.0]])
        operations.append(SymmetryOperation("rotate {}".format(72 * k), rotation))
    for k in range(5):
        operations.append(SymmetryOperation("mirror yz, rotate {}".format(72 * k), operations[k].matrix @ mirror))
    return operations


def _orbit_images(centers, operations, tolerance):
    tree = cKDTree(centers)
    images = []
    for operation in operations:
        distance, index = tree.query(operation.apply(centers))
        if np.any(distance > tolerance):
            raise SymmetryError("{} does not map the cell set onto itself (off by {:.3g} mm)"
                                .format(operation.name, distance.max()))
        images.append(index)
    return np.array(images)


def _assign_symmetry_classes(cells, vertex_at_pole, radius):
    if not vertex_at_pole:
        for n, cell in enumerate(cells):
            cell.symmetry_class = n
        return
    centers = np.array([cell.center for cell in cells])
    images = _orbit_images(centers, c5v_operations(), 1e-6)
    _, classes = np.unique(images.min(axis=0), return_inverse=True)
    for cell, symmetry_class in zip(cells, classes):
        cell.symmetry_class = int(symmetry_class)


def build_goldberg(spec: GoldbergSpec) -> GoldbergTessellation:
    base, faces = _icosahedron(spec.vertex_at_pole)
    sites, triangles = _geodesic(base, faces, spec.m)

    a, b, c = (sites[triangles[:, k]] for k in range(3))
    normals = np.cross(b - a, c - a)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    vertices = spec.radius * normals

    cells = [_make_cell(n, ring, vertices, spec.radius * sites[n], "sphere", spec.radius)
             for n, ring in enumerate(_rings(len(sites), triangles))]
    _assign_symmetry_classes(cells, spec.vertex_at_pole, spec.radius)

    tess = GoldbergTessellation(spec, vertices, cells)
    logger.info("GP(%d,0) at %.3f mm: %d pentagons, %d hexagons", spec.m, spec.radius, *tess.counts)
    return tess


def _skirt(tess, vertices, equator, skirt_height, first_cell_id):
    """
    Rows of cylinder hexagons continuing the equatorial row downwards.

    The lower boundary of the equatorial row is a zigzag of "tips" (bottom corners, one per cell) and "sides"
    (corners shared by neighbours). Every skirt vertex sits on one of those azimuths; the row below takes its tips
    where the row above had its sides, so rows alternate like a hexagonal lattice. Vertical steps are the mean tip
    height and side length of the equatorial cells.
    """
    radius = tess.radius
    below, upper_sides = {}, {}
    side_lengths = []
    for cell in equator:
        ids = cell.vertex_ids
        for v in ids:
            if vertices[v, 2] < 0:
                below[v] = below.get(v, 0) + 1
        for p, q in zip(ids, ids[1:] + ids[:1]):
            if (vertices[p, 2] > 0) != (vertices[q, 2] > 0):
                side_lengths.append(abs(vertices[p, 2] - vertices[q, 2]))

    columns = sorted(below, key=lambda v: np.arctan2(vertices[v, 1], vertices[v, 0]))
    is_tip = np.array([below[v] == 1 for v in columns])
    if len(columns) != 2 * len(equator) or np.any(is_tip == np.roll(is_tip, 1)):
        raise GeometryError("equatorial row does not close into an alternating zigzag")

    z = vertices[columns, 2].copy()
    tip_drop = z[~is_tip].mean() - z[is_tip].mean()
    side_drop = float(np.mean(side_lengths))
    pitch = tip_drop + side_drop
    rows = int(np.ceil(skirt_height / pitch - 1e-9))

    phi = np.array([np.arctan2(vertices[v, 1], vertices[v, 0]) for v in columns])
    ring_xy = radius * np.column_stack([np.cos(phi), np.sin(phi)])
    n_col = len(columns)
    current = list(columns)
    tips = ~is_tip
    new_vertices, cells = [], []
    next_vertex, next_cell = len(vertices), first_cell_id

    for _ in range(rows):
        z_new = np.where(tips, z - side_drop - 2 * tip_drop, z - side_drop)
        below_ids = list(range(next_vertex, next_vertex + n_col))
        next_vertex += n_col
        new_vertices.append(np.column_stack([ring_xy, z_new]))
        for col in np.nonzero(tips)[0]:
            left, right = (col - 1) % n_col, (col + 1) % n_col
            ring = (current[col], current[left], below_ids[left], below_ids[col], below_ids[right], current[right])
            center = np.array([ring_xy[col, 0], ring_xy[col, 1], (z[col] + z_new[col]) / 2])
            cells.append((next_cell, ring, center))
            next_cell += 1
        current, z, tips = below_ids, z_new, ~tips

    extra = np.concatenate(new_vertices) if new_vertices else np.zeros((0, 3))
    return extra, cells, rows


def hemisphere_with_skirt(tess: GoldbergTessellation, skirt_height=25.0) -> GoldbergTessellation:
    """
    Upper half of an oriented sphere tessellation, optionally continued down a cylinder of ``skirt_height`` mm.

    Cells whose generating lattice point has z >= 0 are kept; their corners below the equator are moved onto the
    cylinder so that the dome and the skirt share one surface.
    """
    if not tess.spec.vertex_at_pole:
        raise OrientationError("the hemisphere cut needs an icosahedron vertex at the +z pole")
    if tess.hemisphere:
        raise GeometryError("tessellation is already a hemisphere")
    if skirt_height < 0:
        raise DomainError("skirt height must be non-negative")

    radius = tess.radius
    tolerance = 1e-9 * radius
    kept = [cell for cell in tess.cells if cell.center[2] >= -tolerance]
    vertices = tess.vertices.copy()
    lower = sorted({v for cell in kept for v in cell.vertex_ids if vertices[v, 2] < 0})
    rho = np.hypot(vertices[lower, 0], vertices[lower, 1])
    vertices[lower, :2] *= (radius / rho)[:, None]

    skirt_cells, rows = [], 0
    if skirt_height > 0:
        equator = [cell for cell in kept if abs(cell.center[2]) <= tolerance]
        if not equator:
            raise GeometryError("a skirt needs an equatorial row of cells, which GP(m, 0) only has for even m")
        extra, skirt_cells, rows = _skirt(tess, vertices, equator, skirt_height, len(tess.cells))
        vertices = np.concatenate([vertices, extra])

    used = sorted({v for cell in kept for v in cell.vertex_ids} | {v for _, ring, _ in skirt_cells for v in ring})
    remap = {old: new for new, old in enumerate(used)}
    compact = vertices[used]

    cells = []
    for cell in kept:
        ring = [remap[v] for v in cell.vertex_ids]
        cells.append(_make_cell(cell.id, ring, compact, cell.center, "sphere", radius))
    for cell_id, ring, center in skirt_cells:
        cells.append(_make_cell(cell_id, [remap[v] for v in ring], compact, center, "cylinder", radius))
    _assign_symmetry_classes(cells, True, radius)

    result = GoldbergTessellation(tess.spec, compact, cells, hemisphere=True, skirt_height=float(skirt_height),
                                  skirt_rows=rows)
    logger.info("hemisphere at %.3f mm: %d pentagons, %d hexagons, %d skirt rows", radius, *result.counts, rows)
    return result


def irreducible_section(tess: GoldbergTessellation):
    """
    The 1/10 wedge of an oriented dome together with the ten operations that rebuild it.

    The wedge spans azimuths 90 to 126 degrees, between the yz mirror plane and the next mirror plane. Cells
    centred on either boundary meridian (and the polar pentagon) belong to the wedge, so neighbouring wedges share
    them.
    """
    if not tess.spec.vertex_at_pole:
        raise OrientationError("the irreducible section needs the vertex-at-pole orientation")
    operations = c5v_operations()
    centers = tess.centers()
    _orbit_images(centers, operations[1:2], 1e-6)

    tolerance = 1e-9
    azimuth = np.mod(np.arctan2(centers[:, 1], centers[:, 0]), 2 * np.pi)
    on_axis = np.hypot(centers[:, 0], centers[:, 1]) <= tolerance * tess.radius
    lo, hi = SECTION_AZIMUTHS
    inside = on_axis | ((azimuth >= lo - tolerance) & (azimuth <= hi + tolerance))
    section = [cell for cell, keep in zip(tess.cells, inside) if keep]
    return section, operations


def reconstruct_centers(section, operations):
    """Centres obtained by applying every operation to every section cell, duplicates merged."""
    images = np.concatenate([operation.apply([cell.center for cell in section]) for operation in operations])
    keep = np.ones(len(images), dtype=bool)
    tree = cKDTree(images)
    for i, j in sorted(tree.query_pairs(1e-6)):
        if keep[i]:
            keep[j] = False
    return images[keep]


def layer_tessellations(layer_radii=DEFAULT_LAYER_RADII, m=20, skirt_height=None):
    """
    One tessellation per metal layer. With ``skirt_height`` set, each sphere is cut to the dome-plus-skirt surface.
    """
    radii = [float(r) for r in layer_radii]
    if not radii or any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError("layer radii must be positive and increasing, got {}".format(radii))
    layers = []
    for radius in radii:
        tess = build_goldberg(GoldbergSpec(m=m, radius=radius))
        if skirt_height is not None:
            tess = hemisphere_with_skirt(tess, skirt_height)
        layers.append(tess)
    return layers


# Serialization

def serialize_tessellation(tess: GoldbergTessellation) -> bytes:
    """
    Geometry file, schema ``hemifss.tessellation/1`` (lengths in mm, 6 decimals):

        m, radius, hemisphere, skirt_height, skirt_rows
        counts   {pentagons, hexagons}
        euler    {V, E, F}
        cells    [{id, kind, surface, p2 (null for pentagons), symmetry_class, center [x, y, z],
                   vertices [[x, y, z], ...]}]
    """
    n_pent, n_hex = tess.counts
    V, E, F = tess.euler
    document = {
        "schema": "hemifss.tessellation/1",
        "units": "mm",
        "m": tess.spec.m,
        "radius": tess.radius,
        "hemisphere": tess.hemisphere,
        "skirt_height": tess.skirt_height,
        "skirt_rows": tess.skirt_rows,
        "counts": {"pentagons": n_pent, "hexagons": n_hex},
        "euler": {"V": V, "E": E, "F": F},
        "cells": [{
            "id": cell.id,
            "kind": cell.kind,
            "surface": cell.surface,
            "p2": None if cell.p2 is None else round(cell.p2, 6),
            "symmetry_class": cell.symmetry_class,
            "center": rounded(cell.center),
            "vertices": rounded(cell.vertices),
        } for cell in tess.cells],
    }
    return json_bytes(document)


def tessellation_stats(tess: GoldbergTessellation, bin_width=0.05):
    """Summary counts and a p2 histogram (bins of ``bin_width`` mm) of one tessellation."""
    n_pent, n_hex = tess.counts
    V, E, F = tess.euler
    p2 = tess.p2_values()
    summary = {"radius_mm": tess.radius, "pentagons": n_pent, "hexagons": n_hex, "V": V, "E": E, "F": F,
               "p2_min_mm": float(p2.min()) if len(p2) else float("nan"),
               "p2_max_mm": float(p2.max()) if len(p2) else float("nan"),
               "p2_mean_mm": float(p2.mean()) if len(p2) else float("nan")}
    if len(p2):
        lo = np.floor(p2.min() / bin_width) * bin_width
        hi = np.ceil(p2.max() / bin_width) * bin_width
        edges = lo + bin_width * np.arange(int(round((hi - lo) / bin_width)) + 1)
        if len(edges) < 2:
            edges = np.array([lo, lo + bin_width])
        edges[0] = min(edges[0], p2.min())
        edges[-1] = max(edges[-1], p2.max())
        counts, edges = np.histogram(p2, bins=edges)
    else:
        counts, edges = np.zeros(0, dtype=int), np.zeros(1)
    histogram = pandas.DataFrame({"radius_mm": tess.radius, "p2_lo_mm": edges[:-1], "p2_hi_mm": edges[1:],
                                  "count": counts})
    return summary, histogram
