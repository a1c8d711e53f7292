"""
Ray estimate of the curved filter's transmission.

The dome is a thin shell: the ray from the feed to a probe crosses it once, and at the crossing the field is
multiplied by the plane-wave transmission of the unit-cell stack at the local incidence angle, split into its TE
and TM parts. There is no diffraction and no coupling between cells. With the feed at the centre of the sphere
every ray meets the dome at normal incidence, so the estimate reduces to the unit-cell response.
"""
import numpy as np
import pandas
import param as pm
from param.parameterized import get_logger

from .base import Record
from .errors import DomainError, GeometryError
from .feed_model import FeedSpec, raised_cosine_field
from .tmm_circuit import DielectricLayer, StackSpec, reference_stack, stack_response_oblique

logger = get_logger(name=__name__)

ESTIMATE_COLUMNS = ["freq_hz", "e_abs_with", "e_abs_without", "norm_db"]


class ProbeConfig(Record):
    r_probe_mm = pm.Number(60.0, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                           doc="boresight probe distance beyond the outer shell surface, mm")
    r_scan_mm = pm.Number(136.0, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                          doc="distance of the scan probes from the feed, mm")
    theta_probe = pm.List(default=[0.0], constant=True, doc="scan-probe polar angles in the yz plane, rad")
    theta_feed = pm.Number(0.0, bounds=(0, np.pi / 2), constant=True,
                           doc="feed rotation about the x axis, rad")

    def _validate(self):
        if any(not 0 <= t <= np.pi for t in self.theta_probe):
            raise DomainError("probe angles must lie in [0, pi]")


class ShellModel(Record):
    """The dome as one thin shell at the mid-layer radius, with its cylindrical skirt."""
    center_mm = pm.NumericTuple((0.0, 0.0, 0.0), length=3, constant=True, doc="sphere centre, mm")
    radius_mm = pm.Number(73.75, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                          doc="mid-layer sphere radius, mm")
    skirt_height_mm = pm.Number(25.0, bounds=(0, None), constant=True, doc="cylinder height below the equator, mm")
    stack = pm.ClassSelector(class_=StackSpec, default=reference_stack(tan_delta=0.0), constant=True,
                             doc="unit-cell stack crossed by every ray")

    @property
    def thickness_mm(self):
        return 1e3 * sum(block.thickness for block in self.stack.blocks if isinstance(block, DielectricLayer))

    @property
    def outer_radius_mm(self):
        return self.radius_mm + self.thickness_mm / 2

    def contains(self, point):
        """True when ``point`` (mm) lies strictly inside the dome-plus-skirt."""
        p = np.asarray(point, dtype=float) - np.asarray(self.center_mm)
        if p[2] >= 0:
            return np.linalg.norm(p) < self.radius_mm
        return np.hypot(p[0], p[1]) < self.radius_mm and p[2] > -self.skirt_height_mm

    def intersect(self, origin, direction):
        """
        First crossing of the ray ``origin + t direction`` (t > 0) with the shell: (point, unit normal, surface
        name), or None when the ray leaves through the open bottom of the skirt.
        """
        c = np.asarray(self.center_mm, dtype=float)
        p = np.asarray(origin, dtype=float) - c
        u = np.asarray(direction, dtype=float)
        R = self.radius_mm

        b = np.dot(p, u)
        disc = b * b - (np.dot(p, p) - R * R)
        if disc >= 0:
            t = -b + np.sqrt(disc)
            hit = p + t * u
            if t > 0 and hit[2] >= 0:
                return hit + c, hit / R, "sphere"

        a = u[0] ** 2 + u[1] ** 2
        if a > 0:
            bc = p[0] * u[0] + p[1] * u[1]
            disc = bc * bc - a * (p[0] ** 2 + p[1] ** 2 - R * R)
            if disc >= 0:
                t = (-bc + np.sqrt(disc)) / a
                hit = p + t * u
                if t > 0 and -self.skirt_height_mm <= hit[2] < 0:
                    return hit + c, np.array([hit[0], hit[1], 0.0]) / R, "cylinder"
        return None


class PlanarModel(Record):
    """Flat hexagonal panel of the same stack, for comparing angular coverage with the dome."""
    distance_mm = pm.Number(76.0, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                            doc="height of the panel above the feed, mm")
    width_mm = pm.Number(180.0, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                         doc="vertex-to-vertex width of the panel (along x), mm")
    stack = pm.ClassSelector(class_=StackSpec, default=reference_stack(tan_delta=0.0), constant=True,
                             doc="unit-cell stack of the panel")

    @property
    def flat_width_mm(self):
        return self.width_mm * np.sqrt(3) / 2

    def intersect(self, origin, direction):
        p = np.asarray(origin, dtype=float)
        u = np.asarray(direction, dtype=float)
        if u[2] <= 0:
            return None
        t = (self.distance_mm - p[2]) / u[2]
        if t <= 0:
            return None
        hit = p + t * u
        x, y = abs(hit[0]), abs(hit[1])
        half = self.width_mm / 2
        if y <= self.flat_width_mm / 2 and np.sqrt(3) * x + y <= np.sqrt(3) * half:
            return hit, np.array([0.0, 0.0, 1.0]), "panel"
        return None


class _Transmission:
    """Oblique stack responses at one frequency, cached per (angle, polarization)."""

    def __init__(self, stack, f):
        self.stack = stack
        self.f = f
        self._cache = {}

    def s21(self, theta, pol):
        key = (round(theta, 15), pol)
        if key not in self._cache:
            self._cache[key] = complex(stack_response_oblique(self.stack, [self.f], theta, pol).s21[0])
        return self._cache[key]

    def apply(self, field, u, n):
        """Field vector after crossing a sheet with unit normal ``n`` along ray direction ``u``."""
        cos_i = min(abs(float(np.dot(u, n))), 1.0)
        theta = float(np.arccos(cos_i))
        s = np.cross(u, n)
        norm = np.linalg.norm(s)
        if norm < 1e-12:
            return self.s21(0.0, "TE") * field, 0.0
        s /= norm
        te = np.dot(field, s) * s
        return self.s21(theta, "TE") * te + self.s21(theta, "TM") * (field - te), theta


def _field_at(feed: FeedSpec, f, feed_position, point):
    """Feed field at ``point`` (mm) and the unit ray direction from the feed."""
    d = (np.asarray(point, dtype=float) - np.asarray(feed_position, dtype=float)) * 1e-3
    r = np.linalg.norm(d)
    u = d / r
    local = feed.frame().T @ u
    theta = np.arccos(np.clip(local[2], -1, 1))
    phi = np.arctan2(local[1], local[0])
    return raised_cosine_field(feed, f, (r, theta, phi)), u


def _normalized_db(with_shell, without_shell):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(without_shell > 0, 20 * np.log10(with_shell / np.where(without_shell > 0, without_shell, 1)),
                        np.nan)


def boresight_transmission(shell: ShellModel, feed: FeedSpec, freqs, probe: ProbeConfig = None,
                           feed_position=None) -> pandas.DataFrame:
    """
    Probe field with and without the shell along the feed's boresight, probe ``r_probe_mm`` beyond the outer
    surface. Columns freq_hz, e_abs_with, e_abs_without, norm_db.
    """
    probe = probe or ProbeConfig()
    feed_position = np.asarray(shell.center_mm if feed_position is None else feed_position, dtype=float)
    if not shell.contains(feed_position):
        raise GeometryError("feed at {} mm is outside the shell".format(tuple(feed_position)))
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    pointing = np.asarray(feed.pointing)
    point = np.asarray(shell.center_mm) + pointing * (shell.outer_radius_mm + probe.r_probe_mm)

    crossing = shell.intersect(feed_position, pointing)
    rows = []
    for f in freqs:
        field, u = _field_at(feed, f, feed_position, point)
        without = np.linalg.norm(field)
        if crossing is None:
            with_shell = without
        else:
            transmitted, _ = _Transmission(shell.stack, f).apply(field, u, crossing[1])
            with_shell = np.linalg.norm(transmitted)
        rows.append((f, with_shell, without))
    table = pandas.DataFrame(rows, columns=ESTIMATE_COLUMNS[:3])
    table["norm_db"] = _normalized_db(table["e_abs_with"].to_numpy(), table["e_abs_without"].to_numpy())
    return table


def _scan(surface, stack, feed, probes, f, feed_position):
    theta_feed = probes.theta_feed
    pointed = FeedSpec(q=feed.q, E0=feed.E0, pointing=(0.0, -np.sin(theta_feed), np.cos(theta_feed)))
    transmission = _Transmission(stack, f)
    rows = []
    for theta_probe in probes.theta_probe:
        point = np.asarray(feed_position) + probes.r_scan_mm * np.array([0.0, -np.sin(theta_probe),
                                                                         np.cos(theta_probe)])
        field, u = _field_at(pointed, f, feed_position, point)
        without = np.linalg.norm(field)
        crossing = surface.intersect(feed_position, u)
        if crossing is None:
            with_shell, incidence, name = without, np.nan, "none"
        else:
            transmitted, incidence = transmission.apply(field, u, crossing[1])
            with_shell, name = np.linalg.norm(transmitted), crossing[2]
        rows.append((f, np.degrees(theta_feed), np.degrees(theta_probe), with_shell, without,
                     np.degrees(incidence), name, crossing is None, theta_probe >= np.pi / 2 - 1e-9))

    table = pandas.DataFrame(rows, columns=["freq_hz", "theta_feed_deg", "theta_probe_deg", "e_abs_with",
                                            "e_abs_without", "incidence_deg", "surface", "direct_path",
                                            "edge_flag"])
    table.insert(5, "norm_db", _normalized_db(table["e_abs_with"].to_numpy(), table["e_abs_without"].to_numpy()))
    if table["direct_path"].any():
        logger.warning("%d probe rays reach the probe without crossing the filter", int(table["direct_path"].sum()))
    return table


def scanned_field(shell: ShellModel, feed: FeedSpec, probes: ProbeConfig, f, feed_position=None) -> pandas.DataFrame:
    """
    Field at each scan probe for a feed rotated by ``probes.theta_feed`` about x.

    Rays that leave below the skirt are reported unfiltered with ``direct_path`` set; probes at or below the
    equator carry ``edge_flag`` because part of their field would arrive around the rim, which is not modelled.
    """
    feed_position = np.asarray(shell.center_mm if feed_position is None else feed_position, dtype=float)
    if not shell.contains(feed_position):
        raise GeometryError("feed at {} mm is outside the shell".format(tuple(feed_position)))
    return _scan(shell, shell.stack, feed, probes, f, feed_position)


def planar_scanned_field(planar: PlanarModel, feed: FeedSpec, probes: ProbeConfig, f) -> pandas.DataFrame:
    """Same bookkeeping for the flat panel: rays past its edge reach the probe unfiltered."""
    return _scan(planar, planar.stack, feed, probes, f, np.zeros(3))
