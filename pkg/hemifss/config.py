"""
Project configuration: one param section per stage, loaded from a JSON file of the form

    {"stack": {...}, "synth": {...}, "tessellation": {...}, "artwork": {...},
     "feed": {...}, "postproc": {...}, "estimator": {...}, "out_dir": "out"}

Every key is optional. Units are fixed by the suffix of the field name. Sweep ranges are (start, stop, step)
triples.
"""
import json
from pathlib import Path

import numpy as np
import param as pm

from . import __version__
from .element_synth import BandTarget
from .errors import DataFormatError, UsageError
from .gaussian_postproc import GaussianSpec
from .goldberg_tess import DEFAULT_LAYER_RADII
from .pattern_mapper import PentagonGeom
from .radome_estimator import ProbeConfig, ShellModel
from .tables import SCHEMA_VERSION
from .tmm_circuit import Z0, default_frequency_grid, reference_stack


class Section(pm.Parameterized):
    """Base of the config sections: JSON in, JSON out, without param's instance ``name``."""

    @classmethod
    def from_dict(cls, values):
        unknown = sorted(set(values) - set(cls.param) - {"name"})
        if unknown:
            raise DataFormatError("unknown {} key(s): {}".format(cls.__name__, ", ".join(unknown)))
        values = {key: value for key, value in values.items() if key != "name"}
        try:
            resolved = cls.param.deserialize_parameters(json.dumps(values), mode="json")
            return cls(**resolved)
        except (ValueError, TypeError) as err:
            raise DataFormatError("invalid {}: {}".format(cls.__name__, err)) from err

    def to_dict(self):
        values = json.loads(self.param.serialize_parameters(mode="json"))
        values.pop("name", None)
        return values


def sweep(triple):
    start, stop, step = triple
    return default_frequency_grid(start, stop, step)


class StackSection(Section):
    c_farads = pm.Number(78e-15, bounds=(0, None), inclusive_bounds=(False, True), doc="patch-sheet capacitance")
    l_henries = pm.Number(1.66e-9, bounds=(0, None), inclusive_bounds=(False, True), doc="grid-sheet inductance")
    d1_m = pm.Number(1.25e-3, bounds=(0, None), doc="spacer between a patch layer and the grid")
    d2_m = pm.Number(1.0e-3, bounds=(0, None), doc="outer cover layers")
    eps_r = pm.Number(2.4, bounds=(1, None), doc="relative permittivity of the dielectric")
    tan_delta = pm.Number(0.006, bounds=(0, None), doc="loss tangent")
    z0_ohm = pm.Number(Z0, bounds=(0, None), inclusive_bounds=(False, True), doc="termination impedance")
    freq_sweep_hz = pm.NumericTuple((1e9, 30e9, 10e6), length=3, doc="(start, stop, step) of the response grid")
    theta_deg = pm.List(default=[], item_type=(int, float), doc="oblique angles for the response command")
    pol = pm.Selector(default="both", objects=["TE", "TM", "both"], doc="polarizations of the oblique sweep")

    def stack(self, c=None, l=None):
        return reference_stack(c=self.c_farads if c is None else c, l=self.l_henries if l is None else l,
                               d1=self.d1_m, d2=self.d2_m, eps_r=self.eps_r, tan_delta=self.tan_delta, z0=self.z0_ohm)

    def freqs(self):
        return sweep(self.freq_sweep_hz)


class SynthSection(Section):
    f_lo_hz = pm.Number(7.5e9, doc="lower pass-band edge")
    f_hi_hz = pm.Number(12.5e9, doc="upper pass-band edge")
    min_passband_db = pm.Number(-3.0)
    stop_probes_hz = pm.List(default=[20e9], item_type=(int, float))
    max_stopband_db = pm.Number(-15.0)
    passband_samples = pm.Integer(21, bounds=(2, None))
    c_sweep_farads = pm.NumericTuple((40e-15, 120e-15, 2e-15), length=3, doc="(start, stop, step)")
    l_sweep_henries = pm.NumericTuple((0.5e-9, 12e-9, 0.25e-9), length=3, doc="(start, stop, step)")
    scoring = pm.Selector(default="worst", objects=["worst", "sum"])

    def target(self):
        return BandTarget(f_lo=self.f_lo_hz, f_hi=self.f_hi_hz, min_passband_db=self.min_passband_db,
                          stop_probes=list(self.stop_probes_hz), max_stopband_db=self.max_stopband_db,
                          passband_samples=self.passband_samples)


class TessellationSection(Section):
    m = pm.Integer(20, bounds=(1, None), doc="Goldberg frequency GP(m, 0)")
    layer_radii_mm = pm.List(default=list(DEFAULT_LAYER_RADII), item_type=(int, float))
    skirt_height_mm = pm.Number(25.0, bounds=(0, None))


class ArtworkSection(Section):
    override_table = pm.String(default="", doc="override table JSON; empty uses the scaling laws")
    reference_overrides = pm.Boolean(False, doc="use the shipped override table of the published cell")
    w_C_mm = pm.Number(0.25, bounds=(0, None), inclusive_bounds=(False, True))
    w_p_mm = pm.Number(0.25, bounds=(0, None), inclusive_bounds=(False, True))
    g_p_mm = pm.Number(0.38, bounds=(0, None), inclusive_bounds=(False, True))
    inductive_side_mm = pm.Number(1.51, bounds=(0, None), inclusive_bounds=(False, True))
    outer_diagonal_mm = pm.Number(2.22, bounds=(0, None), inclusive_bounds=(False, True))
    inner_diagonal_mm = pm.Number(2.13, bounds=(0, None), inclusive_bounds=(False, True))
    drc_min_width_mm = pm.Number(0.15, bounds=(0, None))
    drc_min_gap_mm = pm.Number(0.125, bounds=(0, None))
    formats = pm.List(default=["json", "svg"], item_type=str, doc="any of json, svg, mesh")

    def pentagon(self):
        return PentagonGeom(w_p=self.w_p_mm, g_p=self.g_p_mm, inductive_side=self.inductive_side_mm,
                            outer_diagonal=self.outer_diagonal_mm, inner_diagonal=self.inner_diagonal_mm)


class FeedSection(Section):
    q = pm.Number(2.0, bounds=(0, None), doc="raised-cosine exponent used by the estimator")
    horn_csv = pm.String(default="", doc="horn datasheet CSV for the feedfit command")
    literal_beamwidth = pm.Boolean(False, doc="beamwidth relation with ln of the full beamwidth")


class PostprocSection(Section):
    w0_mm = pm.Number(69.0, bounds=(0, None), inclusive_bounds=(False, True))
    spacing_wl = pm.Number(0.125, bounds=(0, 0.25), inclusive_bounds=(False, True))
    half_extent_mm = pm.Number(75.0, bounds=(0, None), inclusive_bounds=(False, True))
    gate_ns = pm.Number(0.5)
    gate_center_ns = pm.Number(None, allow_None=True, doc="empty centres the gate on the impulse peak")
    gate_shape = pm.Selector(default="hann", objects=["hann", "rect"])
    taper = pm.Number(0.25, bounds=(0, 1))

    def gaussian(self):
        return GaussianSpec(w0_mm=self.w0_mm, spacing_wl=self.spacing_wl, half_extent_mm=self.half_extent_mm)


class EstimatorSection(Section):
    shell_radius_mm = pm.Number(73.75, bounds=(0, None), inclusive_bounds=(False, True))
    skirt_height_mm = pm.Number(25.0, bounds=(0, None))
    r_probe_mm = pm.Number(60.0, bounds=(0, None), inclusive_bounds=(False, True))
    r_scan_mm = pm.Number(136.0, bounds=(0, None), inclusive_bounds=(False, True))
    theta_probe_deg = pm.List(default=[0, 15, 30, 45, 60, 75, 90], item_type=(int, float))
    theta_feed_deg = pm.Number(0.0, bounds=(0, 90))
    scan_freqs_hz = pm.List(default=[10e9, 20e9], item_type=(int, float))
    freq_sweep_hz = pm.NumericTuple((1e9, 30e9, 50e6), length=3, doc="(start, stop, step) of the boresight sweep")
    planar = pm.Boolean(False, doc="also scan the flat comparison panel")

    def shell(self, stack):
        return ShellModel(radius_mm=self.shell_radius_mm, skirt_height_mm=self.skirt_height_mm, stack=stack)

    def probes(self):
        return ProbeConfig(r_probe_mm=self.r_probe_mm, r_scan_mm=self.r_scan_mm,
                           theta_probe=[float(np.radians(t)) for t in self.theta_probe_deg],
                           theta_feed=float(np.radians(self.theta_feed_deg)))


SECTIONS = {
    "stack": StackSection,
    "synth": SynthSection,
    "tessellation": TessellationSection,
    "artwork": ArtworkSection,
    "feed": FeedSection,
    "postproc": PostprocSection,
    "estimator": EstimatorSection,
}


class ProjectConfig(pm.Parameterized):
    stack = pm.ClassSelector(class_=StackSection, default=StackSection())
    synth = pm.ClassSelector(class_=SynthSection, default=SynthSection())
    tessellation = pm.ClassSelector(class_=TessellationSection, default=TessellationSection())
    artwork = pm.ClassSelector(class_=ArtworkSection, default=ArtworkSection())
    feed = pm.ClassSelector(class_=FeedSection, default=FeedSection())
    postproc = pm.ClassSelector(class_=PostprocSection, default=PostprocSection())
    estimator = pm.ClassSelector(class_=EstimatorSection, default=EstimatorSection())
    out_dir = pm.String(default="out")

    def to_dict(self):
        document = {name: getattr(self, name).to_dict() for name in SECTIONS}
        document["out_dir"] = self.out_dir
        return document


def config_from_dict(document) -> ProjectConfig:
    if not isinstance(document, dict):
        raise DataFormatError("config must be a JSON object")
    unknown = sorted(set(document) - set(SECTIONS) - {"out_dir"})
    if unknown:
        raise DataFormatError("unknown config section(s): {}".format(", ".join(unknown)))
    sections = {}
    for name, cls in SECTIONS.items():
        values = document.get(name, {})
        if not isinstance(values, dict):
            raise DataFormatError("config section {} must be an object".format(name))
        sections[name] = cls.from_dict(values)
    out_dir = document.get("out_dir", "out")
    if not isinstance(out_dir, str):
        raise DataFormatError("out_dir must be a string")
    return ProjectConfig(out_dir=out_dir, **sections)


def load_config(path=None) -> ProjectConfig:
    """Config from a JSON file, or the defaults when ``path`` is None."""
    if path is None:
        return config_from_dict({})
    path = Path(path)
    if not path.is_file():
        raise UsageError("config file not found: {}".format(path))
    try:
        document = json.loads(path.read_text())
    except (ValueError, UnicodeDecodeError) as err:
        raise DataFormatError("cannot parse config {}: {}".format(path, err)) from err
    return config_from_dict(document)


def sidecar(command, config: ProjectConfig, inputs=None, results=None):
    """Record of one run: schema, package version, command, resolved config, inputs and summary results."""
    return {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "command": command,
        "config": config.to_dict(),
        "inputs": inputs or {},
        "results": results or {},
    }
