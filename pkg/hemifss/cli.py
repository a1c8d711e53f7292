"""
Batch pipeline: ``python -m hemifss <command> [--config PATH] [--out DIR] ...``.

Every command writes its tables into the output directory together with ``<command>_run.json``, the resolved
configuration and a summary of the results. Exit codes: 0 success, 2 infeasible result, 64 usage error,
65 malformed input, 1 any other failure.
"""
import argparse
from pathlib import Path

import numpy as np
import pandas
import param
from param.parameterized import get_logger

from .artwork_export import EXTENSIONS, export
from .config import load_config, sidecar, sweep
from .element_synth import sweep_values, synthesize_lc
from .errors import FssError, UsageError
from .feed_model import FeedSpec, fit_q, read_horn_csv
from .gaussian_postproc import (gaussian_farfield, gaussian_weighting, normalize_calibration, read_farfield_csv,
                                read_sweep_csv, time_gate)
from .goldberg_tess import layer_tessellations, serialize_tessellation, tessellation_stats
from .pattern_mapper import LAYER_IDS, LawOverrides, build_layer, drc_check
from .radome_estimator import PlanarModel, boresight_transmission, planar_scanned_field, scanned_field
from .tables import write_csv, write_json
from .tmm_circuit import passband_edges, stack_response, stack_response_oblique

logger = get_logger(name=__name__)

FORMAT_NAMES = {"json": "geometry-json", "svg": "svg-preview", "mesh": "triangle-mesh"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out_dir(config):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(out, command, config, outputs, inputs=None, results=None):
    results = dict(results or {})
    results["outputs"] = sorted(Path(p).name for p in outputs)
    write_json(sidecar(command, config, inputs, results), out / "{}_run.json".format(command))
    for path in outputs:
        logger.info("wrote %s", path)


def _frequency_flags(args, current):
    if args.freq_min is None and args.freq_max is None and args.freq_step is None:
        return current
    start, stop, step = current
    return (args.freq_min if args.freq_min is not None else start,
            args.freq_max if args.freq_max is not None else stop,
            args.freq_step if args.freq_step is not None else step)


# Commands

def cmd_synth(args, config):
    section = config.synth
    if args.scoring:
        section.scoring = args.scoring
    result = synthesize_lc(section.target(), config.stack.stack(), sweep_values(*section.c_sweep_farads),
                           sweep_values(*section.l_sweep_henries), section.scoring)
    out = _out_dir(config)
    path = write_csv(result.to_frame(), out / "synth_sweep.csv", "synth")
    c, l = result.best
    _finish(out, "synth", config, [path], results={
        "feasible": result.feasible, "c_farads": c, "l_henries": l,
        "score_db": float(result.ranking["score_db"].iloc[0])})
    if not result.feasible:
        logger.warning("no candidate meets the band target")
        return 2
    return 0


def cmd_response(args, config):
    section = config.stack
    section.freq_sweep_hz = _frequency_flags(args, section.freq_sweep_hz)
    if args.theta:
        section.theta_deg = list(args.theta)
    if args.pol:
        section.pol = args.pol
    stack, freqs = section.stack(), section.freqs()

    spectrum = stack_response(stack, freqs)
    frame = spectrum.to_frame()
    frame["s11_db"] = spectrum.s11_db()
    frame["s21_db"] = spectrum.s21_db()
    out = _out_dir(config)
    outputs = [write_csv(frame, out / "response.csv", "response")]
    f_lo, f_hi = passband_edges(spectrum)

    if section.theta_deg:
        pols = ["TE", "TM"] if section.pol == "both" else [section.pol]
        frames = []
        for theta in section.theta_deg:
            for pol in pols:
                oblique = stack_response_oblique(stack, freqs, np.radians(theta), pol)
                frames.append(pandas.DataFrame({"freq_hz": freqs, "theta_deg": float(theta), "pol": pol,
                                                "re_s21": oblique.s21.real, "im_s21": oblique.s21.imag,
                                                "s21_db": oblique.s21_db()}))
        outputs.append(write_csv(pandas.concat(frames, ignore_index=True), out / "response_oblique.csv",
                                 "response-oblique"))
    _finish(out, "response", config, outputs, results={"f_lo_hz": f_lo, "f_hi_hz": f_hi})
    return 0


def cmd_tessellate(args, config):
    section = config.tessellation
    layers = layer_tessellations(section.layer_radii_mm, section.m, section.skirt_height_mm)
    out = _out_dir(config)
    outputs, summaries, histograms = [], [], []
    for tess in layers:
        path = out / "tessellation_r{:.2f}mm.json".format(tess.radius)
        path.write_bytes(serialize_tessellation(tess))
        outputs.append(path)
        summary, histogram = tessellation_stats(tess)
        summaries.append(summary)
        histograms.append(histogram)
    outputs.append(write_csv(pandas.concat(histograms, ignore_index=True), out / "tessellation_p2_histogram.csv",
                             "p2-histogram"))
    _finish(out, "tessellate", config, outputs, results={"layers": summaries})
    return 0


def _overrides(section):
    if section.override_table:
        return LawOverrides.from_json(Path(section.override_table))
    if section.reference_overrides:
        return LawOverrides.reference()
    return None


def cmd_artwork(args, config):
    section = config.artwork
    if args.override_table:
        section.override_table = args.override_table
    if args.format:
        section.formats = list(dict.fromkeys(args.format))
    unknown = [f for f in section.formats if f not in FORMAT_NAMES]
    if unknown:
        raise UsageError("unknown artwork format(s): {}".format(", ".join(unknown)))

    tess_section = config.tessellation
    if len(tess_section.layer_radii_mm) != len(LAYER_IDS):
        raise UsageError("artwork needs exactly {} layer radii".format(len(LAYER_IDS)))
    layers = layer_tessellations(tess_section.layer_radii_mm, tess_section.m, tess_section.skirt_height_mm)
    overrides = _overrides(section)
    artworks = [build_layer(tess, layer_id, overrides, section.pentagon(), section.w_C_mm)
                for tess, layer_id in zip(layers, LAYER_IDS)]

    out = _out_dir(config)
    outputs, reports = [], []
    for artwork in artworks:
        report = drc_check(artwork, section.drc_min_width_mm, section.drc_min_gap_mm)
        table = report.violations.copy()
        table.insert(0, "layer_id", artwork.layer_id)
        reports.append(table)
    drc = pandas.concat(reports, ignore_index=True)
    outputs.append(write_csv(drc, out / "drc.csv", "drc"))

    for name in section.formats:
        fmt = FORMAT_NAMES[name]
        if fmt == "svg-preview":
            for artwork in artworks:
                path = out / "artwork_{}.{}".format(artwork.layer_id, EXTENSIONS[fmt])
                path.write_bytes(export([artwork], fmt))
                outputs.append(path)
        else:
            path = out / "artwork.{}".format(EXTENSIONS[fmt])
            path.write_bytes(export(artworks, fmt))
            outputs.append(path)

    _finish(out, "artwork", config, outputs, results={
        "traces": {a.layer_id: len(a.traces) for a in artworks},
        "drc_violations": int(len(drc)),
        "overrides": overrides.to_json() if overrides else None})
    return 0


def cmd_feedfit(args, config):
    section = config.feed
    if args.horn:
        section.horn_csv = args.horn
    if args.literal_beamwidth:
        section.literal_beamwidth = True
    if not section.horn_csv:
        raise UsageError("feedfit needs a horn CSV (argument or feed.horn_csv)")
    table = fit_q(read_horn_csv(section.horn_csv), section.literal_beamwidth)
    out = _out_dir(config)
    path = write_csv(table, out / "feed_q.csv", "feed-q")
    _finish(out, "feedfit", config, [path], inputs={"horn_csv": section.horn_csv},
            results={"flagged": int(table["flagged"].sum()), "q_avg_mean": float(table["q_avg"].mean())})
    return 0


def cmd_gaussproc(args, config):
    section = config.postproc
    if args.w0_mm is not None:
        section.w0_mm = args.w0_mm
    meas = read_farfield_csv(args.farfield)
    ffg = gaussian_farfield(section.gaussian(), meas.theta, meas.phi, meas.freq_hz)
    s21 = gaussian_weighting(meas, ffg)
    table = pandas.DataFrame({"freq_hz": meas.freq_hz, "re_s21": s21.real, "im_s21": s21.imag,
                              "s21_db": 20 * np.log10(np.abs(s21))})
    inputs = {"farfield": str(args.farfield)}
    if args.calibration:
        calibration = read_farfield_csv(args.calibration)
        if calibration.freq_hz.shape != meas.freq_hz.shape or not np.allclose(calibration.freq_hz, meas.freq_hz):
            raise UsageError("calibration and sample far fields have different frequencies")
        norm_db, flagged = normalize_calibration(s21, gaussian_weighting(calibration, ffg))
        table["norm_db"] = norm_db
        table["flagged"] = flagged
        inputs["calibration"] = str(args.calibration)

    out = _out_dir(config)
    path = write_csv(table, out / "{}_gaussian.csv".format(Path(args.farfield).stem), "gaussian")
    _finish(out, "gaussproc", config, [path], inputs=inputs)
    return 0


def cmd_timegate(args, config):
    section = config.postproc
    if args.gate_ns is not None:
        section.gate_ns = args.gate_ns
    if args.shape:
        section.gate_shape = args.shape
    if args.center_ns is not None:
        section.gate_center_ns = args.center_ns
    trace = read_sweep_csv(args.trace)
    gated = time_gate(trace, section.gate_ns, section.gate_center_ns, section.gate_shape, section.taper)
    table = gated.to_frame()
    table["s21_db"] = gated.db()
    table["s21_db_ungated"] = trace.db()
    out = _out_dir(config)
    path = write_csv(table, out / "{}_gated.csv".format(Path(args.trace).stem), "gated")
    _finish(out, "timegate", config, [path], inputs={"trace": str(args.trace)})
    return 0


def cmd_estimate(args, config):
    section = config.estimator
    section.freq_sweep_hz = _frequency_flags(args, section.freq_sweep_hz)
    stack = config.stack.stack()
    shell = section.shell(stack)
    probes = section.probes()
    feed = FeedSpec(q=config.feed.q)

    out = _out_dir(config)
    boresight = boresight_transmission(shell, feed, sweep(section.freq_sweep_hz), probes)
    outputs = [write_csv(boresight, out / "estimate_boresight.csv", "estimate")]
    scan = pandas.concat([scanned_field(shell, feed, probes, f) for f in section.scan_freqs_hz], ignore_index=True)
    outputs.append(write_csv(scan, out / "estimate_scan.csv", "estimate-scan"))
    if section.planar:
        planar = PlanarModel(stack=stack)
        table = pandas.concat([planar_scanned_field(planar, feed, probes, f) for f in section.scan_freqs_hz],
                              ignore_index=True)
        outputs.append(write_csv(table, out / "estimate_planar.csv", "estimate-planar"))
    _finish(out, "estimate", config, outputs, results={"direct_path_rays": int(scan["direct_path"].sum())})
    return 0


# Parser

def _add_frequency_flags(parser):
    parser.add_argument("--freq-min", type=float, default=None, help="first frequency, Hz")
    parser.add_argument("--freq-max", type=float, default=None, help="last frequency, Hz")
    parser.add_argument("--freq-step", type=float, default=None, help="frequency step, Hz")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="project config JSON")
    common.add_argument("--out", default=None, help="output directory (overrides out_dir)")
    common.add_argument("--verbose", action="store_true", help="log progress")

    parser = _Parser(prog="hemifss", description="Design pipeline for a hemispherical band-pass FSS")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("synth", parents=[common], help="sweep sheet C and L against the band target")
    sub.add_argument("--scoring", choices=["worst", "sum"], default=None)
    sub.set_defaults(handler=cmd_synth)

    sub = commands.add_parser("response", parents=[common], help="S-parameters of the unit-cell stack")
    _add_frequency_flags(sub)
    sub.add_argument("--theta", type=float, action="append", help="oblique incidence angle, degrees (repeatable)")
    sub.add_argument("--pol", choices=["TE", "TM", "both"], default=None)
    sub.set_defaults(handler=cmd_response)

    sub = commands.add_parser("tessellate", parents=[common], help="Goldberg tessellation of every layer")
    sub.set_defaults(handler=cmd_tessellate)

    sub = commands.add_parser("artwork", parents=[common], help="layer artwork, exports and design-rule report")
    sub.add_argument("--override-table", default=None, help="override table JSON")
    sub.add_argument("--format", choices=sorted(FORMAT_NAMES), action="append", help="export format (repeatable)")
    sub.set_defaults(handler=cmd_artwork)

    sub = commands.add_parser("feedfit", parents=[common], help="fit q(f) to horn gain and beamwidth")
    sub.add_argument("horn", nargs="?", default=None, help="horn CSV: freq_hz, gain_dbi, beamwidth_deg")
    sub.add_argument("--literal-a9", "--literal-beamwidth", dest="literal_beamwidth", action="store_true",
                     help="natural-log, full-beamwidth relation")
    sub.set_defaults(handler=cmd_feedfit)

    sub = commands.add_parser("gaussproc", parents=[common], help="Gaussian-beam weighting of a measured far field")
    sub.add_argument("farfield", help="far-field CSV: freq_hz, theta_deg, phi_deg, re_s21, im_s21")
    sub.add_argument("--calibration", default=None, help="far field measured without the sample")
    sub.add_argument("--w0-mm", type=float, default=None, help="beam waist radius, mm")
    sub.set_defaults(handler=cmd_gaussproc)

    sub = commands.add_parser("timegate", parents=[common], help="time gate a swept S21 trace")
    sub.add_argument("trace", help="sweep CSV: freq_hz, re_s21, im_s21")
    sub.add_argument("--gate-ns", type=float, default=None, help="gate width, ns")
    sub.add_argument("--center-ns", type=float, default=None, help="gate centre, ns (default: impulse peak)")
    sub.add_argument("--shape", choices=["hann", "rect"], default=None)
    sub.set_defaults(handler=cmd_timegate)

    sub = commands.add_parser("estimate", parents=[common], help="ray estimate of the dome's transmission")
    _add_frequency_flags(sub)
    sub.set_defaults(handler=cmd_estimate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as err:
        logger.error("%s", err)
        return err.exit_code

    with param.parameterized.logging_level("INFO" if args.verbose else "WARNING"):
        try:
            config = load_config(args.config)
            if args.out:
                config.out_dir = args.out
            return args.handler(args, config)
        except FssError as err:
            logger.error("%s", err)
            return err.exit_code
