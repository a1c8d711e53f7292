"""
Circuit values <-> unit-cell geometry.

Covers the analytical patch/grid formulas for a hexagonal lattice, the equi-impedance scaling laws that size every
cell of the dome, extraction of sheet values from single-sheet S-parameters, and the exhaustive L/C sweep that picks
the circuit values of the band-pass stack.
"""
import numpy as np
import pandas
import param as pm
from param.parameterized import get_logger
from scipy import constants

from .base import Record
from .errors import DegenerateSheetError, DomainError, InfeasibleGeometryError, KindMismatchError
from .tmm_circuit import AbcdMatrix, SheetElement, StackSpec, _oblique_line, _shunt, cascade

logger = get_logger(name=__name__)

# Range of p2 over the three layers for which the scaling laws were validated, mm
P2_VALIDATED = (3.22, 4.76)

# Equi-impedance laws: affine in p2, mm
GAP_SLOPE, GAP_OFFSET = 0.3 / 0.8, -0.88
WIRE_SLOPE, WIRE_OFFSET = 0.2 / 0.85, -0.6

_FEASIBILITY_FLOOR = 1e-12


class UnitCellGeom(Record):
    """
    Geometry of one hexagonal unit cell, in mm.

    ``p`` is the long (vertex-to-vertex) diagonal and ``p2`` the short (across-flats) one, so p2 = (sqrt(3)/2) p. The
    square-lattice quantities used by the patch and grid formulas are derived: D_y is the across-flats pitch,
    D_x the rectangular period of the hexagonal packing, R and r the patch and aperture edge lengths.
    """
    p2 = pm.Number(4.5, bounds=(0, None), inclusive_bounds=(False, True), constant=True, doc="short diagonal, mm")
    w_L = pm.Number(0.22, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                    doc="inductive trace width, mm")
    w_C = pm.Number(0.25, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                    doc="capacitive trace width, mm")
    g = pm.Number(0.8, bounds=(0, None), inclusive_bounds=(False, True), constant=True, doc="inter-patch gap, mm")

    def _validate(self):
        if not self.g < self.p2:
            raise DomainError("gap g = {} must be smaller than p2 = {}".format(self.g, self.p2))
        if not self.w_L < self.p2:
            raise DomainError("wire width w_L = {} must be smaller than p2 = {}".format(self.w_L, self.p2))

    @property
    def p(self):
        return 2 * self.p2 / np.sqrt(3)

    @property
    def D_y(self):
        return self.p2

    @property
    def D_x(self):
        return np.sqrt(3) * self.p2

    @property
    def R(self):
        # patch edge from g = D_y - 2 R cos(60 deg)
        return self.D_y - self.g

    @property
    def r(self):
        return self.D_y - self.w_L


class MediumParams(Record):
    eps_eff = pm.Number(2.4, bounds=(1, None), constant=True,
                        doc="effective relative permittivity around the sheet (fully embedded: eps_r)")
    mu_eff = pm.Number(1.0, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                       doc="effective relative permeability")


class BandTarget(Record):
    """Design goal of the band-pass stack: a pass band to hold and a set of stop-band probes to reject."""
    f_lo = pm.Number(7.5e9, bounds=(0, None), inclusive_bounds=(False, True), constant=True, doc="lower pass edge, Hz")
    f_hi = pm.Number(12.5e9, bounds=(0, None), inclusive_bounds=(False, True), constant=True, doc="upper pass edge, Hz")
    min_passband_db = pm.Number(-3.0, constant=True, doc="minimum |S21| inside the pass band, dB")
    stop_probes = pm.List(default=[20e9], constant=True, doc="stop-band probe frequencies, Hz")
    max_stopband_db = pm.Number(-15.0, constant=True, doc="maximum |S21| at the stop-band probes, dB")
    passband_samples = pm.Integer(21, bounds=(2, None), constant=True, doc="pass-band sample count")

    def _validate(self):
        if not self.f_lo < self.f_hi:
            raise DomainError("pass band needs f_lo < f_hi")
        if not (np.isfinite(self.min_passband_db) and np.isfinite(self.max_stopband_db)):
            raise DomainError("dB bounds must be finite")
        if any(not f > 0 for f in self.stop_probes):
            raise DomainError("stop-band probes must be positive frequencies")

    def passband_grid(self):
        return np.linspace(self.f_lo, self.f_hi, self.passband_samples)


# Analytical sheet formulas (square-lattice approximations, D_y := p2)

def patch_capacitance(D_y, g, eps_eff=2.4):
    """C = eps0 eps_eff (2 D_y / pi) ln(1 / sin(pi g / 2 D_y)), lengths in mm, result in farads."""
    if not 0 < g <= D_y:
        raise DomainError("patch capacitance needs 0 < g < D_y (g = {}, D_y = {})".format(g, D_y))
    if g == D_y:
        return 0.0
    return constants.epsilon_0 * eps_eff * (2 * D_y * 1e-3 / np.pi) * np.log(1 / np.sin(np.pi * g / (2 * D_y)))


def grid_inductance(D_y, w_L, mu_eff=1.0):
    """L = mu0 mu_eff (D_y / 2 pi) ln(1 / sin(pi w_L / 2 D_y)), lengths in mm, result in henries."""
    if not 0 < w_L <= D_y:
        raise DomainError("grid inductance needs 0 < w_L < D_y (w_L = {}, D_y = {})".format(w_L, D_y))
    if w_L == D_y:
        return 0.0
    return constants.mu_0 * mu_eff * (D_y * 1e-3 / (2 * np.pi)) * np.log(1 / np.sin(np.pi * w_L / (2 * D_y)))


def sheet_reactance_from_geometry(geom: UnitCellGeom, medium: MediumParams = None):
    """(C, L) of a unit cell from the patch and grid formulas."""
    medium = medium or MediumParams()
    return (patch_capacitance(geom.D_y, geom.g, medium.eps_eff),
            grid_inductance(geom.D_y, geom.w_L, medium.mu_eff))


def reference_geometry():
    return UnitCellGeom(p2=4.5, w_L=0.22, w_C=0.25, g=0.8)


# Equi-impedance scaling laws

def in_validated_range(p2):
    return P2_VALIDATED[0] <= p2 <= P2_VALIDATED[1]


def _scaled(p2, slope, offset, what, warn):
    value = slope * p2 + offset
    if value <= _FEASIBILITY_FLOOR:
        raise InfeasibleGeometryError("{} law gives {:.4g} mm at p2 = {} mm".format(what, value, p2))
    if warn and not in_validated_range(p2):
        logger.warning("p2 = %.4f mm lies outside the validated range %s of the %s law", p2, P2_VALIDATED, what)
    return value


def gap_for_size(p2, warn=True):
    """Patch gap g = (0.3/0.8) p2 - 0.88 mm. Out-of-range p2 is allowed and logged unless ``warn`` is off."""
    return _scaled(p2, GAP_SLOPE, GAP_OFFSET, "gap", warn)


def wire_for_size(p2, warn=True):
    """
    Grid wire width w_L = (0.2/0.85) p2 - 0.6 mm.

    At p2 = 4.5 mm this gives 0.4588 mm while the published cell table lists 0.22 mm; the law is kept as printed and
    the table value is reachable through ``pattern_mapper.LawOverrides.reference``.
    """
    return _scaled(p2, WIRE_SLOPE, WIRE_OFFSET, "wire", warn)


# Sheet extraction

def extract_sheet_spectrum(s21, freqs, z_medium, kind):
    """
    Sheet values over a spectrum from the transmission of a single sheet embedded in a medium of impedance
    ``z_medium``; inverts S21 = 2 / (2 + Y Z).
    """
    if kind not in ("capacitive", "inductive"):
        raise DomainError("kind must be capacitive or inductive, got {!r}".format(kind))
    s21 = np.atleast_1d(np.asarray(s21, dtype=complex))
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if np.any(freqs <= 0):
        raise DomainError("frequencies must be positive")
    if np.any(s21 == 0) or np.any(np.abs(s21) > 1 + 1e-12):
        raise DomainError("single-sheet |S21| must lie in (0, 1]")
    omega = 2 * np.pi * freqs
    susceptance = ((2 / s21 - 2) / z_medium).imag
    if np.any(susceptance == 0):
        raise DegenerateSheetError("zero sheet admittance: C = 0 / L = infinite")
    if kind == "capacitive":
        if np.any(susceptance < 0):
            raise KindMismatchError("inductive susceptance where a capacitive sheet was requested")
        return susceptance / omega
    if np.any(susceptance > 0):
        raise KindMismatchError("capacitive susceptance where an inductive sheet was requested")
    return -1 / (omega * susceptance)


def extract_sheet_value(single_sheet_s21, f, z_medium, kind):
    return float(extract_sheet_spectrum(single_sheet_s21, f, z_medium, kind)[0])


# L/C synthesis

class SynthesisResult:
    """Ranked sweep: a DataFrame of every (C, L) point, best first, plus the overall feasibility flag."""

    def __init__(self, ranking, scoring):
        self.ranking = ranking
        self.scoring = scoring
        self.feasible = bool(ranking["feasible"].any())

    @property
    def best(self):
        row = self.ranking.iloc[0]
        return float(row["c_farads"]), float(row["l_henries"])

    def top(self, n=10):
        return self.ranking.head(n)

    def to_frame(self):
        return self.ranking[["c_farads", "l_henries", "score_db", "feasible"]]


def sweep_values(start, stop, step):
    """Inclusive arithmetic sweep from a (start, stop, step) triple."""
    if not (start > 0 and stop >= start and step > 0):
        raise DomainError("sweep range must be positive and non-empty, got ({}, {}, {})".format(start, stop, step))
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _grid_transmission_db(template, c_values, l_values, freqs):
    """|S21| in dB with shape (len(C), len(L), len(f)), every sheet of the template re-valued."""
    omega = 2 * np.pi * np.asarray(freqs, dtype=float)
    c = np.asarray(c_values, dtype=float)[:, None, None]
    l = np.asarray(l_values, dtype=float)[None, :, None]
    shape = (c.shape[0], l.shape[1], omega.shape[0])

    blocks = []
    for block in template.blocks:
        if isinstance(block, SheetElement):
            y = 1j * omega * c if block.kind == "capacitive" else 1 / (1j * omega * l)
            blocks.append(_shunt(np.broadcast_to(y, shape)))
        else:
            line = _oblique_line(block, omega, template.z0, 0.0, "TE")
            blocks.append(AbcdMatrix(*(np.broadcast_to(x, shape) for x in (line.a, line.b, line.c, line.d))))
    total = cascade(blocks) if blocks else AbcdMatrix.identity(shape)
    z0 = template.z0
    s21 = 2 / (total.a + total.b / z0 + total.c * z0 + total.d)
    return 20 * np.log10(np.abs(s21))


def score_candidates(target: BandTarget, template: StackSpec, c_values, l_values, scoring="worst"):
    """
    In-band deficit and stop-band leakage of every grid point, in dB.

    deficit = min_passband_db - worst in-band |S21|, leakage = worst stop-band |S21| - max_stopband_db; both are
    <= 0 when the requirement holds. The "worst" score is the larger of the two, "sum" their plain sum.
    """
    if scoring not in ("worst", "sum"):
        raise DomainError("scoring must be 'worst' or 'sum', got {!r}".format(scoring))
    passband = _grid_transmission_db(template, c_values, l_values, target.passband_grid())
    deficit = target.min_passband_db - passband.min(axis=-1)
    if target.stop_probes:
        stopband = _grid_transmission_db(template, c_values, l_values, sorted(target.stop_probes))
        leakage = stopband.max(axis=-1) - target.max_stopband_db
    else:
        leakage = np.full(deficit.shape, -np.inf)
    feasible = (deficit <= 0) & (leakage <= 0)
    score = np.maximum(deficit, leakage) if scoring == "worst" else deficit + leakage
    return deficit, leakage, score, feasible


def synthesize_lc(target: BandTarget, template: StackSpec, c_values, l_values, scoring="worst") -> SynthesisResult:
    """
    Exhaustive (C, L) sweep over the sheets of ``template``.

    Candidates are ranked feasible-first, then by ascending score, ties broken by C and then L. When nothing is
    feasible the ranking is still returned, with ``feasible`` False.
    """
    c_values = np.atleast_1d(np.asarray(c_values, dtype=float))
    l_values = np.atleast_1d(np.asarray(l_values, dtype=float))
    if c_values.size == 0 or l_values.size == 0:
        raise DomainError("sweep ranges must be non-empty")
    if np.any(c_values <= 0) or np.any(l_values <= 0):
        raise DomainError("sweep values must be positive")
    if not template.sheets:
        raise DomainError("stack template has no sheets to sweep")

    deficit, leakage, score, feasible = score_candidates(target, template, c_values, l_values, scoring)
    cc, ll = np.meshgrid(c_values, l_values, indexing="ij")
    ranking = pandas.DataFrame({"c_farads": cc.ravel(), "l_henries": ll.ravel(), "score_db": score.ravel(),
                                "feasible": feasible.ravel(), "deficit_db": deficit.ravel(),
                                "leakage_db": leakage.ravel()})
    ranking["infeasible"] = ~ranking["feasible"]
    ranking = ranking.sort_values(["infeasible", "score_db", "c_farads", "l_henries"], kind="mergesort")
    ranking = ranking.drop(columns="infeasible").reset_index(drop=True)

    result = SynthesisResult(ranking, scoring)
    if result.feasible:
        logger.info("%d of %d sweep points meet the band target", int(feasible.sum()), feasible.size)
    else:
        logger.warning("no sweep point meets the band target; best score %.3f dB", ranking["score_db"].iloc[0])
    return result
