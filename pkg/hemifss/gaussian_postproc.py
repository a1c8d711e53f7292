"""
Post-processing of measured transmission.

A measured far field S21(theta, phi) is turned into the transmission seen by a synthetic Gaussian beam: the
Gaussian aperture g(x, y) = exp(-(x^2 + y^2) / w0^2) is back-projected to its far field FF_G and the measurement is
weighted by FF_G over solid angle. Proportionality constants are left out; results are meant to be normalized by
a calibration measurement without the sample. Swept traces can also be time gated around their direct path.
"""
import numpy as np
import pandas
import param as pm
from param.parameterized import get_logger
from scipy import constants
from scipy.signal import windows

from .base import Record
from .errors import DataFormatError, DomainError, SamplingError, UsageError
from .tables import read_csv

logger = get_logger(name=__name__)

FARFIELD_COLUMNS = ["freq_hz", "theta_deg", "phi_deg", "re_s21", "im_s21"]
SWEEP_COLUMNS = ["freq_hz", "re_s21", "im_s21"]


def _wavenumber_per_mm(f):
    return 2 * np.pi * f / constants.c * 1e-3


class GaussianSpec(Record):
    w0_mm = pm.Number(69.0, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                      doc="beam waist radius, mm")
    spacing_wl = pm.Number(1 / 8, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                           doc="aperture grid spacing as a fraction of the wavelength")
    half_extent_mm = pm.Number(75.0, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                               doc="radius of the sampled aperture, mm")

    def _validate(self):
        if self.spacing_wl > 0.25:
            raise SamplingError("aperture spacing {} wavelengths exceeds 1/4".format(self.spacing_wl))


class GaussianAperture:
    """Samples of g on a square grid clipped to a disc: flat arrays ``x``, ``y`` (mm) and ``g``."""

    def __init__(self, x, y, g, spacing_mm, f):
        self.x = x
        self.y = y
        self.g = g
        self.spacing_mm = spacing_mm
        self.f = f

    def __len__(self):
        return len(self.g)


class FarFieldGrid(Record):
    """Complex far-field samples, ``values[f, theta, phi]``, on a theta/phi grid in radians."""
    freq_hz = pm.Array(np.array([10e9]), constant=True, doc="frequencies, Hz")
    theta = pm.Array(np.array([0.0]), constant=True, doc="polar angles, rad, within [0, pi/2]")
    phi = pm.Array(np.array([0.0]), constant=True, doc="azimuths, rad, within [0, 2 pi)")
    values = pm.Array(np.ones((1, 1, 1), dtype=complex), constant=True, doc="S21 samples, shape (f, theta, phi)")

    def _validate(self):
        for name in ("theta", "phi"):
            grid = getattr(self, name)
            if grid.ndim != 1 or len(grid) == 0 or np.any(np.diff(grid) <= 0):
                raise DomainError("{} grid must be non-empty and strictly increasing".format(name))
        if self.theta[0] < 0 or self.theta[-1] > np.pi / 2 + 1e-12:
            raise DomainError("theta must lie in [0, pi/2]")
        if self.phi[0] < 0 or self.phi[-1] >= 2 * np.pi:
            raise DomainError("phi must lie in [0, 2 pi)")
        if self.values.shape != (len(self.freq_hz), len(self.theta), len(self.phi)):
            raise DomainError("values have shape {}, grid is {}".format(
                self.values.shape, (len(self.freq_hz), len(self.theta), len(self.phi))))
        if not np.all(np.isfinite(self.values)):
            raise DomainError("far-field values must be finite")

    def same_grid(self, other):
        return (self.theta.shape == other.theta.shape and self.phi.shape == other.phi.shape
                and np.allclose(self.theta, other.theta) and np.allclose(self.phi, other.phi))


class SweepTrace(Record):
    freq_hz = pm.Array(np.linspace(1e9, 2e9, 16), constant=True, doc="uniform frequency grid, Hz")
    s21 = pm.Array(np.ones(16, dtype=complex), constant=True, doc="complex S21 samples")

    def _validate(self):
        if len(self.freq_hz) != len(self.s21):
            raise DomainError("frequency and S21 arrays differ in length")
        if len(self.freq_hz) < 16:
            raise SamplingError("a sweep needs at least 16 points, got {}".format(len(self.freq_hz)))
        steps = np.diff(self.freq_hz)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-6 * steps.mean():
            raise SamplingError("frequency grid must be uniform and increasing")

    @property
    def step(self):
        return float(self.freq_hz[1] - self.freq_hz[0])

    def db(self):
        return 20 * np.log10(np.abs(self.s21))

    def to_frame(self):
        return pandas.DataFrame({"freq_hz": self.freq_hz, "re_s21": self.s21.real, "im_s21": self.s21.imag})


# Gaussian aperture and its far field

def gaussian_aperture(spec: GaussianSpec, f) -> GaussianAperture:
    """
    g sampled every ``spacing_wl`` wavelengths out to min(3 w0, half_extent) from the origin.
    """
    if spec.spacing_wl > 0.25:
        raise SamplingError("aperture spacing {} wavelengths exceeds 1/4".format(spec.spacing_wl))
    if not f > 0:
        raise DomainError("frequency must be positive")
    spacing = spec.spacing_wl * constants.c / f * 1e3
    extent = min(3 * spec.w0_mm, spec.half_extent_mm)
    n = int(np.floor(extent / spacing))
    axis = spacing * np.arange(-n, n + 1)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    inside = x ** 2 + y ** 2 <= extent ** 2 * (1 + 1e-12)
    x, y = x[inside], y[inside]
    g = np.exp(-(x ** 2 + y ** 2) / spec.w0_mm ** 2)
    return GaussianAperture(x, y, g, spacing, f)


def contained_fraction(a, w0):
    """Share of the |g|^2 power of a Gaussian aperture inside radius ``a``."""
    if not (a >= 0 and w0 > 0):
        raise DomainError("need a >= 0 and w0 > 0")
    return 1 - np.exp(-2 * a ** 2 / w0 ** 2)


def waist_for_containment(sample_radius, fraction):
    """w0 such that ``fraction`` of the |g|^2 power falls inside ``sample_radius``."""
    if not 0 < fraction < 1:
        raise DomainError("fraction must lie in (0, 1)")
    if not sample_radius > 0:
        raise DomainError("sample radius must be positive")
    return sample_radius * np.sqrt(-2 / np.log(1 - fraction))


def backproject_farfield(aperture, theta, phi, f):
    """
    FF(theta, phi) = sum_xy g(x, y) exp(+jk sin(theta) (x cos(phi) + y sin(phi))), shape (theta, phi).

    ``aperture`` is a GaussianAperture or any object with flat ``x``, ``y`` (mm) and ``g`` arrays.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    x, y, g = (np.asarray(v, dtype=float).ravel() for v in (aperture.x, aperture.y, aperture.g))
    if theta.size == 0 or phi.size == 0 or g.size == 0:
        raise UsageError("back-projection needs non-empty aperture and angle grids")
    k = _wavenumber_per_mm(f)
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)
    out = np.empty((theta.size, phi.size), dtype=complex)
    for i, s in enumerate(np.sin(theta)):
        phase = k * s * (np.outer(cos_phi, x) + np.outer(sin_phi, y))
        out[i] = np.exp(1j * phase) @ g
    return out


def gaussian_farfield(spec: GaussianSpec, theta, phi, freqs) -> FarFieldGrid:
    """FF_G of the Gaussian aperture at every frequency, on one theta/phi grid."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    values = np.stack([backproject_farfield(gaussian_aperture(spec, f), theta, phi, f) for f in freqs])
    return FarFieldGrid(freq_hz=freqs, theta=np.asarray(theta, dtype=float), phi=np.asarray(phi, dtype=float),
                        values=values)


def gaussian_weighting(meas: FarFieldGrid, ffg) -> np.ndarray:
    """
    S21 seen by the synthetic beam: sum over the grid of S21_meas(theta, phi) FF_G(theta, phi) sin(theta), one
    complex value per frequency.

    ``ffg`` is a FarFieldGrid on the same angles (one frequency, or as many as ``meas``) or a plain array shaped
    (theta, phi) or (f, theta, phi).
    """
    if isinstance(ffg, FarFieldGrid):
        if not meas.same_grid(ffg):
            raise UsageError("measured and Gaussian far fields are on different angle grids")
        if len(ffg.freq_hz) not in (1, len(meas.freq_hz)):
            raise UsageError("Gaussian far field has {} frequencies, measurement {}".format(
                len(ffg.freq_hz), len(meas.freq_hz)))
        ffg = ffg.values
    ffg = np.asarray(ffg)
    if ffg.shape[-2:] != meas.values.shape[-2:] or ffg.ndim not in (2, 3):
        raise UsageError("far-field grids differ: {} vs {}".format(ffg.shape, meas.values.shape))
    weight = np.sin(meas.theta)[:, None]
    return np.sum(meas.values * ffg * weight, axis=(-2, -1))


def normalize_calibration(with_sample, without_sample):
    """
    20 log10(|with| / |without|) per frequency and a mask of frequencies where the calibration is zero (their dB
    value is NaN).
    """
    with_sample = np.atleast_1d(np.asarray(with_sample))
    without_sample = np.atleast_1d(np.asarray(without_sample))
    if with_sample.shape != without_sample.shape:
        raise UsageError("sample and calibration spectra differ in length")
    flagged = np.abs(without_sample) == 0
    ratio = np.abs(with_sample) / np.where(flagged, 1, np.abs(without_sample))
    with np.errstate(divide="ignore"):
        db = np.where(flagged, np.nan, 20 * np.log10(ratio))
    if flagged.any():
        logger.warning("calibration is zero at %d frequencies; normalized values set to NaN", int(flagged.sum()))
    return db, flagged


# Time gating

def time_gate(trace: SweepTrace, window_ns=0.5, center_ns=None, shape="hann", taper=0.25) -> SweepTrace:
    """
    Keep the part of the impulse response within ``window_ns`` around its peak (or around ``center_ns``).

    The sweep is tapered (Tukey) to soften the band edges, transformed with 4x zero padding, gated with a Hann or
    rectangular window on the circular time axis, transformed back and un-tapered. Samples where the taper
    vanishes are returned gated but not un-tapered.
    """
    if shape not in ("hann", "rect"):
        raise UsageError("gate shape must be hann or rect, got {!r}".format(shape))
    span = 1 / trace.step
    window = window_ns * 1e-9
    if not 0 < window < span:
        raise UsageError("gate of {} ns must be positive and shorter than the unambiguous range {:.4g} ns"
                         .format(window_ns, span * 1e9))

    n = len(trace.freq_hz)
    weights = windows.tukey(n, taper)
    impulse = np.fft.ifft(trace.s21 * weights, n=4 * n)
    t = np.arange(4 * n) * span / (4 * n)
    center = t[np.argmax(np.abs(impulse))] if center_ns is None else center_ns * 1e-9
    offset = (t - center + span / 2) % span - span / 2
    inside = np.abs(offset) <= window / 2
    gate = np.where(inside, np.cos(np.pi * offset / window) ** 2, 0.0) if shape == "hann" else inside.astype(float)

    gated = np.fft.fft(impulse * gate)[:n]
    usable = weights > 1e-6
    gated[usable] /= weights[usable]
    logger.info("gated %d samples with a %.3g ns %s window at %.4g ns", n, window_ns, shape, center * 1e9)
    return SweepTrace(freq_hz=trace.freq_hz.copy(), s21=gated)


# Readers

def read_sweep_csv(path) -> SweepTrace:
    df = read_csv(path, SWEEP_COLUMNS)
    return SweepTrace(freq_hz=df["freq_hz"].to_numpy(dtype=float),
                      s21=df["re_s21"].to_numpy(dtype=float) + 1j * df["im_s21"].to_numpy(dtype=float))


def read_farfield_csv(path) -> FarFieldGrid:
    """
    Dense far-field table ``freq_hz, theta_deg, phi_deg, re_s21, im_s21``. Every frequency must carry the full
    theta x phi grid.
    """
    df = read_csv(path, FARFIELD_COLUMNS).sort_values(["freq_hz", "theta_deg", "phi_deg"], kind="mergesort")
    freqs = np.unique(df["freq_hz"].to_numpy(dtype=float))
    thetas = np.unique(df["theta_deg"].to_numpy(dtype=float))
    phis = np.unique(df["phi_deg"].to_numpy(dtype=float))
    if len(df) != len(freqs) * len(thetas) * len(phis):
        raise DataFormatError("{}: {} rows do not fill a {}x{}x{} grid".format(
            path, len(df), len(freqs), len(thetas), len(phis)))
    values = (df["re_s21"].to_numpy(dtype=float) + 1j * df["im_s21"].to_numpy(dtype=float))
    try:
        return FarFieldGrid(freq_hz=freqs, theta=np.radians(thetas), phi=np.radians(phis),
                            values=values.reshape(len(freqs), len(thetas), len(phis)))
    except DomainError as err:
        raise DataFormatError("{}: {}".format(path, err)) from err
