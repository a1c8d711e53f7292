"""
Raised-cosine feed and fitting its exponent to horn data.

The feed radiates E = E0 cos^q(theta) e^{-jkr} / r into the forward half space, polarized along x on boresight.
Its directivity is D = 2 (2q + 1), so q can be matched to a horn either through the gain or through the 3 dB
beamwidth; the fit averages both.
"""
import numpy as np
import pandas
import param as pm
from param.parameterized import get_logger
from scipy import constants, integrate

from .base import Record
from .errors import AlignmentError, DomainError, InfeasibleFitError, SingularityError
from .tables import read_csv

logger = get_logger(name=__name__)

HORN_COLUMNS = ["freq_hz", "gain_dbi", "beamwidth_deg"]


class FeedSpec(Record):
    q = pm.Number(2.0, bounds=(0, None), constant=True, doc="pattern exponent of cos^q(theta)")
    E0 = pm.Number(1.0, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                   doc="field amplitude scale, V")
    pointing = pm.NumericTuple((0.0, 0.0, 1.0), length=3, constant=True, doc="boresight unit vector")

    def _validate(self):
        if abs(np.linalg.norm(self.pointing) - 1) > 1e-12:
            raise DomainError("pointing {} is not a unit vector".format(self.pointing))

    def frame(self):
        return feed_frame(self.pointing)


class HornData(Record):
    """Datasheet curves of a horn: gain and full 3 dB beamwidth over frequency."""
    freq_hz = pm.Array(np.array([10e9]), constant=True, doc="frequencies, Hz")
    gain_dbi = pm.Array(np.array([10.0]), constant=True, doc="gain, dBi")
    beamwidth_deg = pm.Array(np.array([67.0]), constant=True, doc="full 3 dB beamwidth, degrees")

    def _validate(self):
        lengths = {len(self.freq_hz), len(self.gain_dbi), len(self.beamwidth_deg)}
        if len(lengths) != 1:
            raise AlignmentError("horn columns have different lengths: {}".format(sorted(lengths)))
        if not np.all(np.isfinite(self.gain_dbi)):
            raise DomainError("horn gains must be finite")
        if np.any(self.beamwidth_deg <= 0) or np.any(self.beamwidth_deg >= 180):
            raise DomainError("beamwidths must lie in (0, 180) degrees")


def feed_frame(pointing):
    """
    Rotation taking the feed's local axes to global ones: the smallest rotation carrying +z onto ``pointing``.
    """
    z = np.array([0.0, 0.0, 1.0])
    p = np.asarray(pointing, dtype=float)
    axis = np.cross(z, p)
    s, c = np.linalg.norm(axis), np.dot(z, p)
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    k = axis / s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * K + (1 - c) * K @ K


def polarization(theta, phi):
    """Unit vector theta_hat cos(phi) - phi_hat sin(phi) in the feed frame, shape (..., 3)."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    theta_hat = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)], axis=-1)
    phi_hat = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=-1)
    return theta_hat * np.cos(phi)[..., None] - phi_hat * np.sin(phi)[..., None]


def pattern(q, theta):
    """cos^q(theta) in front of the feed, zero behind it."""
    theta = np.asarray(theta, dtype=float)
    return np.where(theta <= np.pi / 2, np.abs(np.cos(np.minimum(theta, np.pi / 2))) ** q, 0.0)


def raised_cosine_field(spec: FeedSpec, f, point):
    """
    Complex field vector(s) at feed-frame spherical coordinates ``point = (r, theta, phi)``, r in metres.
    Returned in global axes, shape (..., 3).
    """
    r, theta, phi = (np.asarray(x, dtype=float) for x in point)
    if np.any(r <= 0):
        raise SingularityError("the feed field is singular at r = 0")
    k = 2 * np.pi * f / constants.c
    amplitude = spec.E0 * pattern(spec.q, theta) * np.exp(-1j * k * r) / r
    return (amplitude[..., None] * polarization(theta, phi)) @ spec.frame().T


def directivity_numeric(q):
    """D = 2 / int_0^{pi/2} cos^{2q} sin dtheta by adaptive quadrature."""
    if q < 0:
        raise DomainError("q must be non-negative")
    integral, _ = integrate.quad(lambda t: np.cos(t) ** (2 * q) * np.sin(t), 0, np.pi / 2, epsabs=1e-13,
                                 epsrel=1e-12)
    return 2 / integral


def directivity(q):
    return 2 * (2 * q + 1)


def q_from_directivity(D_linear):
    """q = D/4 - 1/2, the inverse of D = 2 (2q + 1)."""
    if not D_linear >= 2:
        raise InfeasibleFitError("directivity {:.4g} is below 2 (q would be negative)".format(D_linear))
    return D_linear / 4 - 0.5


def q_from_beamwidth(theta_bw_deg, literal=False):
    """
    q from the full 3 dB beamwidth: q = -0.15 / log10(cos(theta_bw / 2)).

    ``literal`` evaluates the relation with the natural log of the full beamwidth instead,
    q = -0.15 / ln(cos(theta_bw)), for comparison.
    """
    theta_bw = np.radians(theta_bw_deg)
    if literal:
        if not 0 < theta_bw < np.pi / 2:
            raise DomainError("the literal relation needs 0 < theta_bw < 90 degrees, got {}".format(theta_bw_deg))
        return -0.15 / np.log(np.cos(theta_bw))
    if not 0 < theta_bw / 2 < np.pi / 2:
        raise DomainError("half beamwidth must lie in (0, 90) degrees, got {}".format(theta_bw_deg / 2))
    return -0.15 / np.log10(np.cos(theta_bw / 2))


def half_power_beamwidth(q):
    """Full 3 dB beamwidth in degrees of the cos^q field pattern."""
    if not q > 0:
        raise DomainError("a cos^q pattern needs q > 0 for a finite beamwidth")
    return 2 * np.degrees(np.arccos(2 ** (-1 / (2 * q))))


def cos_q_horn(q, freqs) -> HornData:
    """Horn curves generated from an exact cos^q pattern, the same at every frequency."""
    freqs = np.asarray(freqs, dtype=float)
    return HornData(freq_hz=freqs, gain_dbi=np.full(freqs.shape, 10 * np.log10(directivity(q))),
                    beamwidth_deg=np.full(freqs.shape, half_power_beamwidth(q)))


def fit_q(horn: HornData, literal=False) -> pandas.DataFrame:
    """
    q(f) matched to gain and to beamwidth, and their average.

    A frequency where one relation has no solution is flagged and q_avg falls back to the other relation.
    """
    rows = []
    for f, gain, bw in zip(horn.freq_hz, horn.gain_dbi, horn.beamwidth_deg):
        try:
            q_dir = q_from_directivity(10 ** (gain / 10))
        except InfeasibleFitError:
            q_dir = np.nan
        try:
            q_bw = q_from_beamwidth(bw, literal)
        except DomainError:
            q_bw = np.nan
        valid = [q for q in (q_dir, q_bw) if np.isfinite(q)]
        rows.append((f, q_dir, q_bw, np.mean(valid) if valid else np.nan, len(valid) < 2))

    table = pandas.DataFrame(rows, columns=["freq_hz", "q_dir", "q_bw", "q_avg", "flagged"])
    if table["flagged"].any():
        logger.warning("q fit flagged at %d of %d frequencies", int(table["flagged"].sum()), len(table))
    return table


def read_horn_csv(path) -> HornData:
    """Horn datasheet CSV with columns freq_hz, gain_dbi, beamwidth_deg."""
    df = read_csv(path, HORN_COLUMNS)
    if df[HORN_COLUMNS].isna().any().any():
        raise AlignmentError("{}: horn columns are not aligned (missing samples)".format(path))
    return HornData(**{column: df[column].to_numpy(dtype=float) for column in HORN_COLUMNS})
