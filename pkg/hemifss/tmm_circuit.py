"""
Transfer-matrix model of the cascaded capacitive-inductive-capacitive sheet stack.

Each metal layer is a shunt admittance, each dielectric spacer a transmission line section; the unit cell is the
left-to-right product of their ABCD matrices, terminated on both sides by free space. Every kernel here broadcasts
over a frequency array, so a whole spectrum is one cascade of 2x2 element-wise products.

Time convention is e^{+jwt}: a forward wave carries the phase e^{-j beta d}.
"""
import numpy as np
import pandas
import param as pm
from param.parameterized import get_logger
from scipy import constants

from .base import Record
from .errors import DomainError, NumericError, SingularNetworkError

Z0 = 120 * np.pi  # free-space termination, ohms
C0 = constants.c

logger = get_logger(name=__name__)


class AbcdMatrix:
    """
    Transfer matrix [[a, b], [c, d]] of a two-port, with [V1, I1] = T [V2, I2].

    ``b`` is in ohms, ``c`` in siemens. Entries are complex numpy arrays that share one shape (a scalar matrix has
    shape ``()``, a spectrum has the shape of its frequency grid). Treat instances as immutable.
    """

    def __init__(self, a, b, c, d):
        self.a, self.b, self.c, self.d = np.broadcast_arrays(*(np.asarray(x, dtype=complex) for x in (a, b, c, d)))

    @classmethod
    def identity(cls, shape=()):
        return cls(np.ones(shape), np.zeros(shape), np.zeros(shape), np.ones(shape))

    @property
    def shape(self):
        return self.a.shape

    def __matmul__(self, other):
        return AbcdMatrix(self.a * other.a + self.b * other.c,
                          self.a * other.b + self.b * other.d,
                          self.c * other.a + self.d * other.c,
                          self.c * other.b + self.d * other.d)

    def det(self):
        return self.a * self.d - self.b * self.c

    def as_array(self):
        """Stacked matrices with shape ``(..., 2, 2)``."""
        return np.stack([np.stack([self.a, self.b], axis=-1), np.stack([self.c, self.d], axis=-1)], axis=-2)

    def __repr__(self):
        return "AbcdMatrix(a={}, b={}, c={}, d={})".format(self.a, self.b, self.c, self.d)


class SheetElement(Record):
    """
    A patterned metal sheet reduced to a lumped shunt element: patches are a capacitor, a wire grid an inductor.
    """
    kind = pm.Selector(default="capacitive", objects=["capacitive", "inductive"], constant=True,
                       doc="capacitive patch layer or inductive grid layer")
    value = pm.Number(1e-15, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                      doc="capacitance in farads or inductance in henries")

    def admittance(self, omega):
        if self.kind == "capacitive":
            return 1j * omega * self.value
        return 1 / (1j * omega * self.value)


class DielectricLayer(Record):
    thickness = pm.Number(1e-3, bounds=(0, None), constant=True, doc="layer thickness in meters")
    eps_r = pm.Number(2.4, bounds=(1, None), constant=True, doc="relative permittivity (real part)")
    loss_tangent = pm.Number(0.0, bounds=(0, None), constant=True, doc="dielectric loss tangent")

    @property
    def complex_permittivity(self):
        return self.eps_r * (1 - 1j * self.loss_tangent)

    def wave_impedance(self, z0=Z0):
        return z0 / np.sqrt(self.complex_permittivity)

    def propagation_constant(self, omega):
        return omega / C0 * np.sqrt(self.complex_permittivity)


class StackSpec(Record):
    """
    Ordered block list of the filter, port 1 first.

    The unit cell of the dome is d2, C, d1, L, d1, C, d2 (see ``reference_stack``). The conductivity of the metal is
    carried along for reports; the circuit model ignores conductor loss.
    """
    blocks = pm.List(default=[], constant=True, doc="SheetElement and DielectricLayer blocks in port-1-to-port-2 order")
    z0 = pm.Number(Z0, bounds=(0, None), inclusive_bounds=(False, True), constant=True,
                   doc="termination wave impedance in ohms")
    conductivity = pm.Number(1e6, bounds=(0, None), constant=True, doc="metal conductivity in S/m (metadata only)")

    def _validate(self):
        for block in self.blocks:
            if not isinstance(block, (SheetElement, DielectricLayer)):
                raise DomainError("stack blocks must be SheetElement or DielectricLayer, got {!r}".format(block))

    @property
    def symmetric(self):
        return all(_same_block(x, y) for x, y in zip(self.blocks, reversed(self.blocks)))

    @property
    def sheets(self):
        return [block for block in self.blocks if isinstance(block, SheetElement)]

    def reversed(self):
        return StackSpec(blocks=list(reversed(self.blocks)), z0=self.z0, conductivity=self.conductivity)


def _same_block(x, y):
    if type(x) is not type(y):
        return False
    if isinstance(x, SheetElement):
        return x.kind == y.kind and x.value == y.value
    return (x.thickness, x.eps_r, x.loss_tangent) == (y.thickness, y.eps_r, y.loss_tangent)


class SparamSpectrum:
    """
    S-parameters of a stack over a frequency grid.

    For symmetric stacks ``s22`` is the very array stored as ``s11`` and ``s12`` is ``s21``.
    """

    def __init__(self, freqs, s11, s21, s22=None, s12=None, symmetric=False, reciprocal=True):
        self.freqs = np.asarray(freqs, dtype=float)
        self.s11 = np.asarray(s11, dtype=complex)
        self.s21 = np.asarray(s21, dtype=complex)
        self.symmetric = symmetric
        self.reciprocal = reciprocal
        if symmetric:
            self.s22 = self.s11
            self.s12 = self.s21
        else:
            self.s22 = np.asarray(s22, dtype=complex)
            self.s12 = np.asarray(s12, dtype=complex)

    def s21_db(self):
        return 20 * np.log10(np.abs(self.s21))

    def s11_db(self):
        return 20 * np.log10(np.abs(self.s11))

    def to_frame(self):
        return pandas.DataFrame({"freq_hz": self.freqs,
                                 "re_s11": self.s11.real, "im_s11": self.s11.imag,
                                 "re_s21": self.s21.real, "im_s21": self.s21.imag})

    @classmethod
    def from_frame(cls, df):
        """Inverse of ``to_frame``; port 2 is taken as the mirror of port 1."""
        return cls(df["freq_hz"].to_numpy(dtype=float),
                   df["re_s11"].to_numpy(dtype=float) + 1j * df["im_s11"].to_numpy(dtype=float),
                   df["re_s21"].to_numpy(dtype=float) + 1j * df["im_s21"].to_numpy(dtype=float),
                   symmetric=True)

    def __len__(self):
        return len(self.freqs)


# Building blocks

def _positive(f):
    f = np.asarray(f, dtype=float)
    if not np.all(f > 0):
        raise DomainError("frequencies must be positive")
    return f


def _frequency_grid(freqs):
    freqs = _positive(np.atleast_1d(freqs))
    if freqs.ndim != 1:
        raise DomainError("frequency grid must be one-dimensional")
    if np.any(np.diff(freqs) <= 0):
        raise DomainError("frequency grid must be strictly increasing")
    return freqs


def _shunt(y):
    y = np.asarray(y, dtype=complex)
    return AbcdMatrix(np.ones(y.shape), np.zeros(y.shape), y, np.ones(y.shape))


def _line(beta_d, z_wave):
    cos, sin = np.cos(beta_d), np.sin(beta_d)
    return AbcdMatrix(cos, 1j * z_wave * sin, 1j * sin / z_wave, cos)


def _oblique_line(layer, omega, z0, sin2, pol):
    """Line section seen by a plane wave whose free-space incidence angle has sin^2 = ``sin2``."""
    eps = layer.complex_permittivity
    n_z = np.sqrt(eps - sin2)  # k_z / k0 after refraction
    cos_t = n_z / np.sqrt(eps)
    z_d = z0 / np.sqrt(eps)
    z_wave = z_d / cos_t if pol == "TE" else z_d * cos_t
    return _line(omega / C0 * n_z * layer.thickness, z_wave)


def shunt_sheet_abcd(element: SheetElement, f) -> AbcdMatrix:
    """[[1, 0], [Y, 1]] with Y = jwC for capacitive sheets and Y = 1/(jwL) for inductive ones."""
    omega = 2 * np.pi * _positive(f)
    return _shunt(element.admittance(omega))


def dielectric_line_abcd(layer: DielectricLayer, f, z0=Z0) -> AbcdMatrix:
    omega = 2 * np.pi * _positive(f)
    beta_d = layer.propagation_constant(omega) * layer.thickness
    return _line(beta_d, layer.wave_impedance(z0))


def cascade(blocks) -> AbcdMatrix:
    """Left-to-right product T = T_1 T_2 ... T_n."""
    blocks = list(blocks)
    if not blocks:
        raise DomainError("cascade needs at least one block")
    total = blocks[0]
    for block in blocks[1:]:
        total = total @ block
    if not all(np.all(np.isfinite(x)) for x in (total.a, total.b, total.c, total.d)):
        raise NumericError("cascade overflowed")
    return total


def _denominator(T, z0):
    if not np.all(np.real(z0) > 0):
        raise DomainError("reference impedance must be positive")
    den = T.a + T.b / z0 + T.c * z0 + T.d
    if np.any(den == 0) or not np.all(np.isfinite(den)):
        raise SingularNetworkError("network has no S-parameters at this reference impedance")
    return den


def abcd_to_sparams(T: AbcdMatrix, z0=Z0):
    """
    (S11, S21) of a two-port terminated in ``z0`` on both sides.

    The reference impedance is the free-space termination of the unit cell, not the wave impedance of the embedding
    dielectric.
    """
    den = _denominator(T, z0)
    s11 = (T.a + T.b / z0 - T.c * z0 - T.d) / den
    s21 = 2 / den
    return s11, s21


def _port2_sparams(T, z0):
    den = _denominator(T, z0)
    s22 = (-T.a + T.b / z0 - T.c * z0 + T.d) / den
    s12 = 2 * T.det() / den
    return s22, s12


def _response(stack, freqs, theta, pol):
    freqs = _frequency_grid(freqs)
    omega = 2 * np.pi * freqs
    sin2 = np.sin(theta) ** 2
    cos = np.cos(theta)

    blocks = []
    for block in stack.blocks:
        if isinstance(block, SheetElement):
            blocks.append(_shunt(block.admittance(omega)))
        else:
            blocks.append(_oblique_line(block, omega, stack.z0, sin2, pol))
    total = cascade(blocks) if blocks else AbcdMatrix.identity(freqs.shape)

    z_ref = stack.z0 / cos if pol == "TE" else stack.z0 * cos
    s11, s21 = abcd_to_sparams(total, z_ref)
    if stack.symmetric:
        return SparamSpectrum(freqs, s11, s21, symmetric=True)
    s22, s12 = _port2_sparams(total, z_ref)
    return SparamSpectrum(freqs, s11, s21, s22, s12)


def stack_response(stack: StackSpec, freqs) -> SparamSpectrum:
    return _response(stack, freqs, 0.0, "TE")


def stack_response_oblique(stack: StackSpec, freqs, theta: float, pol: str) -> SparamSpectrum:
    """
    Response to a plane wave incident at ``theta`` radians.

    Wave impedances become Z/cos(theta) for TE and Z cos(theta) for TM, in free space and, after Snell refraction, in
    each dielectric; the line phase uses the longitudinal wavenumber. The sheets keep their normal-incidence
    admittance. At theta = 0 this is exactly ``stack_response``.
    """
    pol = str(pol).upper()
    if pol not in ("TE", "TM"):
        raise DomainError("polarization must be TE or TM, got {!r}".format(pol))
    if not 0 <= theta < np.pi / 2:
        raise DomainError("incidence angle must lie in [0, pi/2), got {}".format(theta))
    return _response(stack, freqs, float(theta), pol)


def passband_edges(spectrum: SparamSpectrum, level_db=-3.0):
    """
    Frequencies where |S21| crosses ``level_db`` on either side of its maximum, interpolated linearly in dB.

    An edge that never crosses inside the grid is NaN.
    """
    db = spectrum.s21_db()
    f = spectrum.freqs
    peak = int(np.argmax(db))
    if db[peak] < level_db:
        return float("nan"), float("nan")

    def crossing(i, j):
        return float(f[i] + (level_db - db[i]) * (f[j] - f[i]) / (db[j] - db[i]))

    lo = hi = float("nan")
    below = np.nonzero(db[:peak] < level_db)[0]
    if len(below):
        i = below[-1]
        lo = crossing(i, i + 1)
    below = np.nonzero(db[peak:] < level_db)[0]
    if len(below):
        j = peak + below[0]
        hi = crossing(j - 1, j)
    return lo, hi


# Presets

def reference_stack(c=78e-15, l=1.66e-9, d1=1.25e-3, d2=1.0e-3, eps_r=2.4, tan_delta=0.006, z0=Z0, conductivity=1e6):
    """The dome's unit cell: d2, C, d1, L, d1, C, d2 with the selected circuit values."""
    outer = DielectricLayer(thickness=d2, eps_r=eps_r, loss_tangent=tan_delta)
    inner = DielectricLayer(thickness=d1, eps_r=eps_r, loss_tangent=tan_delta)
    cap = SheetElement(kind="capacitive", value=c)
    ind = SheetElement(kind="inductive", value=l)
    return StackSpec(blocks=[outer, cap, inner, ind, inner, cap, outer], z0=z0, conductivity=conductivity)


def sweep_examples(tan_delta=0.0):
    """The three L/C variants of the sweep study, keyed by label."""
    return {
        "C45fF_L1.66nH": reference_stack(c=45e-15, l=1.66e-9, tan_delta=tan_delta),
        "C78fF_L1.66nH": reference_stack(c=78e-15, l=1.66e-9, tan_delta=tan_delta),
        "C78fF_L10nH": reference_stack(c=78e-15, l=10e-9, tan_delta=tan_delta),
    }


def default_frequency_grid(f_min=1e9, f_max=30e9, step=10e6):
    if not 0 < f_min < f_max or step <= 0:
        raise DomainError("frequency grid needs 0 < f_min < f_max and a positive step")
    n = int(round((f_max - f_min) / step)) + 1
    return f_min + step * np.arange(n)
