"""
Exceptions raised by the hemifss toolchain.

Every error carries the process exit code the command line reports for it:
2 for infeasible results, 64 for usage problems, 65 for malformed data and 1
for anything else.
"""


class FssError(Exception):
    exit_code = 1


class DomainError(FssError, ValueError):
    """A value lies outside the domain of the physical model."""


class NumericError(FssError, ArithmeticError):
    """Overflow or non-finite values in a numerical kernel."""


class SingularNetworkError(FssError, ArithmeticError):
    """A two-port has no S-parameter representation at the reference impedance."""


class InfeasibleGeometryError(FssError, ValueError):
    exit_code = 2


class DegenerateSheetError(FssError, ValueError):
    """The extracted sheet admittance is zero (C = 0 or L = inf)."""


class KindMismatchError(FssError, ValueError):
    """The sign of the extracted susceptance contradicts the requested element kind."""


class KindError(FssError, TypeError):
    """An operation was given a cell or element of the wrong kind."""


class GeometryError(FssError, ValueError):
    pass


class OrientationError(FssError, ValueError):
    pass


class SymmetryError(FssError, ValueError):
    pass


class InfeasibleArtworkError(FssError, ValueError):
    exit_code = 2


class InfeasibleFitError(FssError, ValueError):
    """A feed fit relation has no non-negative solution."""
    exit_code = 2


class SamplingError(FssError, ValueError):
    pass


class AlignmentError(FssError, ValueError):
    exit_code = 65


class SingularityError(FssError, ZeroDivisionError):
    pass


class UsageError(FssError):
    exit_code = 64


class DataFormatError(FssError, ValueError):
    exit_code = 65
