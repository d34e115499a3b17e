"""Exception types raised by conedet.

Every error carries the name used in reports and by the CLI, so a failure in
a batch run can be traced back to the operation that raised it.
"""


class ConedetError(Exception):
    """Base class for all library errors."""


# surface
class LengthMismatch(ConedetError, ValueError):
    pass


class DanglingEdge(ConedetError, ValueError):
    pass


class NonOrientable(ConedetError, ValueError):
    pass


class DegenerateTriangle(ConedetError, ValueError):
    pass


class MinAngleViolation(ConedetError, ValueError):
    pass


class CutOverlap(ConedetError, ValueError):
    pass


class CutOutsideParallelogram(ConedetError, ValueError):
    pass


# conekernel
class NonpositiveTime(ConedetError, ValueError):
    pass


class NonpositiveAngle(ConedetError, ValueError):
    pass


class BoundaryPole(ConedetError, ValueError):
    """The source lies on an image boundary ``|theta - psi + k beta| = pi``."""


class TimeTooLarge(ConedetError, ValueError):
    pass


class QuadratureFailure(ConedetError, RuntimeError):
    pass


# spectral
class DensityNotIntegrable(ConedetError, ValueError):
    pass


class SolverBreakdown(ConedetError, RuntimeError):
    pass


class TruncationUncertified(ConedetError, ValueError):
    pass


class GaussBonnetViolation(ConedetError, ValueError):
    pass


class InconsistentCoefficients(ConedetError, ValueError):
    pass


# specialfn / torusmetrics
class LowerHalfPlane(ConedetError, ValueError):
    pass


class EvaluationAtConePoint(ConedetError, ValueError):
    pass


class IndexOutOfRange(ConedetError, IndexError):
    pass


class DivisorsIntersect(ConedetError, ValueError):
    pass


# command line
class UsageError(ConedetError, ValueError):
    """Malformed command-line input (exit code 2)."""
