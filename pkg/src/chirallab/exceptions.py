"""Exception hierarchy.

Everything raised on purpose derives from :class:`LabError`.  The CLI maps
:class:`ConfigInvalid` to exit status 2 and every other :class:`LabError` to
exit status 3.
"""


class LabError(Exception):
    """Base class for all errors raised by chirallab."""


class ConfigInvalid(LabError, ValueError):
    """Experiment configuration failed validation (raised before any compute)."""


class NumericalFailure(LabError):
    """A numerical routine could not produce a trustworthy result."""


# linalg
class RankDeficient(NumericalFailure):
    pass


class Singular(NumericalFailure):
    pass


class BadOrder(LabError, ValueError):
    pass


class NotHermitian(LabError, ValueError):
    pass


class IllConditioned(UserWarning):
    """Warning channel for solves above the conditioning threshold."""


# symplectic
class OddDimension(LabError, ValueError):
    pass


class NotSymplectic(LabError, ValueError):
    pass


class ChartDegenerate(NumericalFailure):
    pass


class DBlockSingular(NumericalFailure):
    pass


class ChartAsymmetric(NumericalFailure):
    pass


# model / transfer
class SingularHopping(NumericalFailure):
    pass


class ResampleLimit(NumericalFailure):
    pass


class WindowMismatch(LabError, ValueError):
    pass


class NotChiral(LabError, ValueError):
    pass


# lyapunov
class InsufficientSteps(NumericalFailure):
    pass


# greens
class NearSingular(NumericalFailure):
    pass


class ParityError(LabError, ValueError):
    pass


class TooFewSamples(NumericalFailure):
    pass


class EigenfailureAtFermi(NumericalFailure):
    pass


class DegenerateFit(NumericalFailure):
    pass
