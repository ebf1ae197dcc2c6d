"""Exception hierarchy.

Every domain failure derives from :class:`FoldyLaxError` and carries a stable
``code`` string so the command line can report it without parsing messages.
Configuration problems derive from :class:`ConfigError` instead.
"""


class FoldyLaxError(Exception):
    code = "domain_error"


class ConfigError(ValueError):
    code = "config_error"


# kernels
class CoincidentPoints(FoldyLaxError):
    code = "coincident_points"


class ZeroWavenumber(FoldyLaxError):
    code = "zero_wavenumber"


# geometry
class InvalidScaling(FoldyLaxError):
    code = "invalid_scaling"


class TooDense(FoldyLaxError):
    code = "too_dense"


class PlacementFailed(FoldyLaxError):
    code = "placement_failed"


# materials
class NonPositiveRadicand(FoldyLaxError):
    code = "non_positive_radicand"


class ComplexEta0Unsupported(FoldyLaxError):
    code = "complex_eta0_unsupported"


class SingularTensor(FoldyLaxError):
    code = "singular_tensor"


# assembly / fields
class IndexEqual(FoldyLaxError):
    code = "index_equal"


class NonTransversePolarization(FoldyLaxError):
    code = "non_transverse_polarization"


class ObservationTooClose(FoldyLaxError):
    code = "observation_too_close"


class NonUnitDirection(FoldyLaxError):
    code = "non_unit_direction"


# solver
class SingularMatrix(FoldyLaxError):
    code = "singular_matrix"


class SizeCapExceeded(FoldyLaxError):
    code = "size_cap_exceeded"


class DiagonalBlockSingular(FoldyLaxError):
    code = "diagonal_block_singular"


class NotConverged(FoldyLaxError):
    """Iteration stopped without reaching the tolerance.

    The best iterate and its report ride along on the exception.
    """

    code = "not_converged"

    def __init__(self, message, moments=None, report=None):
        super().__init__(message)
        self.moments = moments
        self.report = report


# effective medium
class SingularA(FoldyLaxError):
    code = "singular_a"


class RegimeViolation(FoldyLaxError):
    code = "regime_violation"
