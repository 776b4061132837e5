"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`ProbeNoiseError`, which is itself a :class:`ValueError` so callers
that only care about "bad input" can catch that.
"""


class ProbeNoiseError(ValueError):
    pass


class DimensionMismatch(ProbeNoiseError):
    pass


class NotHermitian(ProbeNoiseError):
    pass


class NotPSD(ProbeNoiseError):
    pass


class NotIsometry(ProbeNoiseError):
    pass


class NotUnitary(ProbeNoiseError):
    pass


class InvalidPovm(ProbeNoiseError):
    pass


class EffectNotPSD(InvalidPovm):
    def __init__(self, index, min_eigenvalue):
        super().__init__(f"effect {index} has eigenvalue {min_eigenvalue:.3e} < 0")
        self.index = index
        self.min_eigenvalue = min_eigenvalue


class SumNotIdentity(InvalidPovm):
    def __init__(self, deviation):
        super().__init__(f"effects sum to identity only within {deviation:.3e}")
        self.deviation = deviation


class InvalidJoint(ProbeNoiseError):
    pass


class InvalidDensityMatrix(ProbeNoiseError):
    pass


class LevelOutOfRange(ProbeNoiseError):
    pass


class PhysicalNeedsTwoPlusOutcomes(ProbeNoiseError):
    pass


class NotQubit(ProbeNoiseError):
    pass


class NotUnbiased(ProbeNoiseError):
    pass


class NonUnitaryParam(ProbeNoiseError):
    pass


class BadParameter(ProbeNoiseError):
    pass


class NotMember(ProbeNoiseError):
    pass


class PovmParseError(ProbeNoiseError):
    pass


class BadProblem(ProbeNoiseError):
    """Raised at SDP assembly when the constraints are rank deficient."""


class SolverFailure(ProbeNoiseError):
    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution
