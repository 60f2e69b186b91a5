"""Exception types raised across the package."""


class FloquetLabError(Exception):
    """Base class for all computation errors."""


class ConfigError(FloquetLabError):
    pass


# operator model
class NotElliptic(FloquetLabError):
    pass


class AsymmetricA(FloquetLabError):
    pass


class ResolutionMismatch(FloquetLabError):
    pass


class NonFiniteInput(FloquetLabError):
    pass


class AliasingRisk(UserWarning):
    """Truncation order below twice the coefficient bandwidth."""


# bands
class EigSolverFailure(FloquetLabError):
    pass


class BranchTrackingAmbiguous(FloquetLabError):
    pass


class NonIsolatedZeroSet(FloquetLabError):
    pass


class MultiplicityAboveOne(FloquetLabError):
    pass


class NoisyExpansion(FloquetLabError):
    pass


# positive spectrum
class NoPositiveEigenvector(FloquetLabError):
    pass


class ComplexPrincipalEigenvalue(FloquetLabError):
    pass


class AscentStalled(FloquetLabError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class HessianNotNegativeDefinite(FloquetLabError):
    pass


class PreconditionUnmet(FloquetLabError):
    pass


# polynomials
class NotHomogeneous(FloquetLabError):
    pass


class ZeroPolynomial(FloquetLabError):
    pass


class SeedNotHarmonic(FloquetLabError):
    pass


class ResidualTooLarge(FloquetLabError):
    pass


# cell problems
class CNotZero(FloquetLabError):
    pass


class AdjointKernelEmpty(FloquetLabError):
    pass


class CompatibilityFailed(FloquetLabError):
    def __init__(self, message, alpha=None):
        super().__init__(message)
        self.alpha = alpha


class TraceConditionViolated(FloquetLabError):
    pass


class CellCompatibilityFailed(FloquetLabError):
    pass


class RecursionResidual(FloquetLabError):
    pass


class NotQHarmonic(FloquetLabError):
    pass


class TruncationInsufficient(FloquetLabError):
    pass


# liouville engine
class InconsistencyDetected(FloquetLabError):
    def __init__(self, message, diff=None):
        super().__init__(message)
        self.diff = diff or {}


class XiNotOnLevelSet(FloquetLabError):
    pass


class EmptyMeasure(FloquetLabError):
    pass


class SupportTooLarge(FloquetLabError):
    pass
