"""Exception hierarchy shared by the solver modules."""


class PrandtlLabError(Exception):
    """Base class for every error raised by this package."""


class InfeasibleProfile(PrandtlLabError):
    pass


class SingularCoefficient(PrandtlLabError):
    pass


class PathThroughSingularity(PrandtlLabError):
    pass


class TruncationTooSmall(PrandtlLabError):
    pass


class NoRootInRegion(PrandtlLabError):
    pass


class NewtonDiverged(PrandtlLabError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class JumpMismatch(PrandtlLabError):
    pass


class OutsideSector(PrandtlLabError):
    pass


class FitFailed(PrandtlLabError):
    pass


class StiffnessOverflow(PrandtlLabError):
    pass


class FarFieldDegenerate(PrandtlLabError):
    pass


class WrongBranch(PrandtlLabError):
    pass


class BranchCrossing(PrandtlLabError):
    pass


class RayMismatch(PrandtlLabError):
    pass


class CriticalLayerHit(PrandtlLabError):
    pass


class UnderResolved(PrandtlLabError):
    pass


class CFLViolation(PrandtlLabError):
    pass


class FitUnstable(PrandtlLabError):
    pass


class TraceViolation(PrandtlLabError):
    pass


class GrowthOverflow(PrandtlLabError):
    pass


class ConfigInvalid(PrandtlLabError):
    pass


class MissingGolden(PrandtlLabError):
    pass
