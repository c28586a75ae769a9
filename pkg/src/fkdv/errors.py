"""Exception hierarchy shared by the numerical modules."""


class FKdVError(Exception):
    """Base class for all numerical failures raised by this package."""


class NonConvergedQuadrature(FKdVError):
    pass


class SingularEvaluation(FKdVError):
    pass


class MethodUnavailable(FKdVError):
    pass


class NewtonDiverged(FKdVError):
    pass


class ConstraintInfeasible(FKdVError):
    pass


class BranchStalled(FKdVError):
    pass


class NoConvergenceInP(FKdVError):
    pass


class TailNotSettled(FKdVError):
    pass


class InvalidSpeed(FKdVError):
    pass


class InsufficientResolution(FKdVError):
    pass
