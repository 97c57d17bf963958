"""Exception and warning types.

Every error carries an ``exit_code`` used by the command-line interface:
2 configuration, 3 missing input, 4 solver failure, 5 accuracy failure.
"""


class PulseSpecError(Exception):
    exit_code = 4


class ConfigError(PulseSpecError):
    exit_code = 2


class MissingInputError(PulseSpecError):
    exit_code = 3


class SolverError(PulseSpecError):
    exit_code = 4


class AccuracyError(PulseSpecError):
    exit_code = 5


class DomainError(SolverError):
    """Evaluation requested outside the declared domain box."""

    def __init__(self, message, coordinate=None, value=None):
        super().__init__(message)
        self.coordinate = coordinate
        self.value = value


class EvaluationError(SolverError):
    """A model evaluator returned non-finite values."""


class AssumptionViolation(SolverError):
    """A structural hypothesis (hyperbolicity, symmetry, ...) fails."""


class NotHyperbolicError(AssumptionViolation):
    """An asymptotic matrix has spectrum too close to the imaginary axis."""


class NoHomoclinicError(SolverError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoConnectingOrbitError(SolverError):
    pass


class GluingError(SolverError):
    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class ShootingError(SolverError):
    def __init__(self, message, residual=None, hint=None):
        super().__init__(message if hint is None else f"{message} ({hint})")
        self.residual = residual
        self.hint = hint


class StiffnessError(SolverError):
    pass


class ConditioningError(SolverError):
    pass


class RejectionError(SolverError):
    """Pasting of half-line dichotomies refused: subspaces nearly intersect."""

    def __init__(self, message, opening=None):
        super().__init__(message)
        self.opening = opening


class PoleProximityError(RejectionError):
    pass


class ContractionError(SolverError):
    def __init__(self, message, ratio=None):
        super().__init__(message)
        self.ratio = ratio


class ContourDegeneracyError(SolverError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class UnresolvedClusterError(SolverError):
    def __init__(self, message, boxes=None):
        super().__init__(message)
        self.boxes = boxes or []


class UnsupportedMultiplicityError(SolverError):
    pass


class SingularIntegrandError(SolverError):
    """Quadrature integrand with a vanishing denominator."""


class DegenerateSegmentWarning(UserWarning):
    pass


class WeakCouplingWarning(UserWarning):
    pass
