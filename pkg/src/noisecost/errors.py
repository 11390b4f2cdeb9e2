"""Exception hierarchy.

Validation problems subclass :class:`ValidationError` (a ``ValueError``) and
map to CLI exit code 2; numerical failures subclass :class:`NumericalError`
and map to exit code 3.
"""


class ValidationError(ValueError):
    """An input violates a documented invariant."""


class NumericalError(ArithmeticError):
    """A numerical routine could not deliver a trustworthy answer."""


class InvalidDistribution(ValidationError):
    pass


class InvalidCost(ValidationError):
    pass


class WidthExceedsBound(ValidationError):
    pass


class UnassignedState(ValidationError):
    pass


class IncompatibleExperiments(ValidationError):
    pass


class EmptyMassRegion(ValidationError):
    pass


class ZeroMarginal(ValidationError):
    pass


class ScenarioError(ValidationError):
    pass


class QuadratureNonConvergence(NumericalError):
    pass


class NonLipschitzSignal(NumericalError):
    pass


class NegativeWeight(NumericalError):
    pass
