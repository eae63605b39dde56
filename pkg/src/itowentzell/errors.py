"""Exception hierarchy."""


class ItoWentzellError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(ItoWentzellError, ValueError):
    pass


class IntegrabilityError(ItoWentzellError, ArithmeticError):
    """A mark integrand produced a non-finite value on the support of the mark law."""


class ContractViolationError(ItoWentzellError, ArithmeticError):
    """A coefficient evaluated to a non-finite value."""


class DivergenceError(ItoWentzellError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ScenarioError(ItoWentzellError, ValueError):
    pass


class RepresentationWarning(UserWarning):
    """Conversion requested on a spec already in the target representation."""
