"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class DegenerateGameError(ParameterError):
    """The utility table has ties that make a hardness term undefined."""


class NumericError(ArithmeticError):
    """A factorization or solve failed even after jitter escalation."""


class InfeasibleError(ParameterError):
    """No parameter in the searched range yields a usable bound."""
