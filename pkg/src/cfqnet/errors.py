"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid register, label, parameter or gate arguments."""


class DivergenceError(ArithmeticError):
    """A waiting-time formula was evaluated at a zero probability or efficiency."""
