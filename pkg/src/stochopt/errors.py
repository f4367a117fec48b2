"""Exception types raised across the package."""


class DimensionError(ValueError):
    """An array does not conform to the shape an operator or function expects."""


class CapabilityError(TypeError):
    """A function was asked for something it cannot provide (e.g. a gradient of a norm)."""


class ConfigurationError(ValueError):
    """Invalid or incomplete configuration of a sampler, algorithm or experiment."""


class DomainError(ValueError):
    """A point lies outside the domain of a function."""


class NumericalError(ArithmeticError):
    """A computed quantity is non-finite or violates a positivity requirement."""


class CallbackError(RuntimeError):
    """A user callback raised; ``iteration`` records where the run stopped."""

    def __init__(self, iteration, original):
        super().__init__(f"callback failed at iteration {iteration}: {original!r}")
        self.iteration = iteration
        self.original = original
