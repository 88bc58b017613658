"""Exception and warning types shared across the package."""


class ParameterError(ValueError):
    """An argument is out of its documented range or has the wrong shape."""


class UnsupportedError(NotImplementedError):
    """The requested operation has no implementation for this input kind."""


class NumericError(ArithmeticError):
    """A non-finite value showed up in an objective or Jacobian evaluation."""


class ConfigError(ValueError):
    """A run configuration failed validation.

    ``path`` names the offending key (dotted), when one applies.
    """

    def __init__(self, path: str | None, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ConvergenceWarning(RuntimeWarning):
    """An inner iterative routine stopped on its budget, not its tolerance."""


class DegenerateInputWarning(RuntimeWarning):
    """A projection received an input where it is undefined and fell back."""
