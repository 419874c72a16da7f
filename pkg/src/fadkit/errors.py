"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """A parameter or configuration value is outside its legal range."""


class ShapeError(ValueError):
    """Array dimensions do not line up."""


class DegenerateInputError(ValueError):
    """Structurally valid input that carries nothing to compute on."""


class ExcludedCaseError(ValueError):
    """The all-zero-metric case, which curve analysis excludes."""


class DivergenceError(ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch
