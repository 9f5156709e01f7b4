"""Exception types shared across the package."""


class InputError(ValueError):
    """Bad user input: malformed files, invalid hyperparameters, shape
    mismatches. The CLI maps this to exit code 2."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge within its iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TrainingDiverged(RuntimeError):
    """A training run produced a non-finite loss. The CLI maps this to
    exit code 1."""
