"""Exception types shared across the toolkit."""


class NotPositiveDefiniteError(ArithmeticError):
    """Cholesky factorization failed at a non-positive pivot.

    ``pivot`` is the 0-based index of the failing diagonal entry.
    """

    def __init__(self, pivot: int):
        self.pivot = pivot
        super().__init__(f"matrix is not positive definite (pivot {pivot})")


class SingularUpdateError(ArithmeticError):
    """A rank-one update denominator 1 + v'u fell below tolerance.

    The analysis system matrix is positive definite for valid inputs, so
    hitting this usually means the inputs are corrupted. ``level`` is the
    1-based ensemble column that produced the near-zero denominator.
    """

    def __init__(self, level: int, denominator: float):
        self.level = level
        self.denominator = denominator
        super().__init__(
            f"rank-one update {level} is numerically singular "
            f"(1 + v'u = {denominator:.3e})"
        )


class NumericalFailureError(ArithmeticError):
    """An iterative numerical routine failed to converge."""


class DivergenceError(ArithmeticError):
    """Model state blew up during time integration.

    ``member`` is the 0-based ensemble column that diverged, or None when
    a single trajectory was being advanced.
    """

    def __init__(self, message: str, member: int | None = None):
        self.member = member
        if member is not None:
            message = f"{message} (ensemble member {member})"
        super().__init__(message)


class ConfigError(ValueError):
    """Invalid experiment configuration."""
