"""Exception hierarchy shared by all misspec modules."""


class MisspecError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(MisspecError, ValueError):
    """Invalid or inconsistent inputs: dimension mismatches, bad config values."""


class SchemaError(MisspecError, ValueError):
    """A CSV/JSON artifact violates its documented schema.

    Carries the 1-based row number of the first offending record when known.
    """

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class SingularMomentError(MisspecError):
    """Second-moment matrix too ill-conditioned for a reliable solve."""

    def __init__(self, condition: float, limit: float):
        super().__init__(
            f"moment matrix condition number {condition:.3e} exceeds limit {limit:.3e}"
        )
        self.condition = condition
        self.limit = limit


class AssumptionError(MisspecError):
    """A quantity required by the certificate machinery is degenerate
    (e.g. a zero eigen-projection makes the threshold undefined)."""


class TrainingDivergenceError(MisspecError):
    """Training produced non-finite parameters."""

    def __init__(self, epoch: int, detail: str = ""):
        msg = f"training diverged at epoch {epoch}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.epoch = epoch
