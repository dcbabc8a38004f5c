"""Exception hierarchy shared by all omgstore modules."""


class OmgError(Exception):
    """Base class for every error raised by omgstore."""


class ConfigError(OmgError):
    """Invalid user-supplied configuration (maps to CLI exit code 2)."""


class InfeasibleStorage(ConfigError):
    def __init__(self, inequality: str, detail: str = ""):
        self.inequality = inequality
        msg = f"storage violates {inequality}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NonFrequentActing(ConfigError):
    pass


class NonConvexCost(ConfigError):
    pass


class UnboundedSubgradient(ConfigError):
    pass


class EmptyInterval(OmgError):
    pass


class DegenerateSlope(OmgError):
    pass


class NumericalFailure(OmgError):
    pass


class NotIrreducible(ConfigError):
    pass


class RampViolation(OmgError):
    pass


class InfeasibleStep(OmgError):
    pass


class FeasibilityViolation(OmgError):
    def __init__(self, policy: str, t: int, level: float):
        self.policy = policy
        self.t = t
        self.level = level
        super().__init__(f"{policy}: storage level {level!r} out of bounds at t={t}")


class ZeroBaseline(OmgError):
    pass


class MismatchedSeeds(OmgError):
    pass


class TraceError(ConfigError):
    """Base for CSV trace problems; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(TraceError):
    pass


class GapError(TraceError):
    pass


class NonMonotoneTime(TraceError):
    pass


class MissingColumn(TraceError):
    pass
