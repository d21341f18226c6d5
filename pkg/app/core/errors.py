class HamiltimeError(Exception):
    pass


class ConfigError(HamiltimeError, ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class DomainError(HamiltimeError, ValueError):
    """Numerically or physically invalid request (CLI exit code 3)."""


class DimensionMismatchError(DomainError):
    pass


class NotHermitianError(DomainError):
    pass


class NormalizationError(DomainError):
    pass


class IndistinguishableError(DomainError):
    def __init__(self, detail: str = ""):
        message = "indistinguishable Hamiltonians"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class UnsupportedPriorsError(DomainError):
    def __init__(self, p1: float, p2: float):
        super().__init__(f"unsupported: equal priors only (got p1={p1}, p2={p2})")
