"""Exception types shared across the package."""


class LmglabError(Exception):
    """Base class for all package errors."""


class ConfigError(LmglabError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class NumericalFailureError(LmglabError):
    """A numerical routine failed to converge (CLI exit code 3).

    ``stage`` names the computation that failed so batch drivers can
    report it in the run manifest.
    """

    def __init__(self, message, stage="", detail=None):
        super().__init__(message)
        self.stage = stage
        self.detail = detail


class SectorDomainError(LmglabError):
    """Requested operation lies outside its coupling-sector domain."""


class DegenerateSectorError(LmglabError):
    """Couplings sit exactly on a sector boundary (|gamma| = 1)."""
