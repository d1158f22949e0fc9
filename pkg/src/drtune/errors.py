"""Exception hierarchy shared across the package."""


class DrTuneError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DrTuneError, ValueError):
    """A value violates a documented precondition (bad bounds, shapes, ...)."""


class IngestionError(DrTuneError):
    """Tabular input could not be parsed; carries row/column position."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        if row is not None:
            where = f" (row {row}" + (f", column {column})" if column is not None else ")")
            message = message + where
        super().__init__(message)


class ConfigError(DrTuneError):
    """Invalid run configuration; message names the offending field path."""


class EngineError(DrTuneError):
    """A DR engine invocation failed; carries captured stderr when external."""

    def __init__(self, message, stderr=""):
        self.stderr = stderr
        if stderr:
            message = message + f"\n--- engine stderr ---\n{stderr.rstrip()}"
        super().__init__(message)


class DivergenceError(DrTuneError):
    """Embedding optimization produced non-finite coordinates."""

    def __init__(self, iteration):
        self.iteration = iteration
        super().__init__(f"optimization diverged (non-finite coordinates at iteration {iteration})")


class FitError(DrTuneError):
    """Surrogate fitting failed (e.g. Cholesky breakdown after jitter escalation)."""


class RunAborted(DrTuneError):
    """A tuning run was aborted; carries the failing trial index."""

    def __init__(self, trial, message):
        self.trial = trial
        super().__init__(f"trial {trial}: {message}")
