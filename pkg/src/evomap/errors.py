"""Exception types shared across the package."""


class EvomapError(Exception):
    """Base class for all evomap errors."""


class ParseError(EvomapError):
    """A document failed to parse; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(EvomapError):
    """An ontology violated a structural invariant."""


class MatchError(EvomapError):
    """A match mapping refers to unknown concepts or is malformed."""


class MigrationError(EvomapError):
    """A diff mapping is inconsistent with the version it is applied to."""


class LineageError(EvomapError):
    """Lineage information is missing or inconsistent."""


class SynthesisError(EvomapError):
    """Synthetic generation parameters are infeasible."""


class RepoError(EvomapError):
    """Working-repository failure (missing entry, hash mismatch, ...)."""
