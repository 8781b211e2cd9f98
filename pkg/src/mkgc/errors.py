"""Exception types shared across the pipeline."""


class MkgcError(Exception):
    """Base class for all package-specific errors."""


class ParseError(MkgcError):
    """A data file could not be parsed; carries file path and line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class ConfigError(MkgcError):
    """An invalid or inconsistent configuration value."""


class NotFoundError(MkgcError):
    """An entity, relation, or resource id does not resolve."""


class ContractViolation(MkgcError):
    """A pluggable component broke its interface contract (e.g. a scorer
    returned an entity outside the remaining candidate set)."""


class TrainingDiverged(MkgcError):
    """Training produced a non-finite loss; carries the failing location."""

    def __init__(self, epoch, step, sample, value):
        super().__init__(
            f"non-finite loss {value!r} at epoch {epoch}, step {step}, sample {sample}"
        )
        self.epoch = epoch
        self.step = step
        self.sample = sample
