"""Exception hierarchy shared by the whole pipeline.

The CLI maps these onto stable exit codes: ConfigError -> 2, I/O failures
-> 3, validation (including format and shape problems) -> 4.
"""


class BaryflowError(Exception):
    """Base class for all errors raised by baryflow."""


class ConfigError(BaryflowError):
    """Scene config document violates the schema.

    ``path`` is a JSON-path-like string locating the offending key.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class InputIOError(BaryflowError):
    """A referenced file is missing, unreadable, or unwritable."""


class ValidationError(BaryflowError):
    """A constructed entity breaches one of its invariants."""


class FormatError(ValidationError):
    """File content is syntactically or structurally malformed."""


class ShapeError(ValidationError):
    """Image dimensions disagree; message names the offending input."""


class TrackNotFoundError(BaryflowError, KeyError):
    """Requested animation track does not exist on the timeline."""

    def __str__(self):  # KeyError quotes its repr; keep the message readable
        return self.args[0] if self.args else ""
