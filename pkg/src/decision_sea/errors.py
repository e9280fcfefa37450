"""Exception hierarchy shared by every module."""


class SeaError(Exception):
    """Base class for all errors raised by :mod:`decision_sea`."""


class ParameterError(SeaError, ValueError):
    """A parameter lies outside its admissible domain (e.g. ``T <= 0``)."""


class InputError(SeaError, ValueError):
    """An input value violates its type invariants (non-finite logits, bad simplex)."""


class DataError(SeaError, ValueError):
    """A dataset is empty, unlabeled, or otherwise unusable for the request."""


class ConfigError(SeaError, ValueError):
    """Mismatched dimensions, incompatible components or unknown names."""


class ParseError(SeaError, ValueError):
    """A persisted document could not be parsed.

    ``location`` names where the failure happened (a line number for
    line-delimited files, a key path for structured documents).
    """

    def __init__(self, message, location=None, path=None):
        self.location = location
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if location is not None:
            where.append(str(location))
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
