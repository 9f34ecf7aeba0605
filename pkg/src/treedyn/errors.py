"""Exception hierarchy shared by all modules."""


class TreeDynError(Exception):
    """Base class for every error raised by treedyn."""


class InputError(TreeDynError, ValueError):
    """Invalid user-supplied data (ids, offsets, parameters)."""


class TreeStructureError(InputError):
    """Vertex/edge data that does not describe a finite metric tree."""


class PartitionError(InputError):
    """Piece domains on an edge do not partition the edge."""


class ParseError(InputError):
    """Malformed map-definition text. Carries the offending line number."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class PreconditionError(TreeDynError, ValueError):
    """An operation was called outside its documented domain."""

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class ConsistencyError(TreeDynError, RuntimeError):
    """Internal invariant violated; indicates a bug or corrupted data."""
