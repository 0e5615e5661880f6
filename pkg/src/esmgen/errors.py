"""Exception types raised across the package."""


class EsmgenError(Exception):
    """Base class for all errors raised by esmgen."""


class GraphError(EsmgenError):
    pass


class DuplicateLabel(GraphError):
    pass


class SystemFrozen(GraphError):
    pass


class UnknownNode(GraphError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class BipartitenessViolation(GraphError):
    pass


class SourceHasInflow(GraphError):
    pass


class SinkHasOutflow(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class EmptySystem(GraphError):
    pass


class InvalidFlow(GraphError, ValueError):
    pass


class ValidationFailed(GraphError):
    """Raised by `freeze` when the system has violations.

    The violations are kept on the exception so callers can report them.
    """

    def __init__(self, violations, locations=None):
        self.violations = list(violations)
        self.locations = locations or {}
        lines = []
        for v in self.violations:
            loc = self.locations.get(v.entity)
            prefix = f"{loc}: " if loc else ""
            lines.append(f"{prefix}{v}")
        super().__init__("; ".join(lines) or "validation failed")


class ModelError(EsmgenError):
    pass


class NotABus(ModelError):
    pass


class StorageDegree(ModelError):
    pass


class MissingNominal(ModelError):
    pass


class UnknownVariable(ModelError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class SolverError(EsmgenError):
    pass


class NumericalError(SolverError):
    """The solver claimed optimality but the point violates a row."""


class NotOptimal(EsmgenError):
    pass


class LPFormatError(EsmgenError, ValueError):
    pass


class ParseError(EsmgenError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        self.message = message
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class IoFailure(EsmgenError, OSError):
    pass
