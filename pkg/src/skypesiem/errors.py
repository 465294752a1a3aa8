"""Exception hierarchy shared by every subsystem."""


class SkypeSiemError(Exception):
    """Base class for all package errors."""


# capture / flows
class MalformedCapture(SkypeSiemError):
    pass


class SingletonFlow(SkypeSiemError):
    pass


# datasets
class SchemaMismatch(SkypeSiemError):
    pass


class RowParseError(SkypeSiemError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class DatasetEmpty(SkypeSiemError):
    pass


class SingleClass(SkypeSiemError):
    pass


# models
class EmptySet(SkypeSiemError):
    pass


class NonFinite(SkypeSiemError):
    pass


class UntrainedModel(SkypeSiemError):
    pass


class ModelFormatError(SkypeSiemError):
    pass


# voting / metrics
class WrongArity(SkypeSiemError):
    pass


class LengthMismatch(SkypeSiemError):
    pass


class EmptyInput(SkypeSiemError):
    pass


# probe / siem
class ProbeError(SkypeSiemError):
    pass


class ConnectionRefused(ProbeError):
    pass


class HandshakeRejected(ProbeError):
    pass


class HandshakeTimeout(ProbeError):
    pass


class InvalidAddress(SkypeSiemError, ValueError):
    pass


class MalformedHandshake(SkypeSiemError):
    pass


class NormalizationFailed(SkypeSiemError):
    pass


class OutOfRange(SkypeSiemError, ValueError):
    pass


class DirectiveError(SkypeSiemError):
    pass


class StoreFailure(SkypeSiemError):
    """Raised when the append-only store cannot persist; the server fails stop."""


class ScenarioError(SkypeSiemError):
    pass
