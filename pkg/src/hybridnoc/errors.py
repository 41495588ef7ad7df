"""Exception hierarchy shared across the package."""


class NocError(Exception):
    """Base class for every error raised by hybridnoc."""


class ConfigError(NocError):
    """A router, mesh, schedule or plan configuration is invalid."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        # every violation found, not just the first one
        self.problems = list(problems) if problems else [message]


class InvalidPortArithmetic(ConfigError):
    pass


class CLayerOverCap(ConfigError):
    pass


class TooManyLocalIps(ConfigError):
    pass


class DanglingIp(ConfigError):
    pass


class DuplicatePortAssignment(ConfigError):
    pass


class ClockDomainMismatch(ConfigError):
    pass


class UnknownPort(ConfigError):
    pass


class EmptySchedule(ConfigError):
    pass


class DegenerateCLayer(ConfigError):
    pass


class ScheduleParseError(ConfigError):
    pass


class UnknownIp(NocError):
    pass


class SizeOutOfRange(NocError):
    pass


class ProtocolViolation(NocError):
    pass


class ReducedPairRequest(NocError):
    """A P-layer connection was requested between two C-layer ports of one router."""


class UnservedCircuit(NocError):
    """Circuit-mode traffic names a pair that no schedule slot serves."""


class DeadlockSuspected(NocError):
    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class InsufficientData(NocError):
    pass


class NoMatchWithinTolerance(NocError):
    pass


class ParseError(ConfigError):
    """A topology or plan file is malformed or names unknown keys."""


class MissingFile(ConfigError):
    pass


class InvalidSweep(ConfigError):
    pass
