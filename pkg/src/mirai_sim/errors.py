"""Exception hierarchy shared by every part of the simulator."""


class SimError(Exception):
    pass


# sim-core
class EmptyAddressPool(SimError):
    pass


class HorizonExceeded(SimError):
    pass


# lifecycle
class TargetUnreachable(SimError):
    pass


class NoReportServer(SimError):
    pass


class WordlistError(SimError):
    pass


# flood
class InvalidSpec(SimError):
    pass


# telemetry
class SeriesLengthMismatch(SimError):
    pass


class UnorderedRecords(SimError):
    pass


# analysis
class ZeroBaseline(SimError):
    pass


class InsufficientScenarios(SimError):
    pass


class SingularSystem(SimError):
    pass


class IncompleteTable(SimError):
    pass


class EmptySeries(SimError):
    pass


# config
class ConfigError(SimError):
    pass


class UnknownKey(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass


class RangeViolation(ConfigError):
    pass
