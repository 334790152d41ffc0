"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for configuration and
precondition problems, 3 for algorithmic failures, 4 for numeric breakdown.
"""


class MountPassError(Exception):
    exit_code = 3


class ConfigError(MountPassError):
    exit_code = 2


class NonFinite(MountPassError, ArithmeticError):
    exit_code = 4


class EndpointMismatch(MountPassError, ValueError):
    exit_code = 2


class GammaOutOfRange(MountPassError, ValueError):
    exit_code = 2


class EpsOutOfRange(ConfigError, ValueError):
    pass


class BadDimension(ConfigError, ValueError):
    pass


class InvalidEndpoints(MountPassError, ValueError):
    exit_code = 2


class InvalidAtlas(ConfigError, ValueError):
    pass


class ContractibleLoop(MountPassError, ValueError):
    """The loop handed to the loop bisection has zero homotopy invariant."""

    exit_code = 2


class BracketDegenerate(MountPassError):
    pass


class BudgetExhausted(MountPassError):
    pass


class SeparationFailed(MountPassError):
    pass


class LevelNotReached(MountPassError):
    pass


class NotInBasin(MountPassError):
    pass


class OracleInconsistent(MountPassError):
    pass


class MissingRun(MountPassError, FileNotFoundError):
    exit_code = 2
