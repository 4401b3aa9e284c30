"""
Exception hierarchy for y00lab

Every refusal the library makes is an explicit exception; the CLI maps
the classes below onto its exit codes.
"""


class Y00LabError(Exception):
    """Base class for all y00lab errors"""
    exit_code = 1


class ConfigError(Y00LabError):
    """Scenario configuration is invalid or inconsistent"""
    exit_code = 2


class InfeasibleSizeError(Y00LabError):
    """Requested enumeration or table exceeds its size guard"""
    exit_code = 3


class PeriodUnknownError(Y00LabError):
    """Generator period search hit its cap, so T_LCM is not known"""
    exit_code = 3


class UnsupportedConfigurationError(Y00LabError):
    """Configuration breaks an assumption an analysis relies on"""
    exit_code = 3


class QuadratureError(Y00LabError):
    """Numerical integration over a decision cell did not converge"""
    exit_code = 3


class InsufficientKeystreamError(Y00LabError):
    """Not enough keystream bits to determine an LFSR seed"""
    exit_code = 4


class NoLeakyBitsError(Y00LabError):
    """No keystream bit is observable with crossover below one half"""
    exit_code = 4


class AttackFailedError(Y00LabError):
    """Correlation attack produced no usable seed candidate"""
    exit_code = 4


class RefreshAbortedError(Y00LabError):
    """Key refresh round aborted; both parties keep their current keys"""
    exit_code = 4
