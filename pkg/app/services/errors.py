"""
Errors - exception taxonomy shared by the numeric modules and the CLI
Each class maps onto one CLI exit code (see app/main.py)
"""


class PhilabError(Exception):
    """Base class for every error raised by the lab"""


class DomainError(PhilabError, ValueError):
    """Argument outside the domain of an operation"""


class NumericFailureError(PhilabError, ArithmeticError):
    """A numerical procedure could not meet its accuracy guard"""


class HeavyTailError(NumericFailureError):
    """Count sampler hit its hard cap before covering the requested mass"""


class UnsupportedSamplerError(PhilabError, NotImplementedError):
    """No sampler exists for the requested family"""


class ConfigError(PhilabError, ValueError):
    """Experiment configuration is invalid"""
