"""Exception types.  Each maps to a distinct CLI exit code."""


class ConfigError(ValueError):
    """Invalid cluster, pulse or experiment description."""

    exit_code = 2


class CalibrationError(RuntimeError):
    """The all-ones comb failed to excite every slot above the noise floor."""

    exit_code = 3


class StabilityError(ValueError):
    """Integration step too coarse for the fastest frequency in the problem."""

    exit_code = 4
