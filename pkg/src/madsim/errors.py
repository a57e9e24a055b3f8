"""Exception types shared across the simulator."""


class MadSimError(Exception):
    """Base class for all simulator errors."""


class OutOfMemory(MadSimError):
    """No free block of the requested (or any larger) order exists."""


class DoubleFree(MadSimError):
    """Freed block is unknown, foreign, or already free."""


class SplitSourceEmpty(MadSimError):
    """All higher-order allocation caches are empty; cannot split downward."""


class InitFailure(MadSimError):
    """Backend could not supply the randomized initial cache fill."""


class ConfigError(MadSimError):
    """Invalid or unknown configuration keys/values."""


class InsufficientSamples(MadSimError):
    """Metric needs more samples than the run record holds."""


class ZeroRate(MadSimError):
    """Cannot extrapolate from a non-positive attrition rate."""


class RoundBudgetExhausted(MadSimError):
    """Spray massaging ran out of rounds before hitting its target."""
