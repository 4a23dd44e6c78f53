"""Exception types raised across the package."""


class MMOTError(Exception):
    """Base class for all package errors."""


class AllZeroInput(MMOTError, ValueError):
    pass


class GridMismatch(MMOTError, ValueError):
    pass


class NonpositiveWeight(MMOTError, ValueError):
    pass


class DisconnectedGraph(MMOTError, ValueError):
    pass


class NotATree(MMOTError, ValueError):
    pass


class InvalidRoot(MMOTError, ValueError):
    pass


class ChildNotReady(MMOTError, RuntimeError):
    """A net potential was requested before all of its children were computed."""


class LineSearchFailed(MMOTError, RuntimeError):
    """Raised (or reported) when every backtracking trial was rejected."""


class BadWeights(MMOTError, ValueError):
    pass


class TooLarge(MMOTError, ValueError):
    pass


class ConfigError(MMOTError, ValueError):
    """Malformed configuration or graph specification text."""
