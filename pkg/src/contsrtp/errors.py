"""Exception types raised across the package."""


class ContsError(Exception):
    """Base class for every error raised by contsrtp."""


class ConfigurationError(ContsError, ValueError):
    """Invalid input document, scenario, or parameter combination."""


# grid
class CycleDetected(ConfigurationError):
    pass


class DisconnectedNode(ConfigurationError):
    pass


class DuplicateLine(ConfigurationError):
    pass


class NonPositiveImpedance(ConfigurationError):
    pass


class DimensionMismatch(ConfigurationError):
    pass


# clusters
class InfeasibleSpec(ConfigurationError):
    pass


class LengthMismatch(ConfigurationError):
    pass


# population / bandit
class NonPositiveInnerProduct(ContsError, ValueError):
    pass


class EmptySupport(ConfigurationError):
    pass


class NonSimplexWeights(ConfigurationError):
    pass


class AllZeroLikelihood(ContsError, FloatingPointError):
    """Every candidate has zero likelihood for an observation (model mismatch)."""


# pricer
class NoFeasiblePrice(ContsError):
    """No price meets the chance constraints.

    ``fallback`` holds the price the caller should broadcast instead
    (the entrywise-maximal price of the set).
    """

    def __init__(self, message, fallback=None):
        super().__init__(message)
        self.fallback = fallback


# metrics
class IncompleteRecord(ContsError, ValueError):
    pass
