"""Exception hierarchy.

Every domain error derives from :class:`TopologyError`; the CLI maps these to
exit status 1 and prints the class name.
"""


class TopologyError(Exception):
    """Base class for all domain errors raised by this package."""


# graph construction / routing
class GraphError(TopologyError):
    pass


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class OverlayDegreeViolation(GraphError):
    pass


class Disconnected(GraphError):
    pass


class Unreachable(GraphError):
    pass


# measurement
class SimulationHorizonTooShort(TopologyError):
    pass


class DegenerateRegressor(TopologyError):
    pass


# bounds / ilp
class BudgetExceeded(TopologyError):
    pass


class IndexMismatch(TopologyError):
    pass


class BudgetTooSmall(TopologyError):
    pass


class Infeasible(TopologyError):
    pass


class TimeBudgetExceeded(TopologyError):
    """Raised when the exact solver runs out of time.

    ``best`` holds the incumbent found so far (or ``None``).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


# recovery
class NotATree(TopologyError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NotARing(TopologyError):
    pass


class TooFewOverlays(TopologyError):
    pass


# evaluation
class DegenerateSample(TopologyError):
    pass
