"""Exception hierarchy shared by all loopmoments modules."""


class LoopMomentsError(Exception):
    """Base class for all errors raised by this package."""


# --- parsing / program structure ---------------------------------------


class DslSyntaxError(LoopMomentsError):
    def __init__(self, line, col, expected):
        self.line = line
        self.col = col
        self.expected = expected
        super().__init__(f"line {line}, col {col}: expected {expected}")


class UnknownDistribution(LoopMomentsError):
    pass


class UnknownFunction(LoopMomentsError):
    pass


class UnknownVariable(LoopMomentsError):
    pass


class RedeclaredVariable(LoopMomentsError):
    pass


class NotAnAccumulator(LoopMomentsError):
    pass


# --- numerics -----------------------------------------------------------


class QuadratureNotConverged(LoopMomentsError):
    pass


class MomentDiverges(LoopMomentsError):
    pass


class MgfDiverges(LoopMomentsError):
    def __init__(self, t, msg=""):
        self.t = t
        super().__init__(msg or f"moment-generating function diverges at t={t}")


class UnsupportedOrder(LoopMomentsError):
    pass


class ImaginaryResidueTooLarge(LoopMomentsError):
    pass


class IllConditionedBasis(LoopMomentsError):
    pass


class UnboundedSupport(LoopMomentsError):
    pass


class ConditionsViolated(LoopMomentsError):
    def __init__(self, reasons):
        self.reasons = list(reasons)
        super().__init__("; ".join(self.reasons))


class DegreeTooHigh(LoopMomentsError):
    pass


# --- moment engine -------------------------------------------------------


class ClosureExplosion(LoopMomentsError):
    pass


class NonLinearCycle(LoopMomentsError):
    pass


class MissingMoment(LoopMomentsError):
    pass


class NonFiniteSample(LoopMomentsError):
    def __init__(self, iteration, variable):
        self.iteration = iteration
        self.variable = variable
        super().__init__(f"non-finite sample for '{variable}' at iteration {iteration}")
