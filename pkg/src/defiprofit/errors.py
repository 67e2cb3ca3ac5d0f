"""Exception hierarchy shared by every module of the package."""


class DefiError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


class UnknownAsset(DefiError):
    pass


class UnknownAction(DefiError):
    pass


class NonFiniteResult(DefiError):
    pass


class EmptyReserve(DefiError):
    pass


class InsufficientBalance(DefiError):
    pass


class InsufficientLiquidity(DefiError):
    pass


class ConstraintViolated(DefiError):
    """A non-base balance did not return to its initial value."""

    def __init__(self, asset, initial, final):
        super().__init__(f"balance of {asset} not restored: {initial!r} -> {final!r}")
        self.asset = asset
        self.initial = initial
        self.final = final


class NoRoute(DefiError):
    pass


class NoProfit(DefiError):
    pass


class NoProfitablePath(DefiError):
    pass


class CombinatorialBudgetExceeded(DefiError):
    pass


class UnsupportedVenueKind(DefiError):
    pass


class MissingBlock(DefiError):
    pass


class InvalidSpec(DefiError):
    pass


class NoConvergence(DefiError):
    pass
