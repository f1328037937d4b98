"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class TruncationExceeded(ValueError):
    """An operation needs Fock levels beyond the truncation."""


class NotInWickSpan(ValueError):
    """An operator could not be reassembled from its vacuum image."""


class MemoryBudgetExceeded(RuntimeError):
    pass
