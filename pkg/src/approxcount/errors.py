"""Exception hierarchy shared by every layer of the package."""


class ApproxCountError(Exception):
    """Base class for all errors raised by approxcount."""


class ContractViolation(ApproxCountError):
    """A layered algorithm broke a bound its building block relies on.

    Raised for out-of-range register writes, MaxWrites above the bound,
    increments beyond a counter's budget and similar misuse. Correct
    algorithms never trigger it, so seeing one means a bug upstream.
    """


class HarnessViolation(ApproxCountError):
    """A shared object was touched outside a step granted by the scheduler."""


class RegimeError(ApproxCountError, ValueError):
    """Parameters fall outside the accuracy regime an algorithm supports."""


class BudgetExceeded(ApproxCountError):
    """An exhaustive exploration or search would exceed its size guard."""
