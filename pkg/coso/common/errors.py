"""Base exception for domain errors raised anywhere in the toolkit.

Each module declares its specific subclasses next to the code that raises them;
the CLI turns any CosoError into exit status 1.
"""


class CosoError(Exception):
    """Raised for a domain error: bad input, violated precondition, or inconsistent result."""


class LimitExceededError(CosoError):
    """Raised when an exhaustive computation would exceed the configured cap."""
