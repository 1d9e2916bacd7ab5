"""Exception types shared across the package.

Precondition violations raise plain ``ValueError``; the classes here mark
failures of the numerical machinery itself.
"""


class DivSearchError(Exception):
    """Base class for runtime failures of the search machinery."""


class SurrogateFailure(DivSearchError):
    """The surrogate's Gram matrix stayed indefinite after maximum jitter."""


class OptimizerFailure(DivSearchError):
    """An inner optimizer could not produce any finite objective value."""


class TraceError(DivSearchError):
    """A persisted trace is corrupt or inconsistent with the given config."""
