"""Errors raised by markov_agg.

All of them derive from ``MarkovAggError`` (itself a ``ValueError``), so callers
can catch the whole family at once. The CLI maps ``MalformedInput`` to exit
code 1 and everything else to exit code 2.
"""


class MarkovAggError(ValueError):
    """Root of the markov_agg error hierarchy."""


class MalformedInput(MarkovAggError):
    """A file or argument could not be parsed into the expected structure."""


class NonStochastic(MarkovAggError):
    """A matrix is not square, has entries outside [0, 1], or rows not summing to 1."""


class Reducible(MarkovAggError):
    """The chain has no strictly positive unique stationary distribution."""


class NoUniqueSolution(Reducible):
    """The stationary equations have more than a one-dimensional solution space."""


class NotIrreducible(Reducible):
    """A generated transition graph is not strongly connected."""


class EmptyAggregate(MarkovAggError):
    """Some aggregate state has no preimage, so diag(nu) is singular."""


class InvalidPMF(MarkovAggError):
    """A vector or table is not a probability mass function."""


class DimensionMismatch(MarkovAggError):
    """Two operands describe different state sets."""


class BetaOutOfRange(MarkovAggError):
    """The trade-off parameter beta is outside [0, 1]."""


class KTooLarge(MarkovAggError):
    """The number of aggregates is not in [1, number of states]."""


class NonSurjectiveInit(MarkovAggError):
    """An initial assignment leaves an aggregate empty or is out of range."""


class InvalidSpec(MarkovAggError):
    """Generator or schedule parameters are out of range."""


class NotAPermutation(MarkovAggError):
    """A permutation is not a bijection on the states."""


class DegeneratePoints(MarkovAggError):
    """Point cloud too small or all points identical (sigma_k would be 0)."""


class LengthMismatch(MarkovAggError):
    """Two assignments being compared have different lengths."""


class TooManyAggregates(MarkovAggError):
    """Exhaustive subset enumeration requested beyond the supported size."""
