"""Finite stationary Markov chains and their optimal aggregated chains.

A ``MarkovChain`` is always validated: row-stochastic transition matrix and a
strictly positive stationary distribution. Aggregation maps are deterministic
(``g: X -> Y``); their lift ``W`` is the 0/1 indicator matrix. Given both,
``aggregate_chain`` returns the best Markov approximation Q = U P W of the
observed process.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from markov_agg.constants import (
    DIRECT_SOLVE_MAX_ORDER,
    MIN_STATIONARY_MASS,
    POWER_ITERATION_MAX_ITER,
    POWER_ITERATION_TOL,
    ROW_SUM_TOL,
    STATIONARY_RESIDUAL_TOL,
)
from markov_agg.exceptions import (
    DimensionMismatch,
    EmptyAggregate,
    MalformedInput,
    NonStochastic,
    NoUniqueSolution,
    Reducible,
)

log = logging.getLogger(__name__)


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """A stationary finite Markov chain with labeled states."""
    states: tuple[str, ...]
    transition: np.ndarray  # P, rows sum to 1
    stationary: np.ndarray  # mu, mu^T P = mu^T

    @property
    def n(self) -> int:
        return len(self.states)

    def joint(self) -> np.ndarray:
        """p(X1, X2) = diag(mu) P."""
        return self.stationary[:, None] * self.transition


@dataclass(frozen=True)
class AggregationMap:
    """Deterministic map g from original states to aggregate states."""
    assignment: tuple[int, ...]
    num_aggregates: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignment", tuple(int(y) for y in self.assignment))
        object.__setattr__(self, "num_aggregates", int(self.num_aggregates))
        if self.num_aggregates < 1:
            raise MalformedInput("num_aggregates must be at least 1")
        bad = [y for y in self.assignment if not 0 <= y < self.num_aggregates]
        if bad:
            raise MalformedInput(
                f"assignment entries {sorted(set(bad))} outside [0, {self.num_aggregates})"
            )

    @classmethod
    def identity(cls, n: int) -> AggregationMap:
        return cls(tuple(range(n)), n)

    @classmethod
    def constant(cls, n: int) -> AggregationMap:
        return cls((0,) * n, 1)

    @classmethod
    def from_labels(cls, labels: Iterable) -> AggregationMap:
        """Build a surjective map from arbitrary hashable labels.

        Aggregate indices are assigned in order of first appearance.
        """
        index: dict = {}
        assignment = [index.setdefault(label, len(index)) for label in labels]
        return cls(tuple(assignment), max(len(index), 1))

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def is_surjective(self) -> bool:
        return bool(np.all(self.block_sizes() > 0))

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.as_array(), minlength=self.num_aggregates)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.assignment, dtype=np.intp)

    def canonical(self) -> AggregationMap:
        """Same partition, aggregates relabeled in order of first appearance."""
        return AggregationMap.from_labels(self.assignment)

    def indicator(self) -> np.ndarray:
        return lift(self, self.n)

    def to_dict(self) -> dict:
        return {
            "assignment": list(self.assignment),
            "num_aggregates": self.num_aggregates,
        }


@dataclass(frozen=True, eq=False)
class AggregatedChain:
    """Best Markov approximation of the observed process Y = g(X)."""
    q: np.ndarray   # |Y| x |Y| transition matrix
    nu: np.ndarray  # stationary distribution of Y, nu^T = mu^T W
    r: np.ndarray   # R = P W, |X| x |Y|
    u: np.ndarray   # U = diag(nu)^-1 W^T diag(mu), so Q = U P W


# ── Validation and stationary distributions ──────────────────────────


def validate_chain(
    transition: Sequence[Sequence[float]] | np.ndarray,
    states: Sequence[str] | None = None,
    *,
    direct_max_order: int = DIRECT_SOLVE_MAX_ORDER,
) -> MarkovChain:
    """Check a transition matrix and return a chain with its stationary vector.

    Rows within ``ROW_SUM_TOL`` of 1 are accepted and renormalized. Periodic
    chains are accepted as long as the fixed point is unique and positive.
    """
    p = np.array(transition, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] == 0:
        raise NonStochastic(f"transition matrix must be square and non-empty, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0 + ROW_SUM_TOL):
        raise NonStochastic("transition entries must lie in [0, 1]")
    row_sums = p.sum(axis=1)
    worst = int(np.argmax(np.abs(row_sums - 1.0)))
    if abs(row_sums[worst] - 1.0) > ROW_SUM_TOL:
        raise NonStochastic(f"row {worst} sums to {row_sums[worst]!r}, not 1")
    p /= row_sums[:, None]

    n = p.shape[0]
    if states is None:
        labels = tuple(str(i) for i in range(n))
    else:
        labels = tuple(str(s) for s in states)
        if len(labels) != n:
            raise DimensionMismatch(f"{len(labels)} state labels for a {n}x{n} matrix")
        if len(set(labels)) != n:
            raise MalformedInput("state labels must be unique")

    mu = stationary_distribution(p, direct_max_order=direct_max_order)
    if mu.min() <= MIN_STATIONARY_MASS:
        empty = np.flatnonzero(mu <= MIN_STATIONARY_MASS)
        raise Reducible(f"states {empty.tolist()[:10]} have zero stationary mass")
    mu = mu / mu.sum()
    return MarkovChain(states=labels, transition=_readonly(p), stationary=_readonly(mu))


def stationary_distribution(
    transition: np.ndarray,
    *,
    direct_max_order: int = DIRECT_SOLVE_MAX_ORDER,
) -> np.ndarray:
    """Solve mu^T P = mu^T, sum(mu) = 1.

    Orders up to ``direct_max_order`` are solved directly by
    Grassmann-Taksar-Heyman elimination of (P^T - I) mu = 0, normalizing at
    the end. It never subtracts, so nearly decomposable chains keep full
    relative accuracy. Larger chains use power iteration.
    """
    p = np.asarray(transition, dtype=float)
    n = p.shape[0]
    if n == 1:
        return np.ones(1)
    if n > direct_max_order:
        return _power_iteration(p)

    a = p.copy()
    for k in range(n - 1):
        scale = a[k, k + 1:].sum()
        if scale <= 0.0:
            raise NoUniqueSolution(
                f"state {k} cannot reach states {k + 1}..{n - 1}: no unique stationary vector"
            )
        a[k + 1:, k] /= scale
        a[k + 1:, k + 1:] += np.outer(a[k + 1:, k], a[k, k + 1:])

    mu = np.zeros(n)
    mu[-1] = 1.0
    for k in range(n - 2, -1, -1):
        mu[k] = mu[k + 1:] @ a[k + 1:, k]
    mu /= mu.sum()
    residual = np.abs(mu @ p - mu).max()
    if residual > STATIONARY_RESIDUAL_TOL:
        raise NoUniqueSolution(f"stationary residual {residual:.3g} too large")
    return mu


def _power_iteration(p: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    mu = np.full(n, 1.0 / n)
    for iteration in range(POWER_ITERATION_MAX_ITER):
        nxt = mu @ p
        nxt /= nxt.sum()
        if np.abs(nxt - mu).sum() < POWER_ITERATION_TOL:
            log.debug("power iteration converged after %d steps", iteration + 1)
            return nxt
        mu = nxt
    raise NoUniqueSolution(
        f"power iteration did not converge in {POWER_ITERATION_MAX_ITER} steps"
    )


def is_irreducible(transition: np.ndarray) -> bool:
    """True iff the transition graph is strongly connected."""
    graph = csr_matrix(np.asarray(transition) > 0)
    n_components, _ = connected_components(graph, directed=True, connection="strong")
    return n_components == 1


# ── Aggregation ──────────────────────────────────────────────────────


def lift(g: AggregationMap, n: int) -> np.ndarray:
    """Indicator matrix W with W[x, y] = 1 iff y = g(x)."""
    if g.n != n:
        raise DimensionMismatch(f"assignment has length {g.n}, expected {n}")
    w = np.zeros((n, g.num_aggregates))
    w[np.arange(n), g.as_array()] = 1.0
    return w


def require_surjective(g: AggregationMap) -> None:
    """Raise EmptyAggregate if some aggregate has no state."""
    sizes = g.block_sizes()
    if np.any(sizes == 0):
        raise EmptyAggregate(
            f"aggregates {np.flatnonzero(sizes == 0).tolist()} have no states"
        )


def aggregate_chain(chain: MarkovChain, g: AggregationMap) -> AggregatedChain:
    """Optimal aggregated chain: nu = W^T mu, Q = U P W."""
    w = lift(g, chain.n)
    require_surjective(g)

    mu = chain.stationary
    nu = mu @ w
    joint_y = w.T @ chain.joint() @ w
    q = joint_y / nu[:, None]
    u = (w.T * mu[None, :]) / nu[:, None]
    r = chain.transition @ w
    return AggregatedChain(q=_readonly(q), nu=_readonly(nu), r=_readonly(r), u=_readonly(u))
