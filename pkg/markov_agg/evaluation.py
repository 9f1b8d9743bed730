"""Scoring aggregations: partition agreement, reversibility, lumpability, bisimulation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import comb

from markov_agg.constants import (
    BISIM_EXHAUSTIVE_MAX,
    BISIM_SUBSET_CHUNK,
    BISIM_TOL,
    LUMPABILITY_TOL,
    MARKOV_GAP_DEFAULT_ORDER,
    MARKOV_GAP_TOL,
    REVERSIBILITY_TOL,
    SWEEP_BETAS,
)
from markov_agg.exceptions import InvalidSpec, LengthMismatch, TooManyAggregates
from markov_agg.info_measures import (
    bisimulation_epsilon,
    check_beta,
    cost_lumpability,
    cost_predictability,
    markov_gap,
)
from markov_agg.markov_core import AggregationMap, MarkovChain, aggregate_chain

log = logging.getLogger(__name__)


def _labels(g: AggregationMap | Sequence[int]) -> np.ndarray:
    if isinstance(g, AggregationMap):
        return g.as_array()
    return np.asarray(g)


# ── Partition agreement ──────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class PartitionComparison:
    ari: float
    contingency: np.ndarray  # rows: clusters of the first partition


def compare_partitions(
    g1: AggregationMap | Sequence[int], g2: AggregationMap | Sequence[int],
) -> PartitionComparison:
    """Contingency table and adjusted Rand index of two partitions.

    Labels may be arbitrary; only the induced partitions matter. When the
    maximum and expected index coincide (e.g. both partitions are a single
    cluster) the ARI is reported as 0.
    """
    a, b = _labels(g1), _labels(g2)
    if a.shape != b.shape:
        raise LengthMismatch(f"assignments have lengths {a.size} and {b.size}")
    _, rows = np.unique(a, return_inverse=True)
    _, cols = np.unique(b, return_inverse=True)
    table = np.zeros((rows.max(initial=-1) + 1, cols.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (rows, cols), 1)

    n = a.size
    index = comb(table, 2).sum()
    row_pairs = comb(table.sum(axis=1), 2).sum()
    col_pairs = comb(table.sum(axis=0), 2).sum()
    total_pairs = comb(n, 2)
    if total_pairs == 0:
        return PartitionComparison(ari=0.0, contingency=table)
    expected = row_pairs * col_pairs / total_pairs
    maximum = 0.5 * (row_pairs + col_pairs)
    if maximum == expected:
        return PartitionComparison(ari=0.0, contingency=table)
    return PartitionComparison(ari=float((index - expected) / (maximum - expected)), contingency=table)


def adjusted_rand_index(g1: AggregationMap | Sequence[int], g2: AggregationMap | Sequence[int]) -> float:
    return compare_partitions(g1, g2).ari


# ── Chain predicates ─────────────────────────────────────────────────


def is_reversible(chain: MarkovChain, tol: float = REVERSIBILITY_TOL) -> bool:
    """Detailed balance: mu_x P[x, x'] == mu_x' P[x', x] for every pair."""
    joint = chain.joint()
    return bool(np.abs(joint - joint.T).max() <= tol)


def check_lumpable(chain: MarkovChain, g: AggregationMap, tol: float = LUMPABILITY_TOL) -> bool:
    """C_L <= tol, i.e. the observed process is (numerically) Markov."""
    return cost_lumpability(chain, g) <= tol


def is_markov_observed(
    chain: MarkovChain,
    g: AggregationMap,
    order: int = MARKOV_GAP_DEFAULT_ORDER,
    tol: float = MARKOV_GAP_TOL,
) -> bool:
    """Whether g(X) shows no memory beyond one step up to block length ``order``."""
    return markov_gap(chain, g, order) <= tol


@dataclass(frozen=True)
class BetaMonotonicity:
    """C_beta along a beta grid.

    C_beta = C_L + beta (C_P - 2 C_L) is affine in beta, so it is
    non-decreasing exactly when C_P >= 2 C_L.
    """
    betas: tuple[float, ...]
    costs: tuple[float, ...]
    c_l: float
    c_p: float

    @property
    def non_decreasing(self) -> bool:
        return all(b >= a for a, b in zip(self.costs, self.costs[1:]))

    @property
    def strictly_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.costs, self.costs[1:]))

    @property
    def predictability_dominates(self) -> bool:
        return self.c_p >= 2.0 * self.c_l


def beta_monotonicity(
    chain: MarkovChain, g: AggregationMap, betas: Sequence[float] = SWEEP_BETAS,
) -> BetaMonotonicity:
    """C_beta of a fixed aggregation along a beta grid, with its trend."""
    c_l = cost_lumpability(chain, g)
    c_p = cost_predictability(chain, g)
    grid = tuple(check_beta(b) for b in betas)
    costs = tuple((1.0 - 2.0 * b) * c_l + b * c_p for b in grid)
    return BetaMonotonicity(betas=grid, costs=costs, c_l=c_l, c_p=c_p)


# ── epsilon-bisimulation ─────────────────────────────────────────────


@dataclass(frozen=True)
class BisimulationReport:
    """Worst case of sum_B R[x] >= sum_B Q[g(x)] - epsilon over states and subsets."""
    epsilon: float
    worst_margin: float
    worst_state: int
    worst_subset: tuple[int, ...]
    subsets_checked: int
    exhaustive: bool

    @property
    def max_violation(self) -> float:
        return max(0.0, -self.worst_margin)

    @property
    def holds(self) -> bool:
        return self.worst_margin >= -BISIM_TOL

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "worst_margin": self.worst_margin,
            "max_violation": self.max_violation,
            "holds": self.holds,
            "worst_state": self.worst_state,
            "worst_subset": list(self.worst_subset),
            "subsets_checked": self.subsets_checked,
            "exhaustive": self.exhaustive,
        }


def _subset_masks(codes: np.ndarray, k: int) -> np.ndarray:
    return ((codes[:, None] >> np.arange(k)[None, :]) & 1).astype(float)


def bisimulation_check(
    chain: MarkovChain,
    g: AggregationMap,
    *,
    n_samples: int | None = None,
    rng: np.random.Generator | None = None,
) -> BisimulationReport:
    """Check the epsilon-bisimulation inequality for every state and aggregate subset.

    All 2^K subsets are enumerated for K up to ``BISIM_EXHAUSTIVE_MAX``.
    Beyond that, ``n_samples`` random subsets are checked instead, or
    ``TooManyAggregates`` is raised when no sample count is given.
    """
    if n_samples is not None and n_samples < 1:
        raise InvalidSpec(f"n_samples must be at least 1, got {n_samples}")
    k = g.num_aggregates
    epsilon = bisimulation_epsilon(chain, g)
    agg = aggregate_chain(chain, g)
    diff = agg.r - agg.q[g.as_array()]  # n x K

    exhaustive = k <= BISIM_EXHAUSTIVE_MAX
    if exhaustive:
        batches = (
            np.arange(start, min(start + BISIM_SUBSET_CHUNK, 1 << k), dtype=np.int64)
            for start in range(0, 1 << k, BISIM_SUBSET_CHUNK)
        )
    elif n_samples is None:
        raise TooManyAggregates(
            f"{k} aggregates exceed the exhaustive limit of {BISIM_EXHAUSTIVE_MAX}; "
            "pass n_samples to sample subsets"
        )
    else:
        rng = rng if rng is not None else np.random.default_rng()
        batches = (
            rng.integers(0, 2, size=(min(BISIM_SUBSET_CHUNK, n_samples - start), k))
            for start in range(0, n_samples, BISIM_SUBSET_CHUNK)
        )

    worst = (np.inf, 0, ())
    checked = 0
    for batch in batches:
        masks = _subset_masks(batch, k) if exhaustive else batch.astype(float)
        margins = diff @ masks.T + epsilon
        x, s = np.unravel_index(int(np.argmin(margins)), margins.shape)
        if margins[x, s] < worst[0]:
            worst = (float(margins[x, s]), int(x), tuple(np.flatnonzero(masks[s]).tolist()))
        checked += masks.shape[0]

    log.debug("bisimulation: %d subsets checked, worst margin %.3g", checked, worst[0])
    return BisimulationReport(
        epsilon=epsilon,
        worst_margin=worst[0],
        worst_state=worst[1],
        worst_subset=worst[2],
        subsets_checked=checked,
        exhaustive=exhaustive,
    )
