"""Sequential aggregation search and beta-annealing.

``sgitma`` reassigns one state at a time to the aggregate that lowers C_beta
the most. A move of state x changes two columns of p(X1, g(X2)) and applies a
rank-two update to p(g(X1), g(X2)), so every candidate is scored in O(|X|)
from cached tables and one sweep costs O(|Y| |X|^2). Consecutive states are
scored together in one vectorized pass. ``anneal`` runs the search from
beta = 1 down to a target, warm-starting every step with the previous result.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence, TypeVar

import numpy as np
from scipy.special import entr, rel_entr

from markov_agg.constants import (
    BETA_DECIMALS,
    DEFAULT_ANNEAL_DELTA,
    DEFAULT_BETA_TARGET,
    DEFAULT_MAX_ITER,
    DEFAULT_SEED,
    MOVE_ACCEPT_TOL,
    RANDOM_INIT_MAX_TRIES,
    REFRESH_INTERVAL,
    SCORE_BLOCK_ELEMENTS,
    SCORE_BLOCK_MAX,
)
from markov_agg.exceptions import BetaOutOfRange, InvalidSpec, KTooLarge, NonSurjectiveInit
from markov_agg.info_measures import LN2, CostReport, check_beta, cost_beta
from markov_agg.markov_core import AggregationMap, MarkovChain

log = logging.getLogger(__name__)

T = TypeVar("T")


def _mi_terms(table: np.ndarray, product: np.ndarray) -> float:
    return float(rel_entr(table, product).sum() / LN2)


class SweepState:
    """Cached joint tables and mutual informations for the current assignment.

    J = p(X1, g(X2)) has marginals mu and nu, B = p(g(X1), g(X2)) has nu on
    both sides, so I(X1; g(X2)) = H(mu) + H(nu) - H(J) and
    I(g(X1); g(X2)) = 2 H(nu) - H(B). Move scores are entropy differences.
    """

    def __init__(
        self,
        chain: MarkovChain,
        assignment: Sequence[int] | np.ndarray,
        num_aggregates: int,
        beta: float,
    ) -> None:
        self.chain = chain
        self.beta = check_beta(beta)
        self.num_aggregates = int(num_aggregates)
        self.assignment = np.array(assignment, dtype=np.intp)
        self._mu = chain.stationary
        self._j12 = chain.joint()
        self._j12_cols = np.ascontiguousarray(self._j12.T)  # row x is p(X1, X2 = x)
        self._eye = np.eye(self.num_aggregates)
        self.mi_x1x2 = _mi_terms(self._j12, np.outer(self._mu, self._mu))
        self.accepted_moves = 0
        n, k = len(self.assignment), self.num_aggregates
        self.block_max = max(1, min(SCORE_BLOCK_MAX, SCORE_BLOCK_ELEMENTS // (n * k + k**3)))
        self.refresh()

    def refresh(self) -> None:
        """Rebuild every cached table from scratch."""
        n = len(self.assignment)
        self._w = np.zeros((n, self.num_aggregates))
        self._w[np.arange(n), self.assignment] = 1.0
        self.joint_x1_gy2 = self._j12 @ self._w
        self.joint_gy1_gy2 = self._w.T @ self.joint_x1_gy2
        self.nu = self._mu @ self._w
        self.sizes = np.bincount(self.assignment, minlength=self.num_aggregates)
        self._update_mi()
        self._moves_since_refresh = 0

    def _update_mi(self) -> None:
        self.mi_x1_gy2 = _mi_terms(self.joint_x1_gy2, np.outer(self._mu, self.nu))
        self.mi_gy1_gy2 = _mi_terms(self.joint_gy1_gy2, np.outer(self.nu, self.nu))

    def cost(self) -> float:
        b = self.beta
        return b * self.mi_x1x2 + (1 - 2 * b) * self.mi_x1_gy2 - (1 - b) * self.mi_gy1_gy2

    def snapshot(self) -> AggregationMap:
        return AggregationMap(tuple(self.assignment.tolist()), self.num_aggregates)

    def move_deltas(self, states: Sequence[int] | np.ndarray) -> np.ndarray:
        """C_beta change of moving each of ``states`` to every aggregate.

        Entry [s, y] is C_beta(g with states[s] -> y) - C_beta(g): 0 for the
        current aggregate, inf where the move would empty it.
        """
        xs = np.atleast_1d(np.asarray(states, dtype=np.intp))
        rows = np.arange(len(xs))
        a = self.assignment[xs]
        cols = self._j12_cols[xs]
        shift = self._eye[None, :, :] - self._eye[a][:, None, :]  # [s, y] = e_y - e_a

        # H(J): column a loses p(X1, X2 = x), column y gains it
        moved = self.joint_x1_gy2[None, :, :] + cols[:, :, None]
        moved[rows, :, a] -= 2.0 * cols
        np.maximum(moved, 0.0, out=moved)
        h_moved = entr(moved).sum(axis=1)
        h_cols = entr(self.joint_x1_gy2).sum(axis=0)
        d_h_joint = (h_moved - h_cols) + (h_moved[rows, a] - h_cols[a])[:, None]

        # H(nu): nu' = nu + mu_x (e_y - e_a)
        nu_new = self.nu[None, None, :] + self._mu[xs][:, None, None] * shift
        np.maximum(nu_new, 0.0, out=nu_new)
        d_h_nu = entr(nu_new).sum(axis=2) - entr(self.nu).sum()

        # H(B): B' = B + c d^T + d r^T with c = p(g(X1), X2 = x), r = J'[x, :]
        c = cols @ self._w
        r = self.joint_x1_gy2[xs][:, None, :] + cols[rows, xs][:, None, None] * shift
        b_new = (
            self.joint_gy1_gy2[None, None, :, :]
            + c[:, None, :, None] * shift[:, :, None, :]
            + shift[:, :, :, None] * r[:, :, None, :]
        )
        np.maximum(b_new, 0.0, out=b_new)
        d_h_b = entr(b_new).sum(axis=(2, 3)) - entr(self.joint_gy1_gy2).sum()

        d_mi_x1gy2 = (d_h_nu - d_h_joint) / LN2
        d_mi_gy1gy2 = (2.0 * d_h_nu - d_h_b) / LN2
        deltas = (1 - 2 * self.beta) * d_mi_x1gy2 - (1 - self.beta) * d_mi_gy1gy2
        deltas[self.sizes[a] == 1] = math.inf
        deltas[rows, a] = 0.0
        return deltas

    def move_delta(self, x: int, y_new: int) -> float:
        """C_beta(g with x -> y_new) - C_beta(g); inf if it empties an aggregate."""
        return float(self.move_deltas([x])[0, y_new])

    def apply_move(self, x: int, y_new: int) -> float:
        """Move x to y_new, update the caches and return the cost change."""
        a, y = int(self.assignment[x]), int(y_new)
        if y == a:
            return 0.0
        if self.sizes[a] == 1:
            raise NonSurjectiveInit(f"moving state {x} would empty aggregate {a}")
        before = self.cost()
        col = self._j12_cols[x]
        d = self._eye[y] - self._eye[a]
        c = col @ self._w
        r = self.joint_x1_gy2[x] + col[x] * d
        self.joint_gy1_gy2 += np.outer(c, d) + np.outer(d, r)
        np.maximum(self.joint_gy1_gy2, 0.0, out=self.joint_gy1_gy2)
        self.joint_x1_gy2[:, a] -= col
        self.joint_x1_gy2[:, y] += col
        np.maximum(self.joint_x1_gy2, 0.0, out=self.joint_x1_gy2)
        self.nu[a] = max(self.nu[a] - self._mu[x], 0.0)
        self.nu[y] += self._mu[x]
        self._w[x, a], self._w[x, y] = 0.0, 1.0
        self.assignment[x] = y
        self.sizes[a] -= 1
        self.sizes[y] += 1
        self.accepted_moves += 1
        self._moves_since_refresh += 1
        if self._moves_since_refresh >= REFRESH_INTERVAL:
            log.debug("refreshing cached tables after %d moves", self._moves_since_refresh)
            self.refresh()
        else:
            self._update_mi()
        return self.cost() - before

    def sweep(self) -> int:
        """Visit every state once in index order; return the number of moves made.

        Each state goes to its lowest-delta aggregate when that lowers the
        cost by more than ``MOVE_ACCEPT_TOL``. States are scored a block at a
        time; an accepted move invalidates the rest of its block, so scoring
        resumes at the next state with a block of one that doubles while
        nothing moves.
        """
        n = len(self.assignment)
        moved = 0
        x, block = 0, self.block_max
        while x < n:
            xs = np.arange(x, min(x + block, n))
            deltas = self.move_deltas(xs)
            best = deltas.argmin(axis=1)
            accepted = np.flatnonzero(deltas[np.arange(len(xs)), best] < -MOVE_ACCEPT_TOL)
            if accepted.size == 0:
                x += len(xs)
                block = min(2 * block, self.block_max)
                continue
            i = int(accepted[0])
            self.apply_move(int(xs[i]), int(best[i]))
            moved += 1
            x += i + 1
            block = 1
        return moved


# ── Results ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class AggregationResult:
    """Outcome of one sgitma run."""
    aggregation: AggregationMap
    beta: float
    report: CostReport
    seed: int | None
    sweeps: int
    accepted_moves: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "assignment": list(self.aggregation.assignment),
            "num_aggregates": self.aggregation.num_aggregates,
            "beta": self.beta,
            "cost_report": self.report.to_dict(),
            "seed": self.seed,
            "sweeps": self.sweeps,
        }


@dataclass(frozen=True)
class AnnealResult:
    """Final aggregation of an annealing run, plus every grid point if kept."""
    final: AggregationResult
    trajectory: tuple[AggregationResult, ...] = ()

    def to_dict(self) -> dict:
        data = self.final.to_dict()
        if self.trajectory:
            data["trajectory"] = [r.to_dict() for r in self.trajectory]
        return data


@dataclass(frozen=True)
class RestartResult:
    """All restarts of a search, and which one won."""
    runs: tuple[AggregationResult | AnnealResult, ...]
    costs: tuple[float, ...]
    best_index: int

    @property
    def best(self) -> AggregationResult | AnnealResult:
        return self.runs[self.best_index]

    @property
    def final(self) -> AggregationResult:
        return _final(self.best)

    @property
    def aggregation(self) -> AggregationMap:
        return self.final.aggregation

    def to_dict(self) -> dict:
        data = self.best.to_dict()
        data["restart_costs"] = list(self.costs)
        data["best_restart"] = self.best_index
        return data


@dataclass(frozen=True)
class AnnealSchedule:
    """beta grid {1, 1 - delta, 1 - 2 delta, ..., beta_target}."""
    beta_target: float = DEFAULT_BETA_TARGET
    delta: float = DEFAULT_ANNEAL_DELTA
    max_iter: int = DEFAULT_MAX_ITER
    keep_trajectory: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta_target <= 1.0:
            raise BetaOutOfRange(f"beta_target must lie in [0, 1], got {self.beta_target}")
        if not self.delta > 0.0:
            raise InvalidSpec(f"delta must be positive, got {self.delta}")
        if self.max_iter < 1:
            raise InvalidSpec("max_iter must be at least 1")

    def grid(self) -> list[float]:
        betas = [1.0]
        step = 1
        while betas[-1] > self.beta_target:
            betas.append(round(max(1.0 - step * self.delta, self.beta_target), BETA_DECIMALS))
            step += 1
        return betas


def _final(run: AggregationResult | AnnealResult) -> AggregationResult:
    return run.final if isinstance(run, AnnealResult) else run


# ── Algorithms ───────────────────────────────────────────────────────


def random_surjective_assignment(n: int, num_aggregates: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random assignment, redrawn until every aggregate is used."""
    if not 1 <= num_aggregates <= n:
        raise KTooLarge(f"number of aggregates {num_aggregates} not in [1, {n}]")
    for _ in range(RANDOM_INIT_MAX_TRIES):
        assignment = rng.integers(0, num_aggregates, size=n)
        if np.bincount(assignment, minlength=num_aggregates).min() > 0:
            return assignment
    assignment = rng.integers(0, num_aggregates, size=n)
    assignment[rng.permutation(n)[:num_aggregates]] = np.arange(num_aggregates)
    return assignment


def _initial_assignment(
    n: int, num_aggregates: int, g_init: AggregationMap | Sequence[int] | None, seed: int | None,
) -> np.ndarray:
    if not 1 <= num_aggregates <= n:
        raise KTooLarge(f"number of aggregates {num_aggregates} not in [1, {n}]")
    if g_init is None:
        return random_surjective_assignment(n, num_aggregates, np.random.default_rng(seed))

    if isinstance(g_init, AggregationMap):
        if g_init.num_aggregates != num_aggregates:
            raise NonSurjectiveInit(
                f"initial map has {g_init.num_aggregates} aggregates, expected {num_aggregates}"
            )
        g_init = g_init.assignment
    assignment = np.asarray(g_init, dtype=np.intp)
    if assignment.shape != (n,):
        raise NonSurjectiveInit(f"initial assignment has length {assignment.size}, expected {n}")
    if assignment.min() < 0 or assignment.max() >= num_aggregates:
        raise NonSurjectiveInit("initial assignment out of range")
    if np.bincount(assignment, minlength=num_aggregates).min() == 0:
        raise NonSurjectiveInit("initial assignment leaves an aggregate empty")
    return assignment


def sgitma(
    chain: MarkovChain,
    beta: float,
    num_aggregates: int,
    max_iter: int = DEFAULT_MAX_ITER,
    g_init: AggregationMap | Sequence[int] | None = None,
    seed: int | None = None,
) -> AggregationResult:
    """Sequential greedy minimization of C_beta over deterministic maps.

    States are visited in index order. Each is moved to the aggregate with the
    largest cost decrease; ties with the current aggregate keep it, other ties
    go to the lowest index. Stops after ``max_iter`` sweeps or a sweep with no
    accepted move.
    """
    beta = check_beta(beta)
    assignment = _initial_assignment(chain.n, num_aggregates, g_init, seed)
    state = SweepState(chain, assignment, num_aggregates, beta)

    sweeps = 0
    converged = False
    while sweeps < max_iter:
        sweeps += 1
        moved = state.sweep()
        log.debug("beta=%.3f sweep %d: %d moves, cost %.6g", beta, sweeps, moved, state.cost())
        if moved == 0:
            converged = True
            break

    g = state.snapshot()
    return AggregationResult(
        aggregation=g,
        beta=beta,
        report=cost_beta(chain, g, beta),
        seed=seed,
        sweeps=sweeps,
        accepted_moves=state.accepted_moves,
        converged=converged,
    )


def anneal(
    chain: MarkovChain,
    schedule: AnnealSchedule,
    num_aggregates: int,
    seed: int | None = None,
    g_init: AggregationMap | Sequence[int] | None = None,
) -> AnnealResult:
    """Run sgitma along the schedule's beta grid, warm-starting each step."""
    trajectory: list[AggregationResult] = []
    g = g_init
    result: AggregationResult | None = None
    for beta in schedule.grid():
        result = sgitma(chain, beta, num_aggregates, schedule.max_iter, g_init=g, seed=seed)
        g = result.aggregation
        log.info("anneal beta=%.3f: C_beta=%.6g after %d sweeps", beta, result.report.c_beta, result.sweeps)
        if schedule.keep_trajectory:
            trajectory.append(result)
    assert result is not None
    return AnnealResult(final=result, trajectory=tuple(trajectory))


def iter_parallel(fn: Callable[[int], T], count: int, threads: int = 1) -> Iterator[T]:
    """Yield fn(0), ..., fn(count - 1) in index order, on up to ``threads`` workers."""
    if threads <= 1 or count <= 1:
        yield from (fn(i) for i in range(count))
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(fn, range(count))


def run_parallel(fn: Callable[[int], T], count: int, threads: int = 1) -> list[T]:
    return list(iter_parallel(fn, count, threads))


def best_of_restarts(
    chain: MarkovChain,
    beta_or_schedule: float | AnnealSchedule,
    num_aggregates: int,
    n_restarts: int,
    base_seed: int = DEFAULT_SEED,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: int = 1,
) -> RestartResult:
    """Independent restarts with seeds base_seed + i; lowest final C_beta wins.

    Ties go to the lowest restart index, so the result does not depend on
    ``threads``.
    """
    if n_restarts < 1:
        raise InvalidSpec("n_restarts must be at least 1")

    def run(i: int) -> AggregationResult | AnnealResult:
        if isinstance(beta_or_schedule, AnnealSchedule):
            return anneal(chain, beta_or_schedule, num_aggregates, seed=base_seed + i)
        return sgitma(chain, beta_or_schedule, num_aggregates, max_iter, seed=base_seed + i)

    runs = run_parallel(run, n_restarts, threads)
    costs = tuple(_final(r).report.c_beta for r in runs)
    best_index = min(range(n_restarts), key=lambda i: (costs[i], i))
    log.info("restart %d of %d wins with C_beta=%.6g", best_index, n_restarts, costs[best_index])
    return RestartResult(runs=tuple(runs), costs=costs, best_index=best_index)


def restart_then_anneal(
    chain: MarkovChain,
    schedule: AnnealSchedule,
    num_aggregates: int,
    n_restarts: int,
    base_seed: int = DEFAULT_SEED,
    threads: int = 1,
) -> AnnealResult:
    """Best of ``n_restarts`` runs at beta = 1, then anneal from that winner."""
    restarts = best_of_restarts(
        chain, 1.0, num_aggregates, n_restarts, base_seed, schedule.max_iter, threads,
    )
    return anneal(
        chain, schedule, num_aggregates,
        seed=base_seed + restarts.best_index, g_init=restarts.aggregation,
    )
