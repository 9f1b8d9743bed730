"""Experiment drivers: block-chain sweeps, clustering, bigram aggregation, scaling.

Run with: python -m markov_agg sweep | cluster | bigram | scaling | example
"""

from __future__ import annotations

import logging
import statistics
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from markov_agg.aggregation import (
    AggregationResult,
    AnnealResult,
    AnnealSchedule,
    SweepState,
    best_of_restarts,
    iter_parallel,
    restart_then_anneal,
    sgitma,
)
from markov_agg.constants import (
    BETA_DECIMALS,
    BIGRAM_K,
    BIGRAM_RESTARTS,
    BLOCK_SIZES,
    CLUSTER_RESTARTS,
    DEFAULT_ANNEAL_DELTA,
    DEFAULT_MAX_ITER,
    DEFAULT_SEED,
    EXAMPLE_PARTITION,
    EXAMPLE_TRANSITION,
    SCALING_K,
    SCALING_SIZES,
    SCALING_SWEEPS,
    SWEEP_ALPHAS,
    SWEEP_BETAS,
    SWEEP_K,
    SWEEP_NOISE_LEVELS,
    SWEEP_REPETITIONS,
    SWEEP_RESTARTS,
)
from markov_agg.evaluation import adjusted_rand_index, beta_monotonicity, is_reversible
from markov_agg.exceptions import InvalidSpec, MarkovAggError
from markov_agg.generators import (
    BlockChainSpec,
    SimilaritySpec,
    bigram_chain,
    block_stochastic,
    permute,
    random_permutation,
    random_stochastic,
    reference_partition,
    similarity_chain,
    three_circles,
    three_gaussians,
)
from markov_agg.info_measures import (
    check_beta,
    cost_lumpability,
    cost_predictability,
    information_bottleneck_cost,
)
from markov_agg.markov_core import AggregationMap, validate_chain
from markov_agg.serialize import SweepWriter

log = logging.getLogger(__name__)

DATASETS = {"gaussians": three_gaussians, "circles": three_circles}


def _beta_key(beta: float) -> float:
    return round(float(beta), BETA_DECIMALS)


# ── Block-chain sweep ────────────────────────────────────────────────


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameter grid of the block-chain sweep.

    Every (alpha, eps) point gets ``repetitions`` independently drawn and
    permuted chains. With ``anneal`` each chain is searched once from beta = 1
    down to min(betas) and every beta in the grid is read off the trajectory.
    """
    alphas: tuple[float, ...] = SWEEP_ALPHAS
    noise_levels: tuple[float, ...] = SWEEP_NOISE_LEVELS
    betas: tuple[float, ...] = SWEEP_BETAS
    num_aggregates: int = SWEEP_K
    restarts: int = SWEEP_RESTARTS
    seed: int = DEFAULT_SEED
    output_dir: Path = Path(".")
    anneal: bool = True
    delta: float = DEFAULT_ANNEAL_DELTA
    block_sizes: tuple[int, ...] = BLOCK_SIZES
    repetitions: int = SWEEP_REPETITIONS
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self) -> None:
        for name in ("alphas", "noise_levels", "betas", "block_sizes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if not self.alphas or not self.noise_levels or not self.betas:
            raise InvalidSpec("alphas, noise_levels and betas must be non-empty")
        for value in self.alphas + self.noise_levels:
            if not 0.0 <= value <= 1.0:
                raise InvalidSpec(f"alpha and eps values must lie in [0, 1], got {value}")
        for beta in self.betas:
            check_beta(beta)
        if not 1 <= self.num_aggregates <= sum(self.block_sizes):
            raise InvalidSpec(f"num_aggregates {self.num_aggregates} out of range")
        if self.restarts < 1 or self.repetitions < 1 or self.max_iter < 1:
            raise InvalidSpec("restarts, repetitions and max_iter must be at least 1")
        if self.delta <= 0.0:
            raise InvalidSpec(f"delta must be positive, got {self.delta}")

    @property
    def grid(self) -> list[tuple[float, float, int]]:
        """(alpha, eps, repetition) in output order."""
        return [
            (alpha, eps, rep)
            for alpha in self.alphas
            for eps in self.noise_levels
            for rep in range(self.repetitions)
        ]

    @property
    def num_rows(self) -> int:
        return len(self.grid) * len(self.betas)


def _search_all_betas(chain, config: ExperimentConfig, seed: int) -> dict[float, AggregationResult]:
    if not config.anneal:
        return {
            _beta_key(beta): best_of_restarts(
                chain, beta, config.num_aggregates, config.restarts, seed, config.max_iter,
            ).final
            for beta in config.betas
        }
    schedule = AnnealSchedule(
        beta_target=min(config.betas), delta=config.delta,
        max_iter=config.max_iter, keep_trajectory=True,
    )
    annealed = restart_then_anneal(chain, schedule, config.num_aggregates, config.restarts, seed)
    found = {_beta_key(r.beta): r for r in annealed.trajectory}
    for beta in config.betas:
        if _beta_key(beta) not in found:
            # Off the annealing grid: anneal down to this beta on its own
            off_grid = AnnealSchedule(beta_target=beta, delta=config.delta, max_iter=config.max_iter)
            found[_beta_key(beta)] = restart_then_anneal(
                chain, off_grid, config.num_aggregates, config.restarts, seed,
            ).final
    return found


def sweep_task(config: ExperimentConfig, index: int) -> list[dict]:
    """All rows for one (alpha, eps, repetition); failures become error rows."""
    alpha, eps, rep = config.grid[index]
    seq = np.random.SeedSequence([config.seed, index])
    rng = np.random.default_rng(seq)
    search_seed = int(seq.generate_state(1)[0])
    base = {"alpha": alpha, "eps": eps, "run": rep}

    start = time.perf_counter()
    try:
        block = block_stochastic(BlockChainSpec(config.block_sizes, alpha, eps, search_seed), rng)
        transition, planted = permute(
            block.transition, block.planted, random_permutation(block.spec.n, rng),
        )
        chain = validate_chain(transition)
        results = _search_all_betas(chain, config, search_seed)
    except MarkovAggError as exc:
        log.warning("sweep run alpha=%s eps=%s rep=%d failed: %s", alpha, eps, rep, exc)
        return [{**base, "beta": beta, "error": f"{type(exc).__name__}: {exc}"} for beta in config.betas]
    wall_ms = 1000.0 * (time.perf_counter() - start)

    rows = []
    for beta in config.betas:
        result = results[_beta_key(beta)]
        rows.append({
            **base,
            "beta": beta,
            "cost": result.report.c_beta,
            "ari": adjusted_rand_index(result.aggregation, planted),
            "sweeps": result.sweeps,
            "wall_ms": round(wall_ms, 3),
            "error": "",
        })
    return rows


def run_sweep(config: ExperimentConfig, path: str | Path | None = None, threads: int = 1) -> int:
    """Write the sweep CSV; returns the number of rows written.

    Runs may execute concurrently, but rows are written in grid order, one
    flush per run; apart from ``wall_ms`` the file does not depend on ``threads``.
    """
    if path is None:
        path = config.output_dir / "sweep.csv"
    total = len(config.grid)
    with SweepWriter(path) as writer:
        for done, rows in enumerate(
            iter_parallel(lambda i: sweep_task(config, i), total, threads), start=1,
        ):
            writer.write_run(rows)
            log.info("sweep: %d/%d runs written", done, total)
    return writer.rows_written


def format_sweep_summary(rows: Iterable[Mapping]) -> str:
    """Mean and standard deviation of ARI and cost per (alpha, eps, beta)."""
    groups: dict[tuple[float, float, float], list[tuple[float, float]]] = defaultdict(list)
    failures = 0
    for row in rows:
        if row.get("error"):
            failures += 1
            continue
        key = (float(row["alpha"]), float(row["eps"]), float(row["beta"]))
        groups[key].append((float(row["ari"]), float(row["cost"])))

    lines = [f"{'alpha':>6} {'eps':>5} {'beta':>5} {'n':>4} {'ARI mean':>9} {'ARI std':>8} {'cost mean':>11}"]
    for (alpha, eps, beta), values in sorted(groups.items()):
        aris = [a for a, _ in values]
        costs = [c for _, c in values]
        std = statistics.stdev(aris) if len(aris) > 1 else 0.0
        lines.append(
            f"{alpha:6.2f} {eps:5.2f} {beta:5.2f} {len(values):4d} "
            f"{statistics.fmean(aris):9.4f} {std:8.4f} {statistics.fmean(costs):11.6f}"
        )
    if failures:
        lines.append(f"{failures} failed rows omitted")
    return "\n".join(lines)


# ── Clustering ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class TrajectoryPoint:
    beta: float
    cost: float
    ari: float
    assignment: tuple[int, ...]


@dataclass(frozen=True)
class ClusteringResult:
    """Annealed aggregation of a similarity chain, scored against reference labels."""
    k_nearest: int
    result: AnnealResult
    ari: float
    trajectory: tuple[TrajectoryPoint, ...] = field(default=())

    def to_dict(self) -> dict:
        data = self.result.final.to_dict()
        data["k_nearest"] = self.k_nearest
        data["ari"] = self.ari
        data["trajectory"] = [
            {"beta": p.beta, "cost": p.cost, "ari": p.ari, "assignment": list(p.assignment)}
            for p in self.trajectory
        ]
        return data


def make_dataset(name: str, seed: int = DEFAULT_SEED) -> tuple[np.ndarray, np.ndarray]:
    """Points and reference labels of a named two-dimensional dataset."""
    if name not in DATASETS:
        raise InvalidSpec(f"unknown dataset {name!r}; choose from {sorted(DATASETS)}")
    return DATASETS[name](np.random.default_rng(seed))


def _score_trajectory(result: AnnealResult, reference) -> tuple[TrajectoryPoint, ...]:
    return tuple(
        TrajectoryPoint(
            beta=r.beta,
            cost=r.report.c_beta,
            ari=adjusted_rand_index(r.aggregation, reference) if reference is not None else float("nan"),
            assignment=r.aggregation.assignment,
        )
        for r in result.trajectory
    )


def run_clustering(
    points: np.ndarray,
    labels: np.ndarray | None = None,
    k_nearest: int | None = None,
    num_aggregates: int = 3,
    restarts: int = CLUSTER_RESTARTS,
    schedule: AnnealSchedule | None = None,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
) -> ClusteringResult:
    """Cluster points by aggregating their Gaussian-kernel random walk.

    ``k_nearest=None`` uses every other point for the scale parameter.
    """
    points = np.asarray(points, dtype=float)
    k = len(points) if k_nearest is None else k_nearest
    chain = similarity_chain(SimilaritySpec(points, k))
    schedule = schedule or AnnealSchedule(keep_trajectory=True)
    result = restart_then_anneal(chain, schedule, num_aggregates, restarts, seed, threads)
    ari = adjusted_rand_index(result.final.aggregation, labels) if labels is not None else float("nan")
    log.info("clustering k=%d: final ARI %.4f", k, ari)
    return ClusteringResult(k_nearest=k, result=result, ari=ari, trajectory=_score_trajectory(result, labels))


# ── Bigram chains ────────────────────────────────────────────────────


@dataclass(frozen=True)
class BigramResult:
    """Annealed aggregation of a letter bigram chain."""
    alphabet: tuple[str, ...]
    result: AnnealResult
    reference: AggregationMap
    trajectory: tuple[TrajectoryPoint, ...]

    def groups(self, assignment: Sequence[int]) -> list[str]:
        """Characters of each aggregate, in alphabet order."""
        k = max(assignment) + 1
        return ["".join(c for c, y in zip(self.alphabet, assignment) if y == a) for a in range(k)]

    def at_beta(self, beta: float) -> TrajectoryPoint:
        for point in self.trajectory:
            if _beta_key(point.beta) == _beta_key(beta):
                return point
        raise InvalidSpec(f"beta {beta} is not on the annealing grid")

    def to_dict(self) -> dict:
        return {
            "alphabet": list(self.alphabet),
            "trajectory": [
                {"beta": p.beta, "cost": p.cost, "ari_reference": p.ari, "groups": self.groups(p.assignment)}
                for p in self.trajectory
            ],
        }


def run_bigram(
    text: str,
    num_aggregates: int = BIGRAM_K,
    restarts: int = BIGRAM_RESTARTS,
    schedule: AnnealSchedule | None = None,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
) -> BigramResult:
    """Aggregate an already preprocessed text's bigram chain along a beta grid."""
    bigram = bigram_chain(text)
    schedule = schedule or AnnealSchedule(keep_trajectory=True)
    result = restart_then_anneal(bigram.chain, schedule, num_aggregates, restarts, seed, threads)
    reference = reference_partition(bigram.alphabet)
    log.info("bigram: %d characters, %d aggregates", len(bigram.alphabet), num_aggregates)
    return BigramResult(
        alphabet=bigram.alphabet,
        result=result,
        reference=reference,
        trajectory=_score_trajectory(result, reference),
    )


# ── Non-reversible worked example ────────────────────────────────────


@dataclass(frozen=True)
class ExampleReport:
    c_l: float
    c_p: float
    c_one: float
    reversible: bool
    betas: tuple[float, ...]
    costs: tuple[float, ...]

    @property
    def strictly_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.costs, self.costs[1:]))

    def to_dict(self) -> dict:
        return {
            "c_l": self.c_l,
            "c_p": self.c_p,
            "c_one": self.c_one,
            "reversible": self.reversible,
            "c_beta": dict(zip((f"{b:.1f}" for b in self.betas), self.costs)),
        }

    def format(self) -> str:
        lines = [
            f"C_L = {self.c_l:.4f}   C_P = {self.c_p:.4f}   C_1 = {self.c_one:.4f}",
            f"reversible: {self.reversible}   C_P < 2 C_L: {self.c_p < 2 * self.c_l}",
        ]
        lines += [f"  beta={b:.1f}  C_beta={c:+.6f}" for b, c in zip(self.betas, self.costs)]
        return "\n".join(lines)


def nonreversible_example() -> ExampleReport:
    """Three-state chain where C_P < 2 C_L, so C_beta falls as beta grows."""
    chain = validate_chain(EXAMPLE_TRANSITION)
    g = AggregationMap(EXAMPLE_PARTITION, 2)
    trend = beta_monotonicity(chain, g, SWEEP_BETAS)
    return ExampleReport(
        c_l=cost_lumpability(chain, g),
        c_p=cost_predictability(chain, g),
        c_one=information_bottleneck_cost(chain, g),
        reversible=is_reversible(chain),
        betas=trend.betas,
        costs=trend.costs,
    )


# ── Complexity ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class ScalingReport:
    sizes: tuple[int, ...]
    seconds_per_sweep: tuple[float, ...]
    slope: float  # log-log fit of time against n

    def format(self) -> str:
        lines = [f"{'n':>6} {'s/sweep':>12}"]
        lines += [f"{n:6d} {t:12.6f}" for n, t in zip(self.sizes, self.seconds_per_sweep)]
        lines.append(f"log-log slope: {self.slope:.3f}")
        return "\n".join(lines)


def measure_sweep_scaling(
    sizes: Sequence[int] = SCALING_SIZES,
    num_aggregates: int = SCALING_K,
    sweeps: int = SCALING_SWEEPS,
    seed: int = DEFAULT_SEED,
) -> ScalingReport:
    """Wall time of one scoring sweep on random dense chains of growing order.

    Each chain is first run to convergence at beta = 1. A sweep over the
    converged assignment scores all |Y| moves of every state and accepts
    none, so repeated sweeps do identical work; the best of ``sweeps`` is kept.
    """
    if len(sizes) < 2:
        raise InvalidSpec("need at least two sizes to fit a slope")
    if sweeps < 1:
        raise InvalidSpec("sweeps must be at least 1")
    rng = np.random.default_rng(seed)
    timings = []
    for n in sizes:
        chain = validate_chain(random_stochastic(n, n, rng))
        result = sgitma(chain, 1.0, num_aggregates, seed=seed)
        state = SweepState(chain, result.aggregation.assignment, num_aggregates, 1.0)
        samples = []
        for _ in range(sweeps):
            start = time.perf_counter()
            state.sweep()
            samples.append(time.perf_counter() - start)
        per_sweep = min(samples)
        log.info("scaling n=%d: %.4fs per sweep", n, per_sweep)
        timings.append(per_sweep)
    slope = float(np.polyfit(np.log(sizes), np.log(timings), 1)[0])
    return ScalingReport(sizes=tuple(sizes), seconds_per_sweep=tuple(timings), slope=slope)
