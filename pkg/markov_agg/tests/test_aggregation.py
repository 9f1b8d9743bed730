"""Tests for the sequential search, incremental move scoring and annealing."""

import math

import numpy as np
import pytest

from markov_agg.aggregation import (
    AnnealResult,
    AnnealSchedule,
    SweepState,
    anneal,
    best_of_restarts,
    random_surjective_assignment,
    restart_then_anneal,
    run_parallel,
    sgitma,
)
from markov_agg.constants import MOVE_ACCEPT_TOL
from markov_agg.evaluation import adjusted_rand_index
from markov_agg.exceptions import BetaOutOfRange, InvalidSpec, KTooLarge, NonSurjectiveInit
from markov_agg.generators import (
    BlockChainSpec,
    block_stochastic,
    permute,
    random_permutation,
    reversible_chain,
)
from markov_agg.info_measures import cost_beta, joint_tables
from markov_agg.markov_core import AggregationMap, validate_chain


def _make_chain(n: int, seed: int):
    rng = np.random.default_rng(seed)
    return validate_chain(rng.dirichlet(np.ones(n), size=n))


def _make_block(sizes, alpha, eps, seed):
    rng = np.random.default_rng(seed)
    block = block_stochastic(BlockChainSpec(sizes, alpha, eps, seed), rng)
    transition, planted = permute(block.transition, block.planted, random_permutation(block.spec.n, rng))
    return validate_chain(transition), planted


# ── Incremental scoring ──────────────────────────────────────────────


def test_move_delta_matches_recomputation():
    """Incremental deltas equal from-scratch cost differences over 10^4 random moves."""
    rng = np.random.default_rng(7)
    n, k, beta = 50, 5, 0.35
    chain = _make_chain(n, 7)
    assignment = random_surjective_assignment(n, k, rng)
    state = SweepState(chain, assignment, k, beta)
    current = cost_beta(chain, state.snapshot(), beta).c_beta

    for step in range(10_000):
        x = int(rng.integers(n))
        y = int(rng.integers(k))
        a = int(state.assignment[x])
        delta = state.move_delta(x, y)
        if y != a and state.sizes[a] == 1:
            assert delta == math.inf
            continue
        moved = state.assignment.copy()
        moved[x] = y
        after = cost_beta(chain, AggregationMap(tuple(moved.tolist()), k), beta).c_beta
        assert abs(delta - (after - current)) <= 1e-9, f"step {step}: {delta} vs {after - current}"
        if rng.random() < 0.5:
            state.apply_move(x, y)
            current = after
            assert abs(state.cost() - current) <= 1e-9, f"step {step}: cached cost drifted"


def test_cached_tables_track_assignment():
    """Cached joints stay within 1e-8 of fresh tables between refreshes."""
    rng = np.random.default_rng(1)
    n, k = 30, 4
    chain = _make_chain(n, 1)
    state = SweepState(chain, random_surjective_assignment(n, k, rng), k, 0.5)
    for _ in range(900):
        x = int(rng.integers(n))
        y = int(rng.integers(k))
        if state.move_delta(x, y) < math.inf:
            state.apply_move(x, y)
    _, jx1y2, jy1y2 = joint_tables(chain, state.snapshot())
    np.testing.assert_allclose(state.joint_x1_gy2, jx1y2, atol=1e-8)
    np.testing.assert_allclose(state.joint_gy1_gy2, jy1y2, atol=1e-8)
    np.testing.assert_array_equal(state.sizes, state.snapshot().block_sizes())


def test_emptying_move_is_rejected():
    chain = _make_chain(3, 0)
    state = SweepState(chain, [0, 1, 1], 2, 0.5)
    assert state.move_delta(0, 1) == math.inf
    assert state.move_delta(1, 1) == 0.0
    with pytest.raises(NonSurjectiveInit):
        state.apply_move(0, 1)


def test_block_scores_match_single_scores():
    """Scoring several states at once agrees with scoring them one by one."""
    rng = np.random.default_rng(3)
    n, k = 40, 4
    chain = _make_chain(n, 3)
    state = SweepState(chain, random_surjective_assignment(n, k, rng), k, 0.7)
    states = rng.permutation(n)[:25]
    block = state.move_deltas(states)
    assert block.shape == (25, k)
    for row, x in enumerate(states):
        for y in range(k):
            single = state.move_delta(int(x), y)
            if single == math.inf:
                assert block[row, y] == math.inf
            else:
                assert block[row, y] == pytest.approx(single, abs=1e-12)


def test_sweep_reports_accepted_moves():
    rng = np.random.default_rng(5)
    chain = _make_chain(30, 5)
    state = SweepState(chain, random_surjective_assignment(30, 3, rng), 3, 0.4)
    before = state.cost()
    moved = state.sweep()
    assert moved == state.accepted_moves
    assert state.cost() <= before + 1e-12
    while state.sweep():
        pass
    assert state.sweep() == 0


# ── sgitma ───────────────────────────────────────────────────────────


def test_sgitma_deterministic():
    chain = _make_chain(20, 4)
    a = sgitma(chain, 0.4, 3, seed=9)
    b = sgitma(chain, 0.4, 3, seed=9)
    assert a.aggregation == b.aggregation
    assert a.report == b.report


def test_sgitma_never_increases_cost():
    rng = np.random.default_rng(2)
    for seed in range(20):
        chain = _make_chain(15, seed)
        g0 = AggregationMap(tuple(random_surjective_assignment(15, 4, rng).tolist()), 4)
        for beta in (0.0, 0.5, 1.0):
            result = sgitma(chain, beta, 4, g_init=g0)
            assert result.report.c_beta <= cost_beta(chain, g0, beta).c_beta + 1e-12
            assert result.aggregation.is_surjective


def test_converged_result_is_local_optimum():
    """No single move lowers the cost of a converged result."""
    chain = _make_chain(25, 3)
    result = sgitma(chain, 0.6, 4, seed=1)
    assert result.converged
    state = SweepState(chain, result.aggregation.assignment, 4, 0.6)
    for x in range(chain.n):
        for y in range(4):
            assert state.move_delta(x, y) >= -MOVE_ACCEPT_TOL


def test_planted_partition_is_fixed_point_of_lumpability_search():
    """At beta = 0 the lumpable planted partition has zero cost and is kept."""
    chain, planted = _make_block((6, 4, 8), 0.3, 0.0, 5)
    result = sgitma(chain, 0.0, 3, g_init=planted)
    assert result.aggregation == planted
    assert result.report.c_l == pytest.approx(0.0, abs=1e-12)
    assert result.sweeps == 1


def test_sgitma_extreme_aggregate_counts():
    chain = _make_chain(6, 0)
    single = sgitma(chain, 0.5, 1, seed=0)
    assert single.aggregation.assignment == (0,) * 6
    assert single.converged
    full = sgitma(chain, 0.5, 6, seed=0)
    assert sorted(full.aggregation.assignment) == list(range(6))
    assert full.report.c_l == pytest.approx(0.0, abs=1e-12)
    assert full.report.c_p == pytest.approx(0.0, abs=1e-12)


def test_sgitma_argument_errors():
    chain = _make_chain(4, 0)
    with pytest.raises(KTooLarge):
        sgitma(chain, 0.5, 5)
    with pytest.raises(KTooLarge):
        sgitma(chain, 0.5, 0)
    with pytest.raises(NonSurjectiveInit):
        sgitma(chain, 0.5, 2, g_init=[0, 0, 0, 0])
    with pytest.raises(NonSurjectiveInit):
        sgitma(chain, 0.5, 2, g_init=[0, 1, 1])
    with pytest.raises(BetaOutOfRange):
        sgitma(chain, -0.1, 2)


def test_random_surjective_assignment():
    rng = np.random.default_rng(0)
    for n, k in [(5, 5), (10, 3), (3, 1), (40, 20)]:
        assignment = random_surjective_assignment(n, k, rng)
        assert np.bincount(assignment, minlength=k).min() > 0
    with pytest.raises(KTooLarge):
        random_surjective_assignment(3, 4, rng)


# ── Annealing and restarts ───────────────────────────────────────────


def test_schedule_grid():
    assert AnnealSchedule().grid() == [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0]
    assert AnnealSchedule(delta=0.3).grid() == [1.0, 0.7, 0.4, 0.1, 0.0]
    assert AnnealSchedule(beta_target=0.5, delta=0.25).grid() == [1.0, 0.75, 0.5]
    assert AnnealSchedule(beta_target=1.0).grid() == [1.0]
    assert len(AnnealSchedule(delta=0.05).grid()) == 21


def test_schedule_validation():
    with pytest.raises(InvalidSpec):
        AnnealSchedule(delta=0.0)
    with pytest.raises(BetaOutOfRange):
        AnnealSchedule(beta_target=1.5)
    with pytest.raises(InvalidSpec):
        AnnealSchedule(max_iter=0)


def test_anneal_trajectory_follows_grid():
    chain = _make_chain(12, 6)
    schedule = AnnealSchedule(beta_target=0.2, delta=0.2, keep_trajectory=True)
    result = anneal(chain, schedule, 3, seed=4)
    assert [r.beta for r in result.trajectory] == schedule.grid()
    assert result.final is result.trajectory[-1]
    assert result.final.beta == 0.2
    assert "trajectory" in result.to_dict()


def test_best_of_restarts_picks_lowest_cost():
    chain = _make_chain(15, 8)
    result = best_of_restarts(chain, 0.3, 3, n_restarts=6, base_seed=100)
    assert len(result.runs) == 6
    assert result.costs[result.best_index] == min(result.costs)
    assert result.best_index == result.costs.index(min(result.costs))
    assert [r.seed for r in result.runs] == list(range(100, 106))
    data = result.to_dict()
    assert data["best_restart"] == result.best_index
    assert len(data["restart_costs"]) == 6


def test_restarts_independent_of_thread_count():
    chain = _make_chain(15, 9)
    serial = best_of_restarts(chain, 0.5, 3, n_restarts=5, threads=1)
    threaded = best_of_restarts(chain, 0.5, 3, n_restarts=5, threads=3)
    assert serial.costs == threaded.costs
    assert serial.aggregation == threaded.aggregation


def test_restarts_with_schedule_return_anneal_results():
    chain = _make_chain(10, 2)
    result = best_of_restarts(chain, AnnealSchedule(beta_target=0.5, delta=0.25), 2, n_restarts=3)
    assert all(isinstance(r, AnnealResult) for r in result.runs)
    assert result.final.beta == 0.5


def test_run_parallel_preserves_order():
    assert run_parallel(lambda i: i * i, 8, threads=4) == [i * i for i in range(8)]


def test_annealing_recovers_planted_partition_under_noise():
    """Strong diagonal blocks survive heavy noise: annealing finds them exactly."""
    chain, planted = _make_block((25, 25, 50), 0.95, 0.4, 11)
    schedule = AnnealSchedule(beta_target=0.5, delta=0.1)
    result = restart_then_anneal(chain, schedule, 3, n_restarts=5, base_seed=0)
    assert adjusted_rand_index(result.final.aggregation, planted) >= 0.95


def _plain_and_annealed_ari(alpha, eps, beta, seeds):
    plain, annealed = [], []
    schedule = AnnealSchedule(beta_target=beta, delta=0.1)
    for seed in seeds:
        chain, planted = _make_block((25, 25, 50), alpha, eps, seed)
        plain.append(adjusted_rand_index(sgitma(chain, beta, 3, seed=seed).aggregation, planted))
        result = restart_then_anneal(chain, schedule, 3, n_restarts=5, base_seed=seed)
        annealed.append(adjusted_rand_index(result.final.aggregation, planted))
    return float(np.mean(plain)), float(np.mean(annealed))


def test_annealing_rescues_lumpability_search_without_self_blocks():
    """alpha = 0, no noise: a cold start at beta = 0 stalls, annealing from beta = 1 does not."""
    plain, annealed = _plain_and_annealed_ari(0.0, 0.0, 0.0, range(4))
    assert annealed >= 0.9, annealed
    assert plain <= annealed - 0.3, (plain, annealed)


def test_annealing_beats_cold_start_under_noise():
    plain, annealed = _plain_and_annealed_ari(0.0, 0.4, 0.0, range(8))
    assert plain <= annealed - 0.3, (plain, annealed)


def test_annealed_costs_decrease_on_reversible_chain():
    """C_P >= 2 C_L holds for every aggregation, so each warm start only lowers the cost."""
    rng = np.random.default_rng(12)
    chain = reversible_chain(30, rng)
    schedule = AnnealSchedule(beta_target=0.0, delta=0.1, keep_trajectory=True)
    result = anneal(chain, schedule, 4, seed=3)
    costs = [r.report.c_beta for r in result.trajectory]
    for r in result.trajectory:
        assert r.report.c_p >= 2.0 * r.report.c_l - 1e-12
    for before, after in zip(costs, costs[1:]):
        assert after <= before + 1e-12, costs
