"""Tests for chain validation, stationary distributions and the aggregated chain."""

import numpy as np
import pytest

from markov_agg.constants import EXAMPLE_PARTITION, EXAMPLE_TRANSITION
from markov_agg.exceptions import (
    DimensionMismatch,
    EmptyAggregate,
    MalformedInput,
    NonStochastic,
    NoUniqueSolution,
    Reducible,
)
from markov_agg.markov_core import (
    AggregationMap,
    aggregate_chain,
    is_irreducible,
    lift,
    stationary_distribution,
    validate_chain,
)


def _make_random_chain(n: int, seed: int):
    rng = np.random.default_rng(seed)
    return validate_chain(rng.dirichlet(np.ones(n), size=n))


def test_two_state_stationary():
    """Two-state chain has the closed-form stationary vector."""
    chain = validate_chain([[0.7, 0.3], [0.1, 0.9]])
    np.testing.assert_allclose(chain.stationary, [0.25, 0.75], atol=1e-12)


def test_example_stationary_is_fixed_point():
    """mu^T P = mu^T for the three-state example."""
    chain = validate_chain(EXAMPLE_TRANSITION)
    np.testing.assert_allclose(chain.stationary @ chain.transition, chain.stationary, atol=1e-12)
    assert chain.stationary.sum() == pytest.approx(1.0)


def test_single_state_chain():
    chain = validate_chain([[1.0]])
    assert chain.n == 1
    np.testing.assert_allclose(chain.stationary, [1.0])


def test_periodic_chain_accepted():
    """A period-2 chain has a unique stationary vector and is valid."""
    chain = validate_chain([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(chain.stationary, [0.5, 0.5])


def test_states_default_and_custom():
    assert validate_chain([[0.5, 0.5], [0.5, 0.5]]).states == ("0", "1")
    assert validate_chain([[0.5, 0.5], [0.5, 0.5]], ["a", "b"]).states == ("a", "b")


def test_rows_within_tolerance_renormalized():
    chain = validate_chain([[0.5, 0.5 + 1e-9], [0.5, 0.5]])
    np.testing.assert_allclose(chain.transition.sum(axis=1), 1.0, atol=1e-15)


def test_unit_entry_within_tolerance_accepted():
    chain = validate_chain([[0.0, 1.0 + 5e-9], [0.5, 0.5]])
    assert chain.transition[0, 1] == pytest.approx(1.0, abs=1e-15)
    assert chain.transition.max() <= 1.0


def test_validated_arrays_read_only():
    chain = validate_chain([[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(ValueError):
        chain.transition[0, 0] = 1.0


@pytest.mark.parametrize(
    "matrix",
    [
        [[0.5, 0.6], [0.5, 0.5]],       # row sum
        [[1.2, -0.2], [0.5, 0.5]],      # range
        [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0]],  # not square
        [[np.nan, 1.0], [0.5, 0.5]],
    ],
)
def test_non_stochastic_rejected(matrix):
    with pytest.raises(NonStochastic):
        validate_chain(matrix)


def test_label_errors():
    with pytest.raises(DimensionMismatch):
        validate_chain([[0.5, 0.5], [0.5, 0.5]], ["a"])
    with pytest.raises(MalformedInput):
        validate_chain([[0.5, 0.5], [0.5, 0.5]], ["a", "a"])


def test_transient_state_reducible():
    """State 0 is transient, so it has zero stationary mass."""
    with pytest.raises(Reducible):
        validate_chain([[0.5, 0.5], [0.0, 1.0]])


def test_two_closed_classes_no_unique_solution():
    with pytest.raises(NoUniqueSolution):
        validate_chain(np.eye(2))


def test_nearly_decomposable_chain_accurate():
    """Tiny inter-block weights still yield an accurate stationary vector."""
    eps = 1e-12
    p = np.array([
        [0.5 - eps, 0.5, 0.0, eps],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
        [eps, 0.0, 0.5, 0.5 - eps],
    ])
    chain = validate_chain(p)
    np.testing.assert_allclose(chain.stationary, [0.25] * 4, rtol=1e-9)


def test_power_iteration_matches_direct():
    """The iterative fallback agrees with the direct solve."""
    rng = np.random.default_rng(3)
    p = rng.dirichlet(np.ones(15), size=15)
    direct = stationary_distribution(p)
    iterative = stationary_distribution(p, direct_max_order=5)
    np.testing.assert_allclose(direct, iterative, atol=1e-10)


def test_is_irreducible():
    assert is_irreducible(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not is_irreducible(np.array([[1.0, 0.0], [0.5, 0.5]]))


# ── Aggregation maps ─────────────────────────────────────────────────


def test_aggregation_map_validation():
    with pytest.raises(MalformedInput):
        AggregationMap((0, 2), 2)
    with pytest.raises(MalformedInput):
        AggregationMap((0,), 0)


def test_aggregation_map_helpers():
    g = AggregationMap.from_labels(["b", "a", "b", "c"])
    assert g.assignment == (0, 1, 0, 2)
    assert g.num_aggregates == 3
    assert g.is_surjective
    assert AggregationMap.identity(3).assignment == (0, 1, 2)
    assert AggregationMap.constant(3).num_aggregates == 1
    assert not AggregationMap((0, 0), 2).is_surjective
    assert AggregationMap((2, 0, 2), 3).canonical().assignment == (0, 1, 0)
    np.testing.assert_array_equal(AggregationMap((1, 0, 1), 2).block_sizes(), [1, 2])


def test_lift_is_indicator():
    w = lift(AggregationMap((0, 1, 1), 2), 3)
    np.testing.assert_array_equal(w, [[1, 0], [0, 1], [0, 1]])
    with pytest.raises(DimensionMismatch):
        lift(AggregationMap((0, 1), 2), 3)


# ── Aggregated chain ─────────────────────────────────────────────────


def test_aggregated_chain_is_stochastic():
    for seed in range(20):
        chain = _make_random_chain(8, seed)
        g = AggregationMap((0, 1, 2, 0, 1, 2, 0, 1), 3)
        agg = aggregate_chain(chain, g)
        np.testing.assert_allclose(agg.q.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(agg.nu @ agg.q, agg.nu, atol=1e-12)
        np.testing.assert_allclose(agg.u @ chain.transition @ lift(g, 8), agg.q, atol=1e-12)
        np.testing.assert_allclose(agg.r, chain.transition @ lift(g, 8), atol=1e-15)


def test_identity_aggregation_reproduces_chain():
    chain = _make_random_chain(5, 0)
    agg = aggregate_chain(chain, AggregationMap.identity(5))
    np.testing.assert_allclose(agg.q, chain.transition, atol=1e-12)
    np.testing.assert_allclose(agg.nu, chain.stationary, atol=1e-15)


def test_constant_aggregation():
    agg = aggregate_chain(_make_random_chain(4, 1), AggregationMap.constant(4))
    np.testing.assert_allclose(agg.q, [[1.0]])
    np.testing.assert_allclose(agg.nu, [1.0])


def test_example_aggregated_chain():
    """Q rows of the example follow from mu-weighted merging of states 1 and 2."""
    chain = validate_chain(EXAMPLE_TRANSITION)
    agg = aggregate_chain(chain, AggregationMap(EXAMPLE_PARTITION, 2))
    mu = chain.stationary
    p = chain.transition
    stay = (mu[1] * (p[1, 1] + p[1, 2]) + mu[2] * (p[2, 1] + p[2, 2])) / (mu[1] + mu[2])
    assert agg.q[0, 0] == pytest.approx(0.4)
    assert agg.q[1, 1] == pytest.approx(stay, abs=1e-12)


def test_empty_aggregate_rejected():
    with pytest.raises(EmptyAggregate):
        aggregate_chain(_make_random_chain(3, 0), AggregationMap((0, 0, 1), 3))
