"""markov_agg: information-theoretic aggregation of finite Markov chains."""

from markov_agg.aggregation import (
    AggregationResult,
    AnnealResult,
    AnnealSchedule,
    RestartResult,
    anneal,
    best_of_restarts,
    restart_then_anneal,
    sgitma,
)
from markov_agg.exceptions import MarkovAggError
from markov_agg.info_measures import (
    CostReport,
    cost_beta,
    cost_lumpability,
    cost_predictability,
    kldr_markov,
)
from markov_agg.markov_core import (
    AggregatedChain,
    AggregationMap,
    MarkovChain,
    aggregate_chain,
    validate_chain,
)

__all__ = [
    "AggregatedChain",
    "AggregationMap",
    "AggregationResult",
    "AnnealResult",
    "AnnealSchedule",
    "CostReport",
    "MarkovAggError",
    "MarkovChain",
    "RestartResult",
    "aggregate_chain",
    "anneal",
    "best_of_restarts",
    "cost_beta",
    "cost_lumpability",
    "cost_predictability",
    "kldr_markov",
    "restart_then_anneal",
    "sgitma",
    "validate_chain",
]
