"""Information-theoretic quantities for Markov chains and their aggregations.

Everything is in bits. Zero-probability terms follow 0 log 0 = 0 and
0 log(0/0) = 0; a positive mass against a zero reference gives ``math.inf``.
Conditional entropies are always computed from joint tables term by term,
never as differences of large entropies.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import entr, rel_entr

from markov_agg.constants import COST_FORMULA_TOL, MARGINAL_TOL, MARKOV_GAP_MAX_WORDS, PMF_TOL
from markov_agg.exceptions import BetaOutOfRange, DimensionMismatch, InvalidPMF, InvalidSpec
from markov_agg.markov_core import (
    AggregationMap,
    MarkovChain,
    aggregate_chain,
    lift,
    require_surjective,
)

log = logging.getLogger(__name__)

LN2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class JointPMF:
    """Joint PMF p(A, B) of two discrete variables with its marginals."""
    table: np.ndarray
    row_marginal: np.ndarray  # p(A)
    col_marginal: np.ndarray  # p(B)

    @classmethod
    def from_table(cls, table: np.ndarray) -> JointPMF:
        t = np.asarray(table, dtype=float)
        if t.ndim != 2:
            raise InvalidPMF(f"joint table must be 2-D, got {t.ndim}-D")
        _check_mass(t)
        return cls(table=t, row_marginal=t.sum(axis=1), col_marginal=t.sum(axis=0))

    def __post_init__(self) -> None:
        if self.row_marginal.shape != (self.table.shape[0],) or self.col_marginal.shape != (
            self.table.shape[1],
        ):
            raise InvalidPMF("marginal shapes do not match the joint table")
        if np.abs(self.table.sum(axis=1) - self.row_marginal).max(initial=0.0) > MARGINAL_TOL or (
            np.abs(self.table.sum(axis=0) - self.col_marginal).max(initial=0.0) > MARGINAL_TOL
        ):
            raise InvalidPMF("marginals do not match the joint table")

    def transposed(self) -> JointPMF:
        return JointPMF(self.table.T, self.col_marginal, self.row_marginal)


@dataclass(frozen=True)
class CostReport:
    """C_L, C_P, C_beta of one aggregation, with their ingredients."""
    beta: float
    c_l: float
    c_p: float
    c_beta: float
    i_x1x2: float
    i_x1gy2: float
    i_gy1gy2: float
    epsilon_bisim: float

    @property
    def c_beta_three_mi(self) -> float:
        """C_beta from the three mutual informations alone."""
        return (
            self.beta * self.i_x1x2
            + (1.0 - 2.0 * self.beta) * self.i_x1gy2
            - (1.0 - self.beta) * self.i_gy1gy2
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _check_mass(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)) or np.any(values < 0.0):
        raise InvalidPMF("probabilities must be finite and non-negative")
    total = values.sum()
    if abs(total - 1.0) > PMF_TOL:
        raise InvalidPMF(f"total mass is {total!r}, not 1")


def check_beta(beta: float) -> float:
    """Return beta as a float, or raise BetaOutOfRange outside [0, 1]."""
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise BetaOutOfRange(f"beta must lie in [0, 1], got {beta}")
    return beta


# ── Entropies and mutual information ─────────────────────────────────


def entropy(p) -> float:
    """H(p) in bits."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise InvalidPMF("entropy expects a probability vector")
    _check_mass(p)
    return float(entr(p).sum() / LN2)


def conditional_entropy(j: JointPMF) -> float:
    """H(B | A) for the joint p(A, B)."""
    terms = rel_entr(j.table, j.row_marginal[:, None])
    return float(-terms.sum() / LN2)


def mutual_information(j: JointPMF) -> float:
    """I(A; B) = H(B) - H(B | A)."""
    return entropy(j.col_marginal) - conditional_entropy(j)


def kldr_markov(p_prime: MarkovChain, p) -> float:
    """KL divergence rate between Markov chains with P' and P (bits/step).

    Returns ``math.inf`` when P' puts mass where P has none.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != p_prime.transition.shape:
        raise DimensionMismatch(
            f"transition shapes differ: {p_prime.transition.shape} vs {p.shape}"
        )
    per_state = rel_entr(p_prime.transition, p).sum(axis=1)
    value = float(p_prime.stationary @ per_state / LN2)
    return value if math.isfinite(value) else math.inf


def entropy_rate(chain: MarkovChain) -> float:
    """H(X2 | X1) of a stationary chain, in bits."""
    return conditional_entropy(JointPMF.from_table(chain.joint()))


def redundancy_rate(chain: MarkovChain) -> float:
    """I(X1; X2): what one step of the past tells about the next state."""
    return mutual_information(JointPMF.from_table(chain.joint()))


# ── Joint tables of an aggregation ───────────────────────────────────


def joint_tables(
    chain: MarkovChain, g: AggregationMap,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """p(X1, X2), p(X1, g(X2)) and p(g(X1), g(X2))."""
    w = lift(g, chain.n)
    j12 = chain.joint()
    jx1y2 = j12 @ w
    jy1y2 = w.T @ jx1y2
    return j12, jx1y2, jy1y2


def _mi(table: np.ndarray) -> float:
    return mutual_information(JointPMF.from_table(table))


def _h_cond(table: np.ndarray) -> float:
    return conditional_entropy(JointPMF.from_table(table))


# ── Costs ────────────────────────────────────────────────────────────


def cost_lumpability(chain: MarkovChain, g: AggregationMap) -> float:
    """C_L = H(Y2 | Y1) - H(Y2 | X1)."""
    require_surjective(g)
    _, jx1y2, jy1y2 = joint_tables(chain, g)
    return _h_cond(jy1y2) - _h_cond(jx1y2)


def cost_predictability(chain: MarkovChain, g: AggregationMap) -> float:
    """C_P = I(X1; X2) - I(Y1; Y2)."""
    require_surjective(g)
    j12, _, jy1y2 = joint_tables(chain, g)
    return _mi(j12) - _mi(jy1y2)


def cost_beta(chain: MarkovChain, g: AggregationMap, beta: float) -> CostReport:
    """Full cost report for C_beta = (1 - 2 beta) C_L + beta C_P."""
    beta = check_beta(beta)
    require_surjective(g)
    j12, jx1y2, jy1y2 = joint_tables(chain, g)

    c_l = _h_cond(jy1y2) - _h_cond(jx1y2)
    i_x1x2 = _mi(j12)
    i_x1gy2 = _mi(jx1y2)
    i_gy1gy2 = _mi(jy1y2)
    c_p = i_x1x2 - i_gy1gy2
    report = CostReport(
        beta=beta,
        c_l=c_l,
        c_p=c_p,
        c_beta=(1.0 - 2.0 * beta) * c_l + beta * c_p,
        i_x1x2=i_x1x2,
        i_x1gy2=i_x1gy2,
        i_gy1gy2=i_gy1gy2,
        epsilon_bisim=_epsilon(c_l, chain),
    )
    gap = abs(report.c_beta - report.c_beta_three_mi)
    if gap > COST_FORMULA_TOL:
        log.warning("C_beta formulas disagree by %.3g at beta=%s", gap, beta)
    return report


def information_bottleneck_cost(chain: MarkovChain, g: AggregationMap) -> float:
    """I(X1; X2 | Y2) by direct summation over p(x1, x2)."""
    require_surjective(g)
    j12, jx1y2, _ = joint_tables(chain, g)
    a = g.as_array()
    mu = chain.stationary
    nu = mu @ lift(g, chain.n)
    # p(x1, x2 | y2) / (p(x1 | y2) p(x2 | y2)) with y2 = g(x2)
    reference = jx1y2[:, a] * (mu / nu[a])[None, :]
    return float(rel_entr(j12, reference).sum() / LN2)


def per_state_divergence(chain: MarkovChain, g: AggregationMap) -> np.ndarray:
    """D(R_x || Q_g(x)) for every state x; mu-weighted they sum to C_L."""
    agg = aggregate_chain(chain, g)
    return rel_entr(agg.r, agg.q[g.as_array()]).sum(axis=1) / LN2


def _epsilon(c_l: float, chain: MarkovChain) -> float:
    return math.sqrt(LN2 * max(c_l, 0.0) / (2.0 * float(chain.stationary.min())))


def bisimulation_epsilon(chain: MarkovChain, g: AggregationMap) -> float:
    """epsilon such that X and the aggregated chain are epsilon-bisimilar.

    C_L is in bits; the ln 2 factor converts it to nats for Pinsker's inequality.
    """
    return _epsilon(cost_lumpability(chain, g), chain)


# ── Finite-order Markovity of the observed process ───────────────────


def _block_entropies(chain: MarkovChain, g: AggregationMap, max_length: int) -> list[float]:
    """[H(Y_1), H(Y_1^2), ..., H(Y_1^max_length)] by forward propagation."""
    if max_length < 1:
        raise InvalidSpec("block length must be at least 1")
    masks = lift(g, chain.n).T  # K x n
    k = g.num_aggregates

    # alphas[w, x] = P(Y_1^t = w, X_t = x) for every observed word w of length t
    alphas = masks * chain.stationary[None, :]
    entropies = []
    for length in range(1, max_length + 1):
        if length > 1:
            if alphas.shape[0] * k > MARKOV_GAP_MAX_WORDS:
                raise InvalidSpec(
                    f"{alphas.shape[0] * k} words of length {length} exceed "
                    f"the enumeration cap of {MARKOV_GAP_MAX_WORDS}"
                )
            step = alphas @ chain.transition
            alphas = (step[:, None, :] * masks[None, :, :]).reshape(-1, chain.n)
        alphas = alphas[alphas.sum(axis=1) > 0.0]
        word_probs = alphas.sum(axis=1)
        entropies.append(float(entr(word_probs).sum() / LN2))
    return entropies


def block_entropy(chain: MarkovChain, g: AggregationMap, length: int) -> float:
    """H(Y_1, ..., Y_length) of the observed process."""
    return _block_entropies(chain, g, length)[-1]


def markov_gap(chain: MarkovChain, g: AggregationMap, order: int) -> float:
    """H(Y2 | Y1) - H(Y_order | Y_1^(order-1)).

    Non-negative, non-decreasing in ``order`` and a lower bound on the KL
    divergence rate between Y and its Markov approximation. Zero for every
    order when Y is Markov.
    """
    if order < 2:
        raise InvalidSpec("order must be at least 2")
    require_surjective(g)
    h = _block_entropies(chain, g, order)
    first_order = h[1] - h[0]
    if order == 2:
        return 0.0
    return first_order - (h[order - 1] - h[order - 2])
