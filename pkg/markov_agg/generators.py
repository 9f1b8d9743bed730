"""Experiment inputs: block-stochastic chains, similarity chains, bigram chains.

All random draws come from an explicit ``numpy.random.Generator``; ``BlockChainSpec.seed``
builds one when none is passed. Same seed, same chain.
"""

from __future__ import annotations

import re
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from markov_agg.constants import (
    CIRCLE_NOISE_STD,
    CIRCLE_POINTS,
    CIRCLE_RADII,
    DEFAULT_SEED,
    GAUSSIAN_CLUSTER_CENTERS,
    GAUSSIAN_CLUSTER_SIZES,
    GAUSSIAN_CLUSTER_STDS,
    HEADING_PATTERN,
)
from markov_agg.exceptions import (
    DegeneratePoints,
    InvalidSpec,
    MalformedInput,
    NotAPermutation,
    NotIrreducible,
)
from markov_agg.markov_core import AggregationMap, MarkovChain, is_irreducible, validate_chain

FOLD_MODES = ("none", "accents", "ascii")

# Replacements applied before ASCII folding drops everything non-ASCII
_ASCII_FALLBACK = {
    "‘": "'", "’": "'", "“": '"', "”": '"',
    "—": "-", "–": "-", "…": "...",
}


def random_stochastic(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Row-stochastic matrix with rows uniform on the simplex (Dirichlet(1))."""
    return rng.dirichlet(np.ones(cols), size=rows)


def random_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random relabeling of 0..n-1."""
    return rng.permutation(n)


# ── Block-stochastic chains ──────────────────────────────────────────


@dataclass(frozen=True)
class BlockChainSpec:
    """Parameters of a quasi-lumpable / nearly completely decomposable chain."""
    block_sizes: tuple[int, ...]
    alpha: float
    eps_noise: float
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        object.__setattr__(self, "block_sizes", tuple(int(s) for s in self.block_sizes))
        if len(self.block_sizes) < 2:
            raise InvalidSpec("need at least two blocks")
        if min(self.block_sizes) < 1:
            raise InvalidSpec(f"block sizes must be positive, got {self.block_sizes}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidSpec(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.eps_noise <= 1.0:
            raise InvalidSpec(f"eps_noise must lie in [0, 1], got {self.eps_noise}")

    @property
    def num_blocks(self) -> int:
        return len(self.block_sizes)

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    def planted(self) -> AggregationMap:
        labels = np.repeat(np.arange(self.num_blocks), self.block_sizes)
        return AggregationMap(tuple(labels.tolist()), self.num_blocks)


@dataclass(frozen=True, eq=False)
class BlockChain:
    """A generated block chain with the matrices it was assembled from."""
    spec: BlockChainSpec
    transition: np.ndarray  # P = (1 - eps) P' + eps E
    planted: AggregationMap
    mixing: np.ndarray      # A = (1 - alpha) A' + alpha I
    noise: np.ndarray       # E

    def chain(self) -> MarkovChain:
        return validate_chain(self.transition)


def block_stochastic(spec: BlockChainSpec, rng: np.random.Generator | None = None) -> BlockChain:
    """Assemble P' from blocks a_ij P'_ij, then mix in noise E."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    m = spec.num_blocks
    mixing = (1.0 - spec.alpha) * random_stochastic(m, m, rng) + spec.alpha * np.eye(m)
    blocks = [
        [mixing[i, j] * random_stochastic(n_i, n_j, rng) for j, n_j in enumerate(spec.block_sizes)]
        for i, n_i in enumerate(spec.block_sizes)
    ]
    p_block = np.block(blocks)
    noise = random_stochastic(spec.n, spec.n, rng)
    transition = (1.0 - spec.eps_noise) * p_block + spec.eps_noise * noise
    return BlockChain(
        spec=spec,
        transition=transition,
        planted=spec.planted(),
        mixing=mixing,
        noise=noise,
    )


def permute(
    transition: np.ndarray, g: AggregationMap, permutation,
) -> tuple[np.ndarray, AggregationMap]:
    """Relabel states: P'[i, j] = P[pi(i), pi(j)] and g'(i) = g(pi(i))."""
    perm = np.asarray(permutation)
    n = np.asarray(transition).shape[0]
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise NotAPermutation(f"not a permutation of 0..{n - 1}")
    p = np.asarray(transition)[np.ix_(perm, perm)]
    g_perm = AggregationMap(tuple(g.as_array()[perm].tolist()), g.num_aggregates)
    return p, g_perm


def reversible_chain(n: int, rng: np.random.Generator) -> MarkovChain:
    """Random reversible chain: P = D^-1 S for a symmetric positive S."""
    weights = rng.random((n, n))
    symmetric = weights + weights.T
    return validate_chain(symmetric / symmetric.sum(axis=1, keepdims=True))


# ── Similarity chains ────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class SimilaritySpec:
    """A point cloud and the neighbor count used for the kernel scale."""
    points: np.ndarray
    k_nearest: int

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise DegeneratePoints("need at least two points")
        if not 1 <= self.k_nearest <= pts.shape[0]:
            raise InvalidSpec(f"k_nearest must lie in [1, {pts.shape[0]}], got {self.k_nearest}")
        object.__setattr__(self, "points", pts)


def scale_parameter(points: np.ndarray, k_nearest: int) -> float:
    """Mean over points of the mean squared distance to the k nearest others.

    A point is never its own neighbor, so k = number of points means all
    other points.
    """
    d2 = cdist(points, points, "sqeuclidean")
    np.fill_diagonal(d2, np.inf)
    k = min(k_nearest, len(points) - 1)
    nearest = np.sort(d2, axis=1)[:, :k]
    return float(nearest.mean(axis=1).mean())


def similarity_chain(spec: SimilaritySpec) -> MarkovChain:
    """P[i, j] proportional to exp(-|x_i - x_j|^2 / sigma_k), self-loops included."""
    sigma = scale_parameter(spec.points, spec.k_nearest)
    if not sigma > 0.0:
        raise DegeneratePoints("all points coincide; sigma_k is zero")
    weights = np.exp(-cdist(spec.points, spec.points, "sqeuclidean") / sigma)
    return validate_chain(weights / weights.sum(axis=1, keepdims=True))


def three_gaussians(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Three linearly separable 2-D Gaussian clusters and their labels."""
    points, labels = [], []
    for label, (size, std, center) in enumerate(
        zip(GAUSSIAN_CLUSTER_SIZES, GAUSSIAN_CLUSTER_STDS, GAUSSIAN_CLUSTER_CENTERS)
    ):
        points.append(rng.normal(0.0, std, size=(size, 2)) + np.array([center, 0.0]))
        labels.extend([label] * size)
    return np.vstack(points), np.array(labels)


def three_circles(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Three noisy concentric circles and their labels."""
    points, labels = [], []
    for label, radius in enumerate(CIRCLE_RADII):
        angles = rng.uniform(0.0, 2.0 * np.pi, size=CIRCLE_POINTS)
        ring = radius * np.column_stack([np.cos(angles), np.sin(angles)])
        points.append(ring + rng.normal(0.0, CIRCLE_NOISE_STD, size=ring.shape))
        labels.extend([label] * CIRCLE_POINTS)
    return np.vstack(points), np.array(labels)


# ── Bigram chains ────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class BigramChain:
    """Letter bigram chain: state i is the character ``alphabet[i]``."""
    chain: MarkovChain
    alphabet: tuple[str, ...]
    counts: np.ndarray = field(repr=False)


def preprocess_text(
    text: str,
    *,
    strip_headings: bool = True,
    strip_linebreaks: bool = True,
    strip_underscores: bool = True,
    fold: str = "accents",
) -> str:
    """Clean a corpus before counting bigrams.

    ``fold``: "none" keeps characters, "accents" strips diacritics (é -> e),
    "ascii" additionally drops what has no ASCII equivalent.
    """
    if fold not in FOLD_MODES:
        raise MalformedInput(f"fold must be one of {FOLD_MODES}, got {fold!r}")
    if strip_headings:
        text = re.sub(HEADING_PATTERN, "", text, flags=re.MULTILINE)
    if strip_linebreaks:
        text = re.sub(r"\s*\n\s*", " ", text.strip())
    if strip_underscores:
        text = text.replace("_", "")
    if fold != "none":
        decomposed = unicodedata.normalize("NFKD", text)
        text = "".join(c for c in decomposed if not unicodedata.combining(c))
    if fold == "ascii":
        text = "".join(_ASCII_FALLBACK.get(c, c) for c in text)
        text = text.encode("ascii", errors="ignore").decode("ascii")
    return text


def bigram_chain(text: str) -> BigramChain:
    """Row-normalized bigram counts, with one wraparound count last -> first."""
    if not text:
        raise MalformedInput("text is empty")
    alphabet = tuple(sorted(set(text)))
    index = {c: i for i, c in enumerate(alphabet)}
    pairs = Counter(zip(text, text[1:] + text[0]))
    counts = np.zeros((len(alphabet), len(alphabet)))
    for (a, b), count in pairs.items():
        counts[index[a], index[b]] = count
    if not is_irreducible(counts):
        raise NotIrreducible("character transition graph is not strongly connected")
    chain = validate_chain(counts / counts.sum(axis=1, keepdims=True), states=alphabet)
    return BigramChain(chain=chain, alphabet=alphabet, counts=counts)


def reference_partition(alphabet) -> AggregationMap:
    """Seven-class reference grouping of characters.

    Upper-case vowels, upper-case consonants, lower-case vowels, lower-case
    consonants, digits, blank space, everything else. Classes absent from the
    alphabet are dropped so the map stays surjective.
    """
    def char_class(c: str) -> int:
        if c in "AEIOU":
            return 0
        if c in string.ascii_uppercase:
            return 1
        if c in "aeiou":
            return 2
        if c in string.ascii_lowercase:
            return 3
        if c in string.digits:
            return 4
        if c == " ":
            return 5
        return 6

    classes = [char_class(c) for c in alphabet]
    present = sorted(set(classes))
    relabel = {cls: i for i, cls in enumerate(present)}
    return AggregationMap(tuple(relabel[c] for c in classes), len(present))
