"""Experiment drivers at reduced scale."""

import math

import numpy as np
import pytest

from markov_agg.aggregation import AnnealSchedule, sgitma
from markov_agg.constants import BIGRAM_BETA
from markov_agg.evaluation import adjusted_rand_index
from markov_agg.exceptions import BetaOutOfRange, InvalidSpec
from markov_agg.experiments import (
    ExperimentConfig,
    format_sweep_summary,
    make_dataset,
    measure_sweep_scaling,
    nonreversible_example,
    run_bigram,
    run_clustering,
    run_sweep,
)
from markov_agg.generators import SimilaritySpec, similarity_chain
from markov_agg.info_measures import cost_beta
from markov_agg.markov_core import AggregationMap
from markov_agg.serialize import read_sweep


def _small_config(**overrides):
    settings = dict(
        alphas=(0.95,),
        noise_levels=(0.0, 0.4),
        betas=(1.0, 0.5, 0.0),
        block_sizes=(5, 5, 10),
        repetitions=2,
        restarts=2,
        seed=7,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def _syllable_text(seed: int, words: int = 3000) -> str:
    """Consonant-vowel syllables, an optional nasal coda, words separated by spaces.

    Onsets, vowels, codas and the space each have their own successor
    distribution, so a four-way split by character class is the natural one.
    """
    rng = np.random.default_rng(seed)
    onsets, vowels, codas = list("bdkpst"), list("aeiou"), list("mn")
    out = []
    for _ in range(words):
        syllables = int(rng.integers(1, 4))
        word = "".join(str(rng.choice(onsets)) + str(rng.choice(vowels)) for _ in range(syllables))
        if rng.random() < 0.5:
            word += str(rng.choice(codas))
        out.append(word)
    return " ".join(out)


# ── Configuration ────────────────────────────────────────────────────


def test_default_grid_size():
    """3 alphas x 3 noise levels x 11 betas x 10 repetitions."""
    assert ExperimentConfig().num_rows == 990


def test_config_validation():
    with pytest.raises(InvalidSpec):
        ExperimentConfig(alphas=(1.2,))
    with pytest.raises(BetaOutOfRange):
        ExperimentConfig(betas=(0.5, -1.0))
    with pytest.raises(InvalidSpec):
        ExperimentConfig(num_aggregates=200)
    with pytest.raises(InvalidSpec):
        ExperimentConfig(repetitions=0)
    with pytest.raises(InvalidSpec):
        ExperimentConfig(noise_levels=())


# ── Sweep ────────────────────────────────────────────────────────────


def test_sweep_rows_and_schema(tmp_path):
    config = _small_config()
    path = tmp_path / "sweep.csv"
    assert run_sweep(config, path) == config.num_rows == 12
    rows = read_sweep(path)
    assert len(rows) == 12
    assert [float(r["beta"]) for r in rows[:3]] == [1.0, 0.5, 0.0]
    assert all(r["error"] == "" for r in rows)
    assert all(-1.0 <= float(r["ari"]) <= 1.0 for r in rows)


def test_sweep_independent_of_threads(tmp_path):
    config = _small_config(anneal=False)
    run_sweep(config, tmp_path / "a.csv", threads=1)
    run_sweep(config, tmp_path / "b.csv", threads=3)

    def strip(rows):
        return [{k: v for k, v in r.items() if k != "wall_ms"} for r in rows]

    assert strip(read_sweep(tmp_path / "a.csv")) == strip(read_sweep(tmp_path / "b.csv"))


def test_sweep_failures_become_error_rows(tmp_path):
    """alpha = 1 without noise is reducible; the run is recorded, not raised."""
    config = _small_config(alphas=(1.0,), noise_levels=(0.0, 0.5), repetitions=1)
    path = tmp_path / "sweep.csv"
    run_sweep(config, path)
    rows = read_sweep(path)
    assert len(rows) == 6
    assert all("Reducible" in r["error"] or "NoUniqueSolution" in r["error"] for r in rows[:3])
    assert all(r["error"] == "" for r in rows[3:])
    summary = format_sweep_summary(rows)
    assert "3 failed rows omitted" in summary


def test_sweep_recovers_strong_blocks(tmp_path):
    """Dominant diagonal blocks are recovered at every beta with annealing."""
    config = _small_config(noise_levels=(0.4,), block_sizes=(10, 10, 20), repetitions=3, restarts=3)
    path = tmp_path / "sweep.csv"
    run_sweep(config, path)
    aris = [float(r["ari"]) for r in read_sweep(path)]
    assert np.mean(aris) >= 0.9, aris


def test_format_sweep_summary():
    rows = [
        {"alpha": "0.5", "eps": "0.0", "beta": "1.0", "ari": "1.0", "cost": "0.1", "error": ""},
        {"alpha": "0.5", "eps": "0.0", "beta": "1.0", "ari": "0.5", "cost": "0.3", "error": ""},
    ]
    text = format_sweep_summary(rows)
    assert "0.7500" in text
    assert "failed" not in text


# ── Worked example ───────────────────────────────────────────────────


def test_nonreversible_example():
    report = nonreversible_example()
    assert report.c_l == pytest.approx(0.0086, abs=1e-4)
    assert report.c_p == pytest.approx(0.0135, abs=1e-4)
    assert report.c_one == pytest.approx(report.c_p - report.c_l, abs=1e-10)
    assert not report.reversible
    assert report.strictly_decreasing
    assert len(report.to_dict()["c_beta"]) == 11
    assert "C_L = 0.0086" in report.format()


# ── Clustering ───────────────────────────────────────────────────────


def test_make_dataset():
    points, labels = make_dataset("circles", seed=1)
    assert len(points) == len(labels) == 120
    with pytest.raises(InvalidSpec):
        make_dataset("spirals")


def test_clustering_three_gaussians():
    points, labels = make_dataset("gaussians", seed=0)
    result = run_clustering(points, labels, k_nearest=15, num_aggregates=3, restarts=10, seed=0)
    assert result.ari >= 0.95, f"ARI {result.ari}"
    assert result.k_nearest == 15
    assert [p.beta for p in result.trajectory] == AnnealSchedule().grid()
    assert "trajectory" in result.to_dict()


def test_clustering_without_reference_labels():
    points, _ = make_dataset("gaussians", seed=2)
    result = run_clustering(
        points, None, k_nearest=None, restarts=2,
        schedule=AnnealSchedule(beta_target=0.5, delta=0.5, keep_trajectory=True),
    )
    assert result.k_nearest == len(points)
    assert math.isnan(result.ari)


def test_clustering_three_gaussians_global_scale():
    for seed in (0, 1):
        points, labels = make_dataset("gaussians", seed=seed)
        result = run_clustering(points, labels, k_nearest=None, num_aggregates=3, restarts=10, seed=seed)
        assert result.ari >= 0.95, f"seed {seed}: ARI {result.ari}"


def test_circles_are_stable_with_local_scale():
    """With 15 neighbors the three rings stay put for beta > 0.5."""
    for seed in (0, 3):
        points, labels = make_dataset("circles", seed=seed)
        chain = similarity_chain(SimilaritySpec(points, 15))
        rings = AggregationMap(tuple(int(v) for v in labels), 3)
        for beta in (0.6, 0.8):
            result = sgitma(chain, beta, 3, g_init=rings)
            assert adjusted_rand_index(result.aggregation, rings) >= 0.9, (seed, beta)
            assert result.report.c_beta <= cost_beta(chain, rings, beta).c_beta + 1e-12


def test_circles_fail_with_global_scale():
    """One bandwidth for all points mixes the rings."""
    for seed in (0, 1):
        points, labels = make_dataset("circles", seed=seed)
        result = run_clustering(points, labels, k_nearest=None, num_aggregates=3, restarts=5, seed=seed)
        assert result.ari < 0.9, f"seed {seed}: ARI {result.ari}"


# ── Bigram ───────────────────────────────────────────────────────────


def test_bigram_groups_vowels():
    result = run_bigram(_syllable_text(0), num_aggregates=4, restarts=5, seed=1)
    point = result.at_beta(BIGRAM_BETA)
    groups = result.groups(point.assignment)
    assert len(groups) == 4
    assert max(sum(v in g for v in "aeiou") for g in groups) >= 4, groups
    assert set("".join(groups)) == set(result.alphabet)
    with pytest.raises(InvalidSpec):
        result.at_beta(0.85)
    data = result.to_dict()
    assert len(data["trajectory"]) == 11


# ── Scaling ──────────────────────────────────────────────────────────


def test_measure_sweep_scaling_small():
    report = measure_sweep_scaling(sizes=(20, 40), num_aggregates=3, sweeps=1, seed=0)
    assert len(report.seconds_per_sweep) == 2
    assert all(t > 0 for t in report.seconds_per_sweep)
    assert math.isfinite(report.slope)
    assert "slope" in report.format()
    with pytest.raises(InvalidSpec):
        measure_sweep_scaling(sizes=(20,))


def test_sweep_time_grows_quadratically():
    report = measure_sweep_scaling(seed=0)
    assert report.sizes == (50, 100, 200, 400)
    assert 1.7 <= report.slope <= 2.3, report.format()
