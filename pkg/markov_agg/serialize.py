"""JSON and CSV persistence for chains, partitions, points and sweep tables.

Chain files hold ``{"states": [...], "transition": [[...], ...]}``; ``states``
is optional. Partition files hold ``{"assignment": [...], "num_aggregates": K}``
(result files written by ``aggregate`` qualify). JSON output is byte-stable:
sorted keys, 2-space indent, trailing newline.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from markov_agg.constants import SWEEP_CSV_COLUMNS
from markov_agg.exceptions import MalformedInput
from markov_agg.markov_core import AggregationMap, MarkovChain, validate_chain


def read_json(path: str | Path) -> dict:
    """Parse a JSON object; anything else is MalformedInput."""
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise MalformedInput(f"{path}: expected a JSON object")
    return data


def write_json(path: str | Path, data: Mapping) -> None:
    """Write ``dumps(data)`` to path, creating parent directories."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(data))


def dumps(data: Mapping) -> str:
    """Byte-stable JSON: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n"


# ── Chains ───────────────────────────────────────────────────────────


def chain_to_dict(chain: MarkovChain) -> dict:
    return {
        "states": list(chain.states),
        "transition": chain.transition.tolist(),
        "stationary": chain.stationary.tolist(),
    }


def save_chain(path: str | Path, chain: MarkovChain) -> None:
    write_json(path, chain_to_dict(chain))


def load_chain(path: str | Path) -> MarkovChain:
    """Read and validate a chain; a stored ``stationary`` field is recomputed, not trusted."""
    data = read_json(path)
    if "transition" not in data:
        raise MalformedInput(f"{path}: missing 'transition'")
    try:
        transition = np.asarray(data["transition"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"{path}: 'transition' is not a numeric matrix") from exc
    states = data.get("states")
    if states is not None and not isinstance(states, list):
        raise MalformedInput(f"{path}: 'states' must be a list")
    return validate_chain(transition, states)


# ── Partitions ───────────────────────────────────────────────────────


def save_partition(path: str | Path, g: AggregationMap) -> None:
    write_json(path, g.to_dict())


def load_partition(path: str | Path) -> AggregationMap:
    data = read_json(path)
    assignment = data.get("assignment")
    if not isinstance(assignment, list) or not all(
        isinstance(y, int) and not isinstance(y, bool) for y in assignment
    ):
        raise MalformedInput(f"{path}: 'assignment' must be a list of integers")
    if "num_aggregates" in data:
        return AggregationMap(tuple(assignment), data["num_aggregates"])
    return AggregationMap(tuple(assignment), max(assignment, default=-1) + 1)


# ── Points ───────────────────────────────────────────────────────────


def load_points(path: str | Path) -> np.ndarray:
    """One point per line, comma-separated coordinates. Lines starting with # are skipped."""
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except ValueError as exc:
        raise MalformedInput(f"{path}: {exc}") from exc


def save_points(path: str | Path, points: np.ndarray, labels: np.ndarray | None = None) -> None:
    """Write points as CSV; reference labels, if given, go to a ``.labels.json`` sibling."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(points), delimiter=",", fmt="%.17g")
    if labels is not None:
        save_partition(labels_path(path), AggregationMap.from_labels(labels.tolist()))


def labels_path(points_path: str | Path) -> Path:
    p = Path(points_path)
    return p.with_name(p.stem + ".labels.json")


# ── Sweep tables ─────────────────────────────────────────────────────


class SweepWriter:
    """CSV writer for sweep rows; the header is written on open.

    ``write_run`` writes one run's rows and flushes, so a crash keeps every
    finished run on disk.
    """

    def __init__(self, path: str | Path, columns: Iterable[str] = SWEEP_CSV_COLUMNS) -> None:
        self.path = Path(path)
        self.columns = tuple(columns)
        self.rows_written = 0
        self._file = None
        self._writer = None

    def __enter__(self) -> SweepWriter:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w", newline="", encoding="utf-8")
        self._writer = csv.DictWriter(self._file, fieldnames=self.columns)
        self._writer.writeheader()
        self._file.flush()
        return self

    def write_run(self, rows: Iterable[Mapping]) -> None:
        for row in rows:
            self._writer.writerow({c: row.get(c, "") for c in self.columns})
            self.rows_written += 1
        self._file.flush()

    def __exit__(self, *exc_info) -> None:
        self._file.close()


def read_sweep(path: str | Path) -> list[dict]:
    """Rows of a sweep CSV as string-valued dicts."""
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
