"""Command-line front end.

Exit codes: 0 success, 1 malformed input (bad arguments, unreadable or
unparsable files), 2 numeric failure (reducible chain, empty aggregate, ...).
Results go to ``-o/--output`` or stdout as JSON; messages go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from markov_agg.aggregation import AnnealSchedule, best_of_restarts
from markov_agg.constants import (
    BIGRAM_K,
    BIGRAM_RESTARTS,
    BLOCK_SIZES,
    CLUSTER_K_NEAREST,
    CLUSTER_RESTARTS,
    DEFAULT_ANNEAL_DELTA,
    DEFAULT_BETA_TARGET,
    DEFAULT_MAX_ITER,
    DEFAULT_SEED,
    EXIT_MALFORMED,
    EXIT_NUMERIC,
    EXIT_OK,
    LUMPABILITY_TOL,
    REVERSIBILITY_TOL,
    SCALING_K,
    SCALING_SIZES,
    SCALING_SWEEPS,
    SWEEP_ALPHAS,
    SWEEP_BETAS,
    SWEEP_K,
    SWEEP_NOISE_LEVELS,
    SWEEP_REPETITIONS,
    SWEEP_RESTARTS,
    THREADS_ENV_VAR,
)
from markov_agg.evaluation import (
    bisimulation_check,
    check_lumpable,
    compare_partitions,
    is_reversible,
)
from markov_agg.exceptions import MalformedInput, MarkovAggError
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
from markov_agg.generators import (
    FOLD_MODES,
    BlockChainSpec,
    block_stochastic,
    permute,
    preprocess_text,
    random_permutation,
    reversible_chain,
)
from markov_agg.info_measures import cost_beta, information_bottleneck_cost
from markov_agg.markov_core import validate_chain
from markov_agg.serialize import (
    chain_to_dict,
    dumps,
    labels_path,
    load_chain,
    load_partition,
    load_points,
    read_sweep,
    save_partition,
    save_points,
    write_json,
)

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Argument errors become MalformedInput so they exit with code 1."""

    def error(self, message: str):
        raise MalformedInput(f"{self.prog}: {message}")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _k_nearest(text: str) -> int | None:
    if text == "all":
        return None
    try:
        return int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer or 'all', got {text!r}") from exc


def resolve_threads(requested: int | None) -> int:
    """--threads, else $MARKOV_AGG_THREADS, else 1."""
    if requested is not None:
        return max(1, requested)
    raw = os.environ.get(THREADS_ENV_VAR)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise MalformedInput(f"{THREADS_ENV_VAR}={raw!r} is not an integer") from exc


def _emit(data: dict, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(dumps(data))
    else:
        write_json(output, data)
        log.info("wrote %s", output)


def _schedule(args, keep_trajectory: bool) -> AnnealSchedule:
    return AnnealSchedule(
        beta_target=args.beta_target,
        delta=args.delta,
        max_iter=args.max_iter,
        keep_trajectory=keep_trajectory,
    )


# ── Commands ─────────────────────────────────────────────────────────


def cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "block":
        block = block_stochastic(BlockChainSpec(args.sizes, args.alpha, args.eps, args.seed), rng)
        transition, planted = block.transition, block.planted
        if args.permute:
            transition, planted = permute(transition, planted, random_permutation(block.spec.n, rng))
        chain = validate_chain(transition)
        _emit(chain_to_dict(chain), args.output)
        if args.planted is not None:
            save_partition(args.planted, planted)
    elif args.kind == "reversible":
        _emit(chain_to_dict(reversible_chain(args.n, rng)), args.output)
    else:
        points, labels = make_dataset(args.kind, args.seed)
        if args.output is None:
            raise MalformedInput("point datasets need -o/--output (CSV)")
        save_points(args.output, points, labels)
    return EXIT_OK


def cmd_cluster(args) -> int:
    points = load_points(args.points)
    labels = None
    label_file = args.labels or labels_path(args.points)
    if Path(label_file).exists():
        labels = np.asarray(load_partition(label_file).assignment)
    result = run_clustering(
        points, labels,
        k_nearest=args.k,
        num_aggregates=args.K,
        restarts=args.restarts,
        schedule=_schedule(args, keep_trajectory=True),
        seed=args.seed,
        threads=resolve_threads(args.threads),
    )
    _emit(result.to_dict(), args.output)
    return EXIT_OK


def cmd_bigram(args) -> int:
    try:
        raw = Path(args.text).read_text(encoding=args.encoding)
    except UnicodeDecodeError as exc:
        raise MalformedInput(f"{args.text}: not valid {args.encoding} text") from exc
    text = preprocess_text(
        raw,
        strip_headings=args.strip_headings,
        strip_linebreaks=args.strip_linebreaks,
        strip_underscores=args.strip_underscores,
        fold=args.fold,
    )
    result = run_bigram(
        text,
        num_aggregates=args.K,
        restarts=args.restarts,
        schedule=_schedule(args, keep_trajectory=True),
        seed=args.seed,
        threads=resolve_threads(args.threads),
    )
    _emit(result.to_dict(), args.output)
    return EXIT_OK


def cmd_aggregate(args) -> int:
    chain = load_chain(args.input)
    target = _schedule(args, args.trajectory) if args.anneal else args.beta
    result = best_of_restarts(
        chain, target, args.K, args.restarts,
        base_seed=args.seed,
        max_iter=args.max_iter,
        threads=resolve_threads(args.threads),
    )
    _emit(result.to_dict(), args.output)
    return EXIT_OK


def cmd_cost(args) -> int:
    chain = load_chain(args.input)
    g = load_partition(args.partition)
    data = cost_beta(chain, g, args.beta).to_dict()
    data["c_one"] = information_bottleneck_cost(chain, g)
    _emit(data, args.output)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.check == "ari":
        comparison = compare_partitions(load_partition(args.a), load_partition(args.b))
        data = {"ari": comparison.ari, "contingency": comparison.contingency.tolist()}
    elif args.check == "bisim":
        rng = np.random.default_rng(args.seed)
        report = bisimulation_check(
            load_chain(args.chain), load_partition(args.partition), n_samples=args.samples, rng=rng,
        )
        data = report.to_dict()
    elif args.check == "lumpable":
        data = {"lumpable": check_lumpable(load_chain(args.chain), load_partition(args.partition), args.tol)}
    else:
        data = {"reversible": is_reversible(load_chain(args.chain), args.tol)}
    _emit(data, args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = ExperimentConfig(
        alphas=args.alphas,
        noise_levels=args.noise,
        betas=args.betas,
        num_aggregates=args.K,
        restarts=args.restarts,
        seed=args.seed,
        output_dir=args.output.parent,
        anneal=args.anneal,
        delta=args.delta,
        block_sizes=args.sizes,
        repetitions=args.repetitions,
        max_iter=args.max_iter,
    )
    rows = run_sweep(config, args.output, threads=resolve_threads(args.threads))
    log.info("sweep: %d rows in %s", rows, args.output)
    if args.summary:
        print(format_sweep_summary(read_sweep(args.output)))
    return EXIT_OK


def cmd_scaling(args) -> int:
    report = measure_sweep_scaling(args.sizes, args.K, args.sweeps, args.seed)
    print(report.format())
    return EXIT_OK


def cmd_example(args) -> int:
    report = nonreversible_example()
    if args.json:
        _emit(report.to_dict(), None)
    else:
        print(report.format())
    return EXIT_OK


# ── Parser ───────────────────────────────────────────────────────────


def _add_search_options(p: argparse.ArgumentParser, *, k: int, restarts: int) -> None:
    p.add_argument("-K", type=int, default=k, help="number of aggregates")
    p.add_argument("--restarts", type=int, default=restarts)
    p.add_argument("--delta", type=float, default=DEFAULT_ANNEAL_DELTA, help="annealing step")
    p.add_argument("--beta-target", type=float, default=DEFAULT_BETA_TARGET)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER, help="sweeps per beta")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV_VAR} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="markov_agg", description="Information-theoretic Markov aggregation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("-o", "--output", type=Path, default=None)
        return p

    p = command("generate", cmd_generate, "write a synthetic chain or point cloud")
    p.add_argument("kind", choices=["block", "reversible", "gaussians", "circles"])
    p.add_argument("--sizes", type=_ints, default=BLOCK_SIZES, help="block sizes, e.g. 25,25,50")
    p.add_argument("--alpha", type=float, default=0.95)
    p.add_argument("--eps", type=float, default=0.0, help="noise mixing weight")
    p.add_argument("--permute", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--planted", type=Path, default=None, help="write the planted partition here")
    p.add_argument("-n", type=int, default=10, help="states of a reversible chain")

    p = command("cluster", cmd_cluster, "cluster a point cloud via its similarity chain")
    p.add_argument("--points", type=Path, required=True, help="CSV, one point per line")
    p.add_argument("--labels", type=Path, default=None, help="reference partition JSON")
    p.add_argument("--k", type=_k_nearest, default=CLUSTER_K_NEAREST,
                   help="neighbors for the kernel scale, or 'all'")
    _add_search_options(p, k=3, restarts=CLUSTER_RESTARTS)

    p = command("bigram", cmd_bigram, "aggregate the letter bigram chain of a text")
    p.add_argument("--text", type=Path, required=True,
                   help="corpus; the last character is counted as followed by the first")
    p.add_argument("--encoding", default="utf-8")
    p.add_argument("--strip-headings", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--strip-linebreaks", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--strip-underscores", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--fold", choices=FOLD_MODES, default="accents")
    _add_search_options(p, k=BIGRAM_K, restarts=BIGRAM_RESTARTS)

    p = command("aggregate", cmd_aggregate, "search an aggregation of a chain")
    p.add_argument("-i", "--input", type=Path, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--anneal", action="store_true", help="anneal beta from 1 to --beta-target")
    p.add_argument("--trajectory", action="store_true", help="record every annealing step")
    _add_search_options(p, k=2, restarts=1)

    p = command("cost", cmd_cost, "cost report of a given partition")
    p.add_argument("-i", "--input", type=Path, required=True)
    p.add_argument("--partition", type=Path, required=True)
    p.add_argument("--beta", type=float, default=0.5)

    p = command("evaluate", cmd_evaluate, "compare partitions or check chain properties")
    p.add_argument("check", choices=["ari", "bisim", "lumpable", "reversible"])
    p.add_argument("--a", type=Path)
    p.add_argument("--b", type=Path)
    p.add_argument("--chain", type=Path)
    p.add_argument("--partition", type=Path)
    p.add_argument("--samples", type=int, default=None, help="random subsets when K is large")
    p.add_argument("--tol", type=float, default=None)

    p = command("sweep", cmd_sweep, "block-chain parameter sweep to CSV")
    p.add_argument("--alphas", type=_floats, default=SWEEP_ALPHAS)
    p.add_argument("--noise", type=_floats, default=SWEEP_NOISE_LEVELS)
    p.add_argument("--betas", type=_floats, default=SWEEP_BETAS)
    p.add_argument("--sizes", type=_ints, default=BLOCK_SIZES)
    p.add_argument("--repetitions", type=int, default=SWEEP_REPETITIONS)
    p.add_argument("--anneal", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--summary", action="store_true", help="print mean/std ARI per grid point")
    _add_search_options(p, k=SWEEP_K, restarts=SWEEP_RESTARTS)
    p.set_defaults(output=Path("sweep.csv"))

    p = command("scaling", cmd_scaling, "time one sweep for growing chain sizes")
    p.add_argument("--sizes", type=_ints, default=SCALING_SIZES)
    p.add_argument("-K", type=int, default=SCALING_K)
    p.add_argument("--sweeps", type=int, default=SCALING_SWEEPS)

    p = command("example", cmd_example, "costs of the non-reversible three-state example")
    p.add_argument("--json", action="store_true")

    return parser


def _check_evaluate_args(args) -> None:
    needed = {"ari": ("a", "b"), "bisim": ("chain", "partition"),
              "lumpable": ("chain", "partition"), "reversible": ("chain",)}[args.check]
    missing = [f"--{name}" for name in needed if getattr(args, name) is None]
    if missing:
        raise MalformedInput(f"evaluate {args.check} needs {', '.join(missing)}")
    if args.tol is None:
        args.tol = REVERSIBILITY_TOL if args.check == "reversible" else LUMPABILITY_TOL


def main(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except MalformedInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "evaluate":
            _check_evaluate_args(args)
        return args.handler(args)
    except (MalformedInput, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except MarkovAggError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
