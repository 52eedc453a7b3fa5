"""Command-line interface.

Subcommands: build, query, eval, synth, svd-check. Every command is
deterministic given an explicit --seed. Output defaults to human-readable
tables; --records switches to one JSON object per line for scripting. The
RSSH_THREADS environment variable caps parallelism for batch work; record
order is canonical (sorted by trial or query index) either way.

Exit codes: 0 ok, 2 bad arguments, 3 I/O or file-format error, 4 numeric
failure, 5 acceptance check failed.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import (
    ConvergenceError,
    DatasetError,
    DimensionError,
    EmptyModelError,
    GenerationTimeoutError,
    IndexFileError,
    InvalidParamsError,
    MissingLabelError,
    UndefinedMetricError,
    ZeroMatrixError,
)
from .eval import (
    classify_by_nn,
    generate_planted_instance,
    precision,
    recall_at_k,
)
from .index import (
    BuildParams,
    IndexModel,
    PointSet,
    build_partition_index,
    subspace_distances,
)
from .io import (
    DatasetDescriptor,
    load_dataset,
    load_index,
    save_index,
    write_csv,
)
from .linalg import KrylovParams, block_lanczos, exact_svd_oracle, spectral_norm
from .query import QueryParams, brute_force_nn, nearest_subspace, query, top_k_search

EXIT_OK = 0
EXIT_BAD_ARGS = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_CHECK_FAILED = 5


def worker_count() -> int:
    """Parallelism cap from RSSH_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("RSSH_THREADS", "1")))
    except ValueError:
        return 1


def _map_indexed(fn, items):
    """Apply fn(i, item); results come back in input order regardless of
    how many workers ran."""
    items = list(items)
    workers = min(worker_count(), max(1, len(items)))
    if workers == 1:
        return [fn(i, item) for i, item in enumerate(items)]
    out = [None] * len(items)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(fn, i, item): i for i, item in enumerate(items)}
        for future, i in futures.items():
            out[i] = future.result()
    return out


def _emit(args, record: dict, human: str) -> None:
    if args.records:
        print(json.dumps(record))
    else:
        print(human)


def _add_dataset_args(sub, prefix: str, required: bool = True):
    group = sub.add_argument_group(f"{prefix} dataset")
    group.add_argument(f"--{prefix}", required=required, help=f"{prefix} file path")
    group.add_argument(
        f"--{prefix}-format",
        choices=("idx", "fvecs", "csv"),
        default="csv",
        help=f"{prefix} file format (default csv)",
    )
    group.add_argument(f"--{prefix}-limit", type=int, default=None, metavar="N",
                       help="use only the first N rows")
    group.add_argument(f"--{prefix}-labels", default=None, metavar="PATH",
                       help="IDX label file for this dataset")
    group.add_argument(f"--{prefix}-csv-header", action="store_true",
                       help="CSV file starts with a header row")
    group.add_argument(f"--{prefix}-csv-label-column", action="store_true",
                       help="last CSV column is a label")


def _descriptor(args, prefix: str) -> DatasetDescriptor:
    get = lambda name: getattr(args, f"{prefix}_{name}".replace("-", "_"))
    return DatasetDescriptor(
        path=getattr(args, prefix),
        format=get("format"),
        limit=get("limit"),
        label_path=get("labels"),
        csv_has_header=get("csv_header"),
        csv_label_column=get("csv_label_column"),
    )


def cmd_build(args) -> int:
    data, _ = load_dataset(_descriptor(args, "data"))
    params = BuildParams(
        k=args.k,
        epsilon=args.epsilon,
        eta=args.eta,
        alpha=args.alpha,
        seed=args.seed,
        max_levels=args.max_levels,
    )
    start = time.perf_counter()
    model = build_partition_index(data, params)
    elapsed = time.perf_counter() - start
    save_index(model, args.out)
    _emit(
        args,
        {"type": "dataset", "n": data.n, "d": data.d},
        f"dataset: n={data.n} d={data.d}",
    )
    if not args.records:
        print(
            f"{'level':>5} {'captured':>9} {'fraction':>9} {'threshold':>12} "
            f"{'mode':>16} {'residual':>12}"
        )
    remaining = data.n
    for level in model.levels:
        members = data.rows_for_ids(level.member_ids)
        residual = float(subspace_distances(members, level.basis).max())
        captured = level.member_ids.shape[0]
        fraction = captured / remaining
        _emit(
            args,
            {
                "type": "level",
                "level": level.level_id,
                "captured": captured,
                "fraction": fraction,
                "threshold": level.threshold_used,
                "mode": level.capture_mode.value,
                "residual": residual,
            },
            f"{level.level_id:>5} {captured:>9} {fraction:>9.4f} "
            f"{level.threshold_used:>12.6g} {level.capture_mode.value:>16} "
            f"{residual:>12.6g}",
        )
        remaining -= captured
    _emit(
        args,
        {
            "type": "build",
            "levels": len(model.levels),
            "seconds": elapsed,
            "out": str(args.out),
        },
        f"built {len(model.levels)} levels in {elapsed:.2f}s -> {args.out}",
    )
    return EXIT_OK


def cmd_query(args) -> int:
    model = load_index(args.index)
    data, _ = load_dataset(_descriptor(args, "data"))
    queries, _ = load_dataset(_descriptor(args, "queries"))
    params = QueryParams(probes=args.probes)

    def run(i, row):
        return top_k_search(row, model, data, args.top_k, params)

    results = _map_indexed(run, queries.points)
    if not args.records:
        print(
            f"{'query':>5} {'rank':>4} {'id':>8} {'projected':>12} "
            f"{'original':>12} {'level':>5}"
        )
    for qi, matches in enumerate(results):
        for rank, match in enumerate(matches):
            _emit(
                args,
                {
                    "type": "match",
                    "query": qi,
                    "rank": rank,
                    "id": match.point_id,
                    "projected": match.projected_distance,
                    "original": match.original_distance,
                    "level": match.level_id,
                },
                f"{qi:>5} {rank:>4} {match.point_id:>8} "
                f"{match.projected_distance:>12.6g} "
                f"{match.original_distance:>12.6g} {match.level_id:>5}",
            )
    return EXIT_OK


def _level_of(model: IndexModel, point_id: int) -> int:
    for level in model.levels:
        if point_id in level.member_ids:
            return level.level_id
    raise EmptyModelError(f"point id {point_id} is not in any level")


def cmd_eval(args) -> int:
    model = load_index(args.index)
    data, data_labels = load_dataset(_descriptor(args, "data"))
    queries, query_labels = load_dataset(_descriptor(args, "queries"))
    k_list = sorted({int(x) for x in args.k_list.split(",")})
    if any(k < 1 for k in k_list):
        raise InvalidParamsError("every K in --k-list must be >= 1")
    params = QueryParams(probes=args.probes)
    max_k = max(k_list)

    def run(i, row):
        matches = top_k_search(row, model, data, max_k, params)
        truth = None
        if args.ground_truth == "brute":
            dist = np.linalg.norm(data.points - row, axis=1)
            truth = data.ids[np.lexsort((data.ids, dist))[:max_k]].tolist()
        return matches, truth

    results = _map_indexed(run, queries.points)

    recalls = {}
    for k in k_list:
        if args.ground_truth != "brute":
            continue
        vals = [
            recall_at_k([m.point_id for m in matches], truth, k)
            for matches, truth in results
        ]
        recalls[k] = float(np.mean(vals))
    mean_candidates = float(
        np.mean([matches[0].candidates_examined for matches, _ in results])
    )
    routing_failures = None
    if args.ground_truth == "brute":
        fails = 0
        for (matches, truth), row in zip(results, queries.points):
            first = nearest_subspace(row, model)[0]
            if _level_of(model, truth[0]) != first:
                fails += 1
        routing_failures = fails / len(results)

    for k in k_list:
        if k in recalls:
            _emit(
                args,
                {"type": "recall", "k": model.params.k, "K": k, "recall": recalls[k]},
                f"recall@{k}: {recalls[k]:.4f}",
            )
    _emit(
        args,
        {"type": "candidates", "mean": mean_candidates},
        f"mean candidates examined: {mean_candidates:.1f}",
    )
    if routing_failures is not None:
        _emit(
            args,
            {"type": "routing_failure_rate", "rate": routing_failures},
            f"routing failure rate: {routing_failures:.4f}",
        )
    if data_labels is not None and query_labels is not None:
        offset = data.n
        shifted = PointSet(
            points=queries.points,
            ids=np.arange(queries.n, dtype=np.int64) + offset,
        )
        merged = dict(data_labels)
        merged.update({qid + offset: lab for qid, lab in query_labels.items()})
        report = classify_by_nn(shifted, merged, model, data, params)
        _emit(
            args,
            {"type": "accuracy", "accuracy": report.accuracy},
            f"classification accuracy: {report.accuracy:.4f}",
        )
        for cls, counts in sorted(report.per_class.items(), key=lambda kv: repr(kv[0])):
            try:
                prec = precision(counts)
            except UndefinedMetricError:
                continue
            _emit(
                args,
                {"type": "precision", "class": cls, "precision": prec},
                f"precision[{cls}]: {prec:.4f}",
            )
    if args.plot_out:
        with open(args.plot_out, "w") as f:
            f.write("k\tK\trecall\n")
            for k in k_list:
                if k in recalls:
                    f.write(f"{model.params.k}\t{k}\t{recalls[k]:.6f}\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    inst = generate_planted_instance(args.n, args.d, args.k, args.epsilon, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "data.csv", inst.data.points)
    write_csv(out / "clean.csv", inst.clean_data.points)
    write_csv(out / "query.csv", inst.query.reshape(1, -1))
    manifest = {
        "n": args.n,
        "d": args.d,
        "k": args.k,
        "epsilon": args.epsilon,
        "alpha": inst.alpha,
        "seed": args.seed,
        "planted_id": inst.planted_id,
        "query_noise_norm": inst.query_noise_norm,
        "max_noise_norm": float(inst.noise_norms.max()),
        "files": {"data": "data.csv", "clean": "clean.csv", "query": "query.csv"},
    }
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    _emit(
        args,
        {"type": "synth", "out": str(out), "planted_id": inst.planted_id},
        f"wrote instance to {out} (planted id {inst.planted_id})",
    )
    return EXIT_OK


def cmd_svd_check(args) -> int:
    if args.k + 1 > min(args.n, args.d):
        raise InvalidParamsError("need k + 1 <= min(n, d) to test against sigma_{k+1}")

    def run(t, _):
        rng_seed = args.seed + t
        A = np.random.default_rng(rng_seed).standard_normal((args.n, args.d))
        oracle = exact_svd_oracle(A, args.k + 1)
        sigma = oracle.singular_values
        approx = block_lanczos(
            A, KrylovParams(k=args.k, eta=args.eta, seed=args.seed + 100_000 + t)
        )
        V = approx.basis
        residual = spectral_norm(A - (A @ V) @ V.T)
        bound = float((1.0 + args.eta) * sigma[args.k])
        spectral_ok = bool(residual <= bound)
        per_vec_ok = bool(
            np.all(
                np.abs(approx.singular_values**2 - sigma[: approx.k] ** 2)
                <= args.eta * sigma[args.k] ** 2
            )
        )
        return residual, bound, spectral_ok, per_vec_ok

    results = _map_indexed(run, range(args.trials))
    if not args.records:
        print(f"{'trial':>5} {'residual':>12} {'bound':>12} {'spectral':>8} {'pervec':>7}")
    spectral_passes = 0
    per_vec_passes = 0
    for t, (residual, bound, s_ok, p_ok) in enumerate(results):
        spectral_passes += s_ok
        per_vec_passes += p_ok
        _emit(
            args,
            {
                "type": "trial",
                "trial": t,
                "residual": residual,
                "bound": bound,
                "spectral_pass": s_ok,
                "per_vector_pass": p_ok,
            },
            f"{t:>5} {residual:>12.6g} {bound:>12.6g} "
            f"{'pass' if s_ok else 'FAIL':>8} {'pass' if p_ok else 'FAIL':>7}",
        )
    needed = int(np.ceil(0.9 * args.trials))
    ok = spectral_passes >= needed and per_vec_passes >= needed
    _emit(
        args,
        {
            "type": "summary",
            "trials": args.trials,
            "spectral_passes": spectral_passes,
            "per_vector_passes": per_vec_passes,
            "needed": needed,
            "ok": ok,
        },
        f"spectral {spectral_passes}/{args.trials}, per-vector "
        f"{per_vec_passes}/{args.trials} (need {needed} each): "
        f"{'OK' if ok else 'FAILED'}",
    )
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rssh",
        description="Noise-robust nearest-neighbor search via randomized "
        "low-rank subspace partitioning.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("build", help="build and save a partition index")
    _add_dataset_args(p, "data")
    p.add_argument("--k", type=int, required=True, help="subspace rank per level")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=None,
                   help="noise bound (default epsilon/25)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-levels", type=int, default=None)
    p.add_argument("--out", required=True, help="index file to write")
    p.add_argument("--records", action="store_true", help="JSON-lines output")
    p.set_defaults(func=cmd_build)

    p = subs.add_parser("query", help="run top-K queries against an index")
    p.add_argument("--index", required=True)
    _add_dataset_args(p, "data")
    _add_dataset_args(p, "queries")
    p.add_argument("--probes", type=int, default=1)
    p.add_argument("--top-k", type=int, default=1, help="results per query")
    p.add_argument("--records", action="store_true", help="JSON-lines output")
    p.set_defaults(func=cmd_query)

    p = subs.add_parser("eval", help="recall / classification metrics")
    p.add_argument("--index", required=True)
    _add_dataset_args(p, "data")
    _add_dataset_args(p, "queries")
    p.add_argument("--ground-truth", choices=("brute", "none"), default="brute")
    p.add_argument("--k-list", default="1,10,25",
                   help="comma-separated retrieval depths (default 1,10,25)")
    p.add_argument("--probes", type=int, default=1)
    p.add_argument("--plot-out", default=None,
                   help="write a k/K/recall TSV for external plotting")
    p.add_argument("--records", action="store_true", help="JSON-lines output")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("synth", help="generate a planted instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--records", action="store_true", help="JSON-lines output")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser(
        "svd-check", help="verify the low-rank approximation bounds empirically"
    )
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--d", type=int, default=30)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--records", action="store_true", help="JSON-lines output")
    p.set_defaults(func=cmd_svd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidParamsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS
    except (OSError, DatasetError, IndexFileError, MissingLabelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (
        DimensionError,
        ZeroMatrixError,
        ConvergenceError,
        GenerationTimeoutError,
        EmptyModelError,
        UndefinedMetricError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
