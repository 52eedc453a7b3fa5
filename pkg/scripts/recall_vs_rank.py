#!/usr/bin/env python3
"""Sweep the subspace rank k and measure recall@K against brute force.

Writes a TSV (k, K, recall, probes) suitable for plotting; this is the
desk-scale analogue of sweeping code length in hashing-style evaluations.

    python scripts/recall_vs_rank.py --data data/train-images.idx --data-format idx \
        --queries data/query-images.idx --queries-format idx \
        --ranks 4,8,16,32 --out recall_vs_rank.tsv
"""

import argparse

import numpy as np

from rssh.eval import recall_at_k
from rssh.index import BuildParams, build_partition_index
from rssh.io import DatasetDescriptor, load_dataset
from rssh.query import QueryParams, top_k_search


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data", required=True)
    parser.add_argument("--data-format", default="csv", choices=("idx", "fvecs", "csv"))
    parser.add_argument("--data-limit", type=int, default=None)
    parser.add_argument("--queries", required=True)
    parser.add_argument(
        "--queries-format", default="csv", choices=("idx", "fvecs", "csv")
    )
    parser.add_argument("--queries-limit", type=int, default=None)
    parser.add_argument("--ranks", default="4,8,16,32")
    parser.add_argument("--k-list", default="1,10,25")
    parser.add_argument("--probes", type=int, default=0,
                        help="levels to probe per query; 0 means all")
    parser.add_argument("--epsilon", type=float, default=0.5)
    parser.add_argument("--eta", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    data, _ = load_dataset(
        DatasetDescriptor(path=args.data, format=args.data_format, limit=args.data_limit)
    )
    queries, _ = load_dataset(
        DatasetDescriptor(
            path=args.queries, format=args.queries_format, limit=args.queries_limit
        )
    )
    ranks = [int(x) for x in args.ranks.split(",")]
    k_list = sorted(int(x) for x in args.k_list.split(","))
    max_k = max(k_list)

    truth = []
    for q in queries.points:
        dist = np.linalg.norm(data.points - q, axis=1)
        truth.append(data.ids[np.lexsort((data.ids, dist))[:max_k]].tolist())

    with open(args.out, "w") as f:
        f.write("k\tK\trecall\tprobes\n")
        for rank in ranks:
            model = build_partition_index(
                data,
                BuildParams(k=rank, epsilon=args.epsilon, eta=args.eta, seed=args.seed),
            )
            probes = args.probes or len(model.levels)
            params = QueryParams(probes=probes)
            sums = {K: 0.0 for K in k_list}
            for q, t in zip(queries.points, truth):
                got = [r.point_id for r in top_k_search(q, model, data, max_k, params)]
                for K in k_list:
                    sums[K] += recall_at_k(got, t, K)
            for K in k_list:
                recall = sums[K] / queries.n
                f.write(f"{rank}\t{K}\t{recall:.6f}\t{probes}\n")
                print(f"k={rank:>3} K={K:>3} probes={probes:>3} recall={recall:.4f}")


if __name__ == "__main__":
    main()
