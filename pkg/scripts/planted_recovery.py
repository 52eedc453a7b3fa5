#!/usr/bin/env python3
"""Seed sweep of end-to-end planted-neighbor recovery.

For each seed: generate a planted instance, build the index, and check
whether the query returns the planted point at probes=1 and probes=3. Also
reports how often the exact (brute-force) noisy nearest neighbor is the
planted point, which the data model guarantees.

    python scripts/planted_recovery.py --seeds 20 --n 256 --d 32 --k 8
"""

import argparse

from rssh.eval import generate_planted_instance
from rssh.index import BuildParams, build_partition_index
from rssh.query import QueryParams, brute_force_nn, query


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--n", type=int, default=256)
    parser.add_argument("--d", type=int, default=32)
    parser.add_argument("--k", type=int, default=8)
    parser.add_argument("--epsilon", type=float, default=0.5)
    parser.add_argument("--eta", type=float, default=0.1)
    args = parser.parse_args()

    brute_hits = one_probe = three_probe = 0
    for seed in range(args.seeds):
        inst = generate_planted_instance(
            n=args.n, d=args.d, k=args.k, epsilon=args.epsilon, seed=seed
        )
        model = build_partition_index(
            inst.data,
            BuildParams(k=args.k, epsilon=args.epsilon, eta=args.eta, seed=seed),
        )
        brute_hits += (
            brute_force_nn(inst.query, inst.data).point_id == inst.planted_id
        )
        one_probe += (
            query(inst.query, model, inst.data, QueryParams(probes=1)).point_id
            == inst.planted_id
        )
        three_probe += (
            query(inst.query, model, inst.data, QueryParams(probes=3)).point_id
            == inst.planted_id
        )
        print(
            f"seed {seed:>3}: levels={len(model.levels)} "
            f"recovered@1={one_probe}/{seed + 1} recovered@3={three_probe}/{seed + 1}"
        )
    print(
        f"\nbrute-force NN = planted: {brute_hits}/{args.seeds}\n"
        f"index recovery probes=1:  {one_probe}/{args.seeds}\n"
        f"index recovery probes=3:  {three_probe}/{args.seeds}"
    )


if __name__ == "__main__":
    main()
