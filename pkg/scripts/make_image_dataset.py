#!/usr/bin/env python3
"""Generate digit-like IDX image files for desk-scale experiments.

The images live near a shared 15-dimensional frame (plus the constant-offset
direction), each class carries a private off-frame component whose magnitude
depends on the class, and a little isotropic pixel noise sits on top. That
reproduces the geometry subspace partitioning exploits in real image sets:
low intrinsic dimension, and classes stratified by their distance to the
dominant subspace.

Writes train/query image and label files in the classic ubyte IDX layout:

    python scripts/make_image_dataset.py --out data/ --n-train 5000 --n-query 100
"""

import argparse
from pathlib import Path

import numpy as np


def make_image_dataset(
    n_train: int, n_query: int, seed: int, n_classes: int = 10, side: int = 28
):
    """Returns (train_images, train_labels, query_images, query_labels);
    images are uint8 with shape (n, side, side), both sets drawn from the
    same model."""
    rng = np.random.default_rng(seed)
    d = side * side
    latent = 15
    frame = np.linalg.qr(rng.standard_normal((d, latent + n_classes)))[0]
    shared, private = frame[:, :latent], frame[:, latent:]
    centers = rng.normal(0.0, 3.0, size=(n_classes, latent))

    def draw(n):
        labels = rng.integers(0, n_classes, size=n)
        coords = centers[labels] + rng.normal(0.0, 1.0, size=(n, latent))
        depth = 10.0 * (1.0 + labels) * rng.uniform(0.9, 1.1, size=n)
        pixels = (
            128.0
            + 18.0 * coords @ shared.T
            + depth[:, None] * private[:, labels].T
            + rng.normal(0.0, 1.5, size=(n, d))
        )
        images = np.clip(pixels, 0.0, 255.0).astype(np.uint8).reshape(n, side, side)
        return images, labels.astype(np.uint8)

    train_images, train_labels = draw(n_train)
    query_images, query_labels = draw(n_query)
    return train_images, train_labels, query_images, query_labels


def main():
    from rssh.io import write_idx_images, write_idx_labels

    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--n-train", type=int, default=5000)
    parser.add_argument("--n-query", type=int, default=100)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, train_labels, queries, query_labels = make_image_dataset(
        args.n_train, args.n_query, args.seed
    )
    write_idx_images(out / "train-images.idx", train)
    write_idx_labels(out / "train-labels.idx", train_labels)
    write_idx_images(out / "query-images.idx", queries)
    write_idx_labels(out / "query-labels.idx", query_labels)
    print(f"wrote {args.n_train}+{args.n_query} images to {out}")


if __name__ == "__main__":
    main()
