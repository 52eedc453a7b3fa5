import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "scripts"))

from make_image_dataset import make_image_dataset  # noqa: E402


@pytest.fixture(scope="session")
def image_files(tmp_path_factory):
    """IDX train/query files (5000 + 100 images, d=784) for desk-scale runs.

    Point RSSH_MNIST_DIR at a directory holding the real files
    (train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte,
    t10k-labels-idx1-ubyte) to run the same checks on the original dataset.
    """
    import os
    from pathlib import Path

    from rssh.io import write_idx_images, write_idx_labels

    mnist_dir = os.environ.get("RSSH_MNIST_DIR")
    if mnist_dir:
        root = Path(mnist_dir)
        names = {
            "train": root / "train-images-idx3-ubyte",
            "train_labels": root / "train-labels-idx1-ubyte",
            "query": root / "t10k-images-idx3-ubyte",
            "query_labels": root / "t10k-labels-idx1-ubyte",
        }
        if all(p.exists() for p in names.values()):
            return names

    root = tmp_path_factory.mktemp("images")
    train, train_labels, queries, query_labels = make_image_dataset(
        5000, 100, seed=11
    )
    paths = {
        "train": root / "train-images.idx",
        "train_labels": root / "train-labels.idx",
        "query": root / "query-images.idx",
        "query_labels": root / "query-labels.idx",
    }
    write_idx_images(paths["train"], train)
    write_idx_labels(paths["train_labels"], train_labels)
    write_idx_images(paths["query"], queries)
    write_idx_labels(paths["query_labels"], query_labels)
    return paths
