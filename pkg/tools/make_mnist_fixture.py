"""Build data/mnist5k-images-idx3-ubyte.gz from the 5000-digit MNIST subset
bundled with mlxtend (``mlxtend/data/data/mnist_5k.csv.gz``).

The CSV rows are grouped by label, so they are shuffled with a fixed seed
before writing.  Labels are dropped.

    python tools/make_mnist_fixture.py path/to/mnist_5k.csv.gz
"""

import argparse
import gzip
from pathlib import Path

import numpy as np

from qaekit.mnistprep import write_idx

SEED = 20240601


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv", type=Path)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1] / "data" / "mnist5k-images-idx3-ubyte.gz")
    args = ap.parse_args()
    with gzip.open(args.csv, "rt") as fh:
        table = np.loadtxt(fh, delimiter=",", dtype=np.int64)
    pixels = table[:, :784].astype(np.uint8).reshape(-1, 28, 28)
    order = np.random.default_rng(SEED).permutation(len(pixels))
    write_idx(args.out, pixels[order])
    print(f"wrote {len(pixels)} images to {args.out}")


if __name__ == "__main__":
    main()
