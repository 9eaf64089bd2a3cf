"""Convert a digits CSV (784 pixel columns, label last) into an IDX file pair.

Useful when only a CSV sample of MNIST is at hand, e.g. the 5,000-digit
``mnist_5k.csv.gz`` that ships with mlxtend:

    python3 scripts/csv_to_idx.py mnist_5k.csv.gz data/

writes ``train-images-idx3-ubyte`` and ``train-labels-idx1-ubyte`` into
the output directory, which can then serve as ``NLCMS_ELM_DATA_ROOT``.
"""

import argparse
from pathlib import Path

import numpy as np

from nlcms_elm.data import MNIST_FILES, write_idx


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv", help="CSV or CSV.gz with 784 pixels then the digit per row")
    p.add_argument("out_dir")
    p.add_argument("--part", choices=sorted(MNIST_FILES), default="train")
    args = p.parse_args(argv)

    table = np.loadtxt(args.csv, delimiter=",")
    if table.ndim != 2 or table.shape[1] != 785:
        raise SystemExit(f"{args.csv}: expected 785 columns, got shape {table.shape}")
    pixels, digits = table[:, :-1], table[:, -1]
    if pixels.min() < 0 or pixels.max() > 255 or not np.all(np.isin(digits, np.arange(10))):
        raise SystemExit(f"{args.csv}: pixel values must be 0..255 and labels 0..9")

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images_name, labels_name = MNIST_FILES[args.part]
    write_idx(out / images_name, pixels.astype(np.uint8).reshape(-1, 28, 28))
    write_idx(out / labels_name, digits.astype(np.uint8))
    print(f"wrote {len(digits)} images to {out}")


if __name__ == "__main__":
    main()
