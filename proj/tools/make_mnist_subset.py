#!/usr/bin/env python3
"""Convert the 5000-image MNIST sample shipped inside the mlxtend wheel to IDX files.

usage: make_mnist_subset.py <mlxtend wheel or mnist_5k.csv.gz> <out dir>
"""
import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np


def read_csv(src: Path) -> np.ndarray:
    if src.suffix == ".whl":
        with zipfile.ZipFile(src) as z:
            blob = z.read("mlxtend/data/data/mnist_5k.csv.gz")
    else:
        blob = src.read_bytes()
    return np.loadtxt(io.StringIO(gzip.decompress(blob).decode()), delimiter=",")


def write_idx(path: Path, array: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(bytes([0, 0, 0x08, array.ndim]))
        for d in array.shape:
            f.write(struct.pack(">I", d))
        f.write(array.astype(np.uint8).tobytes())


def main() -> None:
    table = read_csv(Path(sys.argv[1]))
    out = Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    images = table[:, :-1].reshape(-1, 28, 28)
    labels = table[:, -1]
    write_idx(out / "mnist5k-images-idx3-ubyte", images)
    write_idx(out / "mnist5k-labels-idx1-ubyte", labels)
    print(f"wrote {len(labels)} images, class counts {np.bincount(labels.astype(int)).tolist()}")


if __name__ == "__main__":
    main()
