"""Rebuild data/mnist36 from the 5000-image MNIST sample shipped in the mlxtend wheel.

    pip download --no-deps mlxtend==0.24.0 -d /tmp/wheels
    python tools/build_mnist36.py /tmp/wheels/mlxtend-0.24.0-py3-none-any.whl data/mnist36

The sample holds 500 images per digit; digits 3 and 6 are kept, in file order.
"""

import gzip
import io
import sys
import zipfile
from pathlib import Path

import numpy as np

from quencode.data import encode_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main(wheel, out_dir):
    raw = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.float64)
    pixels, labels = table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)
    keep = np.isin(labels, (3, 6))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, payload in (
        ("train-images-idx3-ubyte.gz", encode_idx(pixels[keep], "images")),
        ("train-labels-idx1-ubyte.gz", encode_idx(labels[keep], "labels")),
    ):
        # mtime=0 keeps the archive bytes reproducible
        (out / name).write_bytes(gzip.compress(payload, mtime=0))
    print(f"wrote {keep.sum()} images to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
