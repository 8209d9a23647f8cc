#!/usr/bin/env python3
"""Convert the 10k MNIST digits bundled in the npm `mnist` package into IDX files.

The package stores each image as 784 floats rounded to three decimals of
pixel/255, which is enough precision to recover the original bytes exactly.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-10k
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__)
        return 1
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    items = []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for off in range(0, len(flat), 784):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in flat[off:off + 784])
            items.append((pixels, digit))
    # Interleave classes so any prefix is roughly balanced.
    random.Random(20150602).shuffle(items)

    dst.mkdir(parents=True, exist_ok=True)
    images = struct.pack(">IIII", 0x00000803, len(items), 28, 28) + b"".join(p for p, _ in items)
    labels = struct.pack(">II", 0x00000801, len(items)) + bytes(d for _, d in items)
    # mtime=0 keeps the archives byte-reproducible.
    for name, payload in (("train-images-idx3-ubyte.gz", images), ("train-labels-idx1-ubyte.gz", labels)):
        with open(dst / name, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz:
            gz.write(payload)
    print(f"wrote {len(items)} items to {dst}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
