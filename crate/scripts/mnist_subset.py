#!/usr/bin/env python3
"""Build an IDX-format MNIST subset from the digits bundled in the npm `mnist` package.

The package ships 10000 real MNIST digits as JSON (pixels divided by 255 and
rounded to three decimals, which is fine enough to recover every original byte).
Digits are interleaved by class, then split into 8000 training and 2000 test
examples and written under the canonical MNIST file names, so the output
directory can be used as MNIST_DIR.

    python3 scripts/mnist_subset.py [OUT_DIR]        # default: data/mnist
"""
import json
import os
import shutil
import struct
import subprocess
import sys
import tarfile
import tempfile

N_TRAIN = 8000


def fetch_digits(workdir):
    subprocess.run(["npm", "pack", "mnist@1.1.0", "--silent"], cwd=workdir, check=True,
                   stdout=subprocess.DEVNULL)
    with tarfile.open(os.path.join(workdir, "mnist-1.1.0.tgz")) as tar:
        tar.extractall(workdir)
    per_class = []
    for digit in range(10):
        with open(os.path.join(workdir, "package", "src", "digits", f"{digit}.json")) as fh:
            flat = json.load(fh)["data"]
        assert len(flat) % 784 == 0
        images = [flat[i:i + 784] for i in range(0, len(flat), 784)]
        per_class.append(images)
    return per_class


def to_bytes(image):
    out = bytearray(784)
    for i, v in enumerate(image):
        b = round(v * 255.0)
        assert 0 <= b <= 255 and abs(b / 255.0 - v) < 5e-4
        out[i] = b
    return bytes(out)


def write_idx(out_dir, prefix, items):
    with open(os.path.join(out_dir, f"{prefix}-images-idx3-ubyte"), "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, len(items), 28, 28))
        for pixels, _ in items:
            fh.write(pixels)
    with open(os.path.join(out_dir, f"{prefix}-labels-idx1-ubyte"), "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, len(items)))
        fh.write(bytes(label for _, label in items))


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join("data", "mnist")
    os.makedirs(out_dir, exist_ok=True)
    workdir = tempfile.mkdtemp()
    try:
        per_class = fetch_digits(workdir)
    finally:
        shutil.rmtree(workdir, ignore_errors=True)
    items = []
    depth = max(len(c) for c in per_class)
    for k in range(depth):
        for digit in range(10):
            if k < len(per_class[digit]):
                items.append((to_bytes(per_class[digit][k]), digit))
    write_idx(out_dir, "train", items[:N_TRAIN])
    write_idx(out_dir, "t10k", items[N_TRAIN:])
    print(f"wrote {N_TRAIN} training and {len(items) - N_TRAIN} test digits to {out_dir}")


if __name__ == "__main__":
    main()
