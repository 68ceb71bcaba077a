#!/usr/bin/env python3
"""Convert the 5000-digit MNIST sample bundled with mlxtend into IDX files.

The sample holds 500 digits per class. The first 250 of each class (in file
order) become the training split, the remaining 250 the test split. Output is
gzip-compressed IDX with a zero mtime so the bytes are reproducible.

    python3 tools/make_mnist_subset.py --wheel mlxtend-0.24.0-py3-none-any.whl --out data/mnist-5k
    python3 tools/make_mnist_subset.py --csv mnist_5k.csv.gz --out data/mnist-5k
"""

import argparse
import gzip
import io
import os
import struct
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_rows(args):
    if args.wheel:
        with zipfile.ZipFile(args.wheel) as wheel:
            raw = wheel.read(MEMBER)
    else:
        with open(args.csv, "rb") as fh:
            raw = fh.read()
    text = gzip.decompress(raw).decode("ascii")
    rows = []
    for line in text.strip().splitlines():
        fields = [int(float(v)) for v in line.split(",")]
        pixels, label = fields[:784], fields[784]
        rows.append((bytes(pixels), label))
    return rows


def write_gz(path, payload):
    with open(path, "wb") as fh:
        with gzip.GzipFile(fileobj=fh, mode="wb", mtime=0, filename="") as gz:
            gz.write(payload)


def write_split(out_dir, prefix, rows):
    images = io.BytesIO()
    images.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
    for pixels, _ in rows:
        images.write(pixels)
    labels = io.BytesIO()
    labels.write(struct.pack(">II", 0x00000801, len(rows)))
    labels.write(bytes(label for _, label in rows))
    write_gz(os.path.join(out_dir, f"{prefix}-images-idx3-ubyte.gz"), images.getvalue())
    write_gz(os.path.join(out_dir, f"{prefix}-labels-idx1-ubyte.gz"), labels.getvalue())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--wheel")
    source.add_argument("--csv")
    parser.add_argument("--out", required=True)
    parser.add_argument("--per-class-train", type=int, default=250)
    args = parser.parse_args()

    rows = read_rows(args)
    seen = [0] * 10
    train, test = [], []
    for row in rows:
        label = row[1]
        (train if seen[label] < args.per_class_train else test).append(row)
        seen[label] += 1

    os.makedirs(args.out, exist_ok=True)
    write_split(args.out, "train", train)
    write_split(args.out, "t10k", test)
    print(f"train={len(train)} test={len(test)} -> {args.out}")


if __name__ == "__main__":
    main()
