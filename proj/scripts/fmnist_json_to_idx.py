#!/usr/bin/env python3
"""Convert the per-class Fashion-MNIST JSON files of the npm `fashion-mnist`
package into IDX files.

Each class file holds {"data": [[784 ints], ...]}. Empty rows (the class-0
file carries two) are dropped. The first 6000 remaining rows of each
class become training data, the next 1000 test data. Rows are then shuffled
with a fixed seed so both splits are class-interleaved.

usage: fmnist_json_to_idx.py SRC_DIR OUT_DIR
"""
import json
import random
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 6000
TEST_PER_CLASS = 1000


def write_idx(out_dir: Path, prefix: str, rows: list[tuple[list[int], int]]) -> None:
    with open(out_dir / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(bytes(pixels))
    with open(out_dir / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for _, label in rows))


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for label in range(10):
        data = [r for r in json.loads((src / f"{label}.json").read_text())["data"] if r]
        if len(data) < TRAIN_PER_CLASS + TEST_PER_CLASS:
            raise SystemExit(f"class {label}: only {len(data)} rows")
        for i, row in enumerate(data[: TRAIN_PER_CLASS + TEST_PER_CLASS]):
            if len(row) != 784 or min(row) < 0 or max(row) > 255:
                raise SystemExit(f"class {label} row {i}: bad pixel row")
            (train if i < TRAIN_PER_CLASS else test).append((row, label))
    rng = random.Random(0)
    rng.shuffle(train)
    rng.shuffle(test)
    write_idx(out, "train", train)
    write_idx(out, "t10k", test)
    print(f"wrote {len(train)} train and {len(test)} test images to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
