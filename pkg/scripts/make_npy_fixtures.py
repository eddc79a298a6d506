"""Regenerate tests/fixtures/npy: NPY files written by tubeforge plus an index.

The index records shape and a SHA-256 of each payload so the conformance
test can check the files with numpy's own reader.
"""

import argparse
import hashlib
import json
from pathlib import Path

import numpy as np

from tubeforge.containers import write_npy

SHAPES = [
    (1,), (7,), (64,), (0,), (3, 4), (1, 1), (5, 0), (2, 3, 3), (4, 4, 4),
    (1, 16, 16, 3), (2, 16, 16, 3), (4, 16, 16, 3), (8, 8, 8, 3), (3, 7, 5, 3),
    (16, 4, 4, 3), (2, 2, 2, 2, 2), (1, 2, 3, 4, 5, 6), (11, 13), (100,), (255,),
    (1, 224, 3), (6, 1, 1, 3), (2, 10, 11, 1), (9, 3),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "npy")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for i, shape in enumerate(SHAPES):
        data = np.random.default_rng(i).integers(0, 256, size=shape, dtype=np.uint8)
        name = f"fixture_{i:02d}.npy"
        write_npy(data, shape, out / name)
        index.append({"file": name, "shape": list(shape), "seed": i,
                      "sha256": hashlib.sha256(data.tobytes()).hexdigest()})
    (out / "index.json").write_text(json.dumps(index, indent=1) + "\n")
    print(f"wrote {len(index)} fixtures to {out}")


if __name__ == "__main__":
    main()
