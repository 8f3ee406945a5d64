"""Train the toy fixtures and print their ground-truth feature effects."""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from rentt import fi_global, fi_regional, transform  # noqa: E402
from tests import fixtures  # noqa: E402


def main():
    ab = fixtures.absolute()
    tree = transform(ab.net, ab.X)
    print("absolute: y = |x|")
    for r in fi_regional(tree, ab.X):
        print(f"  region {r.region_id}: {r.support} samples, effect {r.effect[0, 0]:+.6f}")

    lin = fixtures.linear()
    tree = transform(lin.net, lin.X)
    g = fi_global(tree, lin.X)
    print("linear: y = 4 x1 + x2 + 0.001 x3")
    print("  global effect", np.array2string(g.effect[0], precision=6))


if __name__ == "__main__":
    main()
