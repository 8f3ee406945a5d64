"""Build the tree of a small 2-3-1 network and print its level structure.

Compares ReLU, whose all-off prefix collapses one branch at the second hidden
layer, with the two-region absolute value that realizes the full tree.
"""

import argparse

import numpy as np

from rentt import DenseLayer, FinalActivation, Network, absolute, augment, relu, transform


def net(act):
    w1 = augment(np.eye(2), [0.0, 0.0])
    w2 = augment([[1.0, 1.0], [1.0, -1.0], [-1.0, 0.5]], [-1.0, 0.2, 0.3])
    w3 = augment([[0.5, -0.7, 1.1]], [0.05])
    return Network([DenseLayer(w1, act), DenseLayer(w2, act), DenseLayer(w3)], FinalActivation("tanh"))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=41, help="points per axis on [-2, 2]^2")
    args = ap.parse_args()

    g = np.linspace(-2, 2, args.grid)
    X = np.array([(1.0, a, b) for a in g for b in g])
    for name, act in (("relu", relu()), ("abs", absolute())):
        tree = transform(net(act), X)
        occ, cap = tree.occupancy(), tree.capacity()
        print(f"{name}: {len(tree.nodes)} nodes, {len(tree.leaves())} leaves, {tree.total_levels} levels")
        for d, (o, c) in enumerate(zip(occ, cap)):
            print(f"  level {d}: {o} of {c}")


if __name__ == "__main__":
    main()
