"""Bias-augmented piecewise-linear networks and the reference forward pass.

Every vector carries a dummy coordinate 1 at index 0 and every weight
matrix has the block form ``[[1, 0], [b, W]]`` so biases travel through
plain matrix products.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .activations import (
    FinalActivation,
    PiecewiseLinearActivation,
    ShapeError,
    activation_matrix_from_regions,
    apply_regions,
)
from .levels import Level


class ContractError(ValueError):
    """Raised when a pattern or index does not cover what an operation needs."""


def augment(raw_weights, bias) -> np.ndarray:
    """Block matrix ``[[1, 0], [bias, raw_weights]]``."""
    w = np.atleast_2d(np.asarray(raw_weights, dtype=float))
    b = np.atleast_1d(np.asarray(bias, dtype=float))
    if b.ndim != 1 or b.size != w.shape[0]:
        raise ShapeError(f"bias of length {b.size} does not match {w.shape[0]} weight rows")
    out = np.zeros((w.shape[0] + 1, w.shape[1] + 1))
    out[0, 0] = 1.0
    out[1:, 0] = b
    out[1:, 1:] = w
    return out


def check_augmented(w: np.ndarray) -> None:
    if w.ndim != 2 or w[0, 0] != 1.0 or np.any(w[0, 1:] != 0.0):
        raise ShapeError("augmented weights need top row (1, 0, ..., 0)")


def prepend_dummy(X) -> np.ndarray:
    """Rows of raw features -> rows with the dummy 1 in column 0."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return np.concatenate([[1.0], X])
    return np.hstack([np.ones((X.shape[0], 1)), X])


class Layer:
    """Interface shared by dense, convolutional, pooling and recurrent layers.

    ``units`` is the number of activation-pattern entries the layer adds;
    they are decided in ``blocks`` (consecutive groups) and a block boundary
    is where the layer can update its linear state.
    """

    n_in: int
    n_out: int

    @property
    def units(self) -> int:
        return sum(self.blocks)

    @property
    def blocks(self) -> list[int]:
        raise NotImplementedError

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_batch(x[None, :])
        return y[0]

    def forward_batch(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Outputs (rows) and the activation-region indices of each row."""
        raise NotImplementedError

    def linear_map(self, regions) -> np.ndarray:
        """Matrix ``n_out x n_in`` equal to the layer on inputs realizing ``regions``."""
        raise NotImplementedError

    def pre_map(self, regions) -> np.ndarray:
        """Matrix whose rows give this layer's decision values from its input."""
        raise NotImplementedError

    def levels(self, layer_index: int, offset: int) -> list[Level]:
        raise NotImplementedError

    # incremental state used while growing a tree path
    def begin(self, m: np.ndarray):
        raise NotImplementedError

    def decision(self, ctx) -> np.ndarray:
        raise NotImplementedError

    def after_block(self, ctx, block: int, regions):
        raise NotImplementedError

    def output(self, ctx) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class _AffineActivated(Layer):
    """Layer ``x -> act(W x)`` for a fixed augmented matrix ``W``."""

    weights: np.ndarray
    activation: PiecewiseLinearActivation | None

    @property
    def blocks(self) -> list[int]:
        return [] if self.activation is None else [self.n_out - 1]

    def forward_batch(self, X):
        if X.shape[1] != self.n_in:
            raise ShapeError(f"layer expects inputs of size {self.n_in}, got {X.shape[1]}")
        Z = X @ self.weights.T
        if self.activation is None:
            return Z, np.zeros((X.shape[0], 0), dtype=np.int64)
        regions = self.activation.region(Z[:, 1:])
        act = self.activation
        Y = np.empty_like(Z)
        Y[:, 0] = Z[:, 0]
        Y[:, 1:] = act.slopes[regions] * Z[:, 1:] + act.intercepts[regions]
        return Y, regions

    def linear_map(self, regions):
        if self.activation is None:
            return self.weights.copy()
        return activation_matrix_from_regions(regions, self.activation) @ self.weights

    def pre_map(self, regions):
        return self.weights

    def levels(self, layer_index, offset):
        if self.activation is None:
            return []
        bp = tuple(float(t) for t in self.activation.breakpoints)
        return [
            Level("neuron", layer_index, offset + j, self.activation.n_regions, (j + 1,), bp, neuron=j)
            for j in range(self.n_out - 1)
        ]

    def begin(self, m):
        return (self.weights @ m, None)

    def decision(self, ctx):
        return ctx[0]

    def after_block(self, ctx, block, regions):
        return (ctx[0], apply_regions(ctx[0], regions, self.activation))

    def output(self, ctx):
        d, out = ctx
        return d if out is None else out


@dataclass(eq=False)
class DenseLayer(_AffineActivated):
    """Fully connected layer on augmented vectors.

    ``activation=None`` makes the layer affine: it adds no tree levels and,
    as the last layer, leaves the output to the network's final activation.
    """

    weights: np.ndarray
    activation: PiecewiseLinearActivation | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        check_augmented(self.weights)
        self.weights.setflags(write=False)

    @property
    def n_in(self):
        return self.weights.shape[1]

    @property
    def n_out(self):
        return self.weights.shape[0]

    @classmethod
    def from_raw(cls, raw_weights, bias, activation=None) -> "DenseLayer":
        return cls(augment(raw_weights, bias), activation)

    def to_dict(self):
        return {
            "type": "dense",
            "weights": self.weights[1:, 1:].tolist(),
            "bias": self.weights[1:, 0].tolist(),
            "activation": None if self.activation is None else self.activation.to_dict(),
        }


@dataclass(eq=False)
class Network:
    """Ordered layers plus an optional output activation applied post hoc."""

    layers: list
    final_activation: FinalActivation | None = None

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise ShapeError(f"layer output size {a.n_out} does not feed input size {b.n_in}")
        if self.final_activation is not None and self.final_activation.name == "identity":
            self.final_activation = None
        if self.final_activation is not None:
            last = self.layers[-1]
            if not isinstance(last, DenseLayer) or last.activation is not None:
                raise ShapeError("a post-hoc final activation needs a last dense layer without activation")

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def units(self) -> list[int]:
        return [layer.units for layer in self.layers]

    def levels(self) -> list[Level]:
        out, offset = [], 0
        for i, layer in enumerate(self.layers):
            out.extend(layer.levels(i, offset))
            offset += layer.units
        return out

    def forward_batch(self, X, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Pre-final outputs and full activation patterns for the rows of ``X``."""
        X = np.asarray(X, dtype=float)
        if threads > 1 and X.shape[0] > threads:
            chunks = np.array_split(X, threads)
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(self._forward_chunk, chunks))
            return np.vstack([p[0] for p in parts]), np.vstack([p[1] for p in parts])
        return self._forward_chunk(X)

    def _forward_chunk(self, X):
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ShapeError(f"network expects rows of size {self.input_dim}")
        if np.any(X[:, 0] != 1.0):
            raise ShapeError("inputs must carry the dummy 1 in column 0")
        patterns = []
        for layer in self.layers:
            X, regions = layer.forward_batch(X)
            patterns.append(np.asarray(regions, dtype=np.int64))
        return X, np.hstack(patterns) if patterns else np.zeros((X.shape[0], 0), np.int64)

    def split_pattern(self, pattern) -> list[np.ndarray]:
        pattern = np.asarray(pattern, dtype=np.int64)
        out, offset = [], 0
        for layer in self.layers:
            out.append(pattern[offset:offset + layer.units])
            offset += layer.units
        return out

    def to_dict(self) -> dict:
        return {
            "layers": [layer.to_dict() for layer in self.layers],
            "final_activation": None if self.final_activation is None else self.final_activation.name,
        }


def forward(net: Network, x0) -> np.ndarray:
    """Reference network output, final activation included."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.size != net.input_dim:
        raise ShapeError(f"network expects an input of size {net.input_dim}")
    return forward_batch(net, x0[None, :])[0]


def forward_batch(net: Network, X) -> np.ndarray:
    Y, _ = net.forward_batch(np.asarray(X, dtype=float))
    if net.final_activation is not None:
        Y = net.final_activation(Y)
    return Y


def pre_final_batch(net: Network, X) -> np.ndarray:
    """Outputs before the post-hoc final activation."""
    return net.forward_batch(np.asarray(X, dtype=float))[0]
