"""Convolution and max pooling expressed as matrices on flattened inputs.

Feature maps of shape ``(channels, height, width)`` are flattened channel by
channel, each channel row-major, with the dummy 1 prepended.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .activations import PiecewiseLinearActivation, ShapeError
from .levels import Level
from .network import Layer, _AffineActivated


def flatten_input(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise ShapeError("expected a (channels, height, width) tensor")
    return np.concatenate([[1.0], x.ravel()])


def unflatten_input(v, shape) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != int(np.prod(shape)) + 1:
        raise ShapeError(f"vector of size {v.size} does not hold a {tuple(shape)} tensor")
    return v[1:].reshape(shape).copy()


def conv_output_shape(filters_shape, input_shape) -> tuple[int, int, int]:
    kc, c, kh, kw = filters_shape
    _, h, w = input_shape
    return kc, h - kh + 1, w - kw + 1


@dataclass(eq=False)
class ConvLayer(_AffineActivated):
    """Stride-1, unpadded convolution followed by a piecewise-linear activation."""

    filters: np.ndarray
    bias: np.ndarray
    input_shape: tuple[int, int, int]
    activation: PiecewiseLinearActivation | None = None

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=float)
        self.bias = np.atleast_1d(np.asarray(self.bias, dtype=float))
        self.input_shape = tuple(int(s) for s in self.input_shape)
        if self.filters.ndim != 4:
            raise ShapeError("filters must be (n_filters, channels, kernel_h, kernel_w)")
        kc, c, kh, kw = self.filters.shape
        nc, nh, nw = self.input_shape
        if c != nc:
            raise ShapeError(f"filters span {c} channels, input has {nc}")
        if kh > nh or kw > nw:
            raise ShapeError("filter larger than the input")
        if self.bias.size != kc:
            raise ShapeError(f"need one bias per filter ({kc}), got {self.bias.size}")
        self.weights = build_super_conv(self)
        self.weights.setflags(write=False)

    @property
    def output_shape(self):
        return conv_output_shape(self.filters.shape, self.input_shape)

    @property
    def n_in(self):
        return int(np.prod(self.input_shape)) + 1

    @property
    def n_out(self):
        return int(np.prod(self.output_shape)) + 1

    def forward_batch(self, X):
        if X.shape[1] != self.n_in:
            raise ShapeError(f"conv layer expects inputs of size {self.n_in}, got {X.shape[1]}")
        kc, c, kh, kw = self.filters.shape
        _, oh, ow = self.output_shape
        maps = X[:, 1:].reshape((X.shape[0],) + self.input_shape)
        windows = np.lib.stride_tricks.sliding_window_view(maps, (kh, kw), axis=(2, 3))
        Z = np.einsum("nkabmq,fkmq->nfab", windows, self.filters) + self.bias[None, :, None, None]
        Z = Z.reshape(X.shape[0], -1)
        if self.activation is None:
            return prepend(Z), np.zeros((X.shape[0], 0), dtype=np.int64)
        regions = self.activation.region(Z)
        Y = self.activation.slopes[regions] * Z + self.activation.intercepts[regions]
        return prepend(Y), regions

    def to_dict(self):
        return {
            "type": "conv",
            "filters": self.filters.tolist(),
            "bias": self.bias.tolist(),
            "input": list(self.input_shape),
            "activation": None if self.activation is None else self.activation.to_dict(),
        }


def prepend(Y: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((Y.shape[0], 1)), Y])


def build_super_conv(layer: ConvLayer) -> np.ndarray:
    """Dense matrix performing the layer's convolution (bias included) on flat inputs."""
    kc, c, kh, kw = layer.filters.shape
    _, h, w = layer.input_shape
    _, oh, ow = conv_output_shape(layer.filters.shape, layer.input_shape)
    omega = np.zeros((kc * oh * ow + 1, c * h * w + 1))
    omega[0, 0] = 1.0
    f, a, b, k, m, q = np.meshgrid(
        np.arange(kc), np.arange(oh), np.arange(ow), np.arange(c), np.arange(kh), np.arange(kw),
        indexing="ij",
    )
    rows = 1 + f * oh * ow + a * ow + b
    cols = 1 + k * h * w + (a + m) * w + (b + q)
    omega[rows.ravel(), cols.ravel()] = layer.filters[f, k, m, q].ravel()
    out_rows = 1 + np.arange(kc * oh * ow)
    omega[out_rows, 0] = np.repeat(layer.bias, oh * ow)
    return omega


@dataclass(eq=False)
class PoolLayer(Layer):
    """Max pooling over explicit regions of the flattened (dummy-free) feature map.

    Regions are stored sorted, so region-local positions follow the flat
    index order; all regions have the same size.
    """

    n_features: int
    regions: tuple
    input_shape: tuple | None = None
    output_shape: tuple | None = None
    filter: tuple | None = None
    stride: int | None = None

    def __post_init__(self):
        self.regions = tuple(tuple(sorted(int(i) for i in r)) for r in self.regions)
        if not self.regions:
            raise ShapeError("pooling needs at least one region")
        sizes = {len(r) for r in self.regions}
        if len(sizes) != 1:
            raise ShapeError("all pooling regions must have the same size")
        for r in self.regions:
            if len(set(r)) != len(r) or min(r) < 0 or max(r) >= self.n_features:
                raise ShapeError(f"pooling region {r} out of bounds for {self.n_features} features")
        self._index = np.array(self.regions, dtype=np.int64) + 1

    @classmethod
    def from_filter(cls, input_shape, filter, stride=None) -> "PoolLayer":
        c, h, w = (int(s) for s in input_shape)
        dh, dw = (int(s) for s in filter)
        s = int(stride) if stride else dh
        if dh > h or dw > w or s < 1:
            raise ShapeError("pooling filter does not fit the input")
        oh, ow = (h - dh) // s + 1, (w - dw) // s + 1
        regions = []
        for ch in range(c):
            for a in range(oh):
                for b in range(ow):
                    regions.append([
                        ch * h * w + (a * s + m) * w + (b * s + q)
                        for m in range(dh) for q in range(dw)
                    ])
        return cls(c * h * w, regions, (c, h, w), (c, oh, ow), (dh, dw), s)

    @property
    def size(self) -> int:
        """Region size ``d``; also the branching factor of a pooling level."""
        return len(self.regions[0])

    @property
    def n_in(self):
        return self.n_features + 1

    @property
    def n_out(self):
        return len(self.regions) + 1

    @property
    def blocks(self):
        return [len(self.regions)]

    def forward_batch(self, X):
        if X.shape[1] != self.n_in:
            raise ShapeError(f"pool layer expects inputs of size {self.n_in}, got {X.shape[1]}")
        vals = X[:, self._index]
        arg = np.argmax(vals, axis=2)
        return prepend(vals.max(axis=2)), arg

    def linear_map(self, regions):
        return selection_matrix(self, regions)

    def pre_map(self, regions):
        return np.eye(self.n_in)

    def levels(self, layer_index, offset):
        return [
            Level("pool", layer_index, offset + k, self.size, tuple(int(i) for i in idx), neuron=k)
            for k, idx in enumerate(self._index)
        ]

    def begin(self, m):
        return (m, None)

    def decision(self, ctx):
        return ctx[0]

    def after_block(self, ctx, block, regions):
        m = ctx[0]
        picked = self._index[np.arange(len(self.regions)), np.asarray(regions, dtype=np.int64)]
        return (m, m[np.concatenate([[0], picked])])

    def output(self, ctx):
        return ctx[1]

    def to_dict(self):
        if self.filter is not None:
            return {
                "type": "maxpool",
                "filter": list(self.filter),
                "stride": self.stride,
                "input": list(self.input_shape),
            }
        return {"type": "maxpool", "n_features": self.n_features, "regions": [list(r) for r in self.regions]}


def selection_matrix(layer: PoolLayer, argmax) -> np.ndarray:
    """0/1 matrix picking the dummy and, per region, the entry at ``argmax``."""
    argmax = np.asarray(argmax, dtype=np.int64)
    p = np.zeros((layer.n_out, layer.n_in))
    p[0, 0] = 1.0
    picked = layer._index[np.arange(len(layer.regions)), argmax]
    p[np.arange(1, layer.n_out), picked] = 1.0
    return p


def pool_pattern(x_flat, layer: PoolLayer) -> np.ndarray:
    """Region-local position of each region's maximum (lowest index on ties)."""
    x = np.asarray(x_flat, dtype=float)
    if x.size != layer.n_in or x[0] != 1.0:
        raise ShapeError("expected a flat input with the dummy 1 in front")
    return np.argmax(x[layer._index], axis=1)


def pool_effective(x_flat, layer: PoolLayer) -> np.ndarray:
    return selection_matrix(layer, pool_pattern(x_flat, layer))


def build_pool_decision(layer: PoolLayer) -> np.ndarray:
    """Pairwise comparison matrix: one ``(+1, -1)`` row per ordered pair in each region.

    Rows run over regions, then over pairs ``(a, b)``, ``a < b``, in
    lexicographic order; column 0 (dummy) stays zero.
    """
    pairs = list(combinations(range(layer.size), 2))
    q = np.zeros((len(layer.regions) * len(pairs), layer.n_in))
    row = 0
    for idx in layer._index:
        for a, b in pairs:
            q[row, idx[a]] = 1.0
            q[row, idx[b]] = -1.0
            row += 1
    return q


def pool_pattern_from_decisions(differences, layer: PoolLayer) -> np.ndarray:
    """Recover per-region argmax positions from ``build_pool_decision(layer) @ x``.

    Position ``a`` wins when it is strictly larger than every earlier
    position and at least as large as every later one.
    """
    pairs = list(combinations(range(layer.size), 2))
    diffs = np.asarray(differences, dtype=float).reshape(len(layer.regions), len(pairs))
    out = np.empty(len(layer.regions), dtype=np.int64)
    for r, row in enumerate(diffs):
        wins = np.ones(layer.size, dtype=bool)
        for (a, b), delta in zip(pairs, row):
            if delta >= 0:
                wins[b] = False
            else:
                wins[a] = False
        out[r] = int(np.flatnonzero(wins)[0])
    return out
