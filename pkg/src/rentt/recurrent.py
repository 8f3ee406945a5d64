"""Recurrent layers unrolled over time into block lower-triangular matrices.

A sequence enters and leaves the network as one augmented vector
``(1, x(1), ..., x(T))`` without per-step dummies; inside the layer every
time slice carries its own dummy. The hidden state starts at zero and the
bias lives in the input weights, so the hidden-weight matrix has a zero
dummy row and column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import PiecewiseLinearActivation, ShapeError, activation_matrix_from_regions, apply_regions
from .levels import Level
from .network import Layer, augment, check_augmented


def augment_hidden(raw_hidden) -> np.ndarray:
    h = np.atleast_2d(np.asarray(raw_hidden, dtype=float))
    if h.shape[0] != h.shape[1]:
        raise ShapeError("hidden weights must be square")
    out = np.zeros((h.shape[0] + 1, h.shape[0] + 1))
    out[1:, 1:] = h
    return out


@dataclass(eq=False)
class RecurrentLayer(Layer):
    """Elman cell ``h(t) = act(Wh h(t-1) + Wx x(t))`` with ``h(0) = 0``."""

    input_weights: np.ndarray
    hidden_weights: np.ndarray
    activation: PiecewiseLinearActivation
    time_steps: int

    def __post_init__(self):
        self.input_weights = np.asarray(self.input_weights, dtype=float)
        self.hidden_weights = np.asarray(self.hidden_weights, dtype=float)
        check_augmented(self.input_weights)
        n = self.input_weights.shape[0]
        if self.hidden_weights.shape != (n, n):
            raise ShapeError(f"hidden weights must be {n}x{n}")
        if np.any(self.hidden_weights[0] != 0) or np.any(self.hidden_weights[:, 0] != 0):
            raise ShapeError("hidden weights must have a zero dummy row and column")
        self.time_steps = int(self.time_steps)
        if self.time_steps < 1:
            raise ShapeError("time_steps must be positive")
        T = self.time_steps
        nx, nh = self.step_in, self.step_out
        self._unpack = np.zeros((nx * T, self.n_in))
        self._pack = np.zeros((self.n_out, nh * T))
        self._pack[0, 0] = 1.0
        for t in range(T):
            self._unpack[t * nx, 0] = 1.0
            self._unpack[t * nx + 1 + np.arange(nx - 1), 1 + t * (nx - 1) + np.arange(nx - 1)] = 1.0
            self._pack[1 + t * (nh - 1) + np.arange(nh - 1), t * nh + 1 + np.arange(nh - 1)] = 1.0

    @classmethod
    def from_raw(cls, input_weights, hidden_weights, bias, activation, time_steps) -> "RecurrentLayer":
        return cls(augment(input_weights, bias), augment_hidden(hidden_weights), activation, time_steps)

    @property
    def step_in(self) -> int:
        """Per-step input size including the dummy."""
        return self.input_weights.shape[1]

    @property
    def step_out(self) -> int:
        return self.input_weights.shape[0]

    @property
    def n_in(self):
        return 1 + self.time_steps * (self.step_in - 1)

    @property
    def n_out(self):
        return 1 + self.time_steps * (self.step_out - 1)

    @property
    def blocks(self):
        return [self.step_out - 1] * self.time_steps

    def unpack(self, x: np.ndarray) -> np.ndarray:
        """Network-form sequence -> per-step slices with dummies (length ``step_in * T``)."""
        return self._unpack @ x

    def pack(self, h: np.ndarray) -> np.ndarray:
        return self._pack @ h

    def split_regions(self, regions) -> np.ndarray:
        regions = np.asarray(regions, dtype=np.int64)
        if regions.size != self.units:
            raise ShapeError(f"recurrent pattern needs {self.units} entries, got {regions.size}")
        return regions.reshape(self.time_steps, self.step_out - 1)

    def forward_batch(self, X):
        if X.shape[1] != self.n_in:
            raise ShapeError(f"recurrent layer expects inputs of size {self.n_in}, got {X.shape[1]}")
        nx, nh, T = self.step_in, self.step_out, self.time_steps
        slices = (X @ self._unpack.T).reshape(X.shape[0], T, nx)
        h = np.zeros((X.shape[0], nh))
        outs, regions = [], []
        act = self.activation
        for t in range(T):
            z = slices[:, t] @ self.input_weights.T + h @ self.hidden_weights.T
            r = act.region(z[:, 1:])
            h = np.empty_like(z)
            h[:, 0] = z[:, 0]
            h[:, 1:] = act.slopes[r] * z[:, 1:] + act.intercepts[r]
            outs.append(h[:, 1:])
            regions.append(r)
        Y = np.hstack([np.ones((X.shape[0], 1))] + outs)
        return Y, np.hstack(regions)

    def linear_map(self, regions):
        pats = self.split_regions(regions)
        return self._pack @ rnn_activation_blockdiag(self, pats) @ build_rnn_block(self, pats) @ self._unpack

    def pre_map(self, regions):
        return build_rnn_block(self, self.split_regions(regions)) @ self._unpack

    def levels(self, layer_index, offset):
        bp = tuple(float(t) for t in self.activation.breakpoints)
        nh = self.step_out - 1
        return [
            Level("neuron", layer_index, offset + t * nh + j, self.activation.n_regions, (j + 1,), bp,
                  timestep=t + 1, neuron=j)
            for t in range(self.time_steps) for j in range(nh)
        ]

    # incremental tree state: (per-step inputs, step, current pre-activation, finished states)
    def begin(self, m):
        nx = self.step_in
        slices = self._unpack @ m
        steps = [slices[t * nx:(t + 1) * nx] for t in range(self.time_steps)]
        return (steps, 0, self.input_weights @ steps[0], ())

    def decision(self, ctx):
        return ctx[2]

    def after_block(self, ctx, block, regions):
        steps, t, d, done = ctx
        h = apply_regions(d, regions, self.activation)
        done = done + (h,)
        if t + 1 < self.time_steps:
            nxt = self.input_weights @ steps[t + 1] + self.hidden_weights @ h
            return (steps, t + 1, nxt, done)
        return (steps, t + 1, None, done)

    def output(self, ctx):
        done = ctx[3]
        return np.vstack([done[0][:1]] + [h[1:] for h in done])

    def to_dict(self):
        return {
            "type": "recurrent",
            "input_weights": self.input_weights[1:, 1:].tolist(),
            "hidden_weights": self.hidden_weights[1:, 1:].tolist(),
            "bias": self.input_weights[1:, 0].tolist(),
            "activation": self.activation.to_dict(),
            "time_steps": self.time_steps,
        }


def rnn_forward(layer: RecurrentLayer, x_seq) -> np.ndarray:
    """Step-by-step recurrence on per-step slices; returns the per-step hidden states."""
    x = np.asarray(x_seq, dtype=float)
    nx, nh, T = layer.step_in, layer.step_out, layer.time_steps
    if x.shape != (nx * T,):
        raise ShapeError(f"expected a sequence of {T} slices of size {nx}")
    slices = x.reshape(T, nx)
    if np.any(slices[:, 0] != 1.0):
        raise ShapeError("every time slice needs its dummy 1")
    h = np.zeros(nh)
    out = []
    for t in range(T):
        z = layer.input_weights @ slices[t] + layer.hidden_weights @ h
        h = np.concatenate([[z[0]], layer.activation(z[1:])])
        out.append(h)
    return np.concatenate(out)


def rnn_patterns(layer: RecurrentLayer, x_seq) -> np.ndarray:
    """Per-step activation regions (``T x neurons``) realized by ``x_seq``."""
    x = np.asarray(x_seq, dtype=float)
    nx, nh, T = layer.step_in, layer.step_out, layer.time_steps
    slices = x.reshape(T, nx)
    h = np.zeros(nh)
    pats = []
    for t in range(T):
        z = layer.input_weights @ slices[t] + layer.hidden_weights @ h
        pats.append(layer.activation.region(z[1:]))
        h = np.concatenate([[z[0]], layer.activation(z[1:])])
    return np.array(pats, dtype=np.int64)


def build_rnn_block(layer: RecurrentLayer, patterns) -> np.ndarray:
    """Block lower-triangular matrix mapping per-step inputs to per-step pre-activations.

    Block ``(t, p)`` is ``Wh L(t-1) ... Wh L(p) Wx`` (later steps multiply
    from the left) and the diagonal blocks are ``Wx``. Only the patterns of
    steps ``1..T-1`` enter the matrix.
    """
    pats = np.asarray(patterns, dtype=np.int64)
    T, nx, nh = layer.time_steps, layer.step_in, layer.step_out
    if pats.ndim != 2 or pats.shape[0] != T or pats.shape[1] != nh - 1:
        raise ShapeError(f"patterns must be {T} x {nh - 1}")
    steps = [layer.hidden_weights @ activation_matrix_from_regions(pats[k], layer.activation) for k in range(T)]
    R = np.zeros((nh * T, nx * T))
    for t in range(T):
        carry = np.eye(nh)
        for p in range(t, -1, -1):
            if p < t:
                carry = carry @ steps[p]
            R[t * nh:(t + 1) * nh, p * nx:(p + 1) * nx] = carry @ layer.input_weights
    return R


def rnn_activation_blockdiag(layer: RecurrentLayer, patterns) -> np.ndarray:
    pats = np.asarray(patterns, dtype=np.int64)
    nh, T = layer.step_out, layer.time_steps
    out = np.zeros((nh * T, nh * T))
    for t in range(T):
        out[t * nh:(t + 1) * nh, t * nh:(t + 1) * nh] = activation_matrix_from_regions(pats[t], layer.activation)
    return out


def rnn_tree_level(i: int, j: int, t: int, dims) -> int:
    """Tree level of neuron ``j`` of layer ``i`` at step ``t`` (all 1-based).

    ``dims[k]`` is the augmented size of layer ``k`` (``dims[0]`` the input).
    """
    if i < 1 or j < 1 or t < 1:
        raise ValueError("layer, neuron and timestep are 1-based")
    return j + sum((dims[k] - 1) * t for k in range(1, i))
