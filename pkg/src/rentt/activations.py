"""Piecewise-linear activations and their per-region linearization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

CONTINUITY_TOL = 1e-12


class ShapeError(ValueError):
    """Raised on dimension mismatches between matrices, vectors and layers."""


class InvalidValueError(ValueError):
    """Raised when a NaN reaches a region lookup."""


class UnsupportedError(ValueError):
    """Raised for activation names that have no known definition."""


@dataclass(frozen=True, eq=False)
class PiecewiseLinearActivation:
    """Continuous activation that is affine on each of ``len(slopes)`` intervals.

    Region ``k`` covers ``[breakpoints[k-1], breakpoints[k])``; the outer
    regions are unbounded.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    name: str = "pwl"

    def __post_init__(self):
        tau = np.atleast_1d(np.asarray(self.breakpoints, dtype=float))
        if tau.size == 0:
            tau = np.zeros(0)
        slopes = np.atleast_1d(np.asarray(self.slopes, dtype=float))
        intercepts = np.atleast_1d(np.asarray(self.intercepts, dtype=float))
        if tau.ndim != 1 or slopes.ndim != 1 or intercepts.ndim != 1:
            raise ShapeError("breakpoints, slopes and intercepts must be vectors")
        if slopes.size != tau.size + 1 or intercepts.size != tau.size + 1:
            raise ShapeError(
                f"{tau.size} breakpoints need {tau.size + 1} slopes/intercepts, "
                f"got {slopes.size}/{intercepts.size}"
            )
        if np.any(np.diff(tau) <= 0):
            raise InvalidValueError("breakpoints must be strictly increasing")
        left = slopes[:-1] * tau + intercepts[:-1]
        right = slopes[1:] * tau + intercepts[1:]
        scale = 1.0 + np.maximum(np.abs(left), np.abs(right))
        if np.any(np.abs(left - right) > CONTINUITY_TOL * scale):
            raise InvalidValueError("activation is discontinuous at a breakpoint")
        for attr, value in (("breakpoints", tau), ("slopes", slopes), ("intercepts", intercepts)):
            value.setflags(write=False)
            object.__setattr__(self, attr, value)

    @property
    def n_regions(self) -> int:
        return self.slopes.size

    def region(self, z):
        """Vectorized :func:`region_of`."""
        z = np.asarray(z, dtype=float)
        if np.isnan(z).any():
            raise InvalidValueError("NaN has no activation region")
        return np.searchsorted(self.breakpoints, z, side="right")

    def __call__(self, z):
        k = self.region(z)
        return self.slopes[k] * z + self.intercepts[k]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "breakpoints": self.breakpoints.tolist(),
            "slopes": self.slopes.tolist(),
            "intercepts": self.intercepts.tolist(),
        }


def relu() -> PiecewiseLinearActivation:
    return PiecewiseLinearActivation([0.0], [0.0, 1.0], [0.0, 0.0], name="relu")


def leaky_relu(alpha: float = 0.01) -> PiecewiseLinearActivation:
    return PiecewiseLinearActivation([0.0], [alpha, 1.0], [0.0, 0.0], name="leaky_relu")


def absolute() -> PiecewiseLinearActivation:
    return PiecewiseLinearActivation([0.0], [-1.0, 1.0], [0.0, 0.0], name="abs")


def hardtanh() -> PiecewiseLinearActivation:
    return PiecewiseLinearActivation(
        [-1.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 1.0], name="hardtanh"
    )


def identity() -> PiecewiseLinearActivation:
    return PiecewiseLinearActivation([], [1.0], [0.0], name="identity")


def region_of(z: float, act: PiecewiseLinearActivation) -> int:
    """Index of the interval of ``act`` containing ``z``; ties go to the upper region."""
    if np.isnan(z):
        raise InvalidValueError("NaN has no activation region")
    return int(np.searchsorted(act.breakpoints, z, side="right"))


def activation_matrix_from_regions(regions, act: PiecewiseLinearActivation) -> np.ndarray:
    """Activation matrix for a layer whose non-dummy neurons sit in ``regions``."""
    regions = np.asarray(regions, dtype=int)
    n = regions.size + 1
    lam = np.zeros((n, n))
    lam[0, 0] = 1.0
    idx = np.arange(1, n)
    lam[idx, idx] = act.slopes[regions]
    lam[idx, 0] = act.intercepts[regions]
    return lam


def activation_matrix(preactivation, act: PiecewiseLinearActivation) -> np.ndarray:
    """Matrix ``L`` with ``L @ pre == (1, act(pre[1:]))``.

    Slopes sit on the diagonal and intercepts in column 0, which multiplies
    the dummy coordinate ``pre[0] == 1``.
    """
    pre = np.asarray(preactivation, dtype=float)
    if pre.ndim != 1 or pre.size == 0 or pre[0] != 1.0:
        raise ShapeError("preactivation must be a vector whose dummy entry is 1")
    return activation_matrix_from_regions(act.region(pre[1:]), act)


def apply_regions(matrix: np.ndarray, regions, act: PiecewiseLinearActivation) -> np.ndarray:
    """``activation_matrix_from_regions(regions, act) @ matrix`` without the dense product."""
    regions = np.asarray(regions, dtype=int)
    out = np.empty_like(matrix)
    out[0] = matrix[0]
    out[1:] = act.slopes[regions][:, None] * matrix[1:] + act.intercepts[regions][:, None] * matrix[0]
    return out


# name -> (function, slope as x -> -inf, slope as x -> +inf)
_TABULATABLE: dict[str, tuple[Callable, float, float]] = {
    "relu": (lambda x: np.maximum(x, 0.0), 0.0, 1.0),
    "abs": (np.abs, -1.0, 1.0),
    "identity": (lambda x: np.asarray(x, dtype=float), 1.0, 1.0),
    "tanh": (np.tanh, 0.0, 0.0),
    "sigmoid": (lambda x: 1.0 / (1.0 + np.exp(-x)), 0.0, 0.0),
    "softplus": (lambda x: np.logaddexp(0.0, x), 0.0, 1.0),
}


def tabulate_activation(name: str, breakpoints) -> PiecewiseLinearActivation:
    """Secant interpolant of a pointwise function through its values at ``breakpoints``.

    The two unbounded end regions continue with the function's asymptotic
    slopes, anchored at the first and last breakpoint.
    """
    try:
        fn, left_slope, right_slope = _TABULATABLE[name]
    except KeyError:
        raise UnsupportedError(f"cannot tabulate activation {name!r}") from None
    tau = np.atleast_1d(np.asarray(breakpoints, dtype=float))
    if tau.size == 0:
        raise ValueError("tabulation needs at least one breakpoint")
    if np.any(np.diff(tau) <= 0):
        raise InvalidValueError("breakpoints must be strictly increasing")
    vals = np.asarray(fn(tau), dtype=float)
    inner = np.diff(vals) / np.diff(tau)
    slopes = np.concatenate([[left_slope], inner, [right_slope]])
    anchors = np.concatenate([[tau[0]], tau])
    anchor_vals = np.concatenate([[vals[0]], vals])
    intercepts = anchor_vals - slopes * anchors
    return PiecewiseLinearActivation(tau, slopes, intercepts, name=f"tabulated_{name}")


def _softmax(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


_FINAL = {
    "identity": lambda z: np.asarray(z, dtype=float),
    "tanh": np.tanh,
    "sigmoid": lambda z: 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float))),
    "softmax": _softmax,
}


@dataclass(frozen=True)
class FinalActivation:
    """Output activation applied after the tree's leaf model, never linearized.

    ``fn`` acts on the non-dummy output components; rows are samples.
    """

    name: str

    def __post_init__(self):
        if self.name not in _FINAL:
            raise UnsupportedError(f"unknown final activation {self.name!r}")

    def __call__(self, y):
        """Apply to vectors or row-stacks that still carry the dummy in column 0."""
        y = np.array(y, dtype=float)
        y[..., 1:] = _FINAL[self.name](y[..., 1:])
        return y


def activation_from_dict(spec) -> PiecewiseLinearActivation:
    """Build an activation from its JSON form (explicit breakpoints or a known name)."""
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name", "pwl")
    if "slopes" in spec:
        return PiecewiseLinearActivation(
            spec.get("breakpoints", []), spec["slopes"], spec["intercepts"], name=name
        )
    if name == "relu":
        return relu()
    if name == "leaky_relu":
        return leaky_relu(spec.get("alpha", 0.01))
    if name == "abs":
        return absolute()
    if name == "hardtanh":
        return hardtanh()
    if name == "identity":
        return identity()
    if "breakpoints" in spec:
        return tabulate_activation(name, spec["breakpoints"])
    raise UnsupportedError(f"activation {name!r} needs explicit breakpoints/slopes/intercepts")
