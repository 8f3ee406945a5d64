"""Numerical comparison of a tree against its source network."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Network, forward_batch
from .tree import DecisionTree, predict_batch


@dataclass
class EquivalenceReport:
    """Differences between tree and network outputs on a dataset.

    ``max_rel_diff`` is the largest ``|tree - net| / (1 + |net|)`` over all
    output components; a sample mismatches when any component exceeds the
    tolerance or it cannot be routed in strict mode.
    """

    samples_checked: int
    tolerance: float
    max_abs_diff: float
    max_rel_diff: float
    mismatch_count: int
    unseen_count: int = 0
    metrics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.mismatch_count == 0

    def lines(self) -> list[str]:
        out = [
            f"samples checked : {self.samples_checked}",
            f"tolerance       : {self.tolerance:g}",
            f"max abs diff    : {self.max_abs_diff:.3e}",
            f"max rel diff    : {self.max_rel_diff:.3e}",
            f"mismatches      : {self.mismatch_count}",
            f"unseen patterns : {self.unseen_count}",
        ]
        for name, (nn, dt) in self.metrics.items():
            out.append(f"{name:<16}: network {nn:.12g}  tree {dt:.12g}")
        return out


def _metric(task, y, labels):
    if task == "classification":
        pred = (y[:, 0] > 0.5).astype(int) if y.shape[1] == 1 else np.argmax(y, axis=1)
        return "accuracy", float(np.mean(pred == labels.astype(int)))
    target = labels.reshape(y.shape[0], -1)
    return "mse", float(np.mean((y - target) ** 2))


def verify_equivalence(net: Network, tree: DecisionTree, dataset, tolerance: float = 1e-9,
                       labels=None, task: str | None = None, strict: bool | None = None) -> EquivalenceReport:
    """Compare tree and network outputs on the rows of ``dataset`` (dummy included).

    With ``labels`` the report also pairs accuracy (classification, argmax of
    the outputs) or MSE (regression) for both models. ``task`` defaults to
    classification for multi-output networks.
    """
    X = np.asarray(dataset, dtype=float)
    y_nn = forward_batch(net, X)[:, 1:]
    y_dt, missed = predict_batch(tree, X, net, strict)
    y_dt = y_dt[:, 1:]
    ok = ~missed
    diff = np.abs(y_dt[ok] - y_nn[ok])
    rel = diff / (1.0 + np.abs(y_nn[ok]))
    bad = np.zeros(X.shape[0], dtype=bool)
    bad[ok] = (rel > tolerance).any(axis=1) if rel.size else False
    bad |= missed
    metrics = {}
    if labels is not None and ok.all():
        labels = np.asarray(labels, dtype=float)
        if task is None:
            task = "classification" if y_nn.shape[1] > 1 else "regression"
        name, nn_val = _metric(task, y_nn, labels)
        _, dt_val = _metric(task, y_dt, labels)
        metrics[name] = (nn_val, dt_val)
    return EquivalenceReport(
        samples_checked=int(X.shape[0]),
        tolerance=float(tolerance),
        max_abs_diff=float(diff.max()) if diff.size else 0.0,
        max_rel_diff=float(rel.max()) if rel.size else 0.0,
        mismatch_count=int(bad.sum()),
        unseen_count=int(missed.sum()),
        metrics=metrics,
    )
