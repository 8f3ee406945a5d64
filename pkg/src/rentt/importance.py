"""Feature contribution, effect and direction read off the tree's leaf models.

All quantities are indexed ``[class, feature]``: classes are the non-dummy
output components, features the non-dummy input components.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tree import DecisionTree, RoutingMiss, _route_one, _strict, route_batch


@dataclass
class LocalFi:
    leaf_id: int
    contributions: np.ndarray
    effect: np.ndarray
    intercept: np.ndarray

    @property
    def prediction(self) -> np.ndarray:
        """Output before any post-hoc final activation."""
        return self.contributions.sum(axis=1) + self.intercept


@dataclass
class RegionalFi:
    region_id: int
    contribution: np.ndarray
    direction: np.ndarray
    effect: np.ndarray
    support: int
    signed: np.ndarray


@dataclass
class GlobalFi:
    contribution: np.ndarray
    direction: np.ndarray
    effect: np.ndarray
    regions: int


def local_from_matrix(effective: np.ndarray, x0, leaf_id: int = -1) -> LocalFi:
    x0 = np.asarray(x0, dtype=float)
    effect = effective[1:, 1:]
    return LocalFi(leaf_id, effect * x0[1:][None, :], effect.copy(), effective[1:, 0].copy())


def fi_local(tree: DecisionTree, x0, net=None, strict: bool | None = None) -> LocalFi:
    x0 = np.asarray(x0, dtype=float)
    leaf = _route_one(tree, x0, net, _strict(tree, net, strict))
    return local_from_matrix(leaf.effective, x0, leaf.id)


def fi_regional(tree: DecisionTree, dataset, net=None, strict: bool | None = None) -> list[RegionalFi]:
    """One entry per populated leaf, ordered by leaf id."""
    X = np.asarray(dataset, dtype=float)
    leaves = route_batch(tree, X, net, strict)
    if any(lid is None for lid in leaves):
        raise RoutingMiss(f"{sum(lid is None for lid in leaves)} samples fall outside the tree")
    groups: dict = {}
    for i, lid in enumerate(leaves):
        groups.setdefault(lid, []).append(i)
    out = []
    for lid in sorted(groups):
        rows = X[np.array(groups[lid])]
        effect = tree.nodes[lid].effective[1:, 1:]
        products = effect[None, :, :] * rows[:, None, 1:]
        signed = products.mean(axis=0)
        out.append(RegionalFi(
            region_id=lid,
            contribution=np.abs(products).mean(axis=0),
            direction=np.sign(signed),
            effect=effect.copy(),
            support=len(groups[lid]),
            signed=signed,
        ))
    return out


def fi_global(tree: DecisionTree, dataset=None, net=None, strict: bool | None = None,
              regional: list[RegionalFi] | None = None) -> GlobalFi:
    """Unweighted mean over populated regions (each region counts once)."""
    if regional is None:
        regional = fi_regional(tree, dataset, net, strict)
    if not regional:
        raise ValueError("no populated region")
    return GlobalFi(
        contribution=np.mean([r.contribution for r in regional], axis=0),
        direction=np.sign(np.mean([r.signed for r in regional], axis=0)),
        effect=np.mean([r.effect for r in regional], axis=0),
        regions=len(regional),
    )


def fi_compare(a, b) -> dict:
    """RMSE between two tables and the RMSE relative to their pooled mean magnitude (percent)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"tables differ in shape: {a.shape} vs {b.shape}")
    rmse = float(np.sqrt(np.mean((a - b) ** 2)))
    scale = float(np.mean(np.concatenate([np.abs(a).ravel(), np.abs(b).ravel()])))
    if rmse == 0.0:
        rel = 0.0
    else:
        rel = 100.0 * rmse / scale
    return {"rmse": rmse, "relative_error": rel}


# ---------------------------------------------------------------- reports

FIELDS = ("scope", "region_id", "class", "feature", "contribution", "effect", "direction", "support")


def _pick_classes(table: np.ndarray, cls):
    if cls is None:
        return [np.arange(table.shape[0])] * table.shape[1]
    if cls == "max":
        return [np.array([int(np.argmax(table[:, j]))]) for j in range(table.shape[1])]
    return [np.array([int(cls)])] * table.shape[1]


def report_rows(fi, features, cls=None) -> list[dict]:
    """Flatten a LocalFi, a list of RegionalFi or a GlobalFi into report rows."""
    rows = []
    if isinstance(fi, LocalFi):
        items = [("local", fi.leaf_id, fi.contributions, fi.effect, np.sign(fi.contributions), 1)]
    elif isinstance(fi, GlobalFi):
        items = [("global", "-", fi.contribution, fi.effect, fi.direction, fi.regions)]
    else:
        items = [("regional", r.region_id, r.contribution, r.effect, r.direction, r.support) for r in fi]
    for scope, rid, contrib, effect, direction, support in items:
        for j, classes in enumerate(_pick_classes(np.abs(contrib), cls)):
            for l in classes:
                rows.append({
                    "scope": scope,
                    "region_id": rid,
                    "class": int(l),
                    "feature": features[j],
                    "contribution": float(contrib[l, j]),
                    "effect": float(effect[l, j]),
                    "direction": int(direction[l, j]),
                    "support": int(support),
                })
    return rows


def write_report(rows: list[dict], path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(rows), encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def render_table(rows: list[dict], limit: int = 20) -> str:
    ranked = sorted(rows, key=lambda r: (-abs(r["contribution"]), str(r["region_id"]), r["class"], r["feature"]))
    lines = [f"{'scope':<9}{'region':>22} {'class':>5} {'feature':<14}{'contribution':>14}{'effect':>14}{'dir':>5}{'n':>7}"]
    for r in ranked[:limit]:
        lines.append(
            f"{r['scope']:<9}{str(r['region_id']):>22} {r['class']:>5} {str(r['feature']):<14}"
            f"{r['contribution']:>14.6g}{r['effect']:>14.6g}{r['direction']:>5}{r['support']:>7}"
        )
    return "\n".join(lines)
