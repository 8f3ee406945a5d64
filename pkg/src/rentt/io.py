"""JSON formats for networks and trees, and CSV datasets."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .activations import FinalActivation, activation_from_dict
from .conv import ConvLayer, PoolLayer
from .levels import Level
from .network import DenseLayer, Network
from .recurrent import RecurrentLayer
from .tree import DecisionTree, TreeNode


class SchemaError(ValueError):
    """Input file does not describe a valid model, tree or dataset."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_vector = {"type": "array", "items": {"type": "number"}}
_activation = {
    "oneOf": [
        {"type": "null"},
        {"type": "string"},
        {
            "type": "object",
            "properties": {
                "name": {"type": "string"},
                "breakpoints": _vector,
                "slopes": _vector,
                "intercepts": _vector,
                "alpha": {"type": "number"},
            },
        },
    ]
}
_shape3 = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3, "maxItems": 3}

NETWORK_SCHEMA = {
    "type": "object",
    "required": ["layers"],
    "properties": {
        "layers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["type"],
                "properties": {"type": {"enum": ["dense", "conv", "maxpool", "recurrent"]}},
                "allOf": [
                    {
                        "if": {"properties": {"type": {"const": "dense"}}},
                        "then": {
                            "required": ["weights", "bias"],
                            "properties": {"weights": _matrix, "bias": _vector, "activation": _activation},
                        },
                    },
                    {
                        "if": {"properties": {"type": {"const": "conv"}}},
                        "then": {
                            "required": ["filters", "bias", "input"],
                            "properties": {"bias": _vector, "input": _shape3, "activation": _activation},
                        },
                    },
                    {
                        "if": {"properties": {"type": {"const": "maxpool"}}},
                        "then": {
                            "anyOf": [{"required": ["filter", "input"]}, {"required": ["regions", "n_features"]}],
                            "properties": {
                                "filter": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                           "minItems": 2, "maxItems": 2},
                                "stride": {"type": ["integer", "null"], "minimum": 1},
                                "input": _shape3,
                            },
                        },
                    },
                    {
                        "if": {"properties": {"type": {"const": "recurrent"}}},
                        "then": {
                            "required": ["input_weights", "hidden_weights", "bias", "activation", "time_steps"],
                            "properties": {
                                "input_weights": _matrix,
                                "hidden_weights": _matrix,
                                "bias": _vector,
                                "activation": _activation,
                                "time_steps": {"type": "integer", "minimum": 1},
                                "initial_state": _vector,
                            },
                        },
                    },
                ],
            },
        },
        "final_activation": {"enum": ["tanh", "softmax", "sigmoid", "identity", None]},
    },
}


def _layer_from_dict(d: dict):
    kind = d["type"]
    act = d.get("activation")
    act = None if act is None else activation_from_dict(act)
    if kind == "dense":
        return DenseLayer.from_raw(d["weights"], d["bias"], act)
    if kind == "conv":
        return ConvLayer(np.asarray(d["filters"], dtype=float), d["bias"], d["input"], act)
    if kind == "maxpool":
        if "filter" in d:
            return PoolLayer.from_filter(d["input"], d["filter"], d.get("stride"))
        return PoolLayer(d["n_features"], d["regions"])
    if act is None:
        raise ValueError("recurrent layers need a piecewise-linear activation")
    if np.any(np.asarray(d.get("initial_state", [0.0]), dtype=float) != 0.0):
        raise ValueError("only a zero initial hidden state is supported")
    return RecurrentLayer.from_raw(d["input_weights"], d["hidden_weights"], d["bias"], act, d["time_steps"])


def network_from_dict(doc) -> Network:
    try:
        jsonschema.validate(doc, NETWORK_SCHEMA)
    except jsonschema.ValidationError as err:
        raise SchemaError(err.json_path, err.message) from None
    layers = []
    for i, d in enumerate(doc["layers"]):
        try:
            layers.append(_layer_from_dict(d))
        except (ValueError, TypeError) as err:
            raise SchemaError(f"$.layers[{i}]", str(err)) from None
    final = doc.get("final_activation")
    try:
        return Network(layers, None if final is None else FinalActivation(final))
    except ValueError as err:
        raise SchemaError("$.layers", str(err)) from None


def load_network(path) -> Network:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise SchemaError("$", f"malformed JSON ({err})") from None
    return network_from_dict(doc)


def save_network(net: Network, path) -> None:
    Path(path).write_text(json.dumps(net.to_dict()), encoding="utf-8")


# ------------------------------------------------------------------ trees

def tree_to_dict(tree: DecisionTree) -> dict:
    nodes = []
    for nid in sorted(tree.nodes):
        n = tree.nodes[nid]
        nodes.append({
            "id": n.id,
            "depth": n.depth,
            "parent": n.parent,
            "branch_from_parent": n.branch,
            "effective": n.effective.tolist(),
            "samples": int(n.sample_count),
            "children": {str(b): n.children[b] for b in sorted(n.children)},
        })
    return {
        "meta": {
            "levels": tree.total_levels,
            "depth": tree.depth,
            "branching": tree.branching,
            "maxbranch": tree.maxbranch,
            "input_dim": tree.input_dim,
            "output_dim": tree.output_dim,
            "output_levels": tree.output_levels,
            "final_activation": None if tree.final_activation is None else tree.final_activation.name,
            "mode": tree.mode,
            "level_info": [lv.to_dict() for lv in tree.levels],
        },
        "nodes": nodes,
    }


def dumps_tree(tree: DecisionTree) -> str:
    return json.dumps(tree_to_dict(tree))


def save_tree(tree: DecisionTree, path) -> None:
    Path(path).write_text(dumps_tree(tree), encoding="utf-8")


def tree_from_dict(doc: dict) -> DecisionTree:
    try:
        meta = doc["meta"]
        final = meta.get("final_activation")
        tree = DecisionTree(
            levels=[Level.from_dict(d) for d in meta["level_info"]],
            maxbranch=meta["maxbranch"],
            input_dim=meta["input_dim"],
            output_dim=meta["output_dim"],
            output_levels=meta["output_levels"],
            final_activation=None if final is None else FinalActivation(final),
            mode=meta.get("mode", "elastic"),
        )
        for d in doc["nodes"]:
            eff = np.asarray(d["effective"], dtype=float)
            eff.setflags(write=False)
            tree.nodes[d["id"]] = TreeNode(
                d["id"], d["depth"], d["parent"], d["branch_from_parent"], eff,
                children={int(b): c for b, c in d["children"].items()},
                sample_count=d["samples"],
            )
    except (KeyError, TypeError) as err:
        raise SchemaError("$", f"invalid tree document ({err!r})") from None
    if tree.root_id not in tree.nodes:
        raise SchemaError("$.nodes", "tree has no root node")
    return tree


def load_tree(path) -> DecisionTree:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise SchemaError("$", f"malformed JSON ({err})") from None
    return tree_from_dict(doc)


# --------------------------------------------------------------- datasets

@dataclass
class Dataset:
    """Raw feature rows (no dummy) with optional labels and column names."""

    features: np.ndarray
    labels: np.ndarray | None = None
    columns: tuple = ()

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise SchemaError("$", "features must be a matrix")
        if not np.isfinite(self.features).all():
            raise SchemaError("$", "features contain NaN or Inf")
        if not self.columns:
            self.columns = tuple(f"x{j}" for j in range(self.features.shape[1]))

    def __len__(self):
        return self.features.shape[0]

    @property
    def inputs(self) -> np.ndarray:
        """Feature rows with the dummy 1 prepended."""
        return np.hstack([np.ones((len(self), 1)), self.features])


def load_csv(path, label_column: str | None = "label") -> Dataset:
    """Read a UTF-8 CSV with a header row; ``label_column`` is split off when present."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(str(path), "missing header row")
    header, body = [h.strip() for h in rows[0]], [r for r in rows[1:] if r]
    try:
        values = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as err:
        raise SchemaError(str(path), f"non-numeric or ragged rows ({err})") from None
    labels = None
    if label_column is not None and label_column in header:
        j = header.index(label_column)
        labels = values[:, j]
        values = np.delete(values, j, axis=1)
        header = header[:j] + header[j + 1:]
    if not np.isfinite(values).all() or (labels is not None and not np.isfinite(labels).all()):
        raise SchemaError(str(path), "data contain NaN or Inf")
    return Dataset(values, labels, tuple(header))


def save_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = list(dataset.columns) + ([label_column] if dataset.labels is not None else [])
        w.writerow(header)
        for i, row in enumerate(dataset.features):
            vals = [repr(float(v)) for v in row]
            if dataset.labels is not None:
                vals.append(repr(float(dataset.labels[i])))
            w.writerow(vals)
