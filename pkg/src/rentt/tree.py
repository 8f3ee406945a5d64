"""Exact network-to-tree transformation.

Every tree level decides one activation-pattern entry (one neuron, one
neuron at one time step, or one pooling region). A node stores the
effective matrix whose rows, multiplied by the raw input, give the
decision values of the level below it; a leaf stores the affine map from
the input to the network output (before any post-hoc final activation).
Only branches realized by the construction data are built.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .activations import FinalActivation, PiecewiseLinearActivation, ShapeError, region_of
from .levels import Level
from .network import ContractError, Network
from .recurrent import RecurrentLayer

log = logging.getLogger(__name__)


class RoutingMiss(LookupError):
    """An input reached a branch that the tree does not contain."""


# ---------------------------------------------------------------- patterns

def activation_pattern(net: Network, x0) -> np.ndarray:
    """Region index of every pattern entry of ``net`` for input ``x0``, layer by layer."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.size != net.input_dim:
        raise ShapeError(f"network expects an input of size {net.input_dim}")
    return net.forward_batch(x0[None, :])[1][0]


def _check_pattern(net: Network, pattern, upto: int, own: int = 0) -> list[np.ndarray]:
    """Split ``pattern`` per layer after checking it covers layers ``< upto`` plus ``own`` entries."""
    pattern = np.asarray(pattern, dtype=np.int64).ravel()
    need = sum(net.units[:upto]) + own
    if pattern.size < need:
        raise ContractError(f"pattern has {pattern.size} entries, {need} are needed")
    pad = np.zeros(max(0, sum(net.units) - pattern.size), np.int64)
    return net.split_pattern(np.concatenate([pattern, pad]))


def post_activation_matrix(net: Network, pattern, upto: int) -> np.ndarray:
    """Matrix mapping the raw input to the output of layer ``upto - 1`` (identity for 0)."""
    segs = _check_pattern(net, pattern, upto)
    m = np.eye(net.input_dim)
    for layer, seg in zip(net.layers[:upto], segs):
        m = layer.linear_map(seg) @ m
    return m


def effective_matrix(net: Network, pattern, upto_layer: int) -> np.ndarray:
    """Matrix whose rows give layer ``upto_layer``'s pre-activations from the raw input.

    Built from scratch from the pattern entries of the layers before
    ``upto_layer`` (a recurrent ``upto_layer`` also uses its own entries for
    steps before the last). ``upto_layer = len(net.layers) - 1`` yields the
    affine map to the pre-final-activation output.
    """
    if not 0 <= upto_layer < len(net.layers):
        raise ContractError(f"no layer {upto_layer}")
    layer = net.layers[upto_layer]
    own = layer.units - layer.blocks[-1] if isinstance(layer, RecurrentLayer) else 0
    segs = _check_pattern(net, pattern, upto_layer, own)
    return layer.pre_map(segs[upto_layer]) @ post_activation_matrix(net, pattern, upto_layer)


def output_matrix(net: Network, pattern) -> np.ndarray:
    """Leaf map for a full pattern: input -> output before the post-hoc activation."""
    pattern = np.asarray(pattern, dtype=np.int64)
    if pattern.size != sum(net.units):
        raise ContractError(f"a full pattern has {sum(net.units)} entries, got {pattern.size}")
    return post_activation_matrix(net, pattern, len(net.layers))


def decision_rule(effective_row, x0, act: PiecewiseLinearActivation) -> int:
    row = np.asarray(effective_row, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if row.shape != x0.shape:
        raise ShapeError("effective row and input differ in length")
    return region_of(float(row @ x0), act)


# ------------------------------------------------------- structural formulas

def _regions_for(regions, i: int) -> int:
    return regions if isinstance(regions, int) else regions[i - 1]


def level_of(dims, i: int, j: int) -> int:
    """Level of neuron ``j`` in layer ``i`` (1-based); ``dims`` are augmented sizes, input first."""
    if i < 1 or j < 1 or i >= len(dims) or j > dims[i] - 1:
        raise ValueError(f"no neuron {j} in layer {i}")
    return j + sum(dims[k] - 1 for k in range(1, i))


def node_count(dims, regions, i: int, j: int) -> int:
    """Nodes at level ``level_of(dims, i, j)`` of the full (unpruned) tree.

    ``regions`` is one region count for every layer or a list for layers
    ``1..N``. Earlier layers contribute their non-dummy neuron counts.
    """
    level_of(dims, i, j)
    count = _regions_for(regions, i) ** j
    for k in range(1, i):
        count *= _regions_for(regions, k) ** (dims[k] - 1)
    return count


def total_levels(dims) -> int:
    """Levels of the tree including the output layer's."""
    return sum(d - 1 for d in dims[1:])


# -------------------------------------------------------------- tree types

@dataclass(slots=True, eq=False)
class TreeNode:
    id: int
    depth: int
    parent: int | None
    branch: int | None
    effective: np.ndarray
    children: dict = field(default_factory=dict)
    samples: np.ndarray | None = None
    sample_count: int = 0


@dataclass(eq=False)
class DecisionTree:
    levels: list[Level]
    maxbranch: int
    input_dim: int
    output_dim: int
    output_levels: int
    final_activation: FinalActivation | None = None
    mode: str = "elastic"
    nodes: dict = field(default_factory=dict)
    root_id: int = 0

    @property
    def depth(self) -> int:
        """Number of branching levels (the depth of every leaf)."""
        return len(self.levels)

    @property
    def total_levels(self) -> int:
        """All levels, counting output neurons that are handled at the leaves."""
        return self.depth + self.output_levels

    @property
    def branching(self) -> list[int]:
        return [lv.branching for lv in self.levels]

    @property
    def root(self) -> TreeNode:
        return self.nodes[self.root_id]

    def child_id(self, parent_id: int, branch: int) -> int:
        return parent_id * self.maxbranch + branch + 1

    def leaves(self) -> list[TreeNode]:
        return sorted((n for n in self.nodes.values() if n.depth == self.depth), key=lambda n: n.id)

    def occupancy(self) -> list[int]:
        """Node count per depth, root (depth 0) first."""
        counts = [0] * (self.depth + 1)
        for n in self.nodes.values():
            counts[n.depth] += 1
        return counts

    def capacity(self) -> list[int]:
        """Node count per depth of the full, unpruned tree."""
        counts = [1]
        for lv in self.levels:
            counts.append(counts[-1] * lv.branching)
        return counts

    def pattern_of(self, node: TreeNode) -> np.ndarray:
        out = []
        while node.parent is not None:
            out.append(node.branch)
            node = self.nodes[node.parent]
        return np.array(out[::-1], dtype=np.int64)

    def add(self, node: TreeNode) -> TreeNode:
        self.nodes[node.id] = node
        if node.parent is not None:
            self.nodes[node.parent].children[node.branch] = node.id
        return node


# ------------------------------------------------------- path construction

@dataclass(frozen=True)
class _PathState:
    layer: int
    ctx: object
    block: int
    seg: tuple
    leaf: np.ndarray | None = None


def _enter(net: Network, li: int, m: np.ndarray) -> _PathState:
    while li < len(net.layers):
        layer = net.layers[li]
        ctx = layer.begin(m)
        if layer.blocks:
            return _PathState(li, ctx, 0, ())
        m = layer.output(ctx)
        li += 1
    return _PathState(li, None, 0, (), m)


def _root_state(net: Network) -> _PathState:
    return _enter(net, 0, np.eye(net.input_dim))


def _advance(net: Network, state: _PathState, branch: int) -> _PathState:
    layer = net.layers[state.layer]
    seg = state.seg + (int(branch),)
    if len(seg) < layer.blocks[state.block]:
        return _PathState(state.layer, state.ctx, state.block, seg)
    ctx = layer.after_block(state.ctx, state.block, seg)
    block = state.block + 1
    if block < len(layer.blocks):
        return _PathState(state.layer, ctx, block, ())
    return _enter(net, state.layer + 1, layer.output(ctx))


def _matrix(net: Network, state: _PathState) -> np.ndarray:
    if state.leaf is not None:
        return state.leaf
    return net.layers[state.layer].decision(state.ctx)


def _replay(net: Network, pattern) -> _PathState:
    state = _root_state(net)
    for b in pattern:
        state = _advance(net, state, b)
    return state


def empty_tree(net: Network, mode: str = "elastic") -> DecisionTree:
    levels = net.levels()
    last = net.layers[-1]
    output_levels = 0 if last.units else net.output_dim - 1
    tree = DecisionTree(
        levels=levels,
        maxbranch=max([lv.branching for lv in levels], default=1),
        input_dim=net.input_dim,
        output_dim=net.output_dim,
        output_levels=output_levels,
        final_activation=net.final_activation,
        mode=mode,
    )
    state = _root_state(net)
    tree.add(TreeNode(0, 0, None, None, _readonly(_matrix(net, state))))
    return tree


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def transform(net: Network, dataset, threads: int = 1, mode: str = "elastic") -> DecisionTree:
    """Build the pruned tree holding one leaf per activation pattern realized by ``dataset``.

    ``dataset`` rows carry the dummy 1 in column 0. Patterns come from one
    batched forward pass; effective matrices are computed once per distinct
    pattern prefix and shared by all nodes of that prefix. Node ids follow
    ``child = parent * maxbranch + branch + 1`` with root 0.
    """
    X = np.asarray(dataset, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("transform needs a non-empty dataset")
    _, patterns = net.forward_batch(X, threads=threads)
    tree = empty_tree(net, mode)
    root = tree.root
    root.samples = np.arange(X.shape[0])
    root.sample_count = X.shape[0]
    depth = tree.depth
    stack = [(root, _root_state(net))]
    while stack:
        node, state = stack.pop()
        if node.depth == depth:
            continue
        idx = node.samples
        vals = patterns[idx, node.depth]
        order = np.argsort(vals, kind="stable")
        branches, starts = np.unique(vals[order], return_index=True)
        ends = list(starts[1:]) + [idx.size]
        pushed = []
        for b, s, e in zip(branches, starts, ends):
            child_state = _advance(net, state, b)
            mat = _matrix(net, child_state)
            if mat.flags.writeable:
                mat = _readonly(mat)
            members = idx[order[s:e]]
            child = tree.add(TreeNode(
                tree.child_id(node.id, int(b)), node.depth + 1, node.id, int(b), mat,
                samples=members, sample_count=int(members.size),
            ))
            pushed.append((child, child_state))
        stack.extend(reversed(pushed))
    log.info("transformed %d samples into %d nodes / %d leaves", X.shape[0], len(tree.nodes), len(tree.leaves()))
    return tree


def _grow(tree: DecisionTree, net: Network, node: TreeNode, state: _PathState, branch: int):
    child_state = _advance(net, state, branch)
    mat = _matrix(net, child_state)
    if mat.flags.writeable:
        mat = _readonly(mat)
    child = tree.add(TreeNode(tree.child_id(node.id, branch), node.depth + 1, node.id, branch, mat,
                              samples=np.zeros(0, dtype=np.int64)))
    return child, child_state


def append_path(tree: DecisionTree, net: Network, x0) -> int:
    """Route ``x0`` and build whatever part of its path is missing; returns the leaf id.

    Missing nodes get their matrices from ``net``; existing nodes are never
    modified.
    """
    x0 = np.asarray(x0, dtype=float)
    node = tree.root
    state = None
    for d, level in enumerate(tree.levels):
        b = level.decide(node.effective, x0)
        cid = node.children.get(b)
        if cid is not None:
            node = tree.nodes[cid]
            continue
        if state is None:
            state = _replay(net, tree.pattern_of(node))
        node, state = _grow(tree, net, node, state, b)
        continue
    return node.id


def _route_one(tree: DecisionTree, x0: np.ndarray, net: Network | None, strict: bool) -> TreeNode:
    node = tree.root
    for level in tree.levels:
        b = level.decide(node.effective, x0)
        cid = node.children.get(b)
        if cid is None:
            if strict or net is None:
                raise RoutingMiss(f"no branch {b} below node {node.id} at depth {node.depth}")
            return tree.nodes[append_path(tree, net, x0)]
        node = tree.nodes[cid]
    return node


def _strict(tree: DecisionTree, net, strict):
    if strict is None:
        strict = tree.mode == "strict"
    return strict or net is None


def tree_predict(tree: DecisionTree, net: Network | None, x0, strict: bool | None = None) -> np.ndarray:
    """Tree output for ``x0``; unseen patterns are appended when ``net`` is given and not strict."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.size != tree.input_dim:
        raise ShapeError(f"tree expects an input of size {tree.input_dim}")
    leaf = _route_one(tree, x0, net, _strict(tree, net, strict))
    y = leaf.effective @ x0
    if tree.final_activation is not None:
        y = tree.final_activation(y)
    return y


def route_batch(tree: DecisionTree, X, net: Network | None = None, strict: bool | None = None) -> list:
    """Leaf id of every row of ``X``; ``None`` for rows that miss in strict mode."""
    X = np.asarray(X, dtype=float)
    strict = _strict(tree, net, strict)
    out = [None] * X.shape[0]
    stack = [(tree.root, np.arange(X.shape[0]), None)]
    while stack:
        node, idx, state = stack.pop()
        if node.depth == tree.depth:
            for i in idx:
                out[i] = node.id
            continue
        level = tree.levels[node.depth]
        branches = level.decide_batch(node.effective, X[idx])
        for b in np.unique(branches):
            b = int(b)
            members = idx[branches == b]
            cid = node.children.get(b)
            child_state = None
            if cid is None:
                if strict:
                    continue
                if state is None:
                    state = _replay(net, tree.pattern_of(node))
                child, child_state = _grow(tree, net, node, state, b)
            else:
                child = tree.nodes[cid]
            stack.append((child, members, child_state))
    return out


def predict_batch(tree: DecisionTree, X, net: Network | None = None, strict: bool | None = None):
    """Tree outputs for the rows of ``X`` and a mask of rows that could not be routed."""
    X = np.asarray(X, dtype=float)
    leaves = route_batch(tree, X, net, strict)
    Y = np.full((X.shape[0], tree.output_dim), np.nan)
    missed = np.array([lid is None for lid in leaves], dtype=bool)
    groups: dict = {}
    for i, lid in enumerate(leaves):
        if lid is not None:
            groups.setdefault(lid, []).append(i)
    for lid, rows in groups.items():
        rows = np.array(rows)
        Y[rows] = X[rows] @ tree.nodes[lid].effective.T
    if tree.final_activation is not None:
        Y[~missed] = tree.final_activation(Y[~missed])
    return Y, missed
