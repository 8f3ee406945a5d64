"""Exact decision-tree views of piecewise-linear neural networks."""

from .activations import (
    FinalActivation,
    InvalidValueError,
    PiecewiseLinearActivation,
    ShapeError,
    UnsupportedError,
    absolute,
    activation_matrix,
    hardtanh,
    identity,
    leaky_relu,
    relu,
    tabulate_activation,
)
from .bench import BenchRecord, PowerLawFit, bench_transform, fit_power_law, fit_records
from .conv import ConvLayer, PoolLayer, build_pool_decision, build_super_conv, selection_matrix
from .equivalence import EquivalenceReport, verify_equivalence
from .importance import GlobalFi, LocalFi, RegionalFi, fi_compare, fi_global, fi_local, fi_regional
from .io import Dataset, SchemaError, load_csv, load_network, load_tree, save_network, save_tree
from .levels import Level
from .network import ContractError, DenseLayer, Network, augment, forward, forward_batch
from .recurrent import RecurrentLayer, build_rnn_block, rnn_forward
from .tree import (
    DecisionTree,
    RoutingMiss,
    activation_pattern,
    append_path,
    effective_matrix,
    level_of,
    node_count,
    output_matrix,
    total_levels,
    transform,
    tree_predict,
)

__version__ = "0.1.0"
