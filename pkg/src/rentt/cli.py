"""``rentt`` command line.

Exit codes:
    0  success
    1  verification failed (mismatches or unrouted samples)
    2  usage or schema error
    3  empty dataset
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .bench import bench_transform, fit_records, read_bench_csv, write_bench_csv
from .equivalence import verify_equivalence
from .importance import fi_global, fi_local, fi_regional, render_table, report_rows, write_report
from .io import SchemaError, load_csv, load_network, load_tree, save_tree
from .tree import RoutingMiss, transform

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_EMPTY = 0, 1, 2, 3

log = logging.getLogger("rentt")


class UsageError(Exception):
    pass


class EmptyData(Exception):
    pass


def _dataset(path, label_column, n_features=None):
    data = load_csv(path, label_column=label_column)
    if len(data.features) == 0:
        raise EmptyData(f"{path}: no data rows")
    if n_features is not None and data.features.shape[1] != n_features:
        raise SchemaError("$", f"{path} has {data.features.shape[1]} feature columns, model expects {n_features}")
    return data


def cmd_transform(args) -> int:
    net = load_network(args.model)
    data = _dataset(args.data, args.label_column, net.input_dim - 1)
    tree = transform(net, data.inputs, threads=args.threads, mode="strict" if args.strict else "elastic")
    save_tree(tree, args.out)
    leaves = tree.leaves()
    print(f"nodes: {len(tree.nodes)}")
    print(f"leaves: {len(leaves)}")
    print(f"total levels: {tree.total_levels}")
    for depth, (count, cap) in enumerate(zip(tree.occupancy(), tree.capacity())):
        print(f"level {depth}: {count} of {cap}")
    return EXIT_OK


def cmd_verify(args) -> int:
    net = load_network(args.model)
    tree = load_tree(args.tree)
    data = _dataset(args.data, args.label_column, net.input_dim - 1)
    strict = True if args.strict else (False if args.elastic else None)
    report = verify_equivalence(net, tree, data.inputs, tolerance=args.tol, labels=data.labels,
                                task=args.task, strict=strict)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_FAIL


def _class_arg(value):
    if value is None or value == "max":
        return value
    return int(value)


def cmd_fi(args) -> int:
    tree = load_tree(args.tree)
    net = load_network(args.model) if args.model else None
    data = _dataset(args.data, args.label_column, tree.input_dim - 1)
    cls = _class_arg(args.cls)
    if args.scope == "local":
        if args.sample is None:
            raise UsageError("--scope local requires --sample")
        if not 0 <= args.sample < len(data.features):
            raise UsageError(f"--sample {args.sample} out of range for {len(data.features)} rows")
        fi = fi_local(tree, data.inputs[args.sample], net=net)
    elif args.scope == "regional":
        fi = fi_regional(tree, data.inputs, net=net)
    else:
        fi = fi_global(tree, data.inputs, net=net)
    rows = report_rows(fi, data.columns, cls=cls)
    if args.out:
        write_report(rows, args.out)
    print(render_table(rows, limit=args.limit))
    return EXIT_OK


def _grid(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _range(text):
    lo, _, hi = text.partition(":")
    return float(lo), float(hi)


def cmd_bench(args) -> int:
    cap = args.memory_cap * 2**20 if args.memory_cap else None
    records = bench_transform(_grid(args.grid), seed=args.seed, repeats=args.repeats, n_samples=args.samples,
                              n_features=args.features, layers=args.layers, memory_cap=cap,
                              isolate=not args.in_process, threads=args.threads)
    write_bench_csv(records, args.out, append=not args.overwrite)
    for r in records:
        flag = " partial" if r.partial else ""
        print(f"x={r.hidden_neurons} t={r.wall_time:.4f}±{r.wall_time_std:.4f}s "
              f"mem={r.peak_memory / 2**20:.2f}±{r.peak_memory_std / 2**20:.2f}MiB{flag}")
    return EXIT_OK


def cmd_fit(args) -> int:
    records = read_bench_csv(args.bench)
    fit_range = _range(args.range) if args.range else None
    for quantity in ("time", "memory") if args.quantity == "both" else (args.quantity,):
        fit = fit_records(records, quantity, fit_range)
        print(f"{quantity}: b={fit.exponent:.4f} a={fit.coefficient:.6g} "
              f"range={fit.fit_range[0]:g}:{fit.fit_range[1]:g} residual={fit.residual:.4g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rentt", description="Exact decision trees from piecewise-linear networks.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("transform", help="build a tree from a model and dataset")
    t.add_argument("--model", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--label-column", default="label")
    mode = t.add_mutually_exclusive_group()
    mode.add_argument("--strict", action="store_true")
    mode.add_argument("--elastic", action="store_true")
    t.set_defaults(func=cmd_transform)

    v = sub.add_parser("verify", help="compare tree and network outputs")
    v.add_argument("--model", required=True)
    v.add_argument("--tree", required=True)
    v.add_argument("--data", required=True)
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--task", choices=("classification", "regression"))
    v.add_argument("--label-column", default="label")
    vm = v.add_mutually_exclusive_group()
    vm.add_argument("--strict", action="store_true")
    vm.add_argument("--elastic", action="store_true")
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("fi", help="feature importance from a tree")
    f.add_argument("--tree", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--scope", choices=("local", "regional", "global"), required=True)
    f.add_argument("--sample", type=int)
    f.add_argument("--class", dest="cls", help="output class index or 'max'")
    f.add_argument("--model", help="network used to grow missing branches")
    f.add_argument("--out")
    f.add_argument("--limit", type=int)
    f.add_argument("--label-column", default="label")
    f.set_defaults(func=cmd_fi)

    b = sub.add_parser("bench", help="runtime and memory scaling of transform")
    b.add_argument("--grid", default="16,32,64,128,256")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--samples", type=int, default=500)
    b.add_argument("--features", type=int, default=8)
    b.add_argument("--layers", type=int, default=2)
    b.add_argument("--memory-cap", type=float, help="MiB over baseline before aborting")
    b.add_argument("--in-process", action="store_true")
    b.add_argument("--overwrite", action="store_true")
    b.add_argument("--out", default="bench.csv")
    b.set_defaults(func=cmd_bench)

    fp = sub.add_parser("fit", help="power-law fit of a bench CSV")
    fp.add_argument("--bench", required=True)
    fp.add_argument("--range", help="lo:hi in hidden neurons")
    fp.add_argument("--quantity", choices=("time", "memory", "both"), default="both")
    fp.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("RENTT_LOG", "WARNING").upper(), format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as err:
        parser.error(str(err))
    except EmptyData as err:
        print(f"empty dataset: {err}", file=sys.stderr)
        return EXIT_EMPTY
    except RoutingMiss as err:
        print(f"routing miss: {err}", file=sys.stderr)
        return EXIT_FAIL
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
