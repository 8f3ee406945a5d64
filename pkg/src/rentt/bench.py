"""Runtime and peak-memory scaling of the transformation, with power-law fits."""

from __future__ import annotations

import csv
import logging
import multiprocessing as mp
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from queue import Empty

import numpy as np
import psutil

from .activations import relu
from .network import DenseLayer, Network, augment
from .tree import transform

log = logging.getLogger(__name__)

SAMPLE_INTERVAL = 0.005  # 200 Hz
CAP_EXIT = 86


@dataclass
class BenchRecord:
    hidden_neurons: int
    wall_time: float
    wall_time_std: float
    peak_memory: float
    peak_memory_std: float
    repeats: int
    partial: bool = False


@dataclass
class PowerLawFit:
    """``y = coefficient * x ** exponent`` fitted on log-log data."""

    exponent: float
    coefficient: float
    fit_range: tuple
    residual: float

    def __call__(self, x):
        return self.coefficient * np.asarray(x, dtype=float) ** self.exponent


def random_relu_network(n_features: int, hidden: list[int], n_out: int = 1, seed: int = 0) -> Network:
    """Untrained ReLU network with He-scaled Gaussian weights and small biases."""
    rng = np.random.default_rng(seed)
    sizes = [n_features] + list(hidden)
    layers = []
    for a, b in zip(sizes, sizes[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / a), (b, a))
        layers.append(DenseLayer(augment(w, rng.normal(0.0, 0.1, b)), relu()))
    w = rng.normal(0.0, np.sqrt(1.0 / sizes[-1]), (n_out, sizes[-1]))
    layers.append(DenseLayer(augment(w, np.zeros(n_out))))
    return Network(layers)


def synthetic_inputs(n_samples: int, n_features: int, seed: int = 0) -> np.ndarray:
    """I.i.d. uniform rows on ``[-1, 1]^n_features`` with the dummy prepended."""
    rng = np.random.default_rng(seed)
    return np.hstack([np.ones((n_samples, 1)), rng.uniform(-1.0, 1.0, (n_samples, n_features))])


def split_hidden(x: int, layers: int) -> list[int]:
    base, extra = divmod(x, layers)
    return [base + (1 if i < extra else 0) for i in range(layers)]


class MemoryWatcher:
    """Background sampler of this process's resident set size.

    Samples every ``interval`` seconds; ``peak`` is the largest RSS seen
    minus the RSS at start. With ``cap`` (bytes over baseline) set, exceeding
    it triggers ``on_cap``.
    """

    def __init__(self, interval: float = SAMPLE_INTERVAL, cap: float | None = None, on_cap=None):
        self.interval = interval
        self.cap = cap
        self.on_cap = on_cap
        self.exceeded = False
        self._proc = psutil.Process()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self.samples = 0

    def _rss(self) -> int:
        return self._proc.memory_info().rss

    def _run(self):
        while not self._stop.is_set():
            self._observe()
            self._stop.wait(self.interval)

    def _observe(self):
        rss = self._rss()
        self.samples += 1
        if rss > self._max:
            self._max = rss
        if self.cap is not None and rss - self.baseline > self.cap and not self.exceeded:
            self.exceeded = True
            if self.on_cap is not None:
                self.on_cap()

    def __enter__(self):
        self.baseline = self._rss()
        self._max = self.baseline
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        self._thread.join()
        self._observe()
        return False

    @property
    def peak(self) -> int:
        return self._max - self.baseline


def measure_once(x: int, n_samples: int, n_features: int, layers: int, seed: int,
                 cap: float | None = None, on_cap=None, threads: int = 1) -> tuple[float, int, bool]:
    """Time one transformation of a fresh random network with ``x`` hidden neurons."""
    net = random_relu_network(n_features, split_hidden(x, layers), seed=seed)
    X = synthetic_inputs(n_samples, n_features, seed=seed + 1)
    with MemoryWatcher(cap=cap, on_cap=on_cap) as watcher:
        start = time.perf_counter()
        tree = transform(net, X, threads=threads)
        elapsed = time.perf_counter() - start
    del tree
    return elapsed, watcher.peak, watcher.exceeded


def _run(args, on_cap):
    x, n_samples, n_features, layers, seed, cap, threads = args
    return measure_once(x, n_samples, n_features, layers, seed, cap=cap, on_cap=on_cap, threads=threads)


def _child(queue, args):
    def abort():
        os._exit(CAP_EXIT)

    queue.put(_run(args, abort if args[5] is not None else None))


def _isolated(args) -> tuple[float, int, bool]:
    ctx = mp.get_context("spawn")
    queue = ctx.Queue()
    proc = ctx.Process(target=_child, args=(queue, args))
    proc.start()
    result = None
    while result is None:
        try:
            result = queue.get(timeout=0.1)
        except Empty:
            if not proc.is_alive():
                try:
                    result = queue.get(timeout=1.0)
                except Empty:
                    pass
                break
    proc.join()
    if result is None:
        if proc.exitcode != CAP_EXIT:
            raise RuntimeError(f"benchmark worker died with exit code {proc.exitcode}")
        return float("nan"), int(args[5]), True
    return result


def _in_process(args) -> tuple[float, int, bool]:
    # no hard abort here: the run completes and is only flagged
    return _run(args, None)


def bench_transform(grid, seed: int = 0, repeats: int = 3, n_samples: int = 500, n_features: int = 8,
                    layers: int = 2, memory_cap: float | None = None, isolate: bool = True,
                    threads: int = 1) -> list[BenchRecord]:
    """Mean and std of wall time and peak RSS delta per hidden-neuron count in ``grid``.

    Each repeat uses the same seeded network and dataset; ``isolate`` runs
    every repeat in a fresh process so memory measurements do not inherit
    freed-but-retained heap from earlier runs. Once a run exceeds
    ``memory_cap`` bytes its record is flagged partial and larger sizes are
    skipped; isolated runs are killed at the cap, in-process runs finish
    first.
    """
    grid = [int(x) for x in grid]
    if any(x <= 0 for x in grid) or grid != sorted(grid):
        raise ValueError("grid sizes must be positive and ascending")
    if repeats < 3:
        raise ValueError("at least 3 repeats are required")
    records = []
    for x in grid:
        times, mems, partial = [], [], False
        for _ in range(repeats):
            args = (x, n_samples, n_features, layers, seed, memory_cap, threads)
            t, m, aborted = _isolated(args) if isolate else _in_process(args)
            if aborted:
                partial = True
                if not np.isfinite(t):
                    break
            times.append(t)
            mems.append(m)
        rec = BenchRecord(
            hidden_neurons=x,
            wall_time=float(np.mean(times)) if times else float("nan"),
            wall_time_std=float(np.std(times)) if times else float("nan"),
            peak_memory=float(np.mean(mems)) if mems else float("nan"),
            peak_memory_std=float(np.std(mems)) if mems else float("nan"),
            repeats=len(times),
            partial=partial,
        )
        log.info("x=%d t=%.4fs mem=%.0fB%s", x, rec.wall_time, rec.peak_memory, " (partial)" if partial else "")
        records.append(rec)
        if partial:
            log.warning("memory cap exceeded at x=%d; stopping the grid", x)
            break
    return records


BENCH_COLUMNS = ("x", "t_mean", "t_std", "mem_mean", "mem_std", "repeats", "partial")


def write_bench_csv(records, path, append: bool = True) -> None:
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "w" if new else "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(BENCH_COLUMNS)
        for r in records:
            w.writerow([r.hidden_neurons, repr(r.wall_time), repr(r.wall_time_std),
                        repr(r.peak_memory), repr(r.peak_memory_std), r.repeats, int(r.partial)])


def read_bench_csv(path) -> list[BenchRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            BenchRecord(int(r["x"]), float(r["t_mean"]), float(r["t_std"]), float(r["mem_mean"]),
                        float(r["mem_std"]), int(r["repeats"]), bool(int(r["partial"])))
            for r in csv.DictReader(fh)
        ]


def fit_power_law(x, y, fit_range=None) -> PowerLawFit:
    """Least-squares line through ``(log x, log y)`` for points with ``lo <= x <= hi``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("power-law fits need positive finite values")
    lo, hi = fit_range if fit_range is not None else (x.min(), x.max())
    keep = (x >= lo) & (x <= hi)
    if keep.sum() < 2:
        raise ValueError("need at least two points inside the fit range")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return PowerLawFit(float(slope), float(np.exp(intercept)), (float(lo), float(hi)),
                       float(np.sqrt(np.mean(resid ** 2))))


def fit_records(records, quantity: str = "time", fit_range=None) -> PowerLawFit:
    recs = [r for r in records if not r.partial]
    x = [r.hidden_neurons for r in recs]
    y = [r.wall_time if quantity == "time" else r.peak_memory for r in recs]
    return fit_power_law(x, y, fit_range)
