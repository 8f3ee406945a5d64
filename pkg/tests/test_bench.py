import time

import numpy as np
import pytest

from rentt.bench import (
    BENCH_COLUMNS,
    BenchRecord,
    MemoryWatcher,
    bench_transform,
    fit_power_law,
    fit_records,
    random_relu_network,
    read_bench_csv,
    split_hidden,
    synthetic_inputs,
    write_bench_csv,
)


def test_fit_two_points():
    fit = fit_power_law([10, 100], [100, 1000])
    assert fit.exponent == pytest.approx(1.0, abs=1e-12)
    assert fit.coefficient == pytest.approx(10.0, rel=1e-12)
    assert fit.residual == pytest.approx(0.0, abs=1e-12)


def test_fit_square():
    x = np.array([2.0, 5.0, 11.0, 40.0])
    fit = fit_power_law(x, 3 * x ** 2)
    assert abs(fit.exponent - 2.0) < 1e-9
    assert fit.coefficient == pytest.approx(3.0, rel=1e-9)


def test_fit_noisy():
    rng = np.random.default_rng(0)
    x = np.geomspace(10, 10_000, 25)
    y = x ** 1.4 * (1 + rng.uniform(-0.05, 0.05, x.size))
    assert 1.3 <= fit_power_law(x, y).exponent <= 1.5


def test_fit_uses_declared_range_only():
    x = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    y = np.array([50.0, 50.0, 4.0 ** 2, 8.0 ** 2, 16.0 ** 2])
    fit = fit_power_law(x, y, (4, 16))
    assert fit.exponent == pytest.approx(2.0)
    assert fit.fit_range == (4.0, 16.0)


@pytest.mark.parametrize("x,y", [([1, 2, 3], [1, 0, 2]), ([0, 1, 2], [1, 2, 3]), ([1, 2], [1, -2])])
def test_fit_domain_error(x, y):
    with pytest.raises(ValueError):
        fit_power_law(x, y)


def test_fit_needs_points_in_range():
    with pytest.raises(ValueError):
        fit_power_law([1, 2, 3], [1, 2, 3], (2.5, 10))


def test_split_hidden():
    assert split_hidden(16, 2) == [8, 8]
    assert split_hidden(7, 3) == [3, 2, 2]


def test_synthetic_inputs():
    X = synthetic_inputs(100, 4, seed=1)
    assert X.shape == (100, 5)
    assert np.all(X[:, 0] == 1)
    assert np.all(np.abs(X[:, 1:]) <= 1)
    np.testing.assert_array_equal(X, synthetic_inputs(100, 4, seed=1))


def test_random_network_is_seeded():
    a, b = random_relu_network(3, [4, 4], seed=5), random_relu_network(3, [4, 4], seed=5)
    for la, lb in zip(a.layers, b.layers):
        np.testing.assert_array_equal(la.weights, lb.weights)
    assert a.units == [4, 4, 0]


def test_watcher_sees_allocation():
    with MemoryWatcher() as w:
        block = np.ones(40_000_000 // 8)
        time.sleep(0.05)
        del block
    assert w.samples >= 5
    assert w.peak >= 20_000_000


def test_watcher_sample_rate():
    with MemoryWatcher() as w:
        time.sleep(0.2)
    assert w.samples >= 20  # at least 100 Hz


def test_bench_small_grid_fast():
    start = time.perf_counter()
    recs = bench_transform([8, 16], seed=0, repeats=3)
    assert time.perf_counter() - start < 10
    assert [r.hidden_neurons for r in recs] == [8, 16]
    for r in recs:
        assert r.repeats == 3 and not r.partial
        assert r.wall_time > 0 and r.wall_time_std >= 0
        assert r.peak_memory >= 0


def test_bench_times_nondecreasing_within_noise():
    recs = bench_transform([8, 32, 128], seed=1, repeats=3, isolate=False)
    for a, b in zip(recs, recs[1:]):
        assert b.wall_time >= a.wall_time - 2 * (a.wall_time_std + b.wall_time_std)


def test_bench_rejects_bad_grid():
    with pytest.raises(ValueError):
        bench_transform([16, 8])
    with pytest.raises(ValueError):
        bench_transform([8], repeats=2)


def test_memory_cap_flags_partial():
    recs = bench_transform([64, 128], seed=0, repeats=3, n_samples=2000, memory_cap=1)
    assert len(recs) == 1
    assert recs[0].partial


def test_memory_cap_in_process_flags_partial():
    recs = bench_transform([64, 128], seed=0, repeats=3, n_samples=2000, memory_cap=1, isolate=False)
    assert len(recs) == 1 and recs[0].partial


def test_csv_append_and_read(tmp_path):
    path = tmp_path / "bench.csv"
    recs = [BenchRecord(16, 0.1, 0.01, 1e6, 1e4, 3), BenchRecord(32, 0.3, 0.02, 3e6, 2e4, 3)]
    write_bench_csv(recs[:1], path)
    write_bench_csv(recs[1:], path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:5] == ["x", "t_mean", "t_std", "mem_mean", "mem_std"]
    assert tuple(lines[0].split(",")) == BENCH_COLUMNS
    assert len(lines) == 3
    assert read_bench_csv(path) == recs
    write_bench_csv(recs, path, append=False)
    assert read_bench_csv(path) == recs


def test_fit_records_skips_partial():
    recs = [BenchRecord(x, 0.001 * x ** 1.5, 0.0, 100.0 * x, 0.0, 3) for x in (16, 32, 64, 128)]
    recs.append(BenchRecord(256, float("nan"), float("nan"), float("nan"), float("nan"), 0, True))
    assert fit_records(recs, "time").exponent == pytest.approx(1.5)
    assert fit_records(recs, "memory", (32, 128)).exponent == pytest.approx(1.0)
