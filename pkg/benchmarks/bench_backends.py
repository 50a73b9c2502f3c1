#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Covers the two hot loops at production scale: biquad-cascade filtering of a
12-minute 500 Hz EMG stream and CART growth on a full bootstrap sample, plus
an end-to-end forest fit. Results on both backends must be bit-identical;
this script asserts that while timing.

Run:  python benchmarks/bench_backends.py
"""
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from neckstrain._backend import available_backends  # noqa: E402


def timeit(fn, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_biquad(kernels):
    rng = np.random.default_rng(1)
    x = np.ascontiguousarray(rng.normal(size=360_000))  # 12 min at 500 Hz
    b = np.ascontiguousarray(rng.normal(size=(4, 3)))
    a = np.ascontiguousarray(rng.normal(size=(4, 2)) * 0.3)
    results = {}
    for name, mod in kernels.items():
        seconds, out = timeit(lambda m=mod: m.biquad_cascade(b, a, x),
                              repeats=3 if name == "compiled" else 1)
        results[name] = (seconds, out)
    return "biquad cascade (360k samples, 4 sections)", results


def bench_tree(kernels):
    rng = np.random.default_rng(2)
    n = 28_800  # default training split of a 12-minute session
    X = np.ascontiguousarray(rng.uniform(-20, 60, size=(n, 3)))
    y = np.ascontiguousarray(np.tanh((X[:, 1] - 20.0) / 6.0)
                             + 0.05 * rng.normal(size=n))
    sidx = np.ascontiguousarray(np.stack([
        np.argsort(X[:, f], kind="stable") for f in range(3)
    ]).astype(np.int64))
    results = {}
    for name, mod in kernels.items():
        seconds, out = timeit(lambda m=mod: m.grow_tree(X, y, sidx, 12, 5),
                              repeats=3 if name == "compiled" else 1)
        results[name] = (seconds, out)
    return "CART growth (28.8k rows, depth 12)", results


def bench_forest(kernels):
    from neckstrain import models

    rng = np.random.default_rng(3)
    n = 28_800
    X = rng.uniform(-20, 60, size=(n, 3))
    y = np.tanh((X[:, 1] - 20.0) / 6.0) + 0.05 * rng.normal(size=n)
    ds = models.Dataset(X, y, 20.0 * np.arange(float(n)))
    spec = models.ModelSpec("random_forest", 7, {"n_trees": 25})
    results = {}
    originals = (models.grow_tree, models.predict_tree)
    try:
        for name, mod in kernels.items():
            models.grow_tree = mod.grow_tree
            models.predict_tree = mod.predict_tree
            seconds, model = timeit(lambda: models.fit(spec, ds), repeats=1)
            results[name] = (seconds, models.serialize_model(model))
    finally:
        models.grow_tree, models.predict_tree = originals
    return "random forest fit (25 trees, 28.8k rows)", results


def equal(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main():
    kernels = available_backends()
    print(f"backends available: {', '.join(kernels)}")
    if "compiled" not in kernels:
        print("compiled extension not built; run `python setup.py build_ext "
              "--inplace` to compare")
    for bench in (bench_biquad, bench_tree, bench_forest):
        label, results = bench(kernels)
        print(f"\n{label}")
        for name, (seconds, _) in results.items():
            print(f"  {name:9s} {seconds * 1e3:9.1f} ms")
        if len(results) == 2:
            py_s = results["python"][0]
            c_s = results["compiled"][0]
            match = equal(results["python"][1], results["compiled"][1])
            print(f"  speedup   {py_s / c_s:9.1f} x   bit-identical: {match}")
            if not match:
                raise SystemExit("backend results diverged")


if __name__ == "__main__":
    main()
