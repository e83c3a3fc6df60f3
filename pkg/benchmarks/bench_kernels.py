"""Benchmark the compiled CE kernels against the numpy fallback.

Times the two kernel entry points on training-shaped workloads and a
full span-head training run end to end:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from propdetect.corpus import EmbeddingSequence
from propdetect.kernels import _py_kernels
from propdetect.span_heads import HeadConfig, SpanTarget, train_heads

try:
    from propdetect.kernels import _ce_kernels
except ImportError:
    _ce_kernels = None


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_dense(impl, n=20000, c=14, iters=20):
    rng = np.random.default_rng(0)
    logits = np.ascontiguousarray(rng.normal(size=(n, c)))
    targets = rng.integers(0, c, size=n).astype(np.int64)
    weights = rng.uniform(1, 80, size=n)

    def run():
        for _ in range(iters):
            impl.dense_softmax_ce(logits, targets, weights)

    return timeit(run)


def bench_ragged(impl, rows=8000, iters=20):
    rng = np.random.default_rng(1)
    lengths = rng.integers(2, 40, size=rows)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    scores = rng.normal(size=int(offsets[-1]))
    targets = np.array([rng.integers(0, l) for l in lengths], dtype=np.int64)
    shifts = rng.uniform(0, 2, size=rows)

    def run():
        for _ in range(iters):
            impl.ragged_softmax_ce(scores, offsets, targets, shifts)

    return timeit(run)


def make_training_batch(n_ctx=60, dim=32):
    rng = np.random.default_rng(2)
    batch = []
    for i in range(n_ctx):
        n = int(rng.integers(6, 30))
        rows = rng.normal(0, 0.4, size=(n + 1, dim))
        if i % 2 == 0:
            s = int(rng.integers(1, n))
            e = int(rng.integers(s, n + 1))
            rows[0, 4] -= 2.0
            rows[s, 1] += 2.0
            rows[e, 2] += 2.0
            batch.append((EmbeddingSequence(f"c{i}", rows), SpanTarget(True, s, e)))
        else:
            rows[0, 4] += 2.0
            batch.append((EmbeddingSequence(f"c{i}", rows), SpanTarget(False)))
    return batch


def bench_training(batch):
    config = HeadConfig(variant="deep_sep", embed_dim=32, deep_dim=16,
                        sent_dim=16, class_weight=1.5, seed=0,
                        learning_rate=1e-2, max_iters=60, tolerance=1e-10,
                        grad_check=False)
    return timeit(lambda: train_heads(batch, config), repeats=3)


def main():
    rows = []
    rows.append(("dense softmax-CE (20k x 14)", bench_dense(_py_kernels),
                 bench_dense(_ce_kernels) if _ce_kernels else None))
    rows.append(("ragged softmax-CE (8k rows)", bench_ragged(_py_kernels),
                 bench_ragged(_ce_kernels) if _ce_kernels else None))

    print(f"{'workload':<34} {'python':>10} {'cython':>10} {'speedup':>9}")
    for name, py_time, cy_time in rows:
        if cy_time is None:
            print(f"{name:<34} {py_time * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>9}")
        else:
            print(f"{name:<34} {py_time * 1e3:>8.2f}ms {cy_time * 1e3:>8.2f}ms "
                  f"{py_time / cy_time:>8.2f}x")

    import os

    batch = make_training_batch()
    active = "python" if os.environ.get("PROPDETECT_PURE_PYTHON") == "1" else \
        ("cython" if _ce_kernels else "python")
    print(f"\nspan-head training (60 ctx, deep_sep, 60 iters, {active} kernels): "
          f"{bench_training(batch) * 1e3:.1f}ms")
    print("rerun with PROPDETECT_PURE_PYTHON=1 to time the fallback end to end")


if __name__ == "__main__":
    main()
