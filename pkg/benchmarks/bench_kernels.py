"""Benchmark the compiled kernel backend against the numpy fallback.

Times the two hot kernels (dilated conv forward/backward, Viterbi DP) on a
range of shapes, plus one full training step with each backend swapped in.

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

import tempseg._kernels as kernels
from tempseg._kernels import _ref

try:
    from tempseg._kernels import _core
except ImportError:
    _core = None


def timeit(fn, *args, reps=50):
    fn(*args)
    best = np.inf
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / reps)
    return best


def row(name, python_s, compiled_s):
    speedup = python_s / compiled_s if compiled_s else float("nan")
    print(f"{name:<44} {python_s * 1e6:>10.1f} {compiled_s * 1e6:>10.1f} "
          f"{speedup:>8.2f}x")


def bench_conv(rng):
    for T, c, r, dil in [(120, 32, 3, 1), (120, 32, 3, 8), (500, 32, 3, 4),
                         (2000, 64, 3, 16), (120, 8, 5, 2)]:
        x = rng.normal(size=(T, c))
        w = rng.normal(size=(c, c, r))
        b = rng.normal(size=c)
        gy = rng.normal(size=(T, c))
        label = f"conv1d fwd T={T} C={c} r={r} d={dil}"
        row(label, timeit(_ref.conv1d_forward, x, w, b, dil),
            timeit(_core.conv1d_forward, x, w, b, dil))
        label = f"conv1d bwd T={T} C={c} r={r} d={dil}"
        row(label, timeit(_ref.conv1d_backward, x, w, gy, dil),
            timeit(_core.conv1d_backward, x, w, gy, dil))


def bench_viterbi(rng):
    for T, k in [(120, 4), (500, 8), (2000, 12), (5000, 20)]:
        grid = rng.normal(size=(T, k))
        row(f"viterbi T={T} K={k}",
            timeit(_ref.viterbi_path, grid),
            timeit(_core.viterbi_path, grid))


def bench_train_step(rng):
    from tempseg import embednet as en
    from tempseg.dataio import FeatureSequence

    data = [FeatureSequence(video_id=f"v{i}", features=rng.normal(size=(120, 16)))
            for i in range(4)]

    def one_pass(impl):
        kernels.conv1d_forward = impl.conv1d_forward
        kernels.conv1d_backward = impl.conv1d_backward
        cfg = en.EmbedConfig(input_dim=16, hidden_dim=32, layers_per_stage=5,
                             epochs=1, seed=0)
        t0 = time.perf_counter()
        en.train(data, cfg)
        return time.perf_counter() - t0

    saved = (kernels.conv1d_forward, kernels.conv1d_backward)
    try:
        python_s = one_pass(_ref)
        compiled_s = one_pass(_core)
    finally:
        kernels.conv1d_forward, kernels.conv1d_backward = saved
    row("train epoch 4 videos T=120 D=16 H=32 Q=5", python_s, compiled_s)


def main():
    print(f"active backend: {kernels.backend()}")
    if _core is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<44} {'python us':>10} {'compiled us':>11} {'speedup':>8}")
    bench_conv(rng)
    bench_viterbi(rng)
    bench_train_step(rng)


if __name__ == "__main__":
    main()
