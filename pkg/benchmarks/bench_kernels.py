"""Time the jitted kernels against their pure-numpy twins in one process.

Usage:
    python3 benchmarks/bench_kernels.py [--batch 32] [--seq 24] [--embed 256]
                                        [--hidden 128] [--repeats 20]

The compiled path only exists when numba imported cleanly and XLNLU_NUMBA is
not 0; otherwise the script still runs and reports the fallback timings alone.
"""

import argparse
import time

import numpy as np

from xlnlu import kernels
from xlnlu._jit import NUMBA_ENABLED


def best_of(fn, repeats):
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - start)
    return min(timings)


def make_case(args, rng):
    B, T, D, H = args.batch, args.seq, args.embed, args.hidden
    X = rng.standard_normal((B, T, D))
    mask = np.ones((B, T))
    for row in range(B):
        mask[row, rng.integers(T // 2, T + 1) :] = 0.0
    Wx = rng.standard_normal((D, 4 * H)) * 0.1
    Wh = rng.standard_normal((H, 4 * H)) * 0.1
    b = np.zeros(4 * H)
    return X, mask, Wx, Wh, b


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--seq", type=int, default=24)
    parser.add_argument("--embed", type=int, default=256)
    parser.add_argument("--hidden", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    X, mask, Wx, Wh, b = make_case(args, rng)
    Hseq, Cseq, Gseq = kernels.lstm_seq_forward_py(X, mask, Wx, Wh, b, False)
    dH = rng.standard_normal(Hseq.shape)
    n_rows = args.batch * args.seq
    idx = rng.integers(0, 1000, size=n_rows)
    vals = rng.standard_normal((n_rows, args.embed))
    table = np.zeros((1000, args.embed))

    cases = {
        "lstm_forward": (
            lambda f: f(X, mask, Wx, Wh, b, False),
            kernels.lstm_seq_forward_py,
            kernels.lstm_seq_forward,
        ),
        "lstm_backward": (
            lambda f: f(dH, X, mask, Wx, Wh, Hseq, Cseq, Gseq, False),
            kernels.lstm_seq_backward_py,
            kernels.lstm_seq_backward,
        ),
        "scatter_add": (
            lambda f: f(table.copy(), idx, vals),
            kernels.scatter_add_rows_py,
            kernels.scatter_add_rows,
        ),
    }

    print(f"batch={args.batch} seq={args.seq} embed={args.embed} hidden={args.hidden}"
          f" repeats={args.repeats} numba={'on' if NUMBA_ENABLED else 'off'}")
    header = f"{'kernel':<14} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, (call, plain, jitted) in cases.items():
        plain_ms = best_of(lambda: call(plain), args.repeats) * 1e3
        if NUMBA_ENABLED and jitted is not plain:
            call(jitted)  # compile outside the timed region
            jit_ms = best_of(lambda: call(jitted), args.repeats) * 1e3
            print(f"{name:<14} {plain_ms:>12.3f} {jit_ms:>12.3f} {plain_ms / jit_ms:>8.1f}x")
        else:
            print(f"{name:<14} {plain_ms:>12.3f} {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
