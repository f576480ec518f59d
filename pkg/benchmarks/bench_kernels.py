"""Timing comparison of the compiled and pure recurrence kernels.

The LSTM recurrences dominate training time: every forward/backward pass runs
one bidirectional pass over frequency and one unidirectional pass over time
for each batch row. This script times both backends on those exact shapes.

Usage: python3 benchmarks/bench_kernels.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dirfilt.nn import kernels_py

try:
    from dirfilt.nn import _kernels as compiled
except ImportError:
    compiled = None

# (label, nb, steps, hidden): the desk-scale training shapes and one larger
CASES = [
    ("freq BiLSTM desk [B*T=248, F=65, H=32]", 248, 65, 32),
    ("time LSTM desk [B*F=130, T=124, H=16]", 130, 124, 16),
    ("freq BiLSTM full [B*T=64, F=257, H=64]", 64, 257, 64),
]


def _case(nb, steps, hid, seed=0):
    rng = np.random.default_rng(seed)
    xw = rng.standard_normal((nb, steps, 4 * hid))
    u = rng.standard_normal((hid, 4 * hid)) * 0.4
    h0 = np.zeros((nb, hid))
    c0 = np.zeros((nb, hid))
    return xw, u, h0, c0


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(repeats: int) -> None:
    if compiled is None:
        print("compiled extension not built; timing pure backend only")
    header = f"{'case':44s} {'pure (ms)':>10s} {'compiled (ms)':>14s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, nb, steps, hid in CASES:
        xw, u, h0, c0 = _case(nb, steps, hid)
        h, c, gates = kernels_py.lstm_seq_forward(xw, u, h0, c0)
        dh = np.ones_like(h)

        def run(mod):
            mod.lstm_seq_forward(xw, u, h0, c0)
            mod.lstm_seq_backward(dh, u, h0, c0, h, c, gates)

        t_pure = _time(lambda: run(kernels_py), repeats)
        if compiled is not None:
            t_comp = _time(lambda: run(compiled), repeats)
            print(f"{label:44s} {t_pure * 1e3:10.2f} {t_comp * 1e3:14.2f} {t_pure / t_comp:7.2f}x")
        else:
            print(f"{label:44s} {t_pure * 1e3:10.2f} {'-':>14s} {'-':>8s}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    bench(args.repeats)


if __name__ == "__main__":
    main()
