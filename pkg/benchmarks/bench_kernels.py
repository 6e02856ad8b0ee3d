"""Benchmark the LSTM sequence kernels: compiled extension vs numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats 20]

Shapes mirror real training traffic: a PARA-mode batch of 8 examples is
roughly 40 encoder sequences of ~55 tokens (embed 64, hidden 64 per
direction), plus per-example decoder sequences.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from chainex import kernels

SHAPES = [
    ("encoder batch (T=55, B=40, I=64, H=64)", 55, 40, 64, 64),
    ("decoder sequence (T=4, B=1, I=128, H=128)", 4, 1, 128, 128),
    ("long thin (T=200, B=4, I=64, H=64)", 200, 4, 64, 64),
]


def _case(rng, t, b, i, h):
    return (
        rng.normal(size=(t, b, i)),
        rng.normal(size=(i, 4 * h)) * 0.1,
        rng.normal(size=(h, 4 * h)) * 0.1,
        rng.normal(size=4 * h) * 0.1,
        np.zeros((b, h)),
        np.zeros((b, h)),
    )


def _time(fn, repeats):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats * 1000.0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"available backends: {backends}")
    rng = np.random.default_rng(0)
    header = f"{'case':44s} {'pass':9s}" + "".join(f"{b:>12s}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for label, t, b, i, h in SHAPES:
        case = _case(rng, t, b, i, h)
        dh = rng.normal(size=(t, b, h))
        for direction in ("forward", "backward"):
            times = {}
            for name in backends:
                impl = kernels.get_backend(name)
                hs, cs, gates = impl.lstm_forward(*case)
                if direction == "forward":
                    times[name] = _time(lambda impl=impl: impl.lstm_forward(*case), args.repeats)
                else:
                    times[name] = _time(
                        lambda impl=impl, hs=hs, cs=cs, gates=gates: impl.lstm_backward(
                            case[0], case[1], case[2], hs, cs, gates, case[4], case[5], dh),
                        args.repeats)
            row = f"{label:44s} {direction:9s}" + "".join(f"{times[n]:10.2f}ms" for n in backends)
            if len(backends) == 2:
                row += f"{times['python'] / times['compiled']:9.2f}x"
            print(row)


if __name__ == "__main__":
    main()
