"""Time the compiled and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--n 512] [--steps 2000] [--repeat 3]

Prints one line per kernel with the best wall time for each backend, the
speedup, and the largest difference between the two outputs.
"""
import argparse
import math
import timeit

import numpy as np

from polarlab.kernels import BACKENDS


def _inputs(n, steps):
    x = np.linspace(-10.0, 10.0, n)
    dx = x[1] - x[0]
    packet = np.exp(-x ** 2 + 2j * x)
    dt = 0.5 * dx
    # Crank-Nicolson matrix for i psi_t = -psi_xx / 2 + x^2 psi / 2
    r = 1j * dt / (4 * dx ** 2)
    diag_a = 1 + 2 * r + 0.5j * dt * 0.5 * x ** 2
    return {
        "cn_evolve": (packet, diag_a, -r, steps),
        "wave_evolve": (packet, packet, 1 / dt ** 2, 0.0, 1 / dx ** 2, 1.0, steps),
        "dirac_evolve": (packet, np.conj(packet), math.cos(0.5 * dx), math.sin(0.5 * dx), steps),
    }


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(u, v) for u, v in zip(a, b))
    return float(np.max(np.abs(a - b)))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=512, help="grid nodes")
    parser.add_argument("--steps", type=int, default=2000, help="time steps per call")
    parser.add_argument("--repeat", type=int, default=3, help="timings per kernel; the best is kept")
    args = parser.parse_args(argv)

    if "cython" not in BACKENDS:
        print("compiled kernels are not built; only the numpy backend is available")
    names = [b for b in ("cython", "python") if b in BACKENDS]
    print(f"n={args.n} steps={args.steps} repeat={args.repeat}")
    print(f"{'kernel':<14}" + "".join(f"{b + ' [s]':>14}" for b in names) + f"{'speedup':>10}{'max diff':>12}")
    for kernel, call_args in _inputs(args.n, args.steps).items():
        times, outs = {}, {}
        for b in names:
            fn = getattr(BACKENDS[b], kernel)
            outs[b] = fn(*call_args)
            times[b] = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat))
        line = f"{kernel:<14}" + "".join(f"{times[b]:>14.4f}" for b in names)
        if len(names) == 2:
            line += f"{times['python'] / times['cython']:>9.1f}x{_max_diff(outs['cython'], outs['python']):>12.2e}"
        print(line)


if __name__ == "__main__":
    main()
