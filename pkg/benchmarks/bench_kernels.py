"""Time the numba kernels against the pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run once per backend before timing so JIT compilation is
excluded. Results are checked for agreement before being reported.
"""
import argparse
import timeit

import numpy as np

from diffusense import kernels
from diffusense._accel import NUMBA_AVAILABLE


def _cases(rng):
    xyz = rng.standard_normal((4096, 3))
    xyz /= np.linalg.norm(xyz, axis=1, keepdims=True)
    a = rng.standard_normal((16, 16))
    a = a + a.T
    b = rng.standard_normal((25, 25))
    b = b @ b.T
    pts = rng.standard_normal((30, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return {
        "sh_matrix L=3, 4096 dirs": (kernels._sh_matrix_jit, kernels._sh_matrix_np, (3, xyz)),
        "jacobi 16x16 symmetric": (kernels._jacobi_jit, kernels._jacobi_np, (a, 1e-12, 100)),
        "jacobi 25x25 PSD": (kernels._jacobi_jit, kernels._jacobi_np, (b, 1e-12, 100)),
        "relax Q=30, 200 steps": (kernels._relax_jit, kernels._relax_np, (pts, 24.0, 200, 0.01)),
    }


def _first(x):
    return x[0] if isinstance(x, tuple) else x


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, (fast, slow, call_args) in _cases(rng).items():
        ref = _first(fast(*call_args))
        alt = _first(slow(*call_args))
        if name.startswith("jacobi"):
            ref, alt = np.sort(ref), np.sort(alt)
        assert np.allclose(ref, alt, atol=1e-9), name
        times = []
        for func in (fast, slow):
            timer = timeit.Timer(lambda: func(*call_args))
            number, _ = timer.autorange()
            times.append(min(timer.repeat(args.repeat, number)) / number * 1e3)
        print(f"{name:<28}{times[0]:>12.3f}{times[1]:>12.3f}{times[1] / times[0]:>9.1f}x")


if __name__ == "__main__":
    main()
