"""Compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from qclimit import _fallback

try:
    from qclimit import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def cases(rng):
    # threshold masks of a ring-like field, similar to projector symbols
    x = np.linspace(-1, 1, 512)
    r2 = x[:, None] ** 2 + x[None, :] ** 2
    field = np.cos(40 * r2) * np.exp(-r2) + 0.05 * rng.standard_normal(r2.shape)
    mask = field > 0.3
    pts = rng.uniform(0, 511, size=(2, 20000))
    stack = np.array([field] * 16)
    return {
        "label_components 512x512": lambda m: m.label_components(mask),
        "bilinear_sample 20k pts": lambda m: m.bilinear_sample(field, 0.0, 1.0, 0.0, 1.0, *pts),
        "cubic_sample 16 fields x 20k pts": lambda m: m.cubic_sample(stack, 0.0, 1.0, 0.0, 1.0, *pts),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        if _kernels is None:
            print(f"{name:36s} {1e3 * t_py:12.2f} {'n/a':>12s}")
            continue
        a, b = fn(_fallback), fn(_kernels)
        for u, v in zip(a, b):
            assert np.array_equal(np.asarray(u) != 0, np.asarray(v) != 0) or np.allclose(u, v)
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
        print(f"{name:36s} {1e3 * t_py:12.2f} {1e3 * t_cy:12.2f} {t_py / t_cy:8.1f}")


if __name__ == "__main__":
    main()
