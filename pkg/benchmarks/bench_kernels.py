"""Time the hot kernels on both backends and check that they agree.

    python3 benchmarks/bench_kernels.py [--scale 1.0] [--repeat 5]

Prints one line per kernel with the best-of-N time for each backend and the
speedup of the compiled backend.  Without the compiled extension only the
python column is filled in.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from privalog.kernels import backends


def workloads(scale: float, rng: np.random.Generator) -> dict[str, tuple]:
    n = max(1, int(20_000 * scale))
    m = max(1, int(400 * scale))
    words = [f"ship-{i:06d}" for i in range(n)]
    bits = rng.random(n) < 0.5
    keys = rng.integers(0, n // 8 + 1, size=(n, 2), dtype=np.int64)
    ki = rng.integers(-5, 5, size=(m, 2), dtype=np.int64)
    ti = rng.integers(-5, 5, size=(m, 2), dtype=np.int64)
    a = rng.uniform(0.5, 3.0, n)
    b = rng.integers(-3, 4, n).astype(np.float64)
    side = max(2, int(round((n / 4) ** (1 / 3))))
    return {
        "crc32_many": (words,),
        "cross_indices": ([side, side, side * 4],),
        "unique_first": (bits, keys),
        "member": (ki, ki.astype(np.float64), ti, ti.astype(np.float64),
                   np.array([False, True])),
        "pow_vec": (a, b),
    }


def _same(x, y) -> bool:
    if isinstance(x, list):
        return len(x) == len(y) and all(np.array_equal(p, q) for p, q in zip(x, y))
    return np.array_equal(np.asarray(x), np.asarray(y), equal_nan=True)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args(argv)
    impls = backends()
    loads = workloads(a.scale, np.random.default_rng(a.seed))
    print(f"{'kernel':<14} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    ok = True
    for name, args in loads.items():
        times, outs = {}, {}
        for bname, mod in impls.items():
            fn = getattr(mod, name)
            outs[bname] = fn(*args)
            times[bname] = min(timeit.repeat(lambda: fn(*args), number=1, repeat=a.repeat)) * 1e3
        py, cy = times["python"], times.get("cython")
        if cy is not None and not _same(outs["python"], outs["cython"]):
            ok = False
            print(f"{name}: backends disagree", file=sys.stderr)
        cy_s = f"{cy:10.3f}" if cy is not None else f"{'-':>10}"
        sp = f"{py / cy:7.1f}x" if cy else f"{'-':>8}"
        print(f"{name:<14} {py:10.3f} {cy_s} {sp}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
