"""Compare the numba and numpy kernel paths.

Times each kernel pair on identical random inputs (after checking they agree),
then times a small end-to-end sweep under both backends. The sweep part runs
in subprocesses because the backend is fixed at import time by
CDEMECH_NO_NUMBA.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--sweep-count 40]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cdemech import _kernels

SWEEP_SNIPPET = """
import time
from cdemech import _kernels, checks
insts = checks.corpus({count}, seed=3)
checks.sweep(insts[:2], tie_draws=2, crossval_limit=0)  # warm up / compile
t0 = time.perf_counter()
res = checks.sweep(insts, tie_draws=2, crossval_limit=0)
print(_kernels.backend(), time.perf_counter() - t0, res.ok)
"""


def _median_us(fn, repeat):
    fn()
    times = timeit.repeat(fn, number=1, repeat=repeat)
    return float(np.median(times)) * 1e6


def _inputs(rng, q=13, rows=6, k=8):
    mat = rng.integers(0, q, size=(rows, k)).astype(np.int64)
    basis = _kernels.rref_numpy(mat[:4], q)
    v = rng.integers(0, q, size=k).astype(np.int64)
    return q, mat, basis, v


def bench_kernels(repeat, seed=0):
    rng = np.random.default_rng(seed)
    q, mat, basis, v = _inputs(rng)
    others = mat[4:]
    masks = np.array([0b0011, 0b0110, 0b1100, 0b1001, 0b1111], dtype=np.int64)
    bounds = np.array([3, 3, 3, 3, 7], dtype=np.int64)
    qq = np.int64(q)

    pairs = {
        "rref": (
            lambda: _kernels.rref_numba(mat, qq),
            lambda: _kernels.rref_numpy(mat, q),
        ),
        "residual": (
            lambda: _kernels.residual_numba(basis, v, qq),
            lambda: _kernels.residual_numpy(basis, v, q),
        ),
        "spans_all": (
            lambda: _kernels.spans_all_numba(basis, others, qq),
            lambda: _kernels.spans_all_numpy(basis, others, q),
        ),
        "first_feasible": (
            lambda: _kernels.first_feasible_numba(4, 4, 8, masks, bounds),
            lambda: _kernels.first_feasible_numpy(4, 4, 8, masks, bounds),
        ),
    }
    print(f"{'kernel':<16}{'numba us':>10}{'numpy us':>10}{'speedup':>9}")
    for name, (fast, slow) in pairs.items():
        a, b = fast(), slow()
        if not np.array_equal(np.asarray(a), np.asarray(b)):
            raise SystemExit(f"{name}: backends disagree ({a} vs {b})")
        t_nb = _median_us(fast, repeat)
        t_np = _median_us(slow, repeat)
        print(f"{name:<16}{t_nb:>10.2f}{t_np:>10.2f}{t_np / t_nb:>8.1f}x")


def bench_sweep(count):
    print(f"\nsweep of {count} instances (tie_draws=2, no crossval)")
    for flag in ("0", "1"):
        env = dict(os.environ, CDEMECH_NO_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, "-c", SWEEP_SNIPPET.format(count=count)],
            env=env, capture_output=True, text=True, check=True,
        ).stdout.split()
        backend, secs, ok = out[0], float(out[1]), out[2]
        print(f"  {backend:<6} {secs:8.2f} s  ok={ok}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--sweep-count", type=int, default=40)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    bench_kernels(args.repeat)
    if args.sweep_count > 0:
        bench_sweep(args.sweep_count)


if __name__ == "__main__":
    main()
