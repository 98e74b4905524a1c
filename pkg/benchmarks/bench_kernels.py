"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 10000 1000000] [--repeat 5]

Also times a full Nyquist verdict with each backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cfsqueezer import _kernels_py

try:
    from cfsqueezer import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    w = np.sort(rng.uniform(0, 1e12, n))
    z = lambda: rng.normal(size=n) + 1j * rng.normal(size=n)  # noqa: E731
    return w, z(), z(), z(), z()


def time_kernels(mod, n, repeat):
    w, a, b, p, vals = inputs(n)
    rp = w * 7e-9
    cases = {
        "segment_angles": lambda: mod.segment_angles(vals, 0.1 + 0.2j),
        "winding_stats": lambda: mod.winding_stats(vals, -1 + 0j),
        "symmetric_critical": lambda: mod.symmetric_critical(w, a, 0.7, 1.6e-9),
        "general_critical": lambda: mod.general_critical(rp, rp, a, b, p, 0.7, 1e-4),
    }
    return {k: min(timeit.repeat(f, number=1, repeat=repeat)) for k, f in cases.items()}


VERDICT_SNIPPET = """
import time, math
from cfsqueezer.config import RunConfig
from cfsqueezer.stability import nyquist_verdict
from cfsqueezer import kernels
rc = RunConfig.load('{cfg}')
cfg = rc.build()
t = time.perf_counter(); v = nyquist_verdict(cfg, rc.nyquist_options()); dt = time.perf_counter() - t
print(kernels.BACKEND, dt, v.stable, v.winding)
"""


def time_verdict(cfg_name, pure):
    env = dict(os.environ, CFSQUEEZER_PURE="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", VERDICT_SNIPPET.format(cfg=cfg_name)],
                         env=env, capture_output=True, text=True, check=True).stdout.split()
    return out[0], float(out[1]), out[2], out[3]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[10_000, 1_000_000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels_c is None:
        print("compiled kernels not built; only the numpy backend is available")
    for n in args.sizes:
        py = time_kernels(_kernels_py, n, args.repeat)
        cy = time_kernels(_kernels_c, n, args.repeat) if _kernels_c else {}
        print(f"n = {n}")
        print(f"  {'kernel':20s} {'numpy [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
        for k, t in py.items():
            c = cy.get(k)
            cs = f"{c * 1e3:12.3f}" if c else f"{'-':>12s}"
            sp = f"{t / c:8.2f}" if c else f"{'-':>8s}"
            print(f"  {k:20s} {t * 1e3:12.3f} {cs} {sp}")
    print("full verdicts (bundled configs, R_f and xi from file)")
    for name in ("freespace_bulk", "waveguide_ln"):
        for pure in (True, False):
            backend, dt, stable, wind = time_verdict(name, pure)
            print(f"  {name:18s} {backend:7s} {dt:8.3f} s  stable={stable} winding={wind}")


if __name__ == "__main__":
    main()
