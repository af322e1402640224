"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints per-call times for each kernel and both backends, then times a short
tracker run under each backend (the pure run is a subprocess with
``MWGLMB_PURE=1`` so the selection happens at import as it would for a user).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mwglmb import kernels

TRACKER_SNIPPET = """
import time
from mwglmb import kernels
from mwglmb.sim import Scenario, generate
from mwglmb.smoother import SmootherConfig, run_tracker
sc = Scenario(duration=40, seed=1)
ds = generate(sc)
t = time.perf_counter()
run_tracker(ds.measurements, sc.models, SmootherConfig(window=5, seed=1))
print(kernels.BACKEND, time.perf_counter() - t)
"""


def _cases(rng):
    A = rng.normal(size=(4, 4))
    P = A @ A.T + 4 * np.eye(4)
    m, F, Q = rng.normal(size=4), np.eye(4) + 0.1 * rng.normal(size=(4, 4)), np.eye(4)
    H, R, z = np.eye(2, 4), 900.0 * np.eye(2), rng.normal(size=2)
    costs = rng.normal(size=(8, 12))
    gumbels = rng.gumbel(size=(50, 8, 12))
    init = np.zeros(8, dtype=np.int64)
    return {
        "predict": lambda b: b.predict(m, P, F, Q),
        "update": lambda b: b.update(m, P, z, H, R),
        "gaussian_loglik": lambda b: b.gaussian_loglik(z, H @ m, R),
        "gibbs_assign (50x8x12)": lambda b: b.gibbs_assign(costs, init, gumbels),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = [kernels.python_backend]
    if kernels.compiled_backend is None:
        print("compiled extension not built; timing the fallback only")
    else:
        backends.append(kernels.compiled_backend)
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':<24}" + "".join(f"{b.BACKEND:>14}" for b in backends) + "   speedup")
    for name, fn in cases.items():
        times = []
        for b in backends:
            timer = timeit.Timer(lambda: fn(b))
            n, _ = timer.autorange()
            times.append(min(timer.repeat(args.repeat, n)) / n)
        row = f"{name:<24}" + "".join(f"{t * 1e6:>11.2f} us" for t in times)
        if len(times) == 2:
            row += f"   {times[0] / times[1]:6.1f}x"
        print(row)

    print("\ntracker, 40 scans, N=5:")
    for pure in ("1", "0"):
        env = dict(os.environ, MWGLMB_PURE=pure)
        out = subprocess.run([sys.executable, "-c", TRACKER_SNIPPET], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:<10} {float(out[1]):8.2f} s")


if __name__ == "__main__":
    main()
