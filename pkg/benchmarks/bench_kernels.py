"""Compare the compiled and NumPy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each case is timed best-of-``repeat`` on both backends, and the largest
absolute difference between their outputs is reported next to the speedup.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from conedet import kernels
from conedet.conekernel import ConeParams, trace_defect_numeric
from conedet.torusmetrics import ConicalTorusMetric, DivisorPoint, area
from conedet.specialfn import Modulus


def _line_integral_case(n):
    rng = np.random.default_rng(1)
    r, rho = rng.uniform(0.05, 1.5, n), rng.uniform(0.05, 1.5, n)
    phi = rng.uniform(-1.0, 1.0, n)
    t = rng.uniform(0.01, 0.5, n)
    return lambda: np.concatenate([kernels.cone_line_integral_many(r, rho, phi, t, beta)
                                   for beta in (3 * math.pi, 0.7, 4 * math.pi, 1.0)])


def _theta_case(n):
    rng = np.random.default_rng(2)
    w = rng.uniform(-0.5, 0.5, n) + 1j * rng.uniform(-0.5, 0.5, n)
    return lambda: np.concatenate([kernels.theta1_log_modulus(w, tau)
                                   for tau in (1j, 0.3 + 0.8j, -0.5 + 0.87j)])


def _defect_case():
    return lambda: np.array([trace_defect_numeric(ConeParams(b), 1.0, 0.01)
                             for b in (1.5 * math.pi, 4 * math.pi, 6 * math.pi)])


def _area_case():
    m = ConicalTorusMetric(Modulus(0.3 + 1.1j), (DivisorPoint(0, 0, 1.0), DivisorPoint(0.25, 0.5, -0.5),
                                                 DivisorPoint(0.5, 0.25, -0.5)))
    return lambda: np.array([area(m, rtol=1e-12).value])


CASES = {
    "cone line integral, 4 x 200 points": lambda: _line_integral_case(200),
    "log|theta1|, 3 x 20000 points": lambda: _theta_case(20000),
    "cone trace defect, 3 angles": _defect_case,
    "conical torus area, rtol 1e-12": _area_case,
}


def best_time(fn, repeat):
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(repeat: int = 5) -> list[dict]:
    try:
        kernels.use_backend("cython")
    except ImportError:
        sys.exit("compiled extension not built; reinstall with Cython available")
    rows = []
    for name, make in CASES.items():
        fn = make()
        times, outs = {}, {}
        for backend in ("python", "cython"):
            kernels.use_backend(backend)
            fn()  # warm-up
            times[backend], outs[backend] = best_time(fn, repeat)
        rows.append({"case": name, "python_s": times["python"], "cython_s": times["cython"],
                     "speedup": times["python"] / times["cython"],
                     "max_abs_diff": float(np.max(np.abs(outs["python"] - outs["cython"])))})
    kernels.use_backend("cython")
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", default=None, help="write the results here")
    args = p.parse_args(argv)
    rows = run(args.repeat)
    print(f"{'case':40s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for r in rows:
        print(f"{r['case']:40s} {r['python_s']:11.4f} {r['cython_s']:11.4f} {r['speedup']:8.2f} "
              f"{r['max_abs_diff']:10.2e}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
