"""Compare the numba and pure-numpy jet kernel backends.

Runs the mul_accum microbenchmark against both implementations in one
process, then times an end-to-end identity suite per backend in a
subprocess (the backend is frozen at import time by the
BIGTANGENT_BACKEND environment variable).

Usage: python benchmarks/bench_jet_kernels.py
"""

import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from bigtangent import kernels  # noqa: E402
from bigtangent.multiindex import jet_space  # noqa: E402


def _mul_accum_case(nvars, order, npoints, seed):
    """Index tables and operands shaped like a real jet product."""
    space = jet_space(nvars, order)
    rng = np.random.default_rng(seed)
    oi, ai, bi = space.mul_table
    a = rng.normal(size=(space.nterms, npoints))
    b = rng.normal(size=(space.nterms, npoints))
    return oi, ai, bi, a, b


def bench_mul_accum(fn, oi, ai, bi, a, b, repeats=200):
    out = np.zeros_like(a)
    fn(out, a, b, oi, ai, bi)  # warm up (numba compiles here)
    t0 = time.perf_counter()
    for _ in range(repeats):
        out[:] = 0.0
        fn(out, a, b, oi, ai, bi)
    return (time.perf_counter() - t0) / repeats


def bench_end_to_end(backend):
    """Time one curvature identity suite in a fresh interpreter."""
    code = (
        "import time; from bigtangent import metrics;"
        "gm = metrics.sasaki_metric([['1','0'],['0','exp(2*x1)']], 2);"
        "t0 = time.perf_counter();"
        "rep = metrics.curvature_identity_suite(gm, n=20);"
        "assert rep.passed;"
        "print(time.perf_counter() - t0)"
    )
    env = dict(os.environ, BIGTANGENT_BACKEND=backend)
    env["PYTHONPATH"] = os.pathsep.join(
        [os.path.join(os.path.dirname(__file__), "..", "src"),
         env.get("PYTHONPATH", "")]
    )
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    if out.returncode != 0:
        raise RuntimeError(out.stderr)
    return float(out.stdout.strip())


def main():
    print(f"active backend: {kernels.BACKEND}")
    impls = {"numpy": kernels._numpy_mul_accum}
    if kernels._HAVE_NUMBA:
        impls["numba"] = kernels._numba_mul_accum
    else:
        print("numba backend unavailable, microbenchmark covers numpy only")

    print("\nmul_accum microbenchmark (ms per call)")
    print(f"{'case':<28}" + "".join(f"{name:>12}" for name in impls))
    for nvars, order, npoints in [(6, 2, 64), (6, 4, 64), (9, 2, 256), (9, 3, 64)]:
        case = _mul_accum_case(nvars, order, npoints, seed=nvars + order)
        label = f"nvars={nvars} order={order} pts={npoints}"
        times = [bench_mul_accum(fn, *case) for fn in impls.values()]
        print(f"{label:<28}" + "".join(f"{t * 1e3:>12.3f}" for t in times))

    print("\ncurvature identity suite, end to end (s)")
    for backend in ("numpy", "numba") if kernels._HAVE_NUMBA else ("numpy",):
        print(f"{backend:>8}: {bench_end_to_end(backend):.2f}")


if __name__ == "__main__":
    main()
