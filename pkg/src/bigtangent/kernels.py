"""Hot numeric kernels for jet arithmetic.

Two interchangeable backends: a numba @njit version and a pure-numpy
version.  Selection is via the environment variable
``BIGTANGENT_BACKEND`` ("numba" or "numpy"); the default is numba when
it imports, numpy otherwise.  ``benchmarks/bench_jet_kernels.py``
compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_REQUESTED = os.environ.get("BIGTANGENT_BACKEND", "").strip().lower()


def _numpy_mul_accum(out, a, b, oi, ai, bi):
    np.add.at(out, oi, a[ai] * b[bi])


_HAVE_NUMBA = False
if _REQUESTED != "numpy":
    try:
        from numba import njit

        @njit(cache=True)
        def _numba_mul_accum(out, a, b, oi, ai, bi):  # pragma: no cover
            npts = out.shape[1]
            for k in range(oi.shape[0]):
                o, i, j = oi[k], ai[k], bi[k]
                for p in range(npts):
                    out[o, p] += a[i, p] * b[j, p]

        _HAVE_NUMBA = True
    except ImportError:
        if _REQUESTED == "numba":
            raise


if _HAVE_NUMBA:
    mul_accum = _numba_mul_accum
    BACKEND = "numba"
else:
    mul_accum = _numpy_mul_accum
    BACKEND = "numpy"
