"""Multi-index bookkeeping for truncated jet (Taylor) arithmetic.

A jet in ``n`` variables truncated at total degree ``order`` stores one
coefficient per multi-index of degree <= order.  Everything here is
precomputed once per (n, order) pair and cached: the term list, the
index lookup, the sparse multiplication table and the tables used to
read off partial derivatives.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np


def multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    """All exponent tuples of length n with total degree <= order.

    Sorted by (degree, lexicographic) so index 0 is always the constant
    term and the n linear terms follow in variable order.
    """
    out = []
    for deg in range(order + 1):
        for c in itertools.combinations_with_replacement(range(n), deg):
            e = [0] * n
            for i in c:
                e[i] += 1
            out.append(tuple(e))
    # combinations_with_replacement is lexicographic in the variable
    # choices; sort exponent tuples for a canonical order within degree.
    out.sort(key=lambda e: (sum(e), e))
    return out


class JetSpace:
    """Shared tables for jets in ``nvars`` variables at a fixed order."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        self.terms = multi_indices(nvars, order)
        self.nterms = len(self.terms)
        self.index = {t: i for i, t in enumerate(self.terms)}
        self.degrees = np.array([sum(t) for t in self.terms], dtype=np.int64)
        self._mul_table = None
        self._partial_tables: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    # -- multiplication -------------------------------------------------
    @property
    def mul_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(out_idx, a_idx, b_idx): c[out] += a[ai] * b[bi] over all rows."""
        if self._mul_table is None:
            oi, ai, bi = [], [], []
            for i, ta in enumerate(self.terms):
                da = sum(ta)
                for j, tb in enumerate(self.terms):
                    if da + sum(tb) > self.order:
                        continue
                    tc = tuple(a + b for a, b in zip(ta, tb))
                    oi.append(self.index[tc])
                    ai.append(i)
                    bi.append(j)
            self._mul_table = (
                np.array(oi, dtype=np.int64),
                np.array(ai, dtype=np.int64),
                np.array(bi, dtype=np.int64),
            )
        return self._mul_table

    # -- partial derivatives --------------------------------------------
    def partial_table(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        """Tables mapping this space onto JetSpace(nvars, order-1).

        Returns (src_idx, factor) such that the Taylor coefficients of
        d/dx_var are ``factor * c[src_idx]`` in the lower-order space.
        """
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        if var not in self._partial_tables:
            lower = jet_space(self.nvars, self.order - 1)
            src = np.empty(lower.nterms, dtype=np.int64)
            fac = np.empty(lower.nterms, dtype=np.float64)
            for k, t in enumerate(lower.terms):
                up = list(t)
                up[var] += 1
                src[k] = self.index[tuple(up)]
                fac[k] = up[var]
            self._partial_tables[var] = (src, fac)
        return self._partial_tables[var]


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)
