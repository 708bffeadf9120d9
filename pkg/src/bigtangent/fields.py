"""Lazy scalar fields over the 3m chart with exact derivatives.

A ``ScalarField`` is a node in a computational graph.  Evaluating a node
at a ``ChartPoint`` produces a ``Jet``; requesting a partial derivative
returns a new node whose jet is read off the parent's jet one order
higher.  This keeps every derived tensor component (connection
coefficients, curvatures, ...) representable as a field again, with all
derivatives exact.

Evaluation results are cached on the ChartPoint keyed by (node, order),
so one point shared across a verification suite is evaluated once per
node and the cache is freed when the point is dropped.
"""

from __future__ import annotations

import math

import numpy as np

from . import exprdsl
from .jets import Jet, jet_space
from .points import ChartPoint


class ScalarField:
    """Base node; subclasses implement ``_jet``."""

    __slots__ = ()

    def jet(self, p: ChartPoint, order: int) -> Jet:
        key = (self, order)
        hit = p._cache.get(key)
        if hit is None:
            hit = p._cache[key] = self._jet(p, order)
        return hit

    def _jet(self, p: ChartPoint, order: int) -> Jet:
        raise NotImplementedError

    def value(self, p: ChartPoint) -> np.ndarray:
        return self.jet(p, 0).value

    def partial(self, var: int) -> "ScalarField":
        return Partial(self, var)

    # -- arithmetic (with light constant folding) ------------------------
    def __add__(self, other):
        other = as_field(other)
        if _is_const(other, 0.0):
            return self
        if _is_const(self, 0.0):
            return other
        if isinstance(self, Const) and isinstance(other, Const):
            return Const(self.v + other.v)
        return Bin("+", self, other)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_field(other)
        if _is_const(other, 0.0):
            return self
        if isinstance(self, Const) and isinstance(other, Const):
            return Const(self.v - other.v)
        return Bin("-", self, other)

    def __rsub__(self, other):
        return as_field(other) - self

    def __neg__(self):
        if isinstance(self, Const):
            return Const(-self.v)
        return Bin("-", ZERO, self)

    def __mul__(self, other):
        other = as_field(other)
        if _is_const(self, 0.0) or _is_const(other, 0.0):
            return ZERO
        if _is_const(self, 1.0):
            return other
        if _is_const(other, 1.0):
            return self
        if isinstance(self, Const) and isinstance(other, Const):
            return Const(self.v * other.v)
        return Bin("*", self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_field(other)
        if _is_const(other, 1.0):
            return self
        if _is_const(self, 0.0) and isinstance(other, Const):
            return ZERO
        return Bin("/", self, other)

    def __rtruediv__(self, other):
        return Bin("/", as_field(other), self)

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("field exponent must be an integer")
        return Pow(self, int(n))

    def sin(self):
        return Func("sin", self)

    def cos(self):
        return Func("cos", self)

    def exp(self):
        return Func("exp", self)

    def log(self):
        return Func("log", self)

    def sqrt(self):
        return Func("sqrt", self)


class Const(ScalarField):
    __slots__ = ("v",)

    def __init__(self, v: float):
        self.v = float(v)

    def _jet(self, p, order):
        return Jet.constant(jet_space(3 * p.m, order), self.v, p.npoints)


ZERO = Const(0.0)
ONE = Const(1.0)


def _is_const(f, v) -> bool:
    return isinstance(f, Const) and f.v == v


def as_field(x) -> ScalarField:
    if isinstance(x, ScalarField):
        return x
    return Const(float(x))


class Coord(ScalarField):
    """The flat chart variable ``var`` (0 <= var < 3m)."""

    __slots__ = ("var",)

    def __init__(self, var: int):
        self.var = int(var)

    def _jet(self, p, order):
        space = jet_space(3 * p.m, order)
        return Jet.variable(space, self.var, np.atleast_1d(p.coord(self.var)))


class Bin(ScalarField):
    __slots__ = ("op", "a", "b")

    def __init__(self, op, a, b):
        self.op, self.a, self.b = op, a, b

    def _jet(self, p, order):
        a = self.a.jet(p, order)
        b = self.b.jet(p, order)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b


class Pow(ScalarField):
    __slots__ = ("base", "n")

    def __init__(self, base, n):
        self.base, self.n = base, n

    def _jet(self, p, order):
        return self.base.jet(p, order) ** self.n


class Func(ScalarField):
    __slots__ = ("name", "arg")

    def __init__(self, name, arg):
        self.name, self.arg = name, arg

    def _jet(self, p, order):
        return getattr(self.arg.jet(p, order), self.name)()


class Partial(ScalarField):
    __slots__ = ("parent", "var")

    def __init__(self, parent, var):
        self.parent, self.var = parent, int(var)

    def _jet(self, p, order):
        return self.parent.jet(p, order + 1).partial(self.var)


def from_expr(e: exprdsl.Expr, m: int) -> ScalarField:
    """Convert a parsed expression tree into a field graph."""
    if isinstance(e, exprdsl.Num):
        return Const(e.value)
    if isinstance(e, exprdsl.Var):
        return Coord(exprdsl.var_index(m, e.block, e.index))
    if isinstance(e, exprdsl.Neg):
        return -from_expr(e.arg, m)
    if isinstance(e, exprdsl.Pow):
        return from_expr(e.base, m) ** e.exponent
    if isinstance(e, exprdsl.Func):
        return getattr(from_expr(e.arg, m), e.name)()
    if isinstance(e, exprdsl.BinOp):
        a, b = from_expr(e.left, m), from_expr(e.right, m)
        return {"+": a + b, "-": a - b, "*": a * b, "/": a / b}[e.op]
    raise TypeError(f"unknown node {e!r}")


def field(text: str, m: int) -> ScalarField:
    return from_expr(exprdsl.parse_expr(text, m), m)


# -- object-array matrix helpers ------------------------------------------
def fmat(rows) -> np.ndarray:
    """A 2D object array of ScalarFields from nested lists."""
    rows = [[as_field(e) for e in row] for row in rows]
    out = np.empty((len(rows), len(rows[0])), dtype=object)
    for i, row in enumerate(rows):
        out[i, :] = row
    return out


def fzeros(*shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out[...] = ZERO
    return out


def fmatmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, k = a.shape
    k2, mm = b.shape
    assert k == k2
    out = fzeros(n, mm)
    for i in range(n):
        for j in range(mm):
            s = ZERO
            for s_ in range(k):
                s = s + a[i, s_] * b[s_, j]
            out[i, j] = s
    return out


def ftranspose(a: np.ndarray) -> np.ndarray:
    return a.T.copy()


def fvalue(arr: np.ndarray, p: ChartPoint) -> np.ndarray:
    """Evaluate an object array of fields to floats, batched last axis."""
    out = np.empty(arr.shape + (p.npoints,))
    for idx in np.ndindex(arr.shape):
        out[idx] = as_field(arr[idx]).value(p)
    return out


# -- jet-exact matrix inversion -------------------------------------------
def _jet_matmul(A, B, n):
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            s = A[i][0] * B[0][j]
            for k in range(1, n):
                s = s + A[i][k] * B[k][j]
            out[i][j] = s
    return out


def _jet_inverse(A, space, npoints):
    """Invert a square matrix of jets (shared space) by Newton iteration.

    The seed is the batched numpy inverse of the value part; each Newton
    step X <- X(2I - AX) doubles the order to which X is exact, so
    ceil(log2(order+1)) steps suffice.
    """
    n = len(A)
    vals = np.empty((npoints, n, n))
    for i in range(n):
        for j in range(n):
            vals[:, i, j] = A[i][j].value
    inv0 = np.linalg.inv(vals)
    X = [
        [Jet.constant(space, inv0[:, i, j], npoints) for j in range(n)]
        for i in range(n)
    ]
    steps = 0 if space.order == 0 else math.ceil(math.log2(space.order + 1))
    two = 2.0
    for _ in range(steps):
        AX = _jet_matmul(A, X, n)
        # E = 2I - AX
        E = [[(-AX[i][j]) for j in range(n)] for i in range(n)]
        for i in range(n):
            E[i][i] = E[i][i] + two
        X = _jet_matmul(X, E, n)
    return X


class _MatrixInverse:
    """Shared owner computing all entries of an inverse at once."""

    __slots__ = ("mat", "n")

    def __init__(self, mat: np.ndarray):
        if mat.shape[0] != mat.shape[1]:
            raise ValueError("matrix must be square")
        self.mat = mat
        self.n = mat.shape[0]

    def jets(self, p: ChartPoint, order: int):
        key = (self, order)
        hit = p._cache.get(key)
        if hit is None:
            space = jet_space(3 * p.m, order)
            A = [
                [as_field(self.mat[i, j]).jet(p, order) for j in range(self.n)]
                for i in range(self.n)
            ]
            hit = p._cache[key] = _jet_inverse(A, space, p.npoints)
        return hit


class _MatInvEntry(ScalarField):
    __slots__ = ("owner", "i", "j")

    def __init__(self, owner, i, j):
        self.owner, self.i, self.j = owner, i, j

    def _jet(self, p, order):
        return self.owner.jets(p, order)[self.i][self.j]


def finverse(mat: np.ndarray) -> np.ndarray:
    """Entrywise fields of the inverse of a field matrix (jet-exact)."""
    owner = _MatrixInverse(mat)
    out = np.empty((owner.n, owner.n), dtype=object)
    for i in range(owner.n):
        for j in range(owner.n):
            out[i, j] = _MatInvEntry(owner, i, j)
    return out


def fsolve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve mat @ x = rhs for a field vector rhs."""
    inv = finverse(mat)
    n = inv.shape[0]
    out = np.empty(n, dtype=object)
    for i in range(n):
        s = ZERO
        for j in range(n):
            s = s + inv[i, j] * as_field(rhs[j])
        out[i] = s
    return out


def fdet(mat: np.ndarray) -> ScalarField:
    """Determinant of a small field matrix by cofactor expansion."""
    n = mat.shape[0]
    if n == 1:
        return as_field(mat[0, 0])
    if n == 2:
        return mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    out = ZERO
    for j in range(n):
        minor = np.delete(np.delete(mat, 0, axis=0), j, axis=1)
        term = as_field(mat[0, j]) * fdet(minor)
        out = out + term if j % 2 == 0 else out - term
    return out
