"""Tensor algebra and differential operators on the 3m-dimensional chart.

Components are stored as object arrays of ScalarField, one axis of
extent 3m per tensor slot.  All differential operators (Lie bracket,
Lie derivative, exterior derivative, Schouten bracket, Nijenhuis
tensor, Courant bracket) act in the natural frame only; adapted-frame
tensors must be converted before differentiating.

Conventions:
  - (1,1) tensor A: comps[i, j] = A^i_j, so (A v)^i = A^i_j v^j.
  - k-forms store the full antisymmetric component array,
    w[i1, ..., ik] = w(e_i1, ..., e_ik), wedge without 1/k! factors
    (a ^ b (X, Y) = a(X) b(Y) - a(Y) b(X)).
  - sharp of a 2-contravariant W contracts the first index:
    (sharp_W a)^j = W^{ij} a_i; flat is the pseudo-inverse of sharp
    restricted to its image.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import fields
from .fields import ScalarField, as_field, fvalue, fzeros
from .points import ChartPoint


class FrameError(ValueError):
    pass


class TensorField:
    """Component fields with a variance signature and a frame tag."""

    __slots__ = ("sig", "comps", "frame", "m")

    def __init__(self, sig, comps, m: int, frame: str = "natural"):
        sig = tuple(sig)
        comps = np.asarray(comps, dtype=object)
        n = 3 * m
        if comps.shape != (n,) * len(sig):
            raise ValueError(f"components must have shape {(n,) * len(sig)}")
        for idx in np.ndindex(comps.shape):
            comps[idx] = as_field(comps[idx])
        self.sig = sig
        self.comps = comps
        self.m = m
        self.frame = frame

    @property
    def n(self) -> int:
        return 3 * self.m

    def value(self, p: ChartPoint) -> np.ndarray:
        """Numeric components, shape sig_shape + (npoints,)."""
        return fvalue(self.comps, p)

    def __add__(self, other: "TensorField") -> "TensorField":
        self._match(other)
        out = np.empty(self.comps.shape, dtype=object)
        for idx in np.ndindex(out.shape):
            out[idx] = self.comps[idx] + other.comps[idx]
        return TensorField(self.sig, out, self.m, self.frame)

    def __sub__(self, other: "TensorField") -> "TensorField":
        return self + (other * -1.0)

    def __mul__(self, scalar) -> "TensorField":
        s = as_field(scalar)
        out = np.empty(self.comps.shape, dtype=object)
        for idx in np.ndindex(out.shape):
            out[idx] = self.comps[idx] * s
        return TensorField(self.sig, out, self.m, self.frame)

    __rmul__ = __mul__

    def _match(self, other):
        if self.sig != other.sig or self.m != other.m or self.frame != other.frame:
            raise ValueError("tensor signature/frame mismatch")

    def max_abs(self, p: ChartPoint) -> float:
        v = self.value(p)
        return float(np.max(np.abs(v))) if v.size else 0.0


def vector(comps, m: int, frame: str = "natural") -> TensorField:
    return TensorField(("up",), comps, m, frame)

def one_form(comps, m: int, frame: str = "natural") -> TensorField:
    return TensorField(("down",), comps, m, frame)


def basis_vector(var: int, m: int) -> TensorField:
    c = fzeros(3 * m)
    c[var] = fields.ONE
    return vector(c, m)


def basis_form(var: int, m: int) -> TensorField:
    c = fzeros(3 * m)
    c[var] = fields.ONE
    return one_form(c, m)


def zero_tensor(sig, m: int, frame: str = "natural") -> TensorField:
    return TensorField(sig, fzeros(*((3 * m,) * len(sig))), m, frame)


@dataclass
class GeneralizedSection:
    """A pair (vector field, 1-form) on the chart."""

    X: TensorField
    alpha: TensorField

    def __post_init__(self):
        if self.X.m != self.alpha.m:
            raise ValueError("pair components disagree on dimension")
        if self.X.sig != ("up",) or self.alpha.sig != ("down",):
            raise ValueError("pair must be (vector, 1-form)")


def _require_natural(*tensors):
    for t in tensors:
        if t.frame != "natural":
            raise FrameError("differential operators act in the natural frame only")


# -- contractions ---------------------------------------------------------
def apply_11(A: TensorField, v: TensorField) -> TensorField:
    """(1,1) tensor applied to a vector: (A v)^i = A^i_j v^j."""
    out = np.tensordot(A.comps, v.comps, axes=([1], [0]))
    return vector(out, A.m, A.frame)


def pair(alpha: TensorField, v: TensorField) -> ScalarField:
    """<alpha, v> = alpha_i v^i."""
    s = fields.ZERO
    for i in range(alpha.n):
        s = s + alpha.comps[i] * v.comps[i]
    return s


def directional(X: TensorField, f: ScalarField) -> ScalarField:
    """X f = X^s d_s f."""
    s = fields.ZERO
    for i in range(X.n):
        s = s + X.comps[i] * f.partial(i)
    return s


# -- Lie bracket and Lie derivative ---------------------------------------
def lie_bracket(X: TensorField, Y: TensorField) -> TensorField:
    _require_natural(X, Y)
    n = X.n
    out = fzeros(n)
    for k in range(n):
        s = fields.ZERO
        for j in range(n):
            s = s + X.comps[j] * Y.comps[k].partial(j)
            s = s - Y.comps[j] * X.comps[k].partial(j)
        out[k] = s
    return vector(out, X.m)


def lie_derivative(X: TensorField, T: TensorField) -> TensorField:
    """L_X T for any (r,s) signature, natural frame."""
    _require_natural(X, T)
    n = T.n
    out = np.empty(T.comps.shape, dtype=object)
    for idx in np.ndindex(T.comps.shape):
        s = directional(X, T.comps[idx])
        for a, var in enumerate(T.sig):
            for r in range(n):
                swapped = idx[:a] + (r,) + idx[a + 1 :]
                if var == "up":
                    s = s - T.comps[swapped] * X.comps[idx[a]].partial(r)
                else:
                    s = s + T.comps[swapped] * X.comps[r].partial(idx[a])
        out[idx] = s
    return TensorField(T.sig, out, T.m)


# -- exterior derivative --------------------------------------------------
def exterior_derivative(w: TensorField) -> TensorField:
    """d of a fully antisymmetric covariant tensor (degree k -> k+1)."""
    _require_natural(w)
    if any(v != "down" for v in w.sig):
        raise ValueError("exterior derivative needs a covariant tensor")
    n = w.n
    k = len(w.sig)
    out = fzeros(*((n,) * (k + 1)))
    for idx in np.ndindex(out.shape):
        s = fields.ZERO
        for a in range(k + 1):
            rest = idx[:a] + idx[a + 1 :]
            term = w.comps[rest].partial(idx[a])
            s = s + term if a % 2 == 0 else s - term
        out[idx] = s
    return TensorField(("down",) * (k + 1), out, w.m)


def differential(f: ScalarField, m: int) -> TensorField:
    """df as a 1-form."""
    f = as_field(f)
    return one_form([f.partial(i) for i in range(3 * m)], m)


def check_antisymmetric(T: TensorField, p: ChartPoint, tol: float = 1e-12) -> bool:
    v = T.value(p)
    k = len(T.sig)
    for perm in itertools.permutations(range(k)):
        sign = _perm_sign(perm)
        if not np.allclose(v, sign * np.transpose(v, perm + (k,)), atol=tol):
            return False
    return True


def _perm_sign(perm) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


# -- Schouten bracket -----------------------------------------------------
def schouten_bracket(P1: TensorField, P2: TensorField) -> TensorField:
    """[P1,P2]^{ijk} = sum_cyc(ijk) (P1^{si} d_s P2^{jk} + P2^{si} d_s P1^{jk})."""
    _require_natural(P1, P2)
    if P1.sig != ("up", "up") or P2.sig != ("up", "up"):
        raise ValueError("Schouten bracket needs two bivectors")
    n = P1.n
    out = fzeros(n, n, n)
    for i, j, k in np.ndindex(n, n, n):
        s = fields.ZERO
        for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
            for r in range(n):
                s = s + P1.comps[r, a] * P2.comps[b, c].partial(r)
                s = s + P2.comps[r, a] * P1.comps[b, c].partial(r)
        out[i, j, k] = s
    return TensorField(("up", "up", "up"), out, P1.m)


# -- Nijenhuis tensor -----------------------------------------------------
def nijenhuis_tensor(A: TensorField, include_square_term: bool = True) -> TensorField:
    """Nijenhuis torsion of a (1,1) tensor, components N^k_{ij}.

    The classical tensor N(X,Y) = A^2[X,Y] + [AX,AY] - A[AX,Y] - A[X,AY]
    evaluated on coordinate fields; the A^2 bracket term vanishes there,
    so the bracket-display variant (valid as a tensor only when A^2 = 0)
    produces identical coordinate components.
    """
    _require_natural(A)
    if A.sig != ("up", "down"):
        raise ValueError("Nijenhuis tensor needs a (1,1) tensor")
    del include_square_term  # same coordinate components either way
    n = A.n
    out = fzeros(n, n, n)  # [k, i, j]
    for k, i, j in np.ndindex(n, n, n):
        s = fields.ZERO
        for r in range(n):
            s = s + A.comps[r, i] * A.comps[k, j].partial(r)
            s = s - A.comps[r, j] * A.comps[k, i].partial(r)
            s = s - A.comps[k, r] * A.comps[r, j].partial(i)
            s = s + A.comps[k, r] * A.comps[r, i].partial(j)
        out[k, i, j] = s
    return TensorField(("up", "down", "down"), out, A.m)


def nijenhuis_via_brackets(A: TensorField) -> TensorField:
    """Oracle: N(e_i, e_j) assembled from explicit Lie brackets."""
    _require_natural(A)
    n = A.n
    m = A.m
    out = fzeros(n, n, n)
    basis = [basis_vector(i, m) for i in range(n)]
    for i in range(n):
        Ai = apply_11(A, basis[i])
        for j in range(n):
            Aj = apply_11(A, basis[j])
            term = lie_bracket(Ai, Aj)
            term = term - apply_11(A, lie_bracket(Ai, basis[j]))
            term = term - apply_11(A, lie_bracket(basis[i], Aj))
            # A^2 [e_i, e_j] = 0 for coordinate fields
            for k in range(n):
                out[k, i, j] = term.comps[k]
    return TensorField(("up", "down", "down"), out, m)


# -- Courant bracket ------------------------------------------------------
def courant_bracket(A: GeneralizedSection, B: GeneralizedSection) -> GeneralizedSection:
    """[(X,a),(Y,mu)] = ([X,Y], L_X mu - L_Y a + 1/2 d(a(Y) - mu(X)))."""
    X, alpha = A.X, A.alpha
    Y, mu = B.X, B.alpha
    br = lie_bracket(X, Y)
    form = lie_derivative(X, mu) - lie_derivative(Y, alpha)
    corr = differential(pair(alpha, Y) - pair(mu, X), X.m)
    form = form + corr * 0.5
    return GeneralizedSection(br, form)


# -- musical maps (numeric, rank-aware) -----------------------------------
RANK_TOL = 1e-9


def sharp_value(W: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """(sharp_W a)^j = W^{ij} a_i for numeric W (n,n) and a (n,)."""
    return alpha @ W


def kernel_image(W: np.ndarray, tol: float = RANK_TOL):
    """Orthonormal bases (columns) of ker and im of the sharp map of W."""
    M = W.T  # sharp acts as a |-> M a
    U, s, Vt = np.linalg.svd(M)
    cutoff = tol * (s[0] if s.size and s[0] > 0 else 1.0)
    r = int(np.sum(s > cutoff))
    im = U[:, :r]
    ker = Vt[r:].T
    return ker, im


def flat_value(W: np.ndarray, v: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Minimal-norm preimage of v under the sharp map of W.

    Raises ValueError when v is not in the image (residual > 1e-8).
    """
    M = W.T
    alpha = np.linalg.pinv(M, rcond=tol) @ v
    resid = np.linalg.norm(M @ alpha - v)
    scale = max(1.0, np.linalg.norm(v))
    if resid > 1e-8 * scale:
        raise ValueError(f"value outside the image of sharp (residual {resid:.3e})")
    return alpha


def sharp_flat(W: np.ndarray, arg: np.ndarray, mode: str):
    """Numeric sharp or flat with kernel/image bases.

    mode="sharp": arg is a covector, returns its raise plus (ker, im).
    mode="flat": arg is a vector in the image, returns a preimage.
    """
    ker, im = kernel_image(W)
    if mode == "sharp":
        return sharp_value(W, arg), ker, im
    if mode == "flat":
        return flat_value(W, arg), ker, im
    raise ValueError(f"unknown mode {mode!r}")


def matrix_rank(W: np.ndarray, tol: float = RANK_TOL) -> int:
    s = np.linalg.svd(W, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


# -- field-level musical helpers ------------------------------------------
def sharp_field(W: TensorField, alpha: TensorField) -> TensorField:
    """Field-level sharp of a (2,0) tensor: (sharp a)^j = W^{ij} a_i."""
    out = np.tensordot(alpha.comps, W.comps, axes=([0], [0]))
    return vector(out, W.m, W.frame)


def flat_field_form(W: TensorField, X: TensorField) -> TensorField:
    """Field-level lowering by a (0,2) tensor: (flat X)_j = W_{ij} X^i."""
    out = np.tensordot(X.comps, W.comps, axes=([0], [0]))
    return one_form(out, W.m, W.frame)
