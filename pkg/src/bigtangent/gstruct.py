"""Pointwise structure-group machinery for (S, P, Q) triples.

A triple of a 2-nilpotent (1,1) tensor S, an antisymmetric bivector P
and a symmetric 2-contravariant Q satisfying the canonical rank and
composition axioms is equivalent to a reduction of the frame bundle to
the block group Bt(3m): frames (a_i, b_i, c^i) with b_i = S a_i.  This
module checks the axioms at sample points, constructs such a frame
numerically, tests the integrability conditions and recognizes the
Bt-pattern of canonical-atlas Jacobians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fields, tensorcalc as tc
from .bigcore import CanonicalPack, rand_x_poly
from .points import ChartPoint
from .report import Report
from .tensorcalc import TensorField


@dataclass
class TriplePack:
    S: TensorField
    P: TensorField
    Q: TensorField
    m: int


def triple_from_pack(pack: CanonicalPack) -> TriplePack:
    return TriplePack(pack.S, pack.P, pack.Q, pack.m)


@dataclass
class AdaptedFrame:
    """Frame vectors (columns) grouped as (a_i, b_i, c^i) at one point."""

    a: np.ndarray  # (n, m)
    b: np.ndarray  # (n, m)
    c: np.ndarray  # (n, m)
    point: ChartPoint

    @property
    def matrix(self) -> np.ndarray:
        return np.hstack([self.a, self.b, self.c])


# -- axiom check ----------------------------------------------------------
def triple_axiom_check(T: TriplePack, points: ChartPoint, tol: float = 1e-9) -> Report:
    """Rank and subspace axioms plus the composition identities, per point."""
    m = T.m
    n = 3 * m
    rep = Report("triple axioms", tol=tol, meta={"m": m})
    Sv = T.S.value(points)
    Pv = T.P.value(points)
    Qv = T.Q.value(points)
    rank_ok = sub_ok = True
    comp_res = 0.0
    rng = np.random.default_rng(0)
    for k in range(points.npoints):
        Sk, Pk, Qk = Sv[:, :, k], Pv[:, :, k], Qv[:, :, k]
        sharpP, sharpQ = Pk.T, Qk.T
        rank_ok &= tc.matrix_rank(Sk, tol) == m
        rank_ok &= tc.matrix_rank(sharpP, tol) == 2 * m
        rank_ok &= tc.matrix_rank(sharpQ, tol) == 2 * m
        kerS = _nullspace(Sk, tol)
        sub_ok &= _same_colspace(kerS, sharpP, tol)
        sub_ok &= _same_colspace(kerS, sharpQ, tol)
        v = sharpQ @ rng.standard_normal(n)
        lhs = tc.sharp_value(Pk, np.linalg.pinv(sharpQ, rcond=tol) @ v)
        rhs = tc.sharp_value(Qk, np.linalg.pinv(sharpP, rcond=tol) @ v)
        comp_res = max(comp_res, float(np.max(np.abs(lhs - rhs))))
        w = Sk @ rng.standard_normal(n)
        back = tc.sharp_value(Qk, np.linalg.pinv(sharpP, rcond=tol) @ w)
        comp_res = max(comp_res, float(np.max(np.abs(back + w))))
    rep.add_bool("rank S = m and rank P = rank Q = 2m", bool(rank_ok))
    rep.add_bool("ker S = im sharp_P = im sharp_Q", bool(sub_ok))
    rep.add("sharp_P flat_Q = sharp_Q flat_P, sharp_Q flat_P S = -S", comp_res)
    return rep


# -- adapted frame --------------------------------------------------------
def adapted_frame(T: TriplePack, p: ChartPoint, a_seed: np.ndarray | None = None) -> AdaptedFrame:
    """Build a frame (a_i, b_i, c^i) at an unbatched point.

    a_i span the Euclidean-orthogonal complement of ker S (or the given
    ``a_seed`` columns), b_i = S a_i, and c^i is built from a dual basis
    of the vertical pairing metric projected onto the phi-eigenbundle
    complementary to im S, following the frame-existence recipe.
    """
    if p.batched:
        raise ValueError("adapted_frame works at a single point")
    m = T.m
    Sk = T.S.value(p)[:, :, 0]
    Pk = T.P.value(p)[:, :, 0]
    Qk = T.Q.value(p)[:, :, 0]
    if a_seed is None:
        # orthogonal complement of ker S = top-m right singular vectors
        _, s, Vt = np.linalg.svd(Sk)
        if np.sum(s > 1e-9 * s[0]) != m:
            raise ValueError("axioms violated: rank S != m at the point")
        a = Vt[:m].T
    else:
        a = np.asarray(a_seed, dtype=float)
    b = Sk @ a
    sharpP, sharpQ = Pk.T, Qk.T
    flatP = np.linalg.pinv(sharpP, rcond=1e-9)
    flatQ = np.linalg.pinv(sharpQ, rcond=1e-9)

    def g(Y1, Y2):
        return (flatQ @ Y1) @ Y2

    def phi(Y):
        return sharpQ @ (flatP @ Y)

    # dual vectors w^j in V with g(b_i, w^j) = delta; V = im sharp_Q
    _, V_im = tc.kernel_image(Qk)
    G = np.array([[g(b[:, i], V_im[:, r]) for r in range(2 * m)] for i in range(m)])
    W = V_im @ np.linalg.pinv(G, rcond=1e-9)  # (n, m), g(b_i, w^j) = delta
    # make the w's g-isotropic: subtract half the Gram matrix along b
    gram = np.array([[g(W[:, i], W[:, j]) for j in range(m)] for i in range(m)])
    ctil = W - 0.5 * b @ gram.T
    # eigenvalue of phi on im S determines the complementary projector
    eps = float(np.sum(phi(b[:, 0]) * b[:, 0]) / np.sum(b[:, 0] * b[:, 0]))
    eps = 1.0 if eps > 0 else -1.0
    c = 0.5 * (ctil - eps * np.apply_along_axis(phi, 0, ctil))
    return AdaptedFrame(a=a, b=b, c=c, point=p)


def frame_residuals(T: TriplePack, fr: AdaptedFrame) -> dict:
    """Residuals of the frame invariants at the frame's point."""
    p = fr.point
    m = T.m
    Sk = T.S.value(p)[:, :, 0]
    Pk = T.P.value(p)[:, :, 0]
    Qk = T.Q.value(p)[:, :, 0]
    res = {}
    res["b = S a"] = float(np.max(np.abs(Sk @ fr.a - fr.b)))
    res["S b = 0"] = float(np.max(np.abs(Sk @ fr.b)))
    res["S c = 0"] = float(np.max(np.abs(Sk @ fr.c)))
    P_re = np.zeros_like(Pk)
    Q_re = np.zeros_like(Qk)
    for i in range(m):
        P_re += np.outer(fr.b[:, i], fr.c[:, i]) - np.outer(fr.c[:, i], fr.b[:, i])
        Q_re += np.outer(fr.b[:, i], fr.c[:, i]) + np.outer(fr.c[:, i], fr.b[:, i])
    res["P = b_i ^ c^i"] = float(np.max(np.abs(P_re - Pk)))
    res["Q = b_i (.) c^i"] = float(np.max(np.abs(Q_re - Qk)))
    return res


def _block_pattern(M, m, tol, zero_blocks):
    M = np.asarray(M, dtype=float)
    if M.shape != (3 * m, 3 * m):
        return False
    A = M[:m, :m]
    if abs(np.linalg.det(A)) < tol:
        return False
    scale = max(1.0, float(np.max(np.abs(M))))
    for r, c in zero_blocks:
        if np.max(np.abs(M[r * m : (r + 1) * m, c * m : (c + 1) * m])) > tol * scale:
            return False
    if not np.allclose(M[m : 2 * m, m : 2 * m], A, atol=tol * scale):
        return False
    return np.allclose(M[2 * m :, 2 * m :], np.linalg.inv(A).T, atol=tol * scale)


def bt_pattern_check(M: np.ndarray, m: int, tol: float = 1e-9) -> bool:
    """True iff M has the Bt(3m) group block pattern.

    Blocks in m-sized groups: upper-left A invertible, middle block
    equal to A, lower-right the inverse transpose of A, zero blocks at
    (2,1), (2,3), (3,1), (3,2); blocks (1,2) and (1,3) are free.
    """
    return _block_pattern(M, m, tol, [(1, 0), (1, 2), (2, 0), (2, 1)])


def canonical_atlas_jacobian_check(
    J: np.ndarray, tol: float = 1e-9, integrable: bool = False
) -> bool:
    """True iff J has the block pattern of a coordinate-change Jacobian
    between charts of a canonical (quasi-integrable) atlas.

    Zero blocks at (2,1), (2,3), (3,1); middle block equals the
    invertible upper-left block and the lower-right block is its inverse
    transpose.  With ``integrable=True`` the (3,2) block must vanish too.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or J.shape[0] % 3:
        return False
    zeros = [(1, 0), (1, 2), (2, 0)]
    if integrable:
        zeros.append((2, 1))
    return _block_pattern(J, J.shape[0] // 3, tol, zeros)


# -- integrability --------------------------------------------------------
def integrability_check(
    T: TriplePack,
    points: ChartPoint,
    test_functions=None,
    Delta=None,
    tol: float = 1e-9,
    seed: int = 0,
) -> Report:
    """The three tensor conditions of quasi-integrability, plus the
    distribution conditions for full integrability when Delta is given.
    """
    m = T.m
    n = 3 * m
    rep = Report("integrability", tol=tol, meta={"m": m})
    rep.add("N_S = 0", tc.nijenhuis_tensor(T.S).max_abs(points))
    rep.add("[P,P] = 0", tc.schouten_bracket(T.P, T.P).max_abs(points))
    if test_functions is None:
        # Defaults: the 3m coordinates plus random quadratics.  Quadratic
        # terms along im S are excluded: even in the model structure the
        # Hamiltonian flow of such functions shears S (for f = y1^2 the
        # field 2*y1*d/dz1 does not preserve S), so they are outside the
        # class for which the preservation condition can hold.
        rng = np.random.default_rng(seed)
        test_functions = [fields.Coord(i) for i in range(n)]
        for _ in range(5):
            f = fields.ZERO
            for i in range(n):
                f = f + float(rng.uniform(-1, 1)) * fields.Coord(i)
            i = int(rng.integers(0, n))
            j = int(rng.integers(0, m)) if i >= m else int(rng.integers(0, n))
            f = f + float(rng.uniform(-1, 1)) * fields.Coord(i) * fields.Coord(j)
            test_functions.append(f)
    worst = 0.0
    for f in test_functions:
        ham = tc.sharp_field(T.P, tc.differential(fields.as_field(f), m))
        worst = max(worst, tc.lie_derivative(ham, T.S).max_abs(points))
    rep.add("L_{sharp_P df} S = 0 on test functions", worst)

    if Delta is not None:
        Pv = T.P.value(points)
        Qv = T.Q.value(points)
        Sv = T.S.value(points)
        Zv = np.stack([Z.value(points) for Z in Delta], axis=1)  # (n, m, pts)
        brackets = [
            tc.lie_bracket(Z1, Z2) for i, Z1 in enumerate(Delta) for Z2 in Delta[i + 1 :]
        ]
        Bv = (
            np.stack([B.value(points) for B in brackets], axis=1)
            if brackets
            else np.zeros((n, 0, points.npoints))
        )
        iso_res = 0.0
        ok_invol = ok_split = True
        for k in range(points.npoints):
            Zk = Zv[:, :, k]
            for i in range(m):
                alphaP = np.linalg.pinv(Pv[:, :, k].T, rcond=1e-9) @ Zk[:, i]
                alphaQ = np.linalg.pinv(Qv[:, :, k].T, rcond=1e-9) @ Zk[:, i]
                for j in range(m):
                    iso_res = max(iso_res, abs(alphaP @ Zk[:, j]))
                    iso_res = max(iso_res, abs(alphaQ @ Zk[:, j]))
            stacked = np.hstack([Zk, Bv[:, :, k]])
            ok_invol &= tc.matrix_rank(stacked, 1e-8) == tc.matrix_rank(Zk, 1e-8)
            imS = _colspace(Sv[:, :, k])
            split = np.hstack([imS, Zk])
            ok_split &= tc.matrix_rank(split, 1e-8) == 2 * m
            ok_split &= _same_colspace(split, _nullspace(Sv[:, :, k]), 1e-8)
        rep.add("Delta is P-Lagrangian and Q-isotropic", iso_res)
        rep.add_bool("Delta involutive (no rank growth)", bool(ok_invol))
        rep.add_bool("ker S = im S (+) Delta", bool(ok_split))
    return rep


def _nullspace(A, tol=1e-9):
    U, s, Vt = np.linalg.svd(A)
    cutoff = tol * (s[0] if s.size and s[0] > 0 else 1.0)
    r = int(np.sum(s > cutoff))
    return Vt[r:].T


def _colspace(A, tol=1e-9):
    U, s, _ = np.linalg.svd(A)
    cutoff = tol * (s[0] if s.size and s[0] > 0 else 1.0)
    r = int(np.sum(s > cutoff))
    return U[:, :r]


def _same_colspace(A, B, tol=1e-9):
    ra = tc.matrix_rank(A, tol) if A.size else 0
    rb = tc.matrix_rank(B, tol) if B.size else 0
    if ra != rb:
        return False
    return tc.matrix_rank(np.hstack([A, B]), tol) == ra


def push_forward_constant(T: TriplePack, G: np.ndarray) -> TriplePack:
    """Transform the triple by a constant invertible linear chart map G."""
    G = np.asarray(G, dtype=float)
    Ginv = np.linalg.inv(G)
    Sc = np.tensordot(np.tensordot(G, T.S.comps, axes=([1], [0])), Ginv, axes=([1], [0]))
    Pc = np.tensordot(np.tensordot(G, T.P.comps, axes=([1], [0])), G, axes=([1], [1]))
    Qc = np.tensordot(np.tensordot(G, T.Q.comps, axes=([1], [0])), G, axes=([1], [1]))
    return TriplePack(
        S=TensorField(("up", "down"), Sc, T.m),
        P=TensorField(("up", "up"), Pc, T.m),
        Q=TensorField(("up", "up"), Qc, T.m),
        m=T.m,
    )


def rand_quadratic_fields(m: int, count: int, seed: int):
    """Random quadratic scalar fields on the chart (test helper)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        f = rand_x_poly(m, rng)
        for i in range(3 * m):
            f = f + float(rng.uniform(-1, 1)) * fields.Coord(i)
        out.append(f)
    return out
