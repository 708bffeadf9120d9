"""Canonical structures on the 3m chart and the lift operations.

The chart carries constant-coefficient canonical tensors: the Liouville
form lam = z_i dx^i, its differential varpi = -dx^i ^ dz_i, the vertical
bivector P = dy_i ^ dz_i, the symmetric pairing Q = dy_i (.) dz_i, the
2-nilpotent S = dx^i (x) dy_i, U = (Q+P)/2, the evaluation function
ev = z_i y^i and the Euler fields.  Lifts take base data (components in
x only, or the declared extended dependencies) to vector fields on the
chart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exprdsl, fields, tensorcalc as tc
from .fields import ScalarField, as_field
from .points import ChartPoint, sample_box
from .report import Report
from .tensorcalc import GeneralizedSection, TensorField


class DependencyError(ValueError):
    """A component uses a coordinate block its role forbids."""


def _blocks_used(e: exprdsl.Expr) -> set:
    if isinstance(e, exprdsl.Var):
        return {e.block}
    if isinstance(e, exprdsl.Num):
        return set()
    if isinstance(e, (exprdsl.Neg, exprdsl.Func)):
        return _blocks_used(e.arg)
    if isinstance(e, exprdsl.Pow):
        return _blocks_used(e.base)
    return _blocks_used(e.left) | _blocks_used(e.right)


def parse_components(
    comps, m: int, allowed: str, what: str, count: int | None = None
) -> list[ScalarField]:
    """Parse/convert a list of components, enforcing coordinate blocks.

    ``allowed`` is a string of permitted blocks, e.g. "x" or "xy".
    ScalarField inputs are passed through unchecked (the caller owns the
    dependency contract there).  ``count`` overrides the expected length
    (default m).
    """
    out = []
    for c in comps:
        if isinstance(c, ScalarField):
            out.append(c)
            continue
        if isinstance(c, (int, float)):
            out.append(as_field(c))
            continue
        e = c if isinstance(c, exprdsl.Expr) else exprdsl.parse_expr(str(c), m)
        bad = _blocks_used(e) - set(allowed)
        if bad:
            raise DependencyError(
                f"{what} may depend on {sorted(allowed)} only, found {sorted(bad)}"
            )
        out.append(fields.from_expr(e, m))
    expected = m if count is None else count
    if len(out) != expected:
        raise ValueError(f"{what} needs {expected} components")
    return out


@dataclass
class CanonicalPack:
    m: int
    lam: TensorField
    varpi: TensorField
    P: TensorField
    Q: TensorField
    S: TensorField
    U: TensorField
    ev: ScalarField
    E1: TensorField
    E2: TensorField
    E: TensorField
    g_V: TensorField
    omega_V: TensorField


def canonical_pack(m: int) -> CanonicalPack:
    if not 1 <= m <= 4:
        raise ValueError("dimension must be 1..4")
    n = 3 * m
    lam_c = fields.fzeros(n)
    P_c = fields.fzeros(n, n)
    Q_c = fields.fzeros(n, n)
    S_c = fields.fzeros(n, n)
    U_c = fields.fzeros(n, n)
    gV_c = fields.fzeros(n, n)
    wV_c = fields.fzeros(n, n)
    for i in range(m):
        yi, zi = m + i, 2 * m + i
        lam_c[i] = fields.Coord(zi)
        P_c[yi, zi] = fields.ONE
        P_c[zi, yi] = as_field(-1.0)
        Q_c[yi, zi] = fields.ONE
        Q_c[zi, yi] = fields.ONE
        S_c[yi, i] = fields.ONE
        U_c[yi, zi] = fields.ONE
        gV_c[yi, zi] = as_field(0.5)
        gV_c[zi, yi] = as_field(0.5)
        wV_c[zi, yi] = as_field(0.5)
        wV_c[yi, zi] = as_field(-0.5)
    lam = tc.one_form(lam_c, m)
    ev = fields.ZERO
    E1_c = fields.fzeros(n)
    E2_c = fields.fzeros(n)
    E_c = fields.fzeros(n)
    for i in range(m):
        ev = ev + fields.Coord(2 * m + i) * fields.Coord(m + i)
        E1_c[m + i] = fields.Coord(m + i)
        E2_c[2 * m + i] = fields.Coord(2 * m + i)
        E_c[m + i] = fields.Coord(m + i)
        E_c[2 * m + i] = fields.Coord(2 * m + i)
    return CanonicalPack(
        m=m,
        lam=lam,
        varpi=tc.exterior_derivative(lam),
        P=TensorField(("up", "up"), P_c, m),
        Q=TensorField(("up", "up"), Q_c, m),
        S=TensorField(("up", "down"), S_c, m),
        U=TensorField(("up", "up"), U_c, m),
        ev=ev,
        E1=tc.vector(E1_c, m),
        E2=tc.vector(E2_c, m),
        E=tc.vector(E_c, m),
        g_V=TensorField(("down", "down"), gV_c, m),
        omega_V=TensorField(("down", "down"), wV_c, m),
    )


# -- lifts ----------------------------------------------------------------
def vertical_lift(X, alpha, m: int) -> TensorField:
    """(X^v, a^v) = xi^i dy_i + a_i dz_i for base data in x only."""
    xi = parse_components(X, m, "x", "vector components")
    al = parse_components(alpha, m, "x", "form components")
    comps = fields.fzeros(3 * m)
    for i in range(m):
        comps[m + i] = xi[i]
        comps[2 * m + i] = al[i]
    return tc.vector(comps, m)


def complete_lift(X, m: int) -> TensorField:
    """X^c = xi dx + y^j (d xi/dx^j) dy - z_j (d xi^j/dx) dz."""
    xi = parse_components(X, m, "x", "vector components")
    comps = fields.fzeros(3 * m)
    for i in range(m):
        comps[i] = xi[i]
        s = fields.ZERO
        t = fields.ZERO
        for j in range(m):
            s = s + fields.Coord(m + j) * xi[i].partial(j)
            t = t - fields.Coord(2 * m + j) * xi[j].partial(i)
        comps[m + i] = s
        comps[2 * m + i] = t
    return tc.vector(comps, m)


def extended_lift_tm(xi, eta, m: int, generalized: bool = False) -> TensorField:
    """Lift of xi(x) dx + eta(x,y) dy on TM; the z-part is forced."""
    dep_xi = "xz" if generalized else "x"
    dep_eta = "xyz" if generalized else "xy"
    xi = parse_components(xi, m, dep_xi, "x-components")
    eta = parse_components(eta, m, dep_eta, "y-components")
    comps = fields.fzeros(3 * m)
    for i in range(m):
        comps[i] = xi[i]
        comps[m + i] = eta[i]
        s = fields.ZERO
        for j in range(m):
            s = s - fields.Coord(2 * m + j) * eta[j].partial(m + i)
        comps[2 * m + i] = s
    return tc.vector(comps, m)


def extended_lift_cotm(xi, zeta, m: int, generalized: bool = False) -> TensorField:
    """Lift of xi(x) dx + zeta(x,z) dz on T*M; the y-part is forced."""
    dep_xi = "xy" if generalized else "x"
    dep_zeta = "xyz" if generalized else "xz"
    xi = parse_components(xi, m, dep_xi, "x-components")
    zeta = parse_components(zeta, m, dep_zeta, "z-components")
    comps = fields.fzeros(3 * m)
    for i in range(m):
        comps[i] = xi[i]
        s = fields.ZERO
        for j in range(m):
            s = s - fields.Coord(2 * m + j) * zeta[j].partial(2 * m + i)
        comps[m + i] = s
        comps[2 * m + i] = zeta[i]
    return tc.vector(comps, m)


def generalized_moment(X, alpha, m: int) -> ScalarField:
    """l = a_i y^i + z_i xi^i."""
    xi = parse_components(X, m, "x", "vector components")
    al = parse_components(alpha, m, "x", "form components")
    out = fields.ZERO
    for i in range(m):
        out = out + al[i] * fields.Coord(m + i)
        out = out + fields.Coord(2 * m + i) * xi[i]
    return out


def base_bracket(X, Y, m: int) -> list[ScalarField]:
    """Bracket of base vector fields (components in x only)."""
    xi = parse_components(X, m, "x", "vector components")
    et = parse_components(Y, m, "x", "vector components")
    out = []
    for k in range(m):
        s = fields.ZERO
        for j in range(m):
            s = s + xi[j] * et[k].partial(j) - et[j] * xi[k].partial(j)
        out.append(s)
    return out


# -- pair endomorphisms of Prop 2.3 ---------------------------------------
def transpose_apply(S: TensorField, a: TensorField) -> TensorField:
    """(tS a)_i = a_j S^j_i."""
    out = np.tensordot(a.comps, S.comps, axes=([0], [0]))
    return tc.one_form(out, S.m)


def pair_endo_P(pack: CanonicalPack, A: GeneralizedSection) -> GeneralizedSection:
    """S_P (X, a) = (S X + sharp_P a, -tS a)."""
    X = tc.apply_11(pack.S, A.X) + tc.sharp_field(pack.P, A.alpha)
    return GeneralizedSection(X, transpose_apply(pack.S, A.alpha) * -1.0)


def pair_endo_varpi(pack: CanonicalPack, A: GeneralizedSection) -> GeneralizedSection:
    """S_varpi (X, a) = (S X, flat_varpi X - tS a)."""
    X = tc.apply_11(pack.S, A.X)
    form = tc.flat_field_form(pack.varpi, A.X) - transpose_apply(pack.S, A.alpha)
    return GeneralizedSection(X, form)


def _section_max_abs(A: GeneralizedSection, p: ChartPoint) -> float:
    return max(A.X.max_abs(p), A.alpha.max_abs(p))


def _courant_nijenhuis_residual(pack, endo, p) -> float:
    """Courant-Nijenhuis tensor of a pair endomorphism on basis sections."""
    m = pack.m
    n = 3 * m
    zero_vec = tc.vector(fields.fzeros(n), m)
    zero_form = tc.one_form(fields.fzeros(n), m)
    basis = [
        GeneralizedSection(tc.basis_vector(i, m), zero_form) for i in range(n)
    ] + [GeneralizedSection(zero_vec, tc.basis_form(i, m)) for i in range(n)]
    worst = 0.0
    for a, A in enumerate(basis):
        FA = endo(pack, A)
        for B in basis[a + 1 :]:
            FB = endo(pack, B)
            N = tc.courant_bracket(FA, FB)
            inner = tc.courant_bracket(FA, B)
            inner2 = tc.courant_bracket(A, FB)
            corr = endo(
                pack,
                GeneralizedSection(inner.X + inner2.X, inner.alpha + inner2.alpha),
            )
            N = GeneralizedSection(N.X - corr.X, N.alpha - corr.alpha)
            worst = max(worst, _section_max_abs(N, p))
    return worst


# -- random base data helpers ---------------------------------------------
def rand_x_poly(m: int, rng) -> ScalarField:
    """A random quadratic polynomial in the base coordinates only."""
    f = as_field(float(rng.uniform(-1, 1)))
    for i in range(m):
        f = f + float(rng.uniform(-1, 1)) * fields.Coord(i)
        for j in range(i, m):
            f = f + float(rng.uniform(-1, 1)) * fields.Coord(i) * fields.Coord(j)
    return f


# -- verification suite ---------------------------------------------------
def verify_section2(
    m: int,
    seed: int,
    n_samples: int,
    tol: float = 1e-9,
    perturb_S: float = 0.0,
) -> Report:
    """Check every canonical-structure identity at seeded random points.

    ``perturb_S`` adds eps * dx^1 (x) dz_1 to S as a negative control.
    """
    pack = canonical_pack(m)
    n = 3 * m
    rep = Report(
        "canonical structures",
        tol=tol,
        meta={"m": m, "seed": seed, "n_samples": n_samples},
    )
    S = pack.S
    if perturb_S:
        comps = S.comps.copy()
        comps[2 * m, 0] = comps[2 * m, 0] + perturb_S
        S = TensorField(("up", "down"), comps, m)

    p = sample_box(m, n_samples, seed)
    # Euler identities need to stay off the zero section
    pe = sample_box(m, n_samples, seed + 1, min_vertical=0.1)

    Sv = S.value(p)
    Pv = pack.P.value(p)
    Qv = pack.Q.value(p)
    wv = pack.varpi.value(p)

    # Eq-level relations of the tensor triple
    rep.add("S.S = 0", np.max(np.abs(np.einsum("ijp,jkp->ikp", Sv, Sv))))
    # (S o sharp_P) a = S (sharp_P a); sharp_P as matrix P^T on covectors
    rep.add(
        "S o sharp_P = 0",
        np.max(np.abs(np.einsum("ijp,kjp->ikp", Sv, Pv))),
    )
    rep.add(
        "flat_varpi o S = 0",
        np.max(np.abs(np.einsum("jip,jkp->ikp", wv, Sv))),
    )

    # rank and subspace properties, per point
    rank_ok = sub_ok = True
    prop2_res = 0.0
    rng = np.random.default_rng(seed + 2)
    for k in range(p.npoints):
        Sk = Sv[:, :, k]
        Pk = Pv[:, :, k].T  # sharp_P matrix acting on covectors
        Qk = Qv[:, :, k].T
        wk = wv[:, :, k]
        rank_ok &= tc.matrix_rank(Sk) == m
        rank_ok &= tc.matrix_rank(Pk) == 2 * m
        rank_ok &= tc.matrix_rank(Qk) == 2 * m
        rank_ok &= tc.matrix_rank(wk) == 2 * m
        kerS = _nullspace(Sk)
        sub_ok &= _same_colspace(kerS, Pk)
        sub_ok &= _same_colspace(kerS, Qk)
        # property 2: on a random image vector and a random full vector
        v = Qk @ rng.standard_normal(n)
        lhs = tc.sharp_value(Pv[:, :, k], np.linalg.pinv(Qk, rcond=1e-9) @ v)
        rhs = tc.sharp_value(Qv[:, :, k], np.linalg.pinv(Pk, rcond=1e-9) @ v)
        prop2_res = max(prop2_res, float(np.max(np.abs(lhs - rhs))))
        w = rng.standard_normal(n)
        sw = Sk @ w
        comp = tc.sharp_value(Qv[:, :, k], np.linalg.pinv(Pk, rcond=1e-9) @ sw)
        prop2_res = max(prop2_res, float(np.max(np.abs(comp + sw))))
    rep.add_bool("rank S = m, rank P = rank Q = rank varpi = 2m", bool(rank_ok))
    rep.add_bool("ker S = im sharp_P = im sharp_Q", bool(sub_ok))
    rep.add("sharp_P flat_Q = sharp_Q flat_P and sharp_Q flat_P S = -S", prop2_res)

    # Remark list (Euler fields away from the zero section)
    rep.add(
        "L_E lam = lam",
        (tc.lie_derivative(pack.E, pack.lam) - pack.lam).max_abs(pe),
    )
    rep.add(
        "L_E varpi = varpi",
        (tc.lie_derivative(pack.E, pack.varpi) - pack.varpi).max_abs(pe),
    )
    rep.add("sharp_P lam = 0", tc.sharp_field(pack.P, pack.lam).max_abs(p))
    dev = tc.differential(pack.ev, m)
    rep.add(
        "sharp_Q d(ev) = E",
        (tc.sharp_field(pack.Q, dev) - pack.E).max_abs(pe),
    )
    rep.add(
        "L_E P = -2P", (tc.lie_derivative(pack.E, pack.P) + pack.P * 2.0).max_abs(pe)
    )
    rep.add(
        "L_E Q = -2Q", (tc.lie_derivative(pack.E, pack.Q) + pack.Q * 2.0).max_abs(pe)
    )

    # generalized 2-nilpotent pair structures
    pk = p.select(0)
    for name, endo in (("S_P", pair_endo_P), ("S_varpi", pair_endo_varpi)):
        zero_form = tc.one_form(fields.fzeros(n), m)
        zero_vec = tc.vector(fields.fzeros(n), m)
        worst = 0.0
        for i in range(n):
            for sec in (
                GeneralizedSection(tc.basis_vector(i, m), zero_form),
                GeneralizedSection(zero_vec, tc.basis_form(i, m)),
            ):
                twice = endo(pack, endo(pack, sec))
                worst = max(worst, _section_max_abs(twice, pk))
        rep.add(f"{name}^2 = 0 on pairs", worst)
        rep.add(
            f"Courant-Nijenhuis of {name} on basis sections",
            _courant_nijenhuis_residual(pack, endo, pk),
        )

    # complete/vertical lift identities on random base data
    rng = np.random.default_rng(seed + 3)
    X = [rand_x_poly(m, rng) for _ in range(m)]
    Y = [rand_x_poly(m, rng) for _ in range(m)]
    alpha = [rand_x_poly(m, rng) for _ in range(m)]
    f = rand_x_poly(m, rng)

    Xc = complete_lift(X, m)
    Yc = complete_lift(Y, m)
    zero = [fields.ZERO] * m
    Yv = vertical_lift(Y, zero, m)

    # pair-metric identity: (1/2)(p* a)(X^c) = (1/2)(a(X))^v
    lhs = fields.ZERO
    rhs = fields.ZERO
    for i in range(m):
        lhs = lhs + alpha[i] * Xc.comps[i]
        rhs = rhs + alpha[i] * X[i]
    rep.add(
        "g(X^c, a^v) = (1/2)(a(X))^v",
        float(np.max(np.abs(0.5 * lhs.value(p) - 0.5 * rhs.value(p)))),
    )
    rep.add(
        "[X^c, Y^v] = [X,Y]^v",
        (
            tc.lie_bracket(Xc, Yv) - vertical_lift(base_bracket(X, Y, m), zero, m)
        ).max_abs(p),
    )
    rep.add(
        "[X^c, Y^c] = [X,Y]^c",
        (tc.lie_bracket(Xc, Yc) - complete_lift(base_bracket(X, Y, m), m)).max_abs(p),
    )
    # (fX)^c = f^v X^c + l_df X^v - l_X (df)^v
    fX = [f * X[i] for i in range(m)]
    df = [f.partial(i) for i in range(m)]
    l_df = generalized_moment(zero, df, m)
    l_X = generalized_moment(X, zero, m)
    Xv = vertical_lift(X, zero, m)
    dfv = vertical_lift(zero, df, m)
    expect = Xc * f + Xv * l_df - dfv * l_X
    rep.add(
        "(fX)^c = f^v X^c + l_df X^v - l_X (df)^v",
        (complete_lift(fX, m) - expect).max_abs(p),
    )
    return rep


def _nullspace(A: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    U, s, Vt = np.linalg.svd(A)
    cutoff = tol * (s[0] if s.size and s[0] > 0 else 1.0)
    r = int(np.sum(s > cutoff))
    return Vt[r:].T


def _same_colspace(A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> bool:
    ra = tc.matrix_rank(A, tol) if A.size else 0
    rb = tc.matrix_rank(B, tol) if B.size else 0
    if ra != rb:
        return False
    return tc.matrix_rank(np.hstack([A, B]), tol) == ra
