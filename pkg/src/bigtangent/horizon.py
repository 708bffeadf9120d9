"""Horizontal bundles on the 3m-chart: nonlinear connections.

A horizontal bundle is the span of the frame fields
X_i = d/dx^i - t_i^j d/dy^j - tau_ij d/dz_j, complementary to the
vertical coordinate distributions.  The module builds such bundles from
linear connection coefficients, from tangent-side or cotangent-side
horizontal data, from regular Lagrangians via their spray, and from
second-order vector fields; it also provides the adapted coframe, the
Ehresmann curvature, the bidegree decomposition of the exterior
derivative and the induced covariant derivative on base sections.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from . import fields, tensorcalc as tc
from .bigcore import DependencyError, canonical_pack, parse_components
from .fields import ScalarField, as_field
from .points import ChartPoint, sample_box
from .tensorcalc import TensorField


def _coef_grid(raw, m: int, allowed, what: str) -> np.ndarray:
    flat = parse_components(
        np.asarray(raw, dtype=object).reshape(-1), m, allowed, what, count=m * m
    )
    out = np.empty((m, m), dtype=object)
    for i in range(m):
        for j in range(m):
            out[i, j] = flat[i * m + j]
    return out


@dataclass
class HorizontalBundle:
    """Connection coefficients t_i^j and tau_ij, stored frame-indexed:
    t[i, j] and tau[i, j] are the coefficients inside X_i."""

    t: np.ndarray
    tau: np.ndarray
    m: int

    def __post_init__(self):
        self.t = _coef_grid(self.t, self.m, {"x", "y", "z"}, "t")
        self.tau = _coef_grid(self.tau, self.m, {"x", "y", "z"}, "tau")

    def horizontal_vector(self, i: int) -> TensorField:
        m = self.m
        comps = fields.fzeros(3 * m)
        comps[i] = fields.ONE
        for j in range(m):
            comps[m + j] = -1.0 * self.t[i, j]
            comps[2 * m + j] = -1.0 * self.tau[i, j]
        return tc.vector(comps, m)

    def horizontal_frame(self) -> list:
        return [self.horizontal_vector(i) for i in range(self.m)]

    def projector_h(self) -> TensorField:
        m = self.m
        comps = fields.fzeros(3 * m, 3 * m)
        for i in range(m):
            comps[i, i] = fields.ONE
            for j in range(m):
                comps[m + j, i] = -1.0 * self.t[i, j]
                comps[2 * m + j, i] = -1.0 * self.tau[i, j]
        return TensorField(("up", "down"), comps, m)

    def projector_v(self) -> TensorField:
        m = self.m
        comps = fields.fzeros(3 * m, 3 * m)
        for a in range(3 * m):
            comps[a, a] = fields.ONE
        pr = self.projector_h().comps
        for idx in np.ndindex(comps.shape):
            comps[idx] = comps[idx] - pr[idx]
        return TensorField(("up", "down"), comps, m)


def flat_bundle(m: int) -> HorizontalBundle:
    return HorizontalBundle(fields.fzeros(m, m), fields.fzeros(m, m), m)


# -- constructors ---------------------------------------------------------
def from_linear_connection(Gamma, m: int) -> HorizontalBundle:
    """Bundle spanned by parallel-transport path tangents of a linear
    connection with coefficients Gamma[i][j][k] = Gamma^i_{jk}(x)."""
    raw = np.asarray(Gamma, dtype=object)
    if raw.shape != (m, m, m):
        raise ValueError(f"Gamma must have shape {(m, m, m)}")
    G = np.array(
        parse_components(raw.reshape(-1), m, {"x"}, "Gamma", count=m ** 3), dtype=object
    )
    G = G.reshape(m, m, m)
    t = fields.fzeros(m, m)
    tau = fields.fzeros(m, m)
    for i in range(m):
        for j in range(m):
            for k in range(m):
                t[i, j] = t[i, j] + fields.Coord(m + k) * G[j, i, k]
                tau[i, j] = tau[i, j] - fields.Coord(2 * m + k) * G[k, i, j]
    return HorizontalBundle(t, tau, m)


def lift_from_tm(t, m: int) -> HorizontalBundle:
    """Complete tangent-side coefficients t_i^j(x,y) by
    tau_ij = -z_h dt_i^h/dy^j."""
    tg = _coef_grid(t, m, {"x", "y"}, "t")
    tau = fields.fzeros(m, m)
    for i in range(m):
        for j in range(m):
            for h in range(m):
                tau[i, j] = tau[i, j] - fields.Coord(2 * m + h) * tg[i, h].partial(m + j)
    return HorizontalBundle(tg, tau, m)


def lift_from_cotm(tau, m: int) -> HorizontalBundle:
    """Complete cotangent-side coefficients tau_ij(x,z) by
    t_i^j = -z_h dtau_ih/dz_j."""
    tg = _coef_grid(tau, m, {"x", "z"}, "tau")
    t = fields.fzeros(m, m)
    for i in range(m):
        for j in range(m):
            for h in range(m):
                t[i, j] = t[i, j] - fields.Coord(2 * m + h) * tg[i, h].partial(2 * m + j)
    return HorizontalBundle(t, tg, m)


@dataclass
class SecondOrderField:
    """Vector field y^i d/dx^i + eta^i d/dy^i + zeta_i d/dz_i."""

    eta: np.ndarray
    zeta: np.ndarray
    m: int

    def __post_init__(self):
        self.eta = parse_components(self.eta, self.m, {"x", "y", "z"}, "eta")
        self.zeta = parse_components(self.zeta, self.m, {"x", "y", "z"}, "zeta")

    def as_vector(self) -> TensorField:
        m = self.m
        comps = fields.fzeros(3 * m)
        for i in range(m):
            comps[i] = fields.Coord(m + i)
            comps[m + i] = self.eta[i]
            comps[2 * m + i] = self.zeta[i]
        return tc.vector(comps, m)


def canonical_second_order_extension(eta, m: int) -> SecondOrderField:
    """Extend tangent-side spray data eta^i(x,y,z) to the 3m-chart with
    zeta_i = -(1/2) z_h d eta^h / dy^i."""
    ec = parse_components(eta, m, {"x", "y", "z"}, "eta")
    zeta = fields.fzeros(m)
    for i in range(m):
        for h in range(m):
            zeta[i] = zeta[i] - 0.5 * fields.Coord(2 * m + h) * ec[h].partial(m + i)
    return SecondOrderField(ec, zeta, m)


def spray_from_lagrangian(L, m: int, check_points: ChartPoint | None = None):
    """Spray and horizontal bundle of a regular Lagrangian L(x,y).

    eta solves the pointwise linear system
    (d2L/dy dy) eta = dL/dx - y.(d2L/dx dy); the tangent-side bundle has
    t_i^j = -(1/2) d eta^j / dy^i and lifts to the full chart.
    Returns (SecondOrderField, HorizontalBundle).
    """
    Lf = parse_components([L], m, {"x", "y"}, "L", count=1)[0]
    g = fields.fzeros(m, m)
    rhs = fields.fzeros(m)
    for j in range(m):
        rhs[j] = Lf.partial(j)
        for k in range(m):
            g[j, k] = Lf.partial(m + j).partial(m + k)
            rhs[j] = rhs[j] - fields.Coord(m + k) * Lf.partial(m + j).partial(k)
    if check_points is None:
        check_points = sample_box(m, 10, seed=0)
    gv = np.moveaxis(fields.fvalue(g, check_points), -1, 0)
    if np.max(np.linalg.cond(gv)) > 1e8:
        raise ValueError("Lagrangian Hessian is singular at a sample point")
    eta = fields.fsolve(g, rhs)
    t = fields.fzeros(m, m)
    for i in range(m):
        for j in range(m):
            t[i, j] = -0.5 * eta[j].partial(m + i)
    return canonical_second_order_extension(eta, m), lift_from_tm(t, m)


def lagrangian_spray_residual(L, sof: SecondOrderField, p: ChartPoint) -> float:
    """Max residual of i(spray)(d theta) + dE for theta = dL o S and
    E = y.dL/dy - L, at the given points."""
    m = sof.m
    Lf = parse_components([L], m, {"x", "y"}, "L", count=1)[0]
    theta_comps = fields.fzeros(3 * m)
    E = -1.0 * Lf
    for i in range(m):
        theta_comps[i] = Lf.partial(m + i)
        E = E + fields.Coord(m + i) * Lf.partial(m + i)
    theta = tc.exterior_derivative(tc.one_form(theta_comps, m))
    X = sof.as_vector()
    res = fields.fzeros(3 * m)
    dE = tc.differential(E, m)
    for j in range(3 * m):
        res[j] = dE.comps[j]
        for i in range(3 * m):
            res[j] = res[j] + X.comps[i] * theta.comps[i, j]
    return tc.one_form(res, m).max_abs(p)


def second_order_projector(
    sof: SecondOrderField, check_points: ChartPoint | None = None, tol: float = 1e-9
):
    """L_X S for a second-order field X: a (1,1) tensor Q with
    Q^3 = Q, whose (-1)-eigenbundle is horizontal.  Returns
    (Q, HorizontalBundle)."""
    m = sof.m
    S = canonical_pack(m).S
    Q = tc.lie_derivative(sof.as_vector(), S)
    if check_points is None:
        check_points = sample_box(m, 10, seed=1)
    Qv = np.moveaxis(Q.value(check_points), -1, 0)
    res = float(np.max(np.abs(Qv @ Qv @ Qv - Qv)))
    if res > tol:
        raise ValueError(f"Q^3 - Q residual {res:.3e}: input is not second order")
    t = fields.fzeros(m, m)
    tau = fields.fzeros(m, m)
    for i in range(m):
        for j in range(m):
            t[i, j] = -0.5 * sof.eta[j].partial(m + i)
            tau[i, j] = -1.0 * sof.zeta[j].partial(m + i)
    return Q, HorizontalBundle(t, tau, m)


# -- coframe, curvature, bigrading ----------------------------------------
def adapted_coframe(H: HorizontalBundle):
    """Dual cobasis (dx^i, theta^i, kappa_i) of the adapted frame."""
    m = H.m
    dxs, thetas, kappas = [], [], []
    for i in range(m):
        comps = fields.fzeros(3 * m)
        comps[i] = fields.ONE
        dxs.append(tc.one_form(comps, m))
        comps = fields.fzeros(3 * m)
        comps[m + i] = fields.ONE
        for j in range(m):
            comps[j] = H.t[j, i]
        thetas.append(tc.one_form(comps, m))
        comps = fields.fzeros(3 * m)
        comps[2 * m + i] = fields.ONE
        for j in range(m):
            comps[j] = H.tau[j, i]
        kappas.append(tc.one_form(comps, m))
    return dxs, thetas, kappas


def frame_matrices(H: HorizontalBundle):
    """(E, C): frame matrix with columns (X_i, d/dy, d/dz) and its
    inverse, whose rows are the adapted coframe."""
    m = H.m
    E = fields.fzeros(3 * m, 3 * m)
    C = fields.fzeros(3 * m, 3 * m)
    for a in range(3 * m):
        E[a, a] = fields.ONE
        C[a, a] = fields.ONE
    for i in range(m):
        for j in range(m):
            E[m + j, i] = -1.0 * H.t[i, j]
            E[2 * m + j, i] = -1.0 * H.tau[i, j]
            C[m + j, i] = H.t[i, j]
            C[2 * m + j, i] = H.tau[i, j]
    return E, C


def to_adapted(T: TensorField, H: HorizontalBundle) -> TensorField:
    """Re-express components in the adapted frame of H."""
    if T.frame != "natural":
        raise tc.FrameError("input must carry natural components")
    E, C = frame_matrices(H)
    comps = T.comps
    for var in T.sig:
        M = C if var == "up" else E
        axes = ([0], [1] if var == "up" else [0])
        comps = np.tensordot(comps, M, axes=axes)
    return TensorField(T.sig, comps, T.m, frame="adapted")


def to_natural(T: TensorField, H: HorizontalBundle) -> TensorField:
    """Inverse of to_adapted."""
    if T.frame != "adapted":
        raise tc.FrameError("input must carry adapted components")
    E, C = frame_matrices(H)
    comps = T.comps
    for var in T.sig:
        M = E if var == "up" else C
        axes = ([0], [1] if var == "up" else [0])
        comps = np.tensordot(comps, M, axes=axes)
    return TensorField(T.sig, comps, T.m, frame="natural")


def ehresmann_curvature(H: HorizontalBundle) -> TensorField:
    """Vertical-valued curvature 2-form: R(Z1, Z2) = pr_V of the bracket
    of the horizontal parts, so that the no-mixed-torsion deformation of
    a torsionless connection has torsion -R."""
    m = H.m
    comps = fields.fzeros(3 * m, 3 * m, 3 * m)
    frame = H.horizontal_frame()
    for i in range(m):
        for j in range(i + 1, m):
            br = tc.lie_bracket(frame[i], frame[j])
            for k in range(m, 3 * m):
                comps[k, i, j] = br.comps[k]
                comps[k, j, i] = -1.0 * br.comps[k]
    return TensorField(("up", "down", "down"), comps, m)


def _bidegree_of_index(a: int, m: int) -> int:
    return 0 if a < m else 1


def decompose_d(omega: TensorField, H: HorizontalBundle, points: ChartPoint | None = None):
    """Split d(omega) into its (p+1,q), (p,q+1) and (p+2,q-1) parts.

    omega must be homogeneous of some bidegree (p,q) with respect to the
    horizontal/vertical splitting; the bidegree is detected by
    evaluating the adapted components at sample points.
    """
    m = omega.m
    if points is None:
        points = sample_box(m, 8, seed=2)
    k = len(omega.sig)
    if any(v != "down" for v in omega.sig):
        raise ValueError("decompose_d expects a differential form")
    p, q = _detect_bidegree(omega, H, points)
    d = tc.exterior_derivative(omega)
    d_ad = to_adapted(d, H)
    parts = []
    for tp, tq in [(p + 1, q), (p, q + 1), (p + 2, q - 1)]:
        proj = fields.fzeros(*([3 * m] * (k + 1)))
        if 0 <= tp and 0 <= tq and tp + tq == k + 1:
            for idx in np.ndindex(proj.shape):
                deg = sum(_bidegree_of_index(a, m) for a in idx)
                if deg == tq:
                    proj[idx] = d_ad.comps[idx]
        part = to_natural(TensorField(d.sig, proj, m, frame="adapted"), H)
        parts.append(part)
    return tuple(parts)


def _detect_bidegree(omega: TensorField, H: HorizontalBundle, points: ChartPoint):
    m = omega.m
    k = len(omega.sig)
    if k == 0:
        return 0, 0
    ad = to_adapted(omega, H)
    vals = fields.fvalue(ad.comps, points)
    seen = set()
    for idx in np.ndindex(omega.comps.shape):
        if np.max(np.abs(vals[idx])) > 1e-10:
            seen.add(sum(_bidegree_of_index(a, m) for a in idx))
    if len(seen) > 1:
        raise ValueError(f"form is not bidegree-homogeneous: V-degrees {sorted(seen)}")
    q = seen.pop() if seen else 0
    return k - q, q


def nonlinear_covariant_derivative(H: HorizontalBundle, nu, kappa, xi):
    """Covariant derivative of a base section (nu^i(x), kappa_i(x))
    along X = xi^j(x) d/dx^j, with values in the pulled-back pair
    bundle: component arrays (vector part, form part)."""
    m = H.m
    nu = parse_components(nu, m, {"x"}, "nu")
    kap = parse_components(kappa, m, {"x"}, "kappa")
    xi = parse_components(xi, m, {"x"}, "xi")
    out_v = fields.fzeros(m)
    out_f = fields.fzeros(m)
    for i in range(m):
        for j in range(m):
            out_v[i] = out_v[i] + xi[j] * (nu[i].partial(j) + H.t[j, i])
            out_f[i] = out_f[i] + xi[j] * (kap[i].partial(j) - H.tau[j, i])
    return out_v, out_f


def is_liouville_related(a: TensorField, points: ChartPoint, tol: float = 1e-10) -> bool:
    """True iff composing the 1-form with S gives the tautological form,
    i.e. the dy-coefficients equal the z-coordinates."""
    m = a.m
    vals = fields.fvalue(a.comps[m : 2 * m], points)
    return bool(np.max(np.abs(vals - points.z)) <= tol)


def transformed_gamma_bundle(Gamma, A: np.ndarray, m: int) -> HorizontalBundle:
    """Bundle of the connection Gamma re-expressed in linear coordinates
    xt = A x (test helper for the equivariance law)."""
    A = np.asarray(A, dtype=float)
    Ainv = np.linalg.inv(A)
    raw = np.asarray(Gamma, dtype=object)
    G = np.array(
        parse_components(raw.reshape(-1), m, {"x"}, "Gamma", count=m ** 3), dtype=object
    )
    G = G.reshape(m, m, m)
    # substitute x = Ainv xt inside the coefficients and contract indices
    def pullback(f):
        subs = []
        for r in range(m):
            s = fields.ZERO
            for c in range(m):
                s = s + float(Ainv[r, c]) * fields.Coord(c)
            subs.append(s)
        return _substitute_x(f, subs)

    Gt = fields.fzeros(m, m, m)
    for i in range(m):
        for j in range(m):
            for k in range(m):
                acc = fields.ZERO
                for a in range(m):
                    for b in range(m):
                        for c in range(m):
                            acc = acc + float(A[i, a] * Ainv[b, j] * Ainv[c, k]) * pullback(G[a, b, c])
                Gt[i, j, k] = acc
    return from_linear_connection(Gt, m)


def _substitute_x(f: ScalarField, subs) -> ScalarField:
    """Replace Coord(i) (x-block only) by the given fields inside a
    field graph built from Coord/Const and arithmetic."""
    if isinstance(f, fields.Coord):
        return subs[f.var] if f.var < len(subs) else f
    if isinstance(f, fields.Const):
        return f
    if isinstance(f, fields.Bin):
        return fields.Bin(f.op, _substitute_x(f.a, subs), _substitute_x(f.b, subs))
    if isinstance(f, fields.Pow):
        return fields.Pow(_substitute_x(f.base, subs), f.n)
    if isinstance(f, fields.Func):
        return fields.Func(f.name, _substitute_x(f.arg, subs))
    if isinstance(f, fields.Partial):
        raise ValueError("cannot substitute under a derivative node")
    raise TypeError(f"unsupported node {type(f).__name__}")
