"""Chart metrics with a nondegenerate vertical restriction.

A metric on the 3m-chart whose restriction to the vertical coordinate
blocks is invertible singles out a horizontal bundle: the orthogonal
complement of the fibers.  The module builds the classical lifted
metrics (covariant-differential form, coframe form, Lagrangian form),
derives that bundle, constructs the canonical metric connection by
projecting the Levi-Civita connection, and verifies its characterizing
properties together with the covariant curvature identities governed by
the fiber derivative of the horizontal metric (the Cartan tensor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conns, fields, horizon, tensorcalc as tc
from .bigcore import parse_components
from .points import ChartPoint, sample_box
from .report import Report
from .tensorcalc import TensorField

_COND_LIMIT = 1e8


@dataclass
class BigMetric:
    """Symmetric (0,2) chart tensor plus its orthogonal horizontal
    bundle, solved from g(X_i, vertical) = 0."""

    tensor: TensorField
    m: int
    H: horizon.HorizontalBundle | None = None

    def __post_init__(self):
        t = self.tensor
        if t.sig != ("down", "down") or t.frame != "natural":
            raise ValueError("metric must be a natural-frame (0,2) tensor")
        m = self.m
        p = sample_box(m, 10, seed=0)
        gv = np.moveaxis(t.value(p), -1, 0)
        if np.max(np.abs(gv - np.swapaxes(gv, 1, 2))) > 1e-10:
            raise ValueError("metric is not symmetric")
        vv = gv[:, m:, m:]
        if np.max(np.linalg.cond(vv)) > _COND_LIMIT:
            raise ValueError("vertical restriction is singular at a sample point")
        if self.H is None:
            self.H = self._orthogonal_bundle()

    def _orthogonal_bundle(self) -> horizon.HorizontalBundle:
        m = self.m
        comps = self.tensor.comps
        gVV = comps[m:, m:]
        t = fields.fzeros(m, m)
        tau = fields.fzeros(m, m)
        for i in range(m):
            rhs = comps[i, m:]
            u = fields.fsolve(gVV, rhs)
            for j in range(m):
                t[i, j] = u[j]
                tau[i, j] = u[m + j]
        return horizon.HorizontalBundle(t, tau, m)

    def vertical_block(self, p: ChartPoint) -> np.ndarray:
        """Numeric 2m x 2m restriction to the fibers, shape (2m,2m,npoints)."""
        m = self.m
        return fields.fvalue(self.tensor.comps[m:, m:], p)


# -- constructors ---------------------------------------------------------
def base_christoffels(g, m: int):
    """Christoffel symbols Gamma[i][j][k] of a base metric g_{ij}(x)."""
    gm = _sym_grid(g, m, {"x"})
    ginv = fields.finverse(gm)
    out = fields.fzeros(m, m, m)
    for i, j, k in np.ndindex(m, m, m):
        s = fields.ZERO
        for d in range(m):
            s = s + ginv[i, d] * (
                gm[d, k].partial(j) + gm[j, d].partial(k) - gm[j, k].partial(d)
            )
        out[i, j, k] = 0.5 * s
    return out


def _sym_grid(g, m: int, allowed) -> np.ndarray:
    raw = np.asarray(g, dtype=object)
    if raw.shape != (m, m):
        raise ValueError(f"metric coefficients must have shape {(m, m)}")
    flat = parse_components(raw.reshape(-1), m, allowed, "g", count=m * m)
    out = np.empty((m, m), dtype=object)
    for i in range(m):
        for j in range(m):
            out[i, j] = flat[i * m + j]
    return out


def sasaki_type_metric(g, H: horizon.HorizontalBundle) -> BigMetric:
    """g dx (.) dx + g theta (.) theta + g^{-1} kappa (.) kappa in the
    adapted coframe of H; g may depend on (x, y)."""
    m = H.m
    gm = _sym_grid(g, m, {"x", "y"})
    p = sample_box(m, 10, seed=0)
    gv = np.moveaxis(fields.fvalue(gm, p), -1, 0)
    if np.max(np.linalg.cond(gv)) > _COND_LIMIT:
        raise ValueError("fiber metric is singular at a sample point")
    ginv = fields.finverse(gm)
    comps = fields.fzeros(3 * m, 3 * m)
    for i in range(m):
        for j in range(m):
            comps[i, j] = gm[i, j]
            comps[m + i, m + j] = gm[i, j]
            comps[2 * m + i, 2 * m + j] = ginv[i, j]
    ad = TensorField(("down", "down"), comps, m, frame="adapted")
    return BigMetric(horizon.to_natural(ad, H), m, H=H)


def sasaki_metric(g, m: int) -> BigMetric:
    """Lifted metric of a base metric g(x): the coframe form over the
    horizontal bundle of the base Levi-Civita connection, so the fiber
    terms are the classical covariant differentials of y and z."""
    Gamma = base_christoffels(g, m)
    H = horizon.from_linear_connection(Gamma, m)
    return sasaki_type_metric(g, H)


def lagrangian_metric(L, m: int) -> BigMetric:
    """Coframe-form metric of the y-Hessian of a regular Lagrangian,
    over the horizontal bundle of its spray."""
    _, H = horizon.spray_from_lagrangian(L, m)
    Lf = parse_components([L], m, {"x", "y"}, "L", count=1)[0]
    g = fields.fzeros(m, m)
    for i in range(m):
        for j in range(m):
            g[i, j] = Lf.partial(m + i).partial(m + j)
    return sasaki_type_metric(g, H)


# -- canonical metric connection ------------------------------------------
def canonical_metric_connection(
    gm: BigMetric, seed: int = 0, n: int = 20, tol: float = 1e-8
):
    """Projected Levi-Civita connection of the metric, with a report on
    its three characterizing properties: block preservation, parallel
    transport of the blockwise metric, and cross-block torsion values.
    Returns (Connection, Report)."""
    m = gm.m
    H = gm.H
    p = sample_box(m, n, seed=seed)
    D = conns.levi_civita(gm.tensor)
    nab = conns.vranceanu_bott(D, H)
    rep = Report("canonical metric connection properties", tol=tol)

    pres = nab.preservation_residuals(p)
    rep.add("horizontal and vertical bundles are preserved", max(pres.values()), tol=1e-10)

    gad = horizon.to_adapted(gm.tensor, H)
    dg = conns.covariant_differential(nab, gad)
    dgv = dg.value(p)
    rep.add(
        "metric is parallel on horizontal triples",
        float(np.max(np.abs(dgv[:m, :m, :m]))),
    )
    rep.add(
        "metric is parallel on vertical triples",
        float(np.max(np.abs(dgv[m:, m:, m:]))),
    )

    Tv = conns.torsion(nab).value(p)
    rep.add(
        "torsion on horizontal pairs is vertical",
        float(np.max(np.abs(Tv[:m, :m, :m]))),
    )
    rep.add(
        "torsion on vertical pairs is horizontal",
        float(np.max(np.abs(Tv[m:, m:, m:]))),
    )

    rep.add(
        "fiber restriction is the leafwise Levi-Civita connection",
        leafwise_levi_civita_residual(gm, nab, p),
    )
    return nab, rep


def leafwise_levi_civita_residual(
    gm: BigMetric, nab: conns.Connection, p: ChartPoint
) -> float:
    """Compare the vertical-block coefficients with the Levi-Civita
    symbols of the fiber metric, differentiating along fibers only."""
    m = gm.m
    gV = gm.tensor.comps[m:, m:]
    gVinv = fields.finverse(gV)
    res = []
    for a, b, c in np.ndindex(2 * m, 2 * m, 2 * m):
        s = fields.ZERO
        for d in range(2 * m):
            s = s + gVinv[c, d] * (
                gV[d, b].partial(m + a)
                + gV[a, d].partial(m + b)
                - gV[a, b].partial(m + d)
            )
        res.append(0.5 * s - nab.gamma[m + a, m + b, m + c])
    vals = fields.fvalue(np.array(res, dtype=object), p)
    return float(np.max(np.abs(vals)))


# -- Cartan tensor and curvature identities -------------------------------
def cartan_tensor(gm: BigMetric) -> TensorField:
    """Fiber derivative of the horizontal metric: adapted components
    C[i, j, k] = d g(X_j, X_k) / d y^i, zero outside the horizontal
    block.  Vanishes iff the horizontal metric is projectable."""
    m = gm.m
    gad = horizon.to_adapted(gm.tensor, gm.H)
    comps = fields.fzeros(3 * m, 3 * m, 3 * m)
    for i, j, k in np.ndindex(m, m, m):
        comps[i, j, k] = gad.comps[j, k].partial(m + i)
    return TensorField(("down", "down", "down"), comps, m, frame="adapted")


def cartan_via_lie_derivative(gm: BigMetric) -> TensorField:
    """Oracle for the Cartan tensor: (L_{S X_i} g)(X_j, X_k) with g the
    horizontal metric extended by zero."""
    m = gm.m
    H = gm.H
    gad = horizon.to_adapted(gm.tensor, H)
    hcomps = fields.fzeros(3 * m, 3 * m)
    for i in range(m):
        for j in range(m):
            hcomps[i, j] = gad.comps[i, j]
    g_ext = horizon.to_natural(
        TensorField(("down", "down"), hcomps, m, frame="adapted"), H
    )
    E, _ = horizon.frame_matrices(H)
    comps = fields.fzeros(3 * m, 3 * m, 3 * m)
    for i in range(m):
        # S X_i is the i-th y-direction for the standard nilpotent S
        lg = tc.lie_derivative(tc.basis_vector(m + i, m), g_ext)
        for j, k in np.ndindex(m, m):
            s = fields.ZERO
            for r, q in np.ndindex(3 * m, 3 * m):
                s = s + lg.comps[r, q] * E[r, j] * E[q, k]
            comps[i, j, k] = s
    return TensorField(("down", "down", "down"), comps, m, frame="adapted")


def curvature_identity_suite(
    gm: BigMetric, seed: int = 0, n: int = 20, tol: float = 1e-7
) -> Report:
    """Covariant curvature identities of the canonical connection.

    The covariant tensor is R4(z1, z2, z3, z4) = g(R(z3, z4) z2, z1).
    Checks the displayed antisymmetry and cyclic identities, the two
    correction identities balancing horizontal symmetry defects against
    the Cartan tensor, and the fully Riemannian symmetries whenever the
    correction terms vanish.
    """
    m = gm.m
    p = sample_box(m, n, seed=seed)
    rep = Report("covariant curvature identities", tol=tol)

    D = conns.levi_civita(gm.tensor)
    nab = conns.vranceanu_bott(D, gm.H)
    R = conns.curvature(nab)
    T = conns.torsion(nab)
    gad = horizon.to_adapted(gm.tensor, gm.H)

    Rv = R.value(p)  # [e, a, b, c, pt]
    Tv = T.value(p)
    gv = gad.value(p)
    Cv = cartan_tensor(gm).value(p)

    # R4[a1, a2, a3, a4] = g[a1, e] R[e, a3, a4, a2]
    R4 = np.einsum("iep,ecdbp->ibcdp", gv, Rv)

    rep.add(
        "covariant curvature is antisymmetric in the direction pair",
        float(np.max(np.abs(R4 + np.swapaxes(R4, 2, 3)))),
    )

    cyc = (
        R4
        + np.transpose(R4, (0, 3, 1, 2, 4))
        + np.transpose(R4, (0, 2, 3, 1, 4))
    )
    rep.add(
        "cyclic sum over three horizontal arguments vanishes",
        float(np.max(np.abs(cyc[:, :m, :m, :m]))),
    )

    # horizontal defect identities against the Cartan correction
    Rh = R4[:m, :m, :m, :m]
    corr = np.einsum("kabp,kcdp->abcdp", Cv[:m, :m, :m], Tv[m : 2 * m, :m, :m])
    lhs1 = Rh + np.transpose(Rh, (1, 0, 2, 3, 4))
    rep.add(
        "first-pair symmetry defect equals the Cartan correction",
        float(np.max(np.abs(lhs1 + corr))),
    )
    lhs2 = Rh - np.transpose(Rh, (2, 3, 0, 1, 4))
    rhs2 = 0.5 * (np.transpose(corr, (2, 3, 0, 1, 4)) - corr)
    rep.add(
        "pair-swap defect equals half the antisymmetrized Cartan correction",
        float(np.max(np.abs(lhs2 - rhs2))),
    )

    c_max = float(np.max(np.abs(Cv)))
    t_hh = float(np.max(np.abs(Tv[:, :m, :m])))
    rep.meta["cartan_max"] = c_max
    rep.meta["horizontal_torsion_max"] = t_hh
    if c_max <= tol or t_hh <= tol:
        rep.add(
            "riemannian symmetry: antisymmetric argument pair",
            float(np.max(np.abs(Rh + np.transpose(Rh, (1, 0, 2, 3, 4))))),
        )
        rep.add(
            "riemannian symmetry: pair swap",
            float(np.max(np.abs(Rh - np.transpose(Rh, (2, 3, 0, 1, 4))))),
        )
        bianchi = (
            Rh
            + np.transpose(Rh, (0, 3, 1, 2, 4))
            + np.transpose(Rh, (0, 2, 3, 1, 4))
        )
        rep.add(
            "riemannian symmetry: first Bianchi sum",
            float(np.max(np.abs(bianchi))),
        )
    return rep
