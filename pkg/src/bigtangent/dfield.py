"""Fiber metrics compatible with the split pairing, and double fields.

The fibers of the 3m chart carry the split pairing
g = 1/2 (dy (.) dz + dz (.) dy).  Identifying the z-block with the dual
of the y-block writes a symmetric fiber metric as a block matrix
(h, l^t; l, k); compatibility with the pairing means the associated
endomorphism squares to the identity, and such metrics correspond
bijectively to pairs (sigma, psi) of a nondegenerate y-block metric and
a 2-form.  A horizontal bundle plus such a pair is a double field.

The module builds the connection ladder of a double field: a
sigma-preserving base connection from the projected Levi-Civita
connection of the block-diagonal lift of sigma, a psi-torsion pair, a
bracket-corrected pair, and finally a pairing- and metric-preserving
connection on the fibers whose totally skew torsion vanishes.  On top
of that sit the deformed curvature, Ricci and scalar curvatures and a
truncated-box action integral.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import conns, fields, horizon, metrics, tensorcalc as tc
from .bigcore import parse_components
from .fields import ScalarField
from .points import ChartPoint, sample_box
from .report import Report
from .tensorcalc import TensorField

_COND_LIMIT = 1e8


def _grid(raw, m: int, what: str, allowed=("x", "y", "z")) -> np.ndarray:
    """Parse an m x m table of expressions/numbers/fields."""
    arr = np.asarray(raw, dtype=object)
    if arr.shape != (m, m):
        raise ValueError(f"{what} must be an {m} x {m} table")
    flat = parse_components(arr.reshape(-1), m, set(allowed), what, count=m * m)
    out = np.empty((m, m), dtype=object)
    for i, j in np.ndindex(m, m):
        out[i, j] = flat[i * m + j]
    return out


def _sample_matrix(comps: np.ndarray, p: ChartPoint) -> np.ndarray:
    """Values of an object matrix moved to shape (npoints, r, c)."""
    return np.moveaxis(fields.fvalue(comps, p), -1, 0)


def pairing_matrix(m: int) -> np.ndarray:
    """The split pairing on the fibers in (y, z) coordinates."""
    g2 = np.zeros((2 * m, 2 * m))
    g2[:m, m:] = 0.5 * np.eye(m)
    g2[m:, :m] = 0.5 * np.eye(m)
    return g2


@dataclass
class VerticalMetric:
    """Symmetric fiber metric in block form.

    h is the y-block (0,2) part, k the z-block written as a symmetric
    2-contravariant tensor on the y-side, and l the mixed block as a
    (1,1) tensor: the full matrix in (y, z) coordinates is
    [[h, l^t], [l, k]].  Invertibility of the full matrix is recorded
    in `nondegenerate` (operations that need the inverse enforce it);
    invertibility of k alone, which gives the Legendre-type involution,
    in `strongly_nondegenerate`.
    """

    h: np.ndarray
    k: np.ndarray
    l: np.ndarray
    m: int
    nondegenerate: bool = dc_field(init=False)
    strongly_nondegenerate: bool = dc_field(init=False)

    def __post_init__(self):
        m = self.m
        for name in ("h", "k", "l"):
            arr = np.asarray(getattr(self, name), dtype=object)
            if arr.shape != (m, m):
                raise ValueError(f"{name} must have shape {(m, m)}")
            for idx in np.ndindex(m, m):
                arr[idx] = fields.as_field(arr[idx])
            setattr(self, name, arr)
        p = sample_box(m, 10, seed=0)
        hv = _sample_matrix(self.h, p)
        kv = _sample_matrix(self.k, p)
        if np.max(np.abs(hv - np.swapaxes(hv, 1, 2))) > 1e-10:
            raise ValueError("h block is not symmetric")
        if np.max(np.abs(kv - np.swapaxes(kv, 1, 2))) > 1e-10:
            raise ValueError("k block is not symmetric")
        Gv = _sample_matrix(self.matrix(), p)
        self.nondegenerate = bool(np.max(np.linalg.cond(Gv)) < _COND_LIMIT)
        self.strongly_nondegenerate = bool(np.max(np.linalg.cond(kv)) < _COND_LIMIT)

    def matrix(self) -> np.ndarray:
        """Full 2m x 2m object matrix in (y, z) coordinates."""
        m = self.m
        G = fields.fzeros(2 * m, 2 * m)
        for i, j in np.ndindex(m, m):
            G[i, j] = self.h[i, j]
            G[i, m + j] = self.l[j, i]
            G[m + i, j] = self.l[i, j]
            G[m + i, m + j] = self.k[i, j]
        return G


# -- the (sigma, psi) correspondence --------------------------------------
def vm_from_sigma_psi(sigma, psi, m: int) -> VerticalMetric:
    """Fiber metric of a pair: k = sigma^{-1}, l = -sharp_sigma flat_psi,
    h = sigma - psi sigma^{-1} psi."""
    S = _grid(sigma, m, "sigma")
    P = _grid(psi, m, "psi")
    Sinv = fields.finverse(S)
    L = -1.0 * fields.fmatmul(Sinv, P)
    H = S - fields.fmatmul(P, fields.fmatmul(Sinv, P))
    return VerticalMetric(H, Sinv, L, m)


def sigma_psi_from_vm(vm: VerticalMetric):
    """Inverse correspondence: sigma = k^{-1}, psi = -sigma l."""
    if not vm.strongly_nondegenerate:
        raise ValueError("the z-block restriction is degenerate")
    S = fields.finverse(vm.k)
    P = -1.0 * fields.fmatmul(S, vm.l)
    return S, P


def phi_matrix(vm: VerticalMetric) -> np.ndarray:
    """Endomorphism with 2 g(phi Z, Z') = gV(Z, Z'): blocks
    [[l, sharp_k], [flat_h, l^t]]."""
    m = vm.m
    phi = fields.fzeros(2 * m, 2 * m)
    for i, j in np.ndindex(m, m):
        phi[i, j] = vm.l[i, j]
        phi[i, m + j] = vm.k[i, j]
        phi[m + i, j] = vm.h[i, j]
        phi[m + i, m + j] = vm.l[j, i]
    return phi


def compatibility_check(
    vm: VerticalMetric, seed: int = 0, n: int = 20, tol: float = 1e-9
):
    """The compatibility endomorphism and its defining identities.

    Returns (phi, Report).  Checks phi^2 = Id, the symmetry of phi for
    the split pairing, the two pairing/metric exchange identities, and
    the three block conditions equivalent to phi^2 = Id.
    """
    m = vm.m
    p = sample_box(m, n, seed=seed)
    phi = phi_matrix(vm)
    rep = Report("fiber metric compatibility", tol=tol)

    Pv = _sample_matrix(phi, p)
    Gv = _sample_matrix(vm.matrix(), p)
    g2 = pairing_matrix(m)

    rep.add(
        "phi squared is the identity",
        float(np.max(np.abs(Pv @ Pv - np.eye(2 * m)))),
    )
    rep.add(
        "phi is symmetric for the split pairing",
        float(np.max(np.abs(g2 @ Pv - np.swapaxes(Pv, 1, 2) @ g2))),
    )
    rep.add(
        "twice the pairing equals the metric of a phi-shifted slot",
        float(np.max(np.abs(np.swapaxes(Pv, 1, 2) @ Gv - 2.0 * g2))),
    )
    rep.add(
        "phi is symmetric for the fiber metric",
        float(np.max(np.abs(np.swapaxes(Pv, 1, 2) @ Gv - Gv @ Pv))),
    )

    hv = _sample_matrix(vm.h, p)
    kv = _sample_matrix(vm.k, p)
    lv = _sample_matrix(vm.l, p)
    rep.add(
        "block condition: l^2 + k h = id",
        float(np.max(np.abs(lv @ lv + kv @ hv - np.eye(m)))),
    )
    rep.add(
        "block condition: l k + k l^t = 0",
        float(np.max(np.abs(lv @ kv + kv @ np.swapaxes(lv, 1, 2)))),
    )
    rep.add(
        "block condition: h l + l^t h = 0",
        float(np.max(np.abs(hv @ lv + np.swapaxes(lv, 1, 2) @ hv))),
    )
    return phi, rep


def eigenbundles(vm: VerticalMetric, seed: int = 0, n: int = 20, tol: float = 1e-9):
    """Eigenbundle frames of the compatibility endomorphism.

    Returns (Ip, Im, Report) where the columns of the 2m x m object
    matrices Ip, Im are the images of the y-basis under
    iota_pm Y = (Y, (flat_psi pm flat_sigma) Y); they span the
    (pm 1)-eigenbundles.  The report checks the eigenvector property,
    the mutual orthogonality of the two bundles, and the two pullback
    identities for sigma.
    """
    m = vm.m
    S, P = sigma_psi_from_vm(vm)
    Ip = fields.fzeros(2 * m, m)
    Im = fields.fzeros(2 * m, m)
    for i in range(m):
        Ip[i, i] = fields.ONE
        Im[i, i] = fields.ONE
        for j in range(m):
            Ip[m + j, i] = P[j, i] + S[j, i]
            Im[m + j, i] = P[j, i] - S[j, i]

    p = sample_box(m, n, seed=seed)
    rep = Report("eigenbundles of the compatibility endomorphism", tol=tol)
    Gv = _sample_matrix(vm.matrix(), p)
    Phiv = _sample_matrix(phi_matrix(vm), p)
    Ipv = _sample_matrix(Ip, p)
    Imv = _sample_matrix(Im, p)
    Sv = _sample_matrix(S, p)
    g2 = pairing_matrix(m)

    rep.add(
        "iota images are eigenvectors of phi",
        float(
            max(
                np.max(np.abs(Phiv @ Ipv - Ipv)),
                np.max(np.abs(Phiv @ Imv + Imv)),
            )
        ),
    )
    rep.add(
        "the two eigenbundles are orthogonal for the fiber metric",
        float(np.max(np.abs(np.swapaxes(Ipv, 1, 2) @ Gv @ Imv))),
    )
    rep.add(
        "sigma pulls back to half the fiber metric on each eigenbundle",
        float(
            max(
                np.max(np.abs(np.swapaxes(Ipv, 1, 2) @ Gv @ Ipv - 2.0 * Sv)),
                np.max(np.abs(np.swapaxes(Imv, 1, 2) @ Gv @ Imv - 2.0 * Sv)),
            )
        ),
    )
    rep.add(
        "the split pairing restricts to plus/minus sigma",
        float(
            max(
                np.max(np.abs(np.swapaxes(Ipv, 1, 2) @ g2 @ Ipv - Sv)),
                np.max(np.abs(np.swapaxes(Imv, 1, 2) @ g2 @ Imv + Sv)),
            )
        ),
    )
    return Ip, Im, rep


# -- Hessian metrics and the Legendre-type involution ---------------------
def hessian_vm(K, m: int) -> VerticalMetric:
    """Fiber metric from the fiber Hessian of a chart function: the
    three blocks are the second partials on the (y,y), (z,z) and (y,z)
    coordinate pairs."""
    Kf = parse_components([K], m, {"x", "y", "z"}, "K", count=1)[0]
    h = fields.fzeros(m, m)
    k = fields.fzeros(m, m)
    l = fields.fzeros(m, m)
    for i, j in np.ndindex(m, m):
        h[i, j] = Kf.partial(m + i).partial(m + j)
        k[i, j] = Kf.partial(2 * m + i).partial(2 * m + j)
        # l maps the y-block to itself; row index from the z-slot
        l[i, j] = Kf.partial(m + j).partial(2 * m + i)
    return VerticalMetric(h, k, l, m)


def legendre_involution(vm: VerticalMetric, p: ChartPoint) -> ChartPoint:
    """(x, y, z) -> (x, k z, k^{-1} y) with k evaluated at the point."""
    if not vm.strongly_nondegenerate:
        raise ValueError("the z-block restriction is degenerate")
    kv = _sample_matrix(vm.k, p)
    y = np.einsum("pij,jp->ip", kv, p.z)
    z = np.linalg.solve(kv, np.moveaxis(p.y, -1, 0)[..., None])[..., 0].T
    return ChartPoint(p.x, y, z)


# -- double fields ---------------------------------------------------------
@dataclass
class DoubleField:
    """A horizontal bundle plus a compatible fiber metric, stored
    through the component pair (sigma, psi) and an optional density."""

    H: horizon.HorizontalBundle
    sigma: np.ndarray
    psi: np.ndarray | None = None
    density: ScalarField | None = None

    def __post_init__(self):
        m = self.H.m
        self.sigma = _grid(self.sigma, m, "sigma")
        if self.psi is None:
            self.psi = fields.fzeros(m, m)
        self.psi = _grid(self.psi, m, "psi")
        if self.density is None:
            self.density = fields.ZERO
        else:
            self.density = parse_components(
                [self.density], m, {"x", "y", "z"}, "density", count=1
            )[0]
        p = sample_box(m, 10, seed=0)
        sv = _sample_matrix(self.sigma, p)
        if np.max(np.abs(sv - np.swapaxes(sv, 1, 2))) > 1e-10:
            raise ValueError("sigma is not symmetric")
        if np.max(np.linalg.cond(sv)) > _COND_LIMIT:
            raise ValueError("sigma is singular at a sample point")
        pv = _sample_matrix(self.psi, p)
        if np.max(np.abs(pv + np.swapaxes(pv, 1, 2))) > 1e-10:
            raise ValueError("psi is not antisymmetric")

    @property
    def m(self) -> int:
        return self.H.m

    def vertical_metric(self) -> VerticalMetric:
        return vm_from_sigma_psi(self.sigma, self.psi, self.m)


def field_from_riemannian(gamma, m: int) -> DoubleField:
    """Double field of a base metric: the horizontal bundle of its
    Levi-Civita connection, sigma the metric itself, psi = 0."""
    g = metrics._sym_grid(gamma, m, {"x"})
    H = horizon.from_linear_connection(metrics.base_christoffels(gamma, m), m)
    return DoubleField(H, g)


def field_from_lagrangian(L, m: int) -> DoubleField:
    """Double field of a regular Lagrangian: the spray bundle, the
    fiber Hessian as sigma, and the horizontal part of d(dL o S) as
    psi."""
    _, H = horizon.spray_from_lagrangian(L, m)
    Lf = parse_components([L], m, {"x", "y"}, "L", count=1)[0]
    sigma = fields.fzeros(m, m)
    for i, j in np.ndindex(m, m):
        sigma[i, j] = Lf.partial(m + i).partial(m + j)
    theta = fields.fzeros(3 * m)
    for i in range(m):
        theta[i] = Lf.partial(m + i)
    dtheta = tc.exterior_derivative(tc.one_form(theta, m))
    ad = horizon.to_adapted(dtheta, H)
    psi = np.empty((m, m), dtype=object)
    for i, j in np.ndindex(m, m):
        psi[i, j] = ad.comps[i, j]
    return DoubleField(H, sigma, psi)


# -- connections on the fibers --------------------------------------------
@dataclass
class VerticalConnection:
    """Coefficients gamma[a, b, c] of a connection on the fiber
    directions: a runs over the 3m adapted frame directions of H, b and
    c over the 2m fiber coordinates (y-block first)."""

    gamma: np.ndarray
    H: horizon.HorizontalBundle
    preserves: tuple = ()

    def __post_init__(self):
        m = self.H.m
        g = np.asarray(self.gamma, dtype=object)
        if g.shape != (3 * m, 2 * m, 2 * m):
            raise ValueError(f"gamma must have shape {(3 * m, 2 * m, 2 * m)}")
        for idx in np.ndindex(g.shape):
            g[idx] = fields.as_field(g[idx])
        self.gamma = g

    @property
    def m(self) -> int:
        return self.H.m


def _frame_deriv(H: horizon.HorizontalBundle, f: ScalarField, a: int) -> ScalarField:
    """Derivative along the a-th adapted frame field."""
    m = H.m
    if a >= m:
        return f.partial(a)
    out = f.partial(a)
    for j in range(m):
        out = out - H.t[a, j] * f.partial(m + j)
        out = out - H.tau[a, j] * f.partial(2 * m + j)
    return out


def section_derivative(nabla: VerticalConnection, a: int, s: np.ndarray) -> np.ndarray:
    """Covariant derivative of a fiber section (2m components) along
    the a-th adapted frame direction."""
    m = nabla.m
    out = fields.fzeros(2 * m)
    for c in range(2 * m):
        acc = _frame_deriv(nabla.H, s[c], a)
        for b in range(2 * m):
            acc = acc + s[b] * nabla.gamma[a, b, c]
        out[c] = acc
    return out


def vertical_derivative(nabla: VerticalConnection, Z: np.ndarray, s: np.ndarray):
    """Covariant derivative along a fiber vector field Z (2m direction
    components)."""
    m = nabla.m
    out = fields.fzeros(2 * m)
    for v in range(2 * m):
        d = section_derivative(nabla, m + v, s)
        for c in range(2 * m):
            out[c] = out[c] + Z[v] * d[c]
    return out


def _iota_frame(sigma: np.ndarray, psi: np.ndarray, m: int):
    """Frame matrix whose columns are the eigenbundle images of the
    y-basis, and its inverse."""
    B = fields.fzeros(2 * m, 2 * m)
    for i in range(m):
        B[i, i] = fields.ONE
        B[i, m + i] = fields.ONE
        for j in range(m):
            B[m + j, i] = psi[j, i] + sigma[j, i]
            B[m + j, m + i] = psi[j, i] - sigma[j, i]
    return B, fields.finverse(B)


def pair_connection(
    F: DoubleField, cplus: np.ndarray, cminus: np.ndarray, preserves: tuple = ()
) -> VerticalConnection:
    """Fiber connection acting as the pair (cplus, cminus) through the
    eigenbundle frames: sections of each eigenbundle are differentiated
    by transporting their y-components with the matching connection."""
    m = F.m
    B, Binv = _iota_frame(F.sigma, F.psi, m)
    n = 3 * m
    gamma = fields.fzeros(n, 2 * m, 2 * m)
    for a in range(n):
        Ga = fields.fzeros(2 * m, 2 * m)
        for j, k in np.ndindex(m, m):
            Ga[k, j] = cplus[a, j, k]
            Ga[m + k, m + j] = cminus[a, j, k]
        dB = np.empty((2 * m, 2 * m), dtype=object)
        for idx in np.ndindex(2 * m, 2 * m):
            dB[idx] = _frame_deriv(F.H, B[idx], a)
        Ma = fields.fmatmul(fields.fmatmul(B, Ga) - dB, Binv)
        for b, c in np.ndindex(2 * m, 2 * m):
            gamma[a, b, c] = Ma[c, b]
    return VerticalConnection(gamma, F.H, preserves=preserves)


def _metricize(F: DoubleField, c: np.ndarray) -> np.ndarray:
    """Correct a y-block connection by half the sharped covariant
    differential of sigma, which makes sigma parallel."""
    m = F.m
    sigma = F.sigma
    sinv = fields.finverse(sigma)
    out = fields.fzeros(3 * m, m, m)
    for a in range(3 * m):
        T = fields.fzeros(m, m)
        for i, j in np.ndindex(m, m):
            acc = _frame_deriv(F.H, sigma[i, j], a)
            for k in range(m):
                acc = acc - c[a, i, k] * sigma[k, j]
                acc = acc - c[a, j, k] * sigma[i, k]
            T[i, j] = acc
        for i, j in np.ndindex(m, m):
            corr = fields.ZERO
            for b in range(m):
                corr = corr + sinv[j, b] * T[b, i]
            out[a, i, j] = c[a, i, j] + 0.5 * corr
    return out


def sigma_preservation_residual(F: DoubleField, c: np.ndarray, p: ChartPoint) -> float:
    """Max covariant-differential entry of sigma for a y-block
    connection c[a, i, j]."""
    m = F.m
    res = []
    for a in range(3 * m):
        for i, j in np.ndindex(m, m):
            acc = _frame_deriv(F.H, F.sigma[i, j], a)
            for k in range(m):
                acc = acc - c[a, i, k] * F.sigma[k, j]
                acc = acc - c[a, j, k] * F.sigma[i, k]
            res.append(acc)
    vals = fields.fvalue(np.array(res, dtype=object), p)
    return float(np.max(np.abs(vals)))


def metric_preservation_residual(
    nabla: VerticalConnection, G: np.ndarray, p: ChartPoint
) -> float:
    """Max covariant-differential entry of a fiber metric G (object or
    numeric 2m x 2m matrix) under a fiber connection."""
    m = nabla.m
    G = np.asarray(G, dtype=object)
    res = []
    for a in range(3 * m):
        for b, c in np.ndindex(2 * m, 2 * m):
            acc = _frame_deriv(nabla.H, fields.as_field(G[b, c]), a)
            for e in range(2 * m):
                acc = acc - nabla.gamma[a, b, e] * fields.as_field(G[e, c])
                acc = acc - nabla.gamma[a, c, e] * fields.as_field(G[b, e])
            res.append(acc)
    vals = fields.fvalue(np.array(res, dtype=object), p)
    return float(np.max(np.abs(vals)))


@dataclass
class DoublePack:
    """Shared data of the connection ladder of a double field."""

    F: DoubleField
    vm: VerticalMetric
    G: np.ndarray
    Ginv: np.ndarray
    B: np.ndarray
    Binv: np.ndarray
    c0: np.ndarray
    D0: VerticalConnection


def d0_connection(F: DoubleField) -> DoublePack:
    """Base fiber connection of a double field.

    Lifts sigma to a block-diagonal chart metric over the adapted
    coframe, projects its Levi-Civita connection onto the splitting,
    restricts to the y-block and corrects it to preserve sigma; the
    result acts on both eigenbundles through the frame map.
    """
    m = F.m
    H = F.H
    sinv = fields.finverse(F.sigma)
    comps = fields.fzeros(3 * m, 3 * m)
    for i, j in np.ndindex(m, m):
        comps[i, j] = F.sigma[i, j]
        comps[m + i, m + j] = F.sigma[i, j]
        comps[2 * m + i, 2 * m + j] = sinv[i, j]
    gsig = horizon.to_natural(
        TensorField(("down", "down"), comps, m, frame="adapted"), H
    )
    Dsig = conns.levi_civita(gsig)
    vb = conns.vranceanu_bott(Dsig, H)
    cprime = fields.fzeros(3 * m, m, m)
    for a in range(3 * m):
        for i, j in np.ndindex(m, m):
            cprime[a, i, j] = vb.gamma[a, m + i, m + j]
    c0 = _metricize(F, cprime)
    vm = F.vertical_metric()
    G = vm.matrix()
    Ginv = fields.finverse(G)
    B, Binv = _iota_frame(F.sigma, F.psi, m)
    D0 = pair_connection(F, c0, c0, preserves=("U+", "U-"))
    return DoublePack(F, vm, G, Ginv, B, Binv, c0, D0)


def dpm_connections(pack: DoublePack):
    """The psi-torsion pair: along y-directions each connection of the
    pair picks up half the sharped contraction of the leafwise exterior
    derivative of psi, with opposite signs; both preserve sigma."""
    F = pack.F
    m = F.m
    sinv = fields.finverse(F.sigma)
    dpsi = fields.fzeros(m, m, m)
    for i, j, k in np.ndindex(m, m, m):
        dpsi[i, j, k] = (
            F.psi[j, k].partial(m + i)
            - F.psi[i, k].partial(m + j)
            + F.psi[i, j].partial(m + k)
        )
    out = []
    for sign in (1.0, -1.0):
        c = pack.c0.copy()
        for i in range(m):
            for j, k in np.ndindex(m, m):
                corr = fields.ZERO
                for b in range(m):
                    corr = corr + sinv[k, b] * dpsi[i, j, b]
                c[m + i, j, k] = c[m + i, j, k] + (0.5 * sign) * corr
        out.append(_metricize(F, c))
    return out[0], out[1]


# -- metric bracket and skew torsion --------------------------------------
def wedge_product(
    nabla: VerticalConnection, pack: DoublePack, Y1: np.ndarray, Y2: np.ndarray
) -> np.ndarray:
    """Fiber vector W with G(Y, W) = (1/2)[G(Y1, nabla_Y Y2)
    - G(Y2, nabla_Y Y1)] for every fiber direction Y."""
    m = nabla.m
    beta = fields.fzeros(2 * m)
    for b in range(2 * m):
        d2 = section_derivative(nabla, m + b, Y2)
        d1 = section_derivative(nabla, m + b, Y1)
        acc = fields.ZERO
        for p_, q in np.ndindex(2 * m, 2 * m):
            acc = acc + Y1[p_] * pack.G[p_, q] * d2[q]
            acc = acc - Y2[p_] * pack.G[p_, q] * d1[q]
        beta[b] = acc
    out = fields.fzeros(2 * m)
    for c in range(2 * m):
        acc = fields.ZERO
        for b in range(2 * m):
            acc = acc + pack.Ginv[c, b] * beta[b]
        out[c] = 0.5 * acc
    return out


def metric_bracket(pack: DoublePack, Y1: np.ndarray, Y2: np.ndarray) -> np.ndarray:
    """Antisymmetrized base-connection derivative minus the wedge term."""
    a = vertical_derivative(pack.D0, Y1, Y2)
    b = vertical_derivative(pack.D0, Y2, Y1)
    w = wedge_product(pack.D0, pack, Y1, Y2)
    return a - b - w


def vertical_gradient(pack: DoublePack, f: ScalarField) -> np.ndarray:
    """Sharped fiber differential of a scalar."""
    m = pack.F.m
    out = fields.fzeros(2 * m)
    for c in range(2 * m):
        acc = fields.ZERO
        for b in range(2 * m):
            acc = acc + pack.Ginv[c, b] * f.partial(m + b)
        out[c] = acc
    return out


def gualtieri_torsion(nabla: VerticalConnection, pack: DoublePack) -> np.ndarray:
    """Totally covariant skew torsion via the cyclic sum of the
    difference tensor against the base connection."""
    m = nabla.m
    xi = fields.fzeros(2 * m, 2 * m, 2 * m)
    for a, b, c in np.ndindex(2 * m, 2 * m, 2 * m):
        acc = fields.ZERO
        for e in range(2 * m):
            theta = nabla.gamma[m + a, b, e] - pack.D0.gamma[m + a, b, e]
            acc = acc + theta * pack.G[e, c]
        xi[a, b, c] = acc
    tau = fields.fzeros(2 * m, 2 * m, 2 * m)
    for a, b, c in np.ndindex(2 * m, 2 * m, 2 * m):
        tau[a, b, c] = xi[a, b, c] + xi[b, c, a] + xi[c, a, b]
    return tau


def gualtieri_via_deformed_torsion(
    nabla: VerticalConnection, pack: DoublePack
) -> np.ndarray:
    """Oracle route: pair the deformed torsion (the antisymmetrized
    derivative minus the wedge-deformed bracket) with the metric."""
    m = nabla.m
    tau = fields.fzeros(2 * m, 2 * m, 2 * m)
    basis = [fields.fzeros(2 * m) for _ in range(2 * m)]
    for a in range(2 * m):
        basis[a][a] = fields.ONE
    for a in range(2 * m):
        for b in range(2 * m):
            da = nabla.gamma[m + a, b, :].copy()
            db = nabla.gamma[m + b, a, :].copy()
            br = metric_bracket(pack, basis[a], basis[b])
            wd = wedge_product(nabla, pack, basis[a], basis[b])
            T = da - db - br - wd
            for c in range(2 * m):
                acc = fields.ZERO
                for e in range(2 * m):
                    acc = acc + T[e] * pack.G[e, c]
                tau[a, b, c] = acc
    return tau


# -- the field-adapted connection -----------------------------------------
def field_adapted_connection(F: DoubleField):
    """Connection ladder ending in a pairing- and metric-preserving
    fiber connection with vanishing skew torsion.

    Returns (Dbar, Dtilde, pack): the final connection, the
    bracket-corrected intermediate one (whose skew torsion supplies the
    final correction), and the shared pack.

    Along fiber directions each side of the pair differentiates with
    its own connection only along the matching eigenbundle part of the
    direction; along the opposite part the projected metric bracket
    takes over.  (Taking the bracket term as an addition to the full
    directional derivative would break the preservation of sigma.)
    """
    m = F.m
    pack = d0_connection(F)
    cplus, cminus = dpm_connections(pack)
    ctp = cplus.copy()
    ctm = cminus.copy()
    for v in range(2 * m):
        # the two eigenbundle projections of the v-th fiber direction
        prUp = fields.fzeros(2 * m)
        prUm = fields.fzeros(2 * m)
        for r in range(2 * m):
            for q in range(m):
                prUp[r] = prUp[r] + pack.B[r, q] * pack.Binv[q, v]
                prUm[r] = prUm[r] + pack.B[r, m + q] * pack.Binv[m + q, v]
        for i in range(m):
            brp = metric_bracket(pack, prUm, pack.B[:, i])
            brm = metric_bracket(pack, prUp, pack.B[:, m + i])
            for j in range(m):
                tp = fields.ZERO
                tm = fields.ZERO
                for r in range(2 * m):
                    tp = tp + prUp[r] * cplus[m + r, i, j]
                    tm = tm + prUm[r] * cminus[m + r, i, j]
                    tp = tp + pack.Binv[j, r] * brp[r]
                    tm = tm + pack.Binv[m + j, r] * brm[r]
                ctp[m + v, i, j] = tp
                ctm[m + v, i, j] = tm
    Dtilde = pair_connection(F, ctp, ctm, preserves=("U+", "U-"))
    tau = gualtieri_torsion(Dtilde, pack)
    gamma = pack.D0.gamma.copy()
    for a in range(3 * m):
        for b, c in np.ndindex(2 * m, 2 * m):
            gamma[a, b, c] = Dtilde.gamma[a, b, c]
    for a, b, c in np.ndindex(2 * m, 2 * m, 2 * m):
        phi = fields.ZERO
        for e in range(2 * m):
            phi = phi + pack.Ginv[c, e] * tau[a, b, e]
        gamma[m + a, b, c] = gamma[m + a, b, c] - (1.0 / 3.0) * phi
    Dbar = VerticalConnection(gamma, F.H, preserves=("U+", "U-"))
    return Dbar, Dtilde, pack


# -- deformed curvatures and the action -----------------------------------
def deformed_curvature_apply(
    nabla: VerticalConnection,
    pack: DoublePack,
    Za: np.ndarray,
    Zb: np.ndarray,
    Yc: np.ndarray,
) -> np.ndarray:
    """The antisymmetrized second derivative minus the derivative along
    the wedge-deformed bracket of the direction pair."""
    m = nabla.m
    first = vertical_derivative(nabla, Za, vertical_derivative(nabla, Zb, Yc))
    second = vertical_derivative(nabla, Zb, vertical_derivative(nabla, Za, Yc))
    W = metric_bracket(pack, Za, Zb) + wedge_product(nabla, pack, Za, Zb)
    third = vertical_derivative(nabla, W, Yc)
    return first - second - third


def deformed_curvatures(nabla: VerticalConnection, pack: DoublePack):
    """Deformed curvature R[a, b, c, d] (direction pair a, b; argument
    c; output d), the symmetrized Ricci trace over the fiber coordinate
    frame, and the scalar contraction against the inverse metric.
    Returns (R, Ric, rho) with object-array components."""
    m = nabla.m
    basis = [fields.fzeros(2 * m) for _ in range(2 * m)]
    for a in range(2 * m):
        basis[a][a] = fields.ONE
    R = fields.fzeros(2 * m, 2 * m, 2 * m, 2 * m)
    for a in range(2 * m):
        for b in range(a + 1, 2 * m):
            for c in range(2 * m):
                val = deformed_curvature_apply(nabla, pack, basis[a], basis[b], basis[c])
                for d in range(2 * m):
                    R[a, b, c, d] = val[d]
                    R[b, a, c, d] = -1.0 * val[d]
    Ric = fields.fzeros(2 * m, 2 * m)
    for b, c in np.ndindex(2 * m, 2 * m):
        acc = fields.ZERO
        for a in range(2 * m):
            acc = acc + R[a, b, c, a] + R[a, c, b, a]
        Ric[b, c] = 0.5 * acc
    rho = fields.ZERO
    for q, s in np.ndindex(2 * m, 2 * m):
        rho = rho + pack.Ginv[q, s] * Ric[q, s]
    return R, Ric, rho


def scalar_curvature_in_basis(
    nabla: VerticalConnection, pack: DoublePack, P: np.ndarray
) -> ScalarField:
    """Scalar curvature recomputed in the fiber basis whose columns are
    the (possibly point-dependent) combinations P of the coordinate
    frame; equality with the coordinate-frame value tests that the
    deformed curvature is tensorial."""
    m = nabla.m
    P = np.asarray(P, dtype=object)
    for idx in np.ndindex(P.shape):
        P[idx] = fields.as_field(P[idx])
    basis = [fields.fzeros(2 * m) for _ in range(2 * m)]
    for a in range(2 * m):
        basis[a][a] = fields.ONE
    Ric = fields.fzeros(2 * m, 2 * m)
    for q in range(2 * m):
        for s in range(q, 2 * m):
            acc = fields.ZERO
            for a in range(2 * m):
                v1 = deformed_curvature_apply(nabla, pack, basis[a], P[:, q], P[:, s])
                v2 = deformed_curvature_apply(nabla, pack, basis[a], P[:, s], P[:, q])
                acc = acc + v1[a] + v2[a]
            Ric[q, s] = 0.5 * acc
            Ric[s, q] = Ric[q, s]
    Gt = fields.fmatmul(fields.fmatmul(fields.ftranspose(P), pack.G), P)
    Gtinv = fields.finverse(Gt)
    rho = fields.ZERO
    for q, s in np.ndindex(2 * m, 2 * m):
        rho = rho + Gtinv[q, s] * Ric[q, s]
    return rho


@dataclass
class ActionResult:
    value: float
    error: float
    method: str
    samples: int
    box: tuple
    seed: int | None = None


def _integrand_values(F: DoubleField, rho: ScalarField, pts: np.ndarray) -> np.ndarray:
    """exp(-2 density) * rho * |det sigma|^{1/2} at chart points given
    as an (3m, npoints) array."""
    m = F.m
    p = ChartPoint(pts[:m], pts[m : 2 * m], pts[2 * m :])
    rv = np.asarray(rho.value(p), dtype=float)
    dv = np.asarray(F.density.value(p), dtype=float)
    detv = np.asarray(fields.fdet(F.sigma).value(p), dtype=float)
    vals = np.exp(-2.0 * dv) * rv * np.sqrt(np.abs(detv))
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite integrand sample")
    return vals


def action(
    F: DoubleField,
    box=None,
    method: str = "mc",
    samples: int = 10000,
    seed: int = 0,
    order: int = 4,
    chunk: int = 1024,
) -> ActionResult:
    """Truncated action integral of a double field.

    Integrates exp(-2 density) * rho * |det sigma|^{1/2} over a chart
    box (default [-1, 1]^{3m}); the adapted coframe volume has unit
    Jacobian against the chart coordinates, so plain chart quadrature
    applies.  method "mc" gives a seeded Monte Carlo estimate with its
    standard error; "gauss" a tensor Gauss-Legendre value with the
    difference from the next-lower order as the error estimate.
    """
    m = F.m
    n = 3 * m
    if box is None:
        box = tuple((-1.0, 1.0) for _ in range(n))
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != n:
        raise ValueError(f"box must have {n} coordinate intervals")
    Dbar, _, pack = field_adapted_connection(F)
    _, _, rho = deformed_curvatures(Dbar, pack)
    volume = float(np.prod([hi - lo for lo, hi in box]))

    if method == "mc":
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in box])[:, None]
        hi = np.array([b[1] for b in box])[:, None]
        vals = np.empty(samples)
        done = 0
        while done < samples:
            take = min(chunk, samples - done)
            pts = rng.uniform(0.0, 1.0, size=(n, take)) * (hi - lo) + lo
            vals[done : done + take] = _integrand_values(F, rho, pts)
            done += take
        est = volume * float(np.mean(vals))
        se = volume * float(np.std(vals, ddof=1)) / np.sqrt(samples)
        return ActionResult(est, se, "mc", samples, box, seed=seed)

    if method == "gauss":
        results = []
        for deg in (max(order - 1, 1), order):
            nodes, weights = [], []
            for lo, hi in box:
                xg, wg = np.polynomial.legendre.leggauss(deg)
                nodes.append(0.5 * (hi - lo) * xg + 0.5 * (hi + lo))
                weights.append(0.5 * (hi - lo) * wg)
            grids = np.meshgrid(*nodes, indexing="ij")
            pts = np.stack([g.reshape(-1) for g in grids])
            wgrid = np.meshgrid(*weights, indexing="ij")
            w = np.prod(np.stack([g.reshape(-1) for g in wgrid]), axis=0)
            total = 0.0
            for start in range(0, pts.shape[1], chunk):
                sl = slice(start, start + chunk)
                total += float(
                    np.sum(w[sl] * _integrand_values(F, rho, pts[:, sl]))
                )
            results.append(total)
        return ActionResult(
            results[1], abs(results[1] - results[0]), "gauss", order, box
        )

    raise ValueError(f"unknown quadrature method {method!r}")


# -- aggregate verification ------------------------------------------------
def verify_double_field(
    F: DoubleField, seed: int = 0, n: int = 10, tol: float = 1e-8
) -> Report:
    """Identity suite for one double field: the compatibility and
    eigenbundle reports, sigma preservation along the ladder, metric
    and pairing preservation of the base and final connections, the
    Leibniz rule of the metric bracket, the vanishing and total
    antisymmetry of the final skew torsion with a dual-route oracle,
    Ricci symmetry, and basis invariance of the scalar curvature."""
    m = F.m
    p = sample_box(m, n, seed=seed)
    rep = Report("double field identities", tol=tol)

    vm = F.vertical_metric()
    _, crep = compatibility_check(vm, seed=seed, n=n)
    rep.extend(crep)
    _, _, erep = eigenbundles(vm, seed=seed, n=n)
    rep.extend(erep)

    S2, P2 = sigma_psi_from_vm(vm)
    rt = []
    for i, j in np.ndindex(m, m):
        rt.append(S2[i, j] - F.sigma[i, j])
        rt.append(P2[i, j] - F.psi[i, j])
    rep.add(
        "component pair round trip",
        float(np.max(np.abs(fields.fvalue(np.array(rt, dtype=object), p)))),
        tol=1e-10,
    )

    Dbar, Dtilde, pack = field_adapted_connection(F)
    rep.add(
        "base connection preserves sigma",
        sigma_preservation_residual(F, pack.c0, p),
    )
    cplus, cminus = dpm_connections(pack)
    rep.add(
        "torsion pair preserves sigma",
        max(
            sigma_preservation_residual(F, cplus, p),
            sigma_preservation_residual(F, cminus, p),
        ),
    )
    g2 = pairing_matrix(m)
    rep.add(
        "base connection preserves the fiber metric",
        metric_preservation_residual(pack.D0, pack.G, p),
    )
    rep.add(
        "base connection preserves the split pairing",
        metric_preservation_residual(pack.D0, g2, p),
    )
    rep.add(
        "final connection preserves the fiber metric",
        metric_preservation_residual(Dbar, pack.G, p),
    )
    rep.add(
        "final connection preserves the split pairing",
        metric_preservation_residual(Dbar, g2, p),
    )

    # Leibniz rule of the metric bracket on seeded data
    rng = np.random.default_rng(seed + 1)
    Y1 = np.array([fields.as_field(v) for v in rng.normal(size=2 * m)], dtype=object)
    Y2 = np.array([fields.as_field(v) for v in rng.normal(size=2 * m)], dtype=object)
    f = fields.field("exp(y1) + x1*z1", m)
    lhs = metric_bracket(pack, Y1, Y2 * f)
    Yf = fields.ZERO
    for v in range(2 * m):
        Yf = Yf + Y1[v] * f.partial(m + v)
    gYY = fields.ZERO
    for a, b in np.ndindex(2 * m, 2 * m):
        gYY = gYY + Y1[a] * pack.G[a, b] * Y2[b]
    rhs = (
        metric_bracket(pack, Y1, Y2) * f
        + Y2 * Yf
        - vertical_gradient(pack, f) * (0.5 * gYY)
    )
    rep.add(
        "metric bracket satisfies the deformed Leibniz rule",
        float(np.max(np.abs(fields.fvalue(lhs - rhs, p)))),
        tol=1e-9,
    )

    tau_bar = gualtieri_torsion(Dbar, pack)
    rep.add(
        "final connection has vanishing skew torsion",
        float(np.max(np.abs(fields.fvalue(tau_bar, p)))),
    )
    tau_tilde = gualtieri_torsion(Dtilde, pack)
    tv = fields.fvalue(tau_tilde, p)
    rep.add(
        "skew torsion is totally antisymmetric",
        float(
            max(
                np.max(np.abs(tv + np.swapaxes(tv, 0, 1))),
                np.max(np.abs(tv + np.swapaxes(tv, 1, 2))),
            )
        ),
    )
    tv2 = fields.fvalue(gualtieri_via_deformed_torsion(Dtilde, pack), p)
    rep.add(
        "deformed-torsion route agrees with the cyclic-sum route",
        float(np.max(np.abs(tv - tv2))),
        tol=1e-9,
    )

    _, Ric, rho = deformed_curvatures(Dbar, pack)
    ricv = fields.fvalue(Ric, p)
    rep.add(
        "deformed Ricci tensor is symmetric",
        float(np.max(np.abs(ricv - np.swapaxes(ricv, 0, 1)))),
    )
    P = fields.fzeros(2 * m, 2 * m)
    mix = rng.normal(size=(2 * m, 2 * m)) + 2.0 * np.eye(2 * m)
    y1 = fields.field("y1", m)
    for a, b in np.ndindex(2 * m, 2 * m):
        P[a, b] = fields.as_field(mix[a, b]) + (0.1 * ((a + b) % 3)) * y1
    rho2 = scalar_curvature_in_basis(Dbar, pack, P)
    rep.add(
        "scalar curvature is basis independent",
        float(np.max(np.abs(fields.fvalue(np.array([rho - rho2], dtype=object), p)))),
        tol=1e-9,
    )
    rep.meta["scalar_curvature_max"] = float(
        np.max(np.abs(np.asarray(rho.value(p), dtype=float)))
    )
    return rep
