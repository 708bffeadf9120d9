import numpy as np
import pytest

from bigtangent import dfield, fields, horizon, metrics
from bigtangent.points import sample_box


def _curved_field(m=2, psi=False, H=None):
    sigma = [["1 + (1/2)*y1^2", "0"], ["0", "1"]]
    psi_tab = [["0", "x1*y2"], ["0 - x1*y2", "0"]] if psi else None
    return dfield.DoubleField(H or horizon.flat_bundle(m), sigma, psi_tab)


def test_vm_from_sigma_psi_identity():
    vm = dfield.vm_from_sigma_psi([["1"]], [["0"]], 1)
    p = sample_box(1, 5, seed=0)
    assert np.max(np.abs(fields.fvalue(vm.h, p) - 1.0)) < 1e-12
    assert np.max(np.abs(fields.fvalue(vm.k, p) - 1.0)) < 1e-12
    assert np.max(np.abs(fields.fvalue(vm.l, p))) < 1e-12


def test_vm_from_sigma_psi_matrix_oracle():
    m = 2
    vm = dfield.vm_from_sigma_psi(
        [["1", "0"], ["0", "2"]], [["0", "x1"], ["0 - x1", "0"]], m
    )
    p = sample_box(m, 10, seed=1)
    hv = np.moveaxis(fields.fvalue(vm.h, p), -1, 0)
    kv = np.moveaxis(fields.fvalue(vm.k, p), -1, 0)
    lv = np.moveaxis(fields.fvalue(vm.l, p), -1, 0)
    for idx in range(p.npoints):
        S = np.diag([1.0, 2.0])
        P = np.array([[0.0, p.x[0, idx]], [-p.x[0, idx], 0.0]])
        Sinv = np.linalg.inv(S)
        assert np.max(np.abs(kv[idx] - Sinv)) < 1e-10
        assert np.max(np.abs(lv[idx] + Sinv @ P)) < 1e-10
        assert np.max(np.abs(hv[idx] - (S - P @ Sinv @ P))) < 1e-10


def test_sigma_psi_round_trip():
    m = 2
    F = _curved_field(m, psi=True)
    S, P = dfield.sigma_psi_from_vm(F.vertical_metric())
    p = sample_box(m, 10, seed=2)
    ds = fields.fvalue(S - F.sigma, p)
    dp = fields.fvalue(P - F.psi, p)
    assert np.max(np.abs(ds)) < 1e-12
    assert np.max(np.abs(dp)) < 1e-12


def test_compatibility_flat_swap():
    vm = dfield.vm_from_sigma_psi([["1"]], [["0"]], 1)
    phi, rep = dfield.compatibility_check(vm, n=5)
    assert rep.passed, rep.to_json()
    p = sample_box(1, 5, seed=3)
    pv = np.moveaxis(fields.fvalue(phi, p), -1, 0)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.max(np.abs(pv - swap)) < 1e-12


def test_compatibility_of_constructed_metrics():
    vm = _curved_field(2, psi=True).vertical_metric()
    _, rep = dfield.compatibility_check(vm)
    assert rep.passed, rep.to_json()
    assert rep.max_residual < 1e-9


def test_compatibility_flags_incompatible_metric():
    one = fields.ONE
    bad = dfield.VerticalMetric([[one]], [[one]], [[one]], 1)
    assert not bad.nondegenerate
    _, rep = dfield.compatibility_check(bad, n=5)
    assert not rep.passed
    # l^2 + k h = 2 for this metric, one away from the identity
    assert abs(rep["block condition: l^2 + k h = id"]["max_residual"] - 1.0) < 1e-12


def test_eigenbundles_flat_hand_value():
    vm = dfield.vm_from_sigma_psi([["1"]], [["0"]], 1)
    Ip, Im, rep = dfield.eigenbundles(vm, n=5)
    assert rep.passed, rep.to_json()
    p = sample_box(1, 5, seed=4)
    assert np.max(np.abs(fields.fvalue(Ip, p)[:, 0] - np.array([[1.0], [1.0]]))) < 1e-12
    assert np.max(np.abs(fields.fvalue(Im, p)[:, 0] - np.array([[1.0], [-1.0]]))) < 1e-12


def test_eigenbundles_curved():
    vm = _curved_field(2, psi=True).vertical_metric()
    _, _, rep = dfield.eigenbundles(vm)
    assert rep.passed, rep.to_json()
    assert rep.max_residual < 1e-9


def test_hessian_vm_hand_values():
    vm = dfield.hessian_vm("y1*z1", 1)
    assert not vm.strongly_nondegenerate
    assert vm.nondegenerate
    p = sample_box(1, 5, seed=5)
    assert np.max(np.abs(fields.fvalue(vm.h, p))) < 1e-12
    assert np.max(np.abs(fields.fvalue(vm.k, p))) < 1e-12
    assert np.max(np.abs(fields.fvalue(vm.l, p) - 1.0)) < 1e-12

    vm2 = dfield.hessian_vm("(1/2)*(y1^2 + z1^2) + y1*z1", 1)
    assert vm2.strongly_nondegenerate
    assert not vm2.nondegenerate
    for blk in (vm2.h, vm2.k, vm2.l):
        assert np.max(np.abs(fields.fvalue(blk, p) - 1.0)) < 1e-12


def test_legendre_involution_swaps_and_squares_to_identity():
    vm = dfield.vm_from_sigma_psi([["1"]], [["0"]], 1)
    p = sample_box(1, 10, seed=6)
    q = dfield.legendre_involution(vm, p)
    assert np.allclose(q.y, p.z) and np.allclose(q.z, p.y)
    qq = dfield.legendre_involution(vm, q)
    assert np.allclose(qq.y, p.y) and np.allclose(qq.z, p.z)


def test_legendre_involution_needs_invertible_k():
    vm = dfield.hessian_vm("y1*z1", 1)
    lame = dfield.VerticalMetric(vm.l, vm.h, vm.l, 1)  # k block is zero
    with pytest.raises(ValueError):
        dfield.legendre_involution(lame, sample_box(1, 3, seed=7))


def test_double_field_validation():
    H = horizon.flat_bundle(2)
    with pytest.raises(ValueError):
        dfield.DoubleField(H, [["1", "1"], ["0", "1"]])  # not symmetric
    with pytest.raises(ValueError):
        dfield.DoubleField(H, [["1", "1"], ["1", "1"]])  # singular
    with pytest.raises(ValueError):
        dfield.DoubleField(
            H, [["1", "0"], ["0", "1"]], [["0", "x1"], ["x1", "0"]]
        )  # psi not antisymmetric


def test_d0_connection_flat_is_flat():
    F = dfield.DoubleField(horizon.flat_bundle(2), [["1", "0"], ["0", "1"]])
    pack = dfield.d0_connection(F)
    p = sample_box(2, 5, seed=8)
    assert np.max(np.abs(fields.fvalue(pack.c0, p))) < 1e-12
    assert np.max(np.abs(fields.fvalue(pack.D0.gamma, p))) < 1e-12


def test_d0_connection_preserves_sigma():
    m = 2
    F = dfield.DoubleField(horizon.flat_bundle(m), [["exp(2*x1)", "0"], ["0", "1"]])
    pack = dfield.d0_connection(F)
    p = sample_box(m, 15, seed=9)
    assert dfield.sigma_preservation_residual(F, pack.c0, p) < 1e-9
    # y-independent sigma: nothing to differentiate along the leaves
    pv = fields.fvalue(pack.c0[m : 2 * m], p)
    assert np.max(np.abs(pv)) < 1e-12


def test_d0_connection_leafwise_levi_civita():
    m = 2
    F = _curved_field(m)
    pack = dfield.d0_connection(F)
    sinv = fields.finverse(F.sigma)
    res = []
    for i, j, k in np.ndindex(m, m, m):
        s = fields.ZERO
        for d in range(m):
            s = s + sinv[k, d] * (
                F.sigma[d, j].partial(m + i)
                + F.sigma[i, d].partial(m + j)
                - F.sigma[i, j].partial(m + d)
            )
        res.append(0.5 * s - pack.c0[m + i, i * 0 + j, k])
    p = sample_box(m, 10, seed=10)
    assert np.max(np.abs(fields.fvalue(np.array(res, dtype=object), p))) < 1e-9


def test_dpm_connections_need_leafwise_psi_variation():
    m = 2
    # psi constant along the leaves: the torsion pair collapses
    F = dfield.DoubleField(
        horizon.flat_bundle(m),
        [["1", "0"], ["0", "1"]],
        [["0", "x1"], ["0 - x1", "0"]],
    )
    pack = dfield.d0_connection(F)
    cp, cm = dfield.dpm_connections(pack)
    p = sample_box(m, 5, seed=11)
    assert np.max(np.abs(fields.fvalue(cp - pack.c0, p))) < 1e-12
    assert np.max(np.abs(fields.fvalue(cm - pack.c0, p))) < 1e-12


def test_dpm_connections_differ_on_leaf_directions_only():
    # the leafwise differential of psi is a 3-form along the fibers of
    # the tangent side, so the smallest dimension where the torsion
    # pair can split is m = 3
    m = 3
    F = dfield.DoubleField(
        horizon.flat_bundle(m),
        [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
        [["0", "y3", "0"], ["0 - y3", "0", "0"], ["0", "0", "0"]],
    )
    pack = dfield.d0_connection(F)
    cp, cm = dfield.dpm_connections(pack)
    p = sample_box(m, 10, seed=12)
    dv = fields.fvalue(cp - pack.c0, p)
    assert np.max(np.abs(dv[:m])) < 1e-12
    assert np.max(np.abs(dv[2 * m :])) < 1e-12
    assert np.max(np.abs(dv[m : 2 * m])) > 1e-3
    # opposite signs and sigma-skew corrections
    assert np.max(np.abs(fields.fvalue(cp + cm - 2.0 * pack.c0, p))) < 1e-12
    assert dfield.sigma_preservation_residual(F, cp, p) < 1e-9
    assert dfield.sigma_preservation_residual(F, cm, p) < 1e-9


def test_metric_bracket_flat_constant_sections():
    F = dfield.DoubleField(horizon.flat_bundle(1), [["1"]])
    pack = dfield.d0_connection(F)
    Y1 = np.array([fields.as_field(1.0), fields.as_field(0.5)], dtype=object)
    Y2 = np.array([fields.as_field(-2.0), fields.as_field(1.0)], dtype=object)
    p = sample_box(1, 5, seed=13)
    assert np.max(np.abs(fields.fvalue(dfield.metric_bracket(pack, Y1, Y2), p))) < 1e-12


def test_metric_bracket_antisymmetry():
    F = _curved_field(2, psi=True)
    pack = dfield.d0_connection(F)
    rng = np.random.default_rng(14)
    y1 = fields.field("y1", 2)
    Y1 = np.array(
        [fields.as_field(v) + v * y1 for v in rng.normal(size=4)], dtype=object
    )
    Y2 = np.array([fields.as_field(v) for v in rng.normal(size=4)], dtype=object)
    s = dfield.metric_bracket(pack, Y1, Y2) + dfield.metric_bracket(pack, Y2, Y1)
    p = sample_box(2, 10, seed=15)
    assert np.max(np.abs(fields.fvalue(s, p))) < 1e-12


def test_gualtieri_torsion_of_base_connection_vanishes():
    F = _curved_field(2, psi=True)
    pack = dfield.d0_connection(F)
    p = sample_box(2, 5, seed=16)
    tau = dfield.gualtieri_torsion(pack.D0, pack)
    assert np.max(np.abs(fields.fvalue(tau, p))) < 1e-12


def test_field_adapted_connection_flat():
    F = dfield.DoubleField(horizon.flat_bundle(2), [["1", "0"], ["0", "1"]])
    Dbar, _, pack = dfield.field_adapted_connection(F)
    p = sample_box(2, 5, seed=17)
    assert np.max(np.abs(fields.fvalue(Dbar.gamma, p))) < 1e-12


def test_verify_double_field_sigma_curved():
    rep = dfield.verify_double_field(_curved_field(2), n=5)
    assert rep.passed, rep.to_json()
    assert rep.max_residual < 1e-8


def test_verify_double_field_sigma_psi_curved():
    rep = dfield.verify_double_field(_curved_field(2, psi=True), n=5)
    assert rep.passed, rep.to_json()


def test_verify_double_field_curved_bundle():
    H = horizon.from_linear_connection(
        metrics.base_christoffels([["1", "0"], ["0", "exp(2*x1)"]], 2), 2
    )
    rep = dfield.verify_double_field(_curved_field(2, psi=True, H=H), n=5)
    assert rep.passed, rep.to_json()


def test_deformed_curvatures_flat():
    F = dfield.DoubleField(horizon.flat_bundle(1), [["1"]])
    Dbar, _, pack = dfield.field_adapted_connection(F)
    R, Ric, rho = dfield.deformed_curvatures(Dbar, pack)
    p = sample_box(1, 5, seed=18)
    assert np.max(np.abs(fields.fvalue(R, p))) < 1e-12
    assert np.max(np.abs(np.asarray(rho.value(p)))) < 1e-12


def test_deformed_scalar_curvature_is_nontrivial_somewhere():
    m = 2
    F = dfield.DoubleField(
        horizon.flat_bundle(m), [["1 + (1/2)*y2^2", "0"], ["0", "1"]]
    )
    Dbar, _, pack = dfield.field_adapted_connection(F)
    _, _, rho = dfield.deformed_curvatures(Dbar, pack)
    p = sample_box(m, 10, seed=19)
    assert np.max(np.abs(np.asarray(rho.value(p)))) > 0.1


def test_action_flat_gauss_is_zero():
    F = dfield.DoubleField(
        horizon.flat_bundle(2), [["1", "0"], ["0", "1"]], density="x1"
    )
    r = dfield.action(F, method="gauss", order=3)
    assert abs(r.value) < 1e-12


def test_action_constant_sigma_scales_nothing():
    F = dfield.DoubleField(horizon.flat_bundle(1), [["4"]])
    r = dfield.action(F, method="gauss", order=3)
    assert abs(r.value) < 1e-12


def test_action_mc_is_seeded_and_matches_gauss():
    m = 2
    F = dfield.DoubleField(
        horizon.flat_bundle(m), [["1 + (1/2)*y2^2", "0"], ["0", "1"]]
    )
    r1 = dfield.action(F, method="mc", samples=4000, seed=20)
    r1b = dfield.action(F, method="mc", samples=4000, seed=20)
    assert r1.value == r1b.value
    rg = dfield.action(F, method="gauss", order=4)
    assert abs(r1.value - rg.value) < 4.0 * r1.error + abs(rg.error)


def test_field_from_riemannian_matches_sasaki_vertical_part():
    m = 2
    g = [["1", "0"], ["0", "exp(2*x1)"]]
    F = dfield.field_from_riemannian(g, m)
    gm = metrics.sasaki_metric(g, m)
    p = sample_box(m, 10, seed=21)
    Gv = fields.fvalue(F.vertical_metric().matrix(), p)
    assert np.max(np.abs(Gv - gm.vertical_block(p))) < 1e-10
    assert np.max(np.abs(fields.fvalue(F.psi, p))) < 1e-12


def test_field_from_lagrangian_free():
    m = 2
    F = dfield.field_from_lagrangian("(1/2)*(y1^2 + y2^2)", m)
    p = sample_box(m, 10, seed=22)
    sv = np.moveaxis(fields.fvalue(F.sigma, p), -1, 0)
    assert np.max(np.abs(sv - np.eye(m))) < 1e-12
    assert np.max(np.abs(fields.fvalue(F.psi, p))) < 1e-12
    assert np.max(np.abs(fields.fvalue(F.H.t, p))) < 1e-12


def test_field_from_lagrangian_curved_has_valid_psi():
    m = 2
    F = dfield.field_from_lagrangian(
        "(1/2)*(exp(x1)*y1^2 + y2^2) + (1/2)*x2*y1*y2", m
    )
    rep = dfield.verify_double_field(F, n=5)
    assert rep.passed, rep.to_json()
