import math

import numpy as np
import pytest

from bigtangent.jets import Jet, JetDomainError, jet_space
from bigtangent.multiindex import multi_indices


def test_multi_index_count():
    # C(n + order, order) terms in n variables
    assert len(multi_indices(3, 2)) == 10
    assert len(multi_indices(6, 4)) == math.comb(10, 4)
    assert multi_indices(2, 2)[0] == (0, 0)


def test_variable_jet_structure():
    sp = jet_space(2, 3)
    j = Jet.variable(sp, 0, np.array([2.5]))
    assert j.value[0] == 2.5
    assert j.deriv((1, 0))[0] == 1.0
    assert j.deriv((0, 1))[0] == 0.0
    assert j.deriv((2, 0))[0] == 0.0


def test_product_leibniz():
    # (x*y) at (3, 5): d/dx = y, d/dy = x, d2/dxdy = 1
    sp = jet_space(2, 2)
    x = Jet.variable(sp, 0, np.array([3.0]))
    y = Jet.variable(sp, 1, np.array([5.0]))
    p = x * y
    assert p.value[0] == 15.0
    assert p.deriv((1, 0))[0] == 5.0
    assert p.deriv((0, 1))[0] == 3.0
    assert p.deriv((1, 1))[0] == 1.0
    assert p.deriv((2, 0))[0] == 0.0


def test_polynomial_third_derivative_exact():
    sp = jet_space(1, 3)
    x = Jet.variable(sp, 0, np.array([1.7]))
    f = x ** 3 - 2 * x + 4.0
    assert f.deriv((3,))[0] == pytest.approx(6.0, abs=1e-14)
    assert f.deriv((1,))[0] == pytest.approx(3 * 1.7 ** 2 - 2, abs=1e-13)


def test_reciprocal_and_division():
    sp = jet_space(1, 4)
    x = Jet.variable(sp, 0, np.array([2.0]))
    r = 1.0 / x
    # d^k (1/x) = (-1)^k k! / x^(k+1)
    for k in range(5):
        expect = (-1) ** k * math.factorial(k) / 2.0 ** (k + 1)
        assert r.deriv((k,))[0] == pytest.approx(expect, rel=1e-14)
    q = (x * x + 1) / x
    assert q.value[0] == pytest.approx(2.5)


def test_analytic_functions_against_closed_forms():
    sp = jet_space(1, 4)
    v = 0.7
    x = Jet.variable(sp, 0, np.array([v]))
    s, c, e, lg, sq = x.sin(), x.cos(), x.exp(), x.log(), x.sqrt()
    assert s.deriv((2,))[0] == pytest.approx(-math.sin(v), rel=1e-13)
    assert c.deriv((3,))[0] == pytest.approx(math.sin(v), rel=1e-13)
    assert e.deriv((4,))[0] == pytest.approx(math.exp(v), rel=1e-13)
    assert lg.deriv((2,))[0] == pytest.approx(-1.0 / v ** 2, rel=1e-13)
    assert sq.deriv((1,))[0] == pytest.approx(0.5 / math.sqrt(v), rel=1e-13)
    assert sq.deriv((2,))[0] == pytest.approx(-0.25 * v ** -1.5, rel=1e-13)


def test_chain_rule_composition():
    # f = exp(sin(x^2)) has a known first derivative
    sp = jet_space(1, 2)
    v = 0.9
    x = Jet.variable(sp, 0, np.array([v]))
    f = (x ** 2).sin().exp()
    expect = math.exp(math.sin(v * v)) * math.cos(v * v) * 2 * v
    assert f.deriv((1,))[0] == pytest.approx(expect, rel=1e-12)


def test_partial_lowers_order():
    sp = jet_space(2, 3)
    x = Jet.variable(sp, 0, np.array([1.1]))
    y = Jet.variable(sp, 1, np.array([-0.4]))
    f = x ** 2 * y + y ** 3
    fx = f.partial(0)
    assert fx.space.order == 2
    assert fx.value[0] == pytest.approx(2 * 1.1 * -0.4)
    assert fx.deriv((1, 1))[0] == pytest.approx(2.0)
    fyy = f.partial(1).partial(1)
    assert fyy.value[0] == pytest.approx(6 * -0.4)


def test_batched_points_match_loop():
    rng = np.random.default_rng(7)
    vals = rng.uniform(0.2, 1.5, size=11)
    sp = jet_space(1, 3)
    x = Jet.variable(sp, 0, vals)
    f = (x.log() + x ** 2).sin()
    for k, v in enumerate(vals):
        xk = Jet.variable(sp, 0, np.array([v]))
        fk = (xk.log() + xk ** 2).sin()
        np.testing.assert_allclose(f.c[:, k], fk.c[:, 0], rtol=1e-13, atol=1e-15)


def test_domain_errors():
    sp = jet_space(1, 2)
    zero = Jet.variable(sp, 0, np.array([0.0]))
    neg = Jet.variable(sp, 0, np.array([-1.0]))
    with pytest.raises(JetDomainError):
        zero.reciprocal()
    with pytest.raises(JetDomainError):
        neg.log()
    with pytest.raises(JetDomainError):
        neg.sqrt()
    with pytest.raises(JetDomainError):
        zero.sqrt()  # derivative of sqrt blows up at 0
    # order-0 sqrt at exactly zero is fine
    sp0 = jet_space(1, 0)
    assert Jet.variable(sp0, 0, np.array([0.0])).sqrt().value[0] == 0.0


def test_truncate():
    sp = jet_space(2, 3)
    x = Jet.variable(sp, 0, np.array([0.3]))
    f = x.exp()
    g = f.truncated(1)
    assert g.space.order == 1
    assert g.deriv((1, 0))[0] == pytest.approx(math.exp(0.3))
    with pytest.raises(ValueError):
        g.truncated(3)
