import math

import numpy as np
import pytest

from quatsurf import quat as Q
from quatsurf.calculus import (
    DomainError,
    GridDomain,
    PathError,
    QOneForm,
    differential,
    discretize,
    ext_d,
    ext_d_lower_order,
    flagged_nodes,
    integrate_2form,
    integrate_path,
    integrate_scalar,
    l2_inner,
    l2_norm2,
    one_form_from_coefficient,
    partial,
    pullback_J,
    staircase_integral,
    wedge,
)


@pytest.fixture(scope="module")
def dom():
    return GridDomain(1.0, 65)


def test_domain_geometry(dom):
    assert dom.h == pytest.approx(2 / 64)
    i, j = dom.center
    assert dom.Z[i, j] == 0 and dom.has_origin_node
    assert dom.index_of(0.5, -0.25) == (48, 24)
    assert dom.mask.sum() == np.sum(np.abs(dom.Z) <= 1 + 1e-12)


def test_even_grid_has_no_origin_node():
    assert not GridDomain(1.0, 64).has_origin_node
    with pytest.raises(DomainError):
        GridDomain(1.0, 3)


@pytest.mark.parametrize("r", [None, 0.8, 0.37])
def test_quadrature_integrates_polynomials(dom, r):
    R = 1.0 if r is None else r
    assert integrate_scalar(dom, np.ones(dom.Z.shape), r) == pytest.approx(math.pi * R**2, rel=1e-7)
    # int |z|^2 = pi R^4 / 2, second order in h
    errs = []
    for n in (65, 129):
        d = GridDomain(1.0, n)
        errs.append(abs(integrate_scalar(d, np.abs(d.Z) ** 2, r) / (math.pi * R**4 / 2) - 1))
    assert errs[0] < 2 * dom.h**2
    assert errs[0] / errs[1] > 3.5


def test_quadrature_weights_positive(dom):
    w = dom.weights(0.61)
    assert np.all(w >= 0)


def test_partial_exact_for_quadratics(dom):
    f = discretize(dom, "z^2 + j*x*y")
    d = differential(f)
    m = dom.mask
    want_x = Q.from_complex(2 * dom.Z) + dom.Y[..., None] * Q.J
    np.testing.assert_allclose(d.wx[m], want_x[m], atol=1e-11)


def test_partial_second_order():
    errs = []
    for n in (65, 129):
        d = GridDomain(1.0, n)
        dx, _ = partial(d, np.exp(d.X) * np.sin(d.Y), 0)
        errs.append(np.max(np.abs(dx - np.exp(d.X) * np.sin(d.Y))[d.mask]))
    assert 3.0 < errs[0] / errs[1] < 5.5


def test_flagged_nodes_are_rim_only(dom):
    fl = flagged_nodes(dom)
    assert not np.any(fl & (np.abs(dom.Z) < 0.9))


def test_wedge_order_matters(dom):
    a = QOneForm(dom, np.broadcast_to(Q.I, (dom.n, dom.n, 4)), np.broadcast_to(Q.ONE, (dom.n, dom.n, 4)))
    b = QOneForm(dom, np.broadcast_to(Q.ONE, (dom.n, dom.n, 4)), np.broadcast_to(Q.J, (dom.n, dom.n, 4)))
    # (a ^ b) = i j - 1 * 1 = k - 1 ; (b ^ a) = 1 - j i = 1 + k
    np.testing.assert_allclose(wedge(a, b).density[dom.center], Q.K - Q.ONE)
    np.testing.assert_allclose(wedge(b, a).density[dom.center], Q.ONE + Q.K)


def test_pullback_J_of_dz(dom):
    dz = one_form_from_coefficient(dom, np.ones(dom.Z.shape))
    jd = pullback_J(dz)
    # dz o J = i dz
    np.testing.assert_allclose(jd.wx, Q.qmul(Q.I, dz.wx))
    np.testing.assert_allclose(jd.wy, Q.qmul(Q.I, dz.wy))


def test_closed_forms_have_zero_ext_d(dom):
    f = discretize(dom, "z^3 + j*conj(z)^2 + k*x*y^2")
    dd = ext_d(differential(f))
    good = dom.mask & ~ext_d_lower_order(dom)
    assert np.max(Q.qnorm(dd.density)[good]) < 1e-11


def test_ext_d_of_non_closed_form(dom):
    # d(x dy) = dx ^ dy
    w = QOneForm(dom, np.zeros((dom.n, dom.n, 4)), Q.from_complex(dom.X))
    np.testing.assert_allclose(ext_d(w).density[dom.mask], np.broadcast_to(Q.ONE, (dom.mask.sum(), 4)), atol=1e-12)


def test_stokes_on_subdisk(dom):
    # int_D d(w) for w = y^2 dx + x^3 dy; central differences of x^3 are off by h^2
    w = QOneForm(dom, Q.from_complex(dom.Y**2), Q.from_complex(dom.X**3))
    r = 0.7
    total = integrate_2form(ext_d(w), r)[0]
    exact = 3 * math.pi * r**4 / 4
    assert abs(total - exact) <= 2 * dom.h**2 * math.pi * r**2


def test_l2_norm_of_dz(dom):
    dz = one_form_from_coefficient(dom, np.ones(dom.Z.shape))
    # density (|dz(d/dx)|^2 + |dz(d/dy)|^2) / 2 = 1, and the norm is twice the area form
    assert l2_norm2(dz) == pytest.approx(2 * math.pi, rel=1e-7)
    assert l2_inner(dz, dz.scale(2.0)) == pytest.approx(4 * math.pi, rel=1e-7)


def test_path_integral_of_exact_form(dom):
    f = discretize(dom, "z^2 + j*z")
    df = differential(f)
    # lattice points, so f.at is exact; df is linear and bilinear interpolation reproduces it
    p, q, c = (-0.3125, -0.1875), (0.40625, 0.5), (0.40625, -0.1875)
    got = integrate_path(df, [p, c, q])
    want = f.at(*q) - f.at(*p)
    assert np.max(np.abs(got - want)) < 1e-12
    back = integrate_path(df, [q, c, p])
    assert np.array_equal(back, -got)


def test_path_leaving_domain(dom):
    df = differential(discretize(dom, "z"))
    with pytest.raises(PathError):
        integrate_path(df, [(0, 0), (1.2, 0)])


def test_staircase_recovers_primitive(dom):
    f = discretize(dom, "z^2/2 + k*z")
    g = staircase_integral(differential(f), base_value=f.values[dom.center])
    err = np.max(Q.qnorm(g.values - f.values)[dom.mask])
    assert err < 10 * dom.h**2


def test_staircase_base_outside():
    d = GridDomain(1.0, 33)
    w = differential(discretize(d, "z"))
    with pytest.raises(PathError):
        staircase_integral(w, base=(0, 0))
