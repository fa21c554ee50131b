import math

import numpy as np
import pytest

from oracles import BOUND_EXACT, BOUND_R, CLIFFORD, GAP_AREA, GAP_BOUND
from quatsurf import quat as Q
from quatsurf.calculus import GridDomain, QField, QOneForm, discretize, one_form_from_coefficient
from quatsurf.superconf import (
    HypothesisError,
    area_bound_report,
    bound_constant,
    default_factorization,
    schwarz_ratio,
    vplus_split,
    zeta_density_ratio,
)


@pytest.fixture(scope="module")
def dom():
    return GridDomain(1.0, 129)


def _dz(dom):
    return one_form_from_coefficient(dom, np.ones(dom.Z.shape))


def test_split_components(dom):
    # a~ = a0 + k a1 with a0 = z and a1 = z^2
    at = discretize(dom, "z + k*z^2")
    c0, c1 = vplus_split(at)
    np.testing.assert_allclose(c0.values[dom.mask], dom.Z[dom.mask], atol=1e-14)
    np.testing.assert_allclose(c1.values[dom.mask], (dom.Z**2)[dom.mask], atol=1e-14)
    assert c0.order == 2 and c1.order == 3
    assert c0.cr_residual < 1e-12 and c1.cr_residual < 1e-12


def test_zero_component_has_infinite_order(dom):
    c0, c1 = vplus_split(discretize(dom, "z^2"))
    assert c0.order == 3 and math.isinf(c1.order) and c1.vanishes
    assert bound_constant(dom, c1) == 0.0


def test_ambiguous_order_rejected(dom):
    with pytest.raises(HypothesisError):
        vplus_split(discretize(dom, "z + 0.06"))


def test_zeta_density(dom):
    zeta = _dz(dom)
    np.testing.assert_allclose(zeta_density_ratio(zeta)[dom.mask], 1.0)
    np.testing.assert_allclose(zeta_density_ratio(zeta.scale(2.0))[dom.mask], 4.0)


def test_schwarz_ratio(dom):
    assert schwarz_ratio(dom, dom.Z * (1 + dom.Z) / 2) == pytest.approx(1.0, abs=1e-12)


def test_bound_equality_for_monomial(dom):
    f = discretize(dom, "z^2/2")
    rep = area_bound_report(f, discretize(dom, "z"), _dz(dom), BOUND_R)
    assert rep.bound == pytest.approx(BOUND_EXACT, rel=1e-12)
    assert rep.area == pytest.approx(BOUND_EXACT, rel=1e-3)
    assert rep.equality_flag and rep.within_bound
    assert rep.m0 == 2 and math.isinf(rep.m1)
    assert rep.witnesses["a0"] and rep.witnesses["zeta_constant"]


def test_strict_gap_matches_hand_values(dom):
    f = discretize(dom, "z^2/4 + z^3/6")
    rep = area_bound_report(f, discretize(dom, "z*(1 + z)/2"), _dz(dom), BOUND_R)
    assert rep.bound == pytest.approx(GAP_BOUND, rel=1e-12)
    assert rep.area == pytest.approx(GAP_AREA, rel=1e-3)
    assert rep.relative_gap >= 0.05
    assert not rep.equality_flag


def test_mismatched_factorization_rejected(dom):
    f = discretize(dom, "z^2/2")
    with pytest.raises(HypothesisError):
        area_bound_report(f, discretize(dom, "2*z"), _dz(dom), BOUND_R)


def test_unbranched_map_rejected(dom):
    with pytest.raises(HypothesisError):
        area_bound_report(discretize(dom, "z"), discretize(dom, "1"), _dz(dom), BOUND_R)


def test_small_domain_rejected():
    d = GridDomain(0.8, 65)
    with pytest.raises(HypothesisError):
        area_bound_report(discretize(d, "z^2/2"), discretize(d, "z"), _dz(d), 0.5)


@pytest.mark.parametrize("expr, side", [("z^2/2", "right"), ("z^2/2 + j*z^3/3", "right"), ("z^2/2 + k*z^3/3", "right")])
def test_default_factorization(dom, expr, side):
    f = discretize(dom, expr)
    at, zeta, got = default_factorization(f)
    assert got == side
    rep = area_bound_report(f, at, zeta, BOUND_R)
    assert rep.within_bound
    assert rep.factorization_residual < 10 * dom.h**2


def test_default_factorization_needs_constant_gauss_map(dom):
    with pytest.raises(HypothesisError):
        default_factorization(discretize(dom, CLIFFORD))


def test_quaternionic_zeta(dom):
    # zeta = dz q for a constant unit q scales nothing: same area and bound as dz
    q = Q.qnormalize(np.array([0.3, -0.2, 0.9, 0.1]))
    base = np.broadcast_to(q, (dom.n, dom.n, 4)).copy()
    zeta = QOneForm(dom, base, Q.qmul(Q.I, base))
    f_vals = Q.qmul(discretize(dom, "z^2/2").values, q)
    rep = area_bound_report(QField(dom, f_vals), discretize(dom, "z"), zeta, BOUND_R)
    assert rep.C_zeta == pytest.approx(1.0)
    assert rep.equality_flag
