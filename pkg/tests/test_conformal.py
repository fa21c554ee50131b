import numpy as np
import pytest

from oracles import AREA_UNIT_DISK, MAPS
from quatsurf import quat as Q
from quatsurf.calculus import GridDomain, discretize
from quatsurf.conformal import (
    NoDataError,
    NonConformalError,
    apply_motion,
    area,
    canonical_factorization,
    conformality_residual,
    eta_defect,
    first_fundamental_form,
    first_fundamental_form_eta,
    gauss_maps,
)


@pytest.fixture(scope="module")
def dom():
    return GridDomain(1.0, 129)


@pytest.fixture(scope="module")
def fields(dom):
    return {k: discretize(dom, v) for k, v in MAPS.items()}


def test_gauss_maps_of_z(fields):
    g = gauss_maps(fields["E1"])
    m = g.regular
    np.testing.assert_allclose(g.N[m], np.broadcast_to(Q.I, (m.sum(), 4)), atol=1e-14)
    np.testing.assert_allclose(g.Ntilde[m], np.broadcast_to(-Q.I, (m.sum(), 4)), atol=1e-14)
    assert not g.branch_mask.any()


def test_gauss_maps_are_unit_imaginary(fields):
    for f in fields.values():
        g = gauss_maps(f)
        m = g.domain.mask
        assert np.max(np.abs(Q.qnorm(g.N) - 1)[m]) < 1e-12
        assert np.max(np.abs(g.N[..., 0])[m]) < 1e-12
        assert np.max(np.abs(g.Ntilde[..., 0])[m]) < 1e-12


def test_clifford_gauss_map(dom, fields):
    # f_x = i e^{ix}/sqrt2, f_y = j i e^{iy}/sqrt2, N = f_y f_x^-1 = j e^{i(y - x)}
    g = gauss_maps(fields["E5"])
    want = Q.qmul(Q.J, Q.from_complex(np.exp(1j * (dom.Y - dom.X))))
    interior = dom.mask & (np.abs(dom.Z) < 0.9)
    assert np.max(Q.qnorm(g.N - want)[interior]) < 1e-3


@pytest.mark.parametrize(
    "expr, count",
    [("z^2/2", 1), ("z^3/3", 9), ("z", 0), ("z + j*z^2", 0)],
)
def test_branch_detection(dom, expr, count):
    g = gauss_maps(discretize(dom, expr))
    assert int(g.branch_mask.sum()) == count
    if count:
        assert g.branch_mask[dom.center]


def test_constant_map_has_no_gauss_data(dom):
    with pytest.raises(NoDataError):
        gauss_maps(discretize(dom, "1 + j"))


def test_conformality_residual_detects_defect(dom, fields):
    assert conformality_residual(discretize(dom, "z + 0.5*conj(z)")) == pytest.approx(2 / 3, rel=1e-9)
    for k in ("E1", "E2", "E3", "E4"):
        assert conformality_residual(fields[k]) < 1e-12
    assert conformality_residual(fields["E5"]) < 10 * dom.h**2


def test_factorization_reconstructs(dom, fields):
    for k, f in fields.items():
        t = canonical_factorization(f)
        scale = t.gauss.df.sup_norm()
        bound = 1e-12 if k in ("E1", "E2", "E3", "E4") else 10 * dom.h**2 * scale
        assert t.reconstruction_residual() <= bound, k
        assert eta_defect(t) < (1e-10 if k != "E5" else 10 * dom.h**2)
        assert np.all(t.eta_x[t.gauss.branch_mask] == 0)


def test_factorization_gauges_are_unit_and_lift(fields):
    t = canonical_factorization(fields["E4"])
    m = t.gauss.regular
    assert np.max(np.abs(Q.qnorm(t.a) - 1)[m]) < 1e-13
    np.testing.assert_allclose(-Q.hopf(t.a)[m], t.gauss.N[m], atol=1e-12)
    np.testing.assert_allclose(-Q.hopf(t.b)[m], t.gauss.Ntilde[m], atol=1e-12)


def test_factorization_refuses_non_conformal(dom):
    with pytest.raises(NonConformalError) as info:
        canonical_factorization(discretize(dom, "z + 0.5*conj(z)"))
    assert info.value.residual > 0.3


def test_regauge_keeps_product(fields):
    t = canonical_factorization(fields["E3"])
    rng = np.random.default_rng(3)
    u = np.exp(1j * rng.uniform(0, 2 * np.pi, t.eta_x.shape))
    v = np.exp(1j * rng.uniform(0, 2 * np.pi, t.eta_x.shape))
    t2 = t.regauge(u, v)
    r1, r2 = t.reconstruct(), t2.reconstruct()
    assert np.max(np.abs(r1.wx - r2.wx)) < 1e-13
    np.testing.assert_allclose(np.abs(t2.eta_x), np.abs(t.eta_x), atol=1e-14)


def test_imaginary_map_has_equal_hopf_images(dom):
    # f = i x + j y is Im H valued: hopf(a) = hopf(b)
    f = discretize(dom, "i*x + j*y")
    t = canonical_factorization(f)
    m = t.gauss.regular
    assert np.max(Q.qnorm(Q.hopf(t.a) - Q.hopf(t.b))[m]) < 1e-12


def test_metric_from_eta_matches(dom, fields):
    # exact for polynomial maps; the sampled Clifford patch is conformal only to O(h^2)
    for k, f in fields.items():
        t = canonical_factorization(f)
        g1 = first_fundamental_form(f)
        g2 = first_fundamental_form_eta(t)
        m = t.gauss.regular
        tol = 1e-10 if k != "E5" else 10 * dom.h**2
        assert np.max(np.abs(g1 - g2)[m]) < tol * max(1.0, np.max(np.abs(g1)[m]))


@pytest.mark.parametrize("key", sorted(MAPS))
def test_area_matches_closed_form(dom, fields, key):
    a_direct, a_eta = area(fields[key])
    assert abs(a_direct - a_eta) <= 1e-6 * a_eta
    assert a_direct == pytest.approx(AREA_UNIT_DISK[key], rel=20 * dom.h**2)


def test_motion_of_plane(fields):
    rep = apply_motion(fields["E1"], Q.J, Q.ONE, 0.0)
    assert rep.eta_modulus_error <= 1e-12
    assert rep.N_error < 1e-12 and rep.Ntilde_error < 1e-12


def test_scaling_doubles_eta(fields):
    rep = apply_motion(fields["E4"], 2 * Q.ONE, Q.ONE, Q.K)
    assert rep.scale == 2
    assert rep.eta_modulus_error < 1e-10
    assert rep.lemma_ratio_imag < 1e-10
    assert rep.lemma_ratio_real == pytest.approx(2.0)
    assert rep.lemma_reconstruction_error < 1e-10


def test_general_motion_keeps_real_ratio(fields):
    lam = np.array([0.3, -1.2, 0.5, 0.7])
    mu = np.array([1.1, 0.2, -0.4, 0.3])
    rep = apply_motion(fields["E5"], lam, mu, np.array([1.0, 2.0, 3.0, 4.0]))
    assert rep.lemma_ratio_imag < 1e-10
    assert rep.lemma_ratio_real == pytest.approx(Q.qnorm(lam) / Q.qnorm(mu))
