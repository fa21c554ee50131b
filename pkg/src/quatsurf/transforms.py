"""Maps built from factorization data, and the quotient, Bäcklund, Darboux and spin transforms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quat as Q
from .calculus import (
    GridDomain,
    QField,
    QOneForm,
    differential,
    ext_d,
    ext_d_lower_order,
    l2_inner,
    l2_norm2,
    one_form_from_coefficient,
    staircase_integral,
    wedge,
)
from .conformal import GaussPair, NoDataError, area_direct, conformality_residual, gauss_maps
from .twistor import _dilate, threshold


class TransformError(ValueError):
    """A transform's hypothesis fails; ``residual`` carries the offending size."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


# quotient and Bäcklund inputs must agree on their Gauss maps to this level
def _match_tol(h: float, scale: float) -> float:
    return scale * max(1e3 * h * h, 1e-6)


def _sup(values: np.ndarray, where: np.ndarray) -> float:
    return float(np.max(values[where])) if np.any(where) else 0.0


def _interior(domain: GridDomain, exclude: np.ndarray | None = None) -> np.ndarray:
    good = domain.mask & ~ext_d_lower_order(domain)
    if exclude is not None and np.any(exclude):
        good &= ~_dilate(exclude, 2)
    return good


def _field(domain: GridDomain, values) -> QField:
    if isinstance(values, QField):
        return values
    v = Q.asq(values)
    if v.ndim == 1:
        v = np.broadcast_to(v, (domain.n, domain.n, 4))
    return QField(domain, v)


# ---------------------------------------------------------------- integrability


@dataclass(frozen=True)
class IntegrabilityReport:
    residual: float
    residual_full: float
    identity_gap: float
    threshold: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.threshold

    def as_dict(self) -> dict:
        return {
            "residual": self.residual,
            "residual_full": self.residual_full,
            "identity_gap": self.identity_gap,
            "threshold": self.threshold,
            "ok": self.ok,
        }


def check_integrability(
    domain: GridDomain, a, b, eta_x, exclude: np.ndarray | None = None, tol_scale: float = 1.0
) -> IntegrabilityReport:
    """Size of ``da ^ k eta b^-1 + a k d(eta) b^-1 - a k eta ^ d(b^-1)``.

    ``residual`` is the sup over nodes where all stencils are second order
    (and away from ``exclude``), divided by ``max(1, sup |eta|)``;
    ``residual_full`` covers every masked node.  ``identity_gap`` compares
    the product-rule expansion with ``ext_d`` of the assembled form.
    """
    a = _field(domain, a)
    b = _field(domain, b)
    eta = one_form_from_coefficient(domain, eta_x)
    binv = b.inverse()
    k_eta_binv = QOneForm(domain, Q.qprod(Q.K, eta.wx, binv.values), Q.qprod(Q.K, eta.wy, binv.values))
    ak = Q.qmul(a.values, Q.K)
    ak_eta = QOneForm(domain, Q.qmul(ak, eta.wx), Q.qmul(ak, eta.wy))
    t1 = wedge(differential(a), k_eta_binv).density
    t2 = Q.qprod(ak, ext_d(eta).density, binv.values)
    t3 = wedge(ak_eta, differential(binv)).density
    lhs = t1 + t2 - t3
    assembled = ext_d(ak_eta.right(binv)).density
    where = _interior(domain, exclude)
    scale = max(1.0, float(np.max(np.abs(np.asarray(eta_x))[domain.mask])))
    r = Q.qnorm(lhs)
    return IntegrabilityReport(
        residual=_sup(r, where) / scale,
        residual_full=_sup(r, domain.mask) / scale,
        identity_gap=_sup(Q.qnorm(lhs - assembled), where) / scale,
        threshold=threshold(domain.h, tol_scale),
    )


def build_conformal(
    domain: GridDomain,
    a,
    b,
    eta_x,
    base: tuple[int, int] | None = None,
    base_value=0.0,
    check: bool = True,
    tol_scale: float = 1.0,
) -> QField:
    """Integrate ``a k eta b^-1`` along lattice staircases from ``base``."""
    if check:
        rep = check_integrability(domain, a, b, eta_x, tol_scale=tol_scale)
        if not rep.ok:
            raise TransformError(
                f"factorization data is not integrable (residual {rep.residual:.3e} > {rep.threshold:.3e})",
                rep.residual,
            )
    a = _field(domain, a)
    b = _field(domain, b)
    eta = one_form_from_coefficient(domain, eta_x)
    ak = Q.qmul(a.values, Q.K)
    binv = b.inverse().values
    w = QOneForm(domain, Q.qprod(ak, eta.wx, binv), Q.qprod(ak, eta.wy, binv))
    return staircase_integral(w, base, base_value)


# ---------------------------------------------------------------- quotient


@dataclass(eq=False)
class QuotientResult:
    h: QField
    side: str
    predicted: np.ndarray
    extracted: np.ndarray
    prediction_error: float
    input_mismatch: float
    gauss: GaussPair

    def as_dict(self) -> dict:
        return {
            "side": self.side,
            "prediction_error": self.prediction_error,
            "input_mismatch": self.input_mismatch,
        }


def _require_nonvanishing(f: QField, name: str) -> None:
    m = f.domain.mask
    small = float(np.min(Q.qnorm(f.values)[m]))
    if small < 1e-10 * max(1.0, float(np.max(Q.qnorm(f.values)[m]))):
        raise TransformError(f"{name} vanishes on the domain (min |{name}| = {small:.3e})", small)


def quotient_transform(f: QField, g: QField, side: str = "left", tol_scale: float = 1.0) -> QuotientResult:
    """``h = f^-1 g`` (left) or ``h = g f^-1`` (right) with its predicted Gauss map.

    Left: N_f = N_g and ``N_h = f^-1 N f``.  Right: Ntilde_f = Ntilde_g and
    ``Ntilde_h = f Ntilde f^-1``.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    dom = f.domain
    _require_nonvanishing(f, "f")
    gf, gg = gauss_maps(f), gauss_maps(g)
    reg = gf.regular & gg.regular
    ff, fi = f.values, f.inverse().values
    if side == "left":
        mismatch = _sup(Q.qnorm(gf.N - gg.N), reg)
        h = QField(dom, Q.qmul(fi, g.values))
    else:
        mismatch = _sup(Q.qnorm(gf.Ntilde - gg.Ntilde), reg)
        h = QField(dom, Q.qmul(g.values, fi))
    if mismatch > _match_tol(dom.h, tol_scale):
        which = "N" if side == "left" else "Ntilde"
        raise TransformError(f"{which} of f and g differ (max {mismatch:.3e})", mismatch)
    gh = gauss_maps(h)
    if side == "left":
        predicted = Q.qprod(fi, gf.N, ff)
        extracted = gh.N
    else:
        predicted = Q.qprod(ff, gf.Ntilde, fi)
        extracted = gh.Ntilde
    use = reg & gh.regular
    err = _sup(Q.qnorm(predicted - extracted), use)
    return QuotientResult(h, side, predicted, extracted, err, mismatch, gh)


# ---------------------------------------------------------------- Bäcklund


@dataclass(frozen=True)
class BacklundReport:
    side: str
    wedge_residual: float
    lift_error: float
    threshold: float

    @property
    def ok(self) -> bool:
        return self.wedge_residual <= self.threshold

    def as_dict(self) -> dict:
        return {
            "side": self.side,
            "wedge_residual": self.wedge_residual,
            "lift_error": self.lift_error,
            "threshold": self.threshold,
            "ok": self.ok,
        }


def backlund_verify(f: QField, h: QField, side: str = "left", tol_scale: float = 1.0) -> BacklundReport:
    """Test ``dh ^ df = 0`` (left) or ``df ^ dh = 0`` (right) and the lift relation.

    The wedge residual is relative to ``sup|dh| sup|df|``.  The lift relation
    reads ``Ntilde_h = -N_f`` on the left and ``N_h = -Ntilde_f`` on the right.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    dom = f.domain
    df, dh = differential(f), differential(h)
    w = wedge(dh, df) if side == "left" else wedge(df, dh)
    scale = max(df.sup_norm() * dh.sup_norm(), 1e-300)
    resid = _sup(Q.qnorm(w.density), dom.mask) / scale
    gf, gh = gauss_maps(f), gauss_maps(h)
    reg = gf.regular & gh.regular
    if side == "left":
        lift = _sup(Q.qnorm(gh.Ntilde + gf.N), reg)
    else:
        lift = _sup(Q.qnorm(gh.N + gf.Ntilde), reg)
    return BacklundReport(side, resid, lift, threshold(dom.h, tol_scale))


# ---------------------------------------------------------------- Darboux


@dataclass(eq=False)
class TransformRecord:
    f: QField
    h: QField
    g: QField
    fhat: QField
    side: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def domain(self) -> GridDomain:
        return self.f.domain

    def potential(self) -> QField:
        """``h^-1 g`` (left) or ``g h^-1`` (right), so that ``fhat = f - potential``."""
        hi = self.h.inverse().values
        if self.side == "left":
            return QField(self.domain, Q.qmul(hi, self.g.values))
        return QField(self.domain, Q.qmul(self.g.values, hi))


def darboux(
    f: QField,
    h: QField,
    side: str = "left",
    constant=0.0,
    base: tuple[int, int] | None = None,
    tol_scale: float = 1.0,
    check: bool = True,
) -> TransformRecord:
    """Darboux transform from a Bäcklund partner ``h``.

    ``g`` is the primitive of ``h df`` (left) or ``df h`` (right) taking the
    value ``constant`` at ``base`` (default: the centre node).  The output is
    ``fhat = -h^-1 g + f`` or ``fhat = -g h^-1 + f``.  The predicted Gauss
    map is ``Ntilde = -q^-1 N_f q`` with ``q = h^-1 g`` on the left and
    ``N = -p Ntilde_f p^-1`` with ``p = g h^-1`` on the right; nodes where the
    potential vanishes are branch points of ``fhat`` and are skipped.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    dom = f.domain
    _require_nonvanishing(h, "h")
    bk = backlund_verify(f, h, side, tol_scale)
    if check and not bk.ok:
        raise TransformError(
            f"h is not a {side} Bäcklund partner (wedge residual {bk.wedge_residual:.3e})", bk.wedge_residual
        )
    df = differential(f)
    form = df.left(h) if side == "left" else df.right(h)
    closed = _sup(Q.qnorm(ext_d(form).density), _interior(dom)) / max(form.sup_norm(), 1e-300)
    g = staircase_integral(form, base, constant)
    rec = TransformRecord(f, h, g, f, side)
    pot = rec.potential()
    rec.fhat = QField(dom, f.values - pot.values)
    gf = gauss_maps(f)
    try:
        gfh = gauss_maps(rec.fhat)
    except NoDataError as exc:
        raise TransformError("the Darboux transform is constant") from exc
    p = pot.values
    pn = Q.qnorm(p)
    live = dom.mask & (pn > 1e-8 * max(1.0, float(np.max(pn[dom.mask]))))
    safe = np.where(live[..., None], p, Q.ONE)
    if side == "left":
        predicted = -Q.qprod(Q.qinv(safe), gf.N, safe)
        extracted = gfh.Ntilde
    else:
        predicted = -Q.qprod(safe, gf.Ntilde, Q.qinv(safe))
        extracted = gfh.N
    use = live & gf.regular & gfh.regular
    rec.diagnostics = {
        "backlund": bk.as_dict(),
        "closedness": closed,
        "conformality_fhat": conformality_residual(rec.fhat, gfh),
        "lift_error": _sup(Q.qnorm(predicted - extracted), use),
        "branch_nodes_fhat": int(np.sum(gfh.branch_mask)),
    }
    return rec


@dataclass(frozen=True)
class AreaIdentity:
    lhs: float
    rhs: float
    gap: float
    area_f: float
    area_fhat: float
    inner: float

    @property
    def relative_gap(self) -> float:
        return self.gap / max(abs(self.rhs), 1e-300)

    def as_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gap": self.gap,
            "relative_gap": self.relative_gap,
            "area_f": self.area_f,
            "area_fhat": self.area_fhat,
            "inner": self.inner,
        }


def area_identity(record: TransformRecord, r: float | None = None) -> AreaIdentity:
    """``A(f) + A(fhat) - <<df, dfhat>>`` against ``||d(potential)||^2 / 2``."""
    f, fh = record.f, record.fhat
    a_f = area_direct(f, r)
    a_fh = area_direct(fh, r)
    inner = l2_inner(differential(f), differential(fh), r)
    lhs = a_f + a_fh - inner
    rhs = 0.5 * l2_norm2(differential(record.potential()), r)
    return AreaIdentity(lhs, rhs, abs(lhs - rhs), a_f, a_fh, inner)


# ---------------------------------------------------------------- spin transform


@dataclass(eq=False)
class SpinResult:
    g: QField
    residual_lambda: float
    residual_mu: float
    closedness: float
    N_error: float
    Ntilde_error: float
    branch_match: bool

    def as_dict(self) -> dict:
        return {
            "residual_lambda": self.residual_lambda,
            "residual_mu": self.residual_mu,
            "closedness": self.closedness,
            "N_error": self.N_error,
            "Ntilde_error": self.Ntilde_error,
            "branch_match": self.branch_match,
        }


def holomorphic_section_residuals(f: QField, lam: QField, mu: QField, gauss: GaussPair | None = None):
    """``1/2 |lam_x - N lam_y|`` and ``1/2 |mu_x - Ntilde mu_y|``, relative to ``max(1, sup|d.|)``.

    These vanish exactly when ``d(conj(lam)) ^ df = 0`` and ``df ^ d(mu) = 0``.
    """
    g = gauss_maps(f) if gauss is None else gauss
    dom = f.domain
    use = _interior(dom, g.branch_mask)
    dl, dm = differential(lam), differential(mu)
    rl = 0.5 * Q.qnorm(dl.wx - Q.qmul(g.N, dl.wy))
    rm = 0.5 * Q.qnorm(dm.wx - Q.qmul(g.Ntilde, dm.wy))
    return (
        _sup(rl, use) / max(1.0, dl.sup_norm(use)),
        _sup(rm, use) / max(1.0, dm.sup_norm(use)),
    )


def spin_transform(
    f: QField,
    lam,
    mu,
    base: tuple[int, int] | None = None,
    constant=0.0,
    tol_scale: float = 1.0,
    check: bool = True,
) -> SpinResult:
    """Integrate ``conj(lam) df mu`` for holomorphic sections ``lam``, ``mu``.

    Predicted Gauss maps of the result: ``conj(lam) N conj(lam)^-1`` and
    ``mu^-1 Ntilde mu``.
    """
    dom = f.domain
    lam, mu = _field(dom, lam), _field(dom, mu)
    _require_nonvanishing(lam, "lambda")
    _require_nonvanishing(mu, "mu")
    gf = gauss_maps(f)
    rl, rm = holomorphic_section_residuals(f, lam, mu, gf)
    tol = threshold(dom.h, tol_scale)
    if check and (rl > tol or rm > tol):
        raise TransformError(
            f"lambda or mu is not a holomorphic section (residuals {rl:.3e}, {rm:.3e}; threshold {tol:.3e})",
            max(rl, rm),
        )
    lbar = lam.conj().values
    df = differential(f)
    form = df.left(lbar).right(mu.values)
    closed = _sup(Q.qnorm(ext_d(form).density), _interior(dom, gf.branch_mask)) / max(form.sup_norm(), 1e-300)
    g = staircase_integral(form, base, constant)
    gg = gauss_maps(g)
    use = gf.regular & gg.regular
    N_pred = Q.qprod(lbar, gf.N, Q.qinv(np.where(dom.mask[..., None], lbar, Q.ONE)))
    mu_safe = np.where(dom.mask[..., None], mu.values, Q.ONE)
    Nt_pred = Q.qprod(Q.qinv(mu_safe), gf.Ntilde, mu_safe)
    return SpinResult(
        g=g,
        residual_lambda=rl,
        residual_mu=rm,
        closedness=closed,
        N_error=_sup(Q.qnorm(gg.N - N_pred), use),
        Ntilde_error=_sup(Q.qnorm(gg.Ntilde - Nt_pred), use),
        branch_match=bool(np.array_equal(gf.branch_mask, gg.branch_mask)),
    )
