"""Gauss maps, canonical factorization, metric and area of a sampled map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quat as Q
from .calculus import (
    QField,
    QOneForm,
    differential,
    integrate_scalar,
    l2_norm2,
    one_form_from_coefficient,
    _shift,
    partial,
)

BRANCH_FACTOR = 0.5


class NoDataError(ValueError):
    """The map is constant, so there is no tangent data to analyse."""


class NonConformalError(ValueError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(eq=False)
class GaussPair:
    """Left and right normals ``N``, ``Ntilde`` with ``f_y = N f_x = -f_x Ntilde``."""

    N: np.ndarray
    Ntilde: np.ndarray
    branch_mask: np.ndarray
    residual: np.ndarray
    branch_eps: np.ndarray
    df: QOneForm

    @property
    def domain(self):
        return self.df.domain

    @property
    def regular(self) -> np.ndarray:
        return self.domain.mask & ~self.branch_mask


@dataclass(eq=False)
class FactorizationTriple:
    """``df = a k eta b^-1`` with ``eta = eta_x dz`` complex and ``a``, ``b`` unit."""

    a: np.ndarray
    b: np.ndarray
    eta_x: np.ndarray
    gauss: GaussPair
    axis_a: np.ndarray | None = None
    axis_b: np.ndarray | None = None

    @property
    def domain(self):
        return self.gauss.domain

    @property
    def eta(self) -> QOneForm:
        return one_form_from_coefficient(self.domain, self.eta_x)

    def reconstruct(self) -> QOneForm:
        """The one-form ``a k eta b^-1``."""
        return reconstruct(self.a, self.b, self.eta_x, self.domain)

    def reconstruction_residual(self) -> float:
        df = self.gauss.df
        rec = self.reconstruct()
        err = np.maximum(Q.qnorm(df.wx - rec.wx), Q.qnorm(df.wy - rec.wy))
        return float(np.max(err[self.domain.mask]))

    def regauge(self, u: np.ndarray, v: np.ndarray) -> "FactorizationTriple":
        """``(a u, b v, u v eta)`` for unit complex fields ``u``, ``v``.

        Since ``u k = k conj(u)`` the product ``a k eta b^-1`` is unchanged.
        """
        u = np.asarray(u, dtype=complex)
        v = np.asarray(v, dtype=complex)
        return FactorizationTriple(
            Q.qmul(self.a, Q.from_complex(u)),
            Q.qmul(self.b, Q.from_complex(v)),
            self.eta_x * u * v,
            self.gauss,
            self.axis_a,
            self.axis_b,
        )


def reconstruct(a, b, eta_x, domain) -> QOneForm:
    eta = one_form_from_coefficient(domain, eta_x)
    ak = Q.qmul(a, Q.K)
    binv = Q.qconj(b)
    return QOneForm(domain, Q.qprod(ak, eta.wx, binv), Q.qprod(ak, eta.wy, binv))


def _branch_threshold(f: QField, df: QOneForm) -> np.ndarray:
    """Nodewise ``BRANCH_FACTOR * h * |second derivative|`` plus a round-off floor.

    A node is a branch node when ``|f_x|`` is below what one lattice step of
    the local Hessian could produce, i.e. a zero of ``df`` lies within about
    half a cell.  The Hessian is maximized over the node and its four
    neighbours.
    """
    dom = f.domain
    fxx, _ = partial(dom, df.wx, 0)
    fxy, _ = partial(dom, df.wx, 1)
    fyy, _ = partial(dom, df.wy, 1)
    hess = np.maximum(np.maximum(Q.qnorm(fxx), Q.qnorm(fxy)), Q.qnorm(fyy))
    # odd-order zeros have a vanishing centred Hessian at the zero itself
    hess = np.maximum.reduce([hess] + [_shift(hess, k, ax) for k in (-1, 1) for ax in (0, 1)])
    floor = 1e-12 * max(df.sup_norm(), 1.0)
    return np.where(dom.mask, BRANCH_FACTOR * dom.h * hess + floor, 0.0)


def _fill_nearest(values: np.ndarray, good: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Copy into each target node the value of the nearest good node (display only)."""
    if not np.any(targets) or not np.any(good):
        return values
    gi = np.argwhere(good)
    out = values.copy()
    for t in np.argwhere(targets):
        d = np.sum((gi - t) ** 2, axis=1)
        out[tuple(t)] = values[tuple(gi[int(np.argmin(d))])]
    return out


def gauss_maps(f: QField, branch_eps=None) -> GaussPair:
    """Left and right normals of ``f`` together with its branch mask.

    ``branch_eps`` overrides the nodewise branch threshold (scalar or field).
    """
    dom = f.domain
    df = differential(f)
    scale = df.sup_norm()
    if scale < 1e-14:
        raise NoDataError("map is constant on the domain")
    eps = _branch_threshold(f, df) if branch_eps is None else branch_eps
    nfx = Q.qnorm(df.wx)
    branch = dom.mask & (nfx < eps)
    regular = dom.mask & ~branch
    safe_fx = np.where(regular[..., None], df.wx, Q.ONE)
    fx_inv = Q.qinv(safe_fx)
    n_raw = Q.qmul(df.wy, fx_inv)
    nt_raw = -Q.qmul(fx_inv, df.wy)
    N = _project_s2(n_raw)
    Nt = _project_s2(nt_raw)
    # defect: distance of the raw quotient from its unit-imaginary projection
    defect = Q.qnorm(df.wy - Q.qmul(N, df.wx)) / scale
    residual = np.where(regular, np.maximum(Q.qnorm(n_raw - N), Q.qnorm(nt_raw - Nt)) + defect, 0.0)
    N = np.where(dom.mask[..., None], _fill_nearest(N, regular, branch), 0.0)
    Nt = np.where(dom.mask[..., None], _fill_nearest(Nt, regular, branch), 0.0)
    return GaussPair(N, Nt, branch, residual, eps, df)


def _project_s2(q: np.ndarray) -> np.ndarray:
    im = Q.qim(q)
    n = Q.qnorm(im)
    safe = np.where(n > 0, n, 1.0)
    out = im / safe[..., None]
    return np.where((n > 0)[..., None], out, Q.I)


def conformality_residual(f: QField, gauss: GaussPair | None = None) -> float:
    """``max |f_y - N f_x|`` over non-branch nodes, relative to ``sup |df|``.

    N is the unit-imaginary projection of ``f_y f_x^-1``.  Dividing by the
    global scale rather than the local ``|f_x|`` keeps the finite-difference
    error next to a higher-order branch point from posing as a defect.
    """
    g = gauss_maps(f) if gauss is None else gauss
    df = g.df
    reg = g.regular
    if not np.any(reg):
        return 0.0
    err = Q.qnorm(df.wy - Q.qmul(g.N, df.wx)) / df.sup_norm()
    return float(np.max(err[reg]))


def canonical_factorization(
    f: QField, gauss: GaussPair | None = None, max_residual: float | None = 0.25
) -> FactorizationTriple:
    """Extract ``(a, b, eta)`` with ``df = a k eta b^-1``.

    ``a`` and ``b`` come from the fixed gauge section applied to N and
    N-tilde; ``eta = -k a^-1 df b`` is projected onto complex values and set
    to zero on branch nodes.  If a Gauss map approaches the section's
    singular point without being constant there, the section is conjugated
    so that its singularity lies away from the field (see ``gauge_axis``).
    """
    g = gauss_maps(f) if gauss is None else gauss
    if max_residual is not None:
        res = conformality_residual(f, g)
        if res > max_residual:
            raise NonConformalError(f"map is not conformal (residual {res:.3e})", res)
    m = g.domain.mask[..., None]
    axis_a = Q.gauge_axis(g.N, g.regular)
    axis_b = Q.gauge_axis(g.Ntilde, g.regular)
    a = Q.solve_gauge(np.where(m, g.N, -Q.I), "left", axis_a)
    b = Q.solve_gauge(np.where(m, g.Ntilde, -Q.I), "right", axis_b)
    eta_q = -Q.qprod(Q.K, Q.qconj(a), g.df.wx, b)
    eta_x = np.where(g.regular, Q.to_complex(eta_q), 0.0)
    return FactorizationTriple(a, b, eta_x, g, axis_a, axis_b)


def eta_defect(triple: FactorizationTriple) -> float:
    """Size of the non-complex part of ``-k a^-1 f_x b`` and of the (1,0) defect in y."""
    g = triple.gauss
    eta_xq = -Q.qprod(Q.K, Q.qconj(triple.a), g.df.wx, triple.b)
    eta_yq = -Q.qprod(Q.K, Q.qconj(triple.a), g.df.wy, triple.b)
    off = Q.qnorm(eta_xq - Q.from_complex(Q.to_complex(eta_xq)))
    ten = Q.qnorm(eta_yq - Q.qmul(eta_xq, Q.I))
    reg = g.regular
    return float(np.max(np.maximum(off, ten)[reg])) if np.any(reg) else 0.0


def first_fundamental_form(f: QField) -> np.ndarray:
    """``(n, n, 2, 2)`` array of ``[[E, F], [F, G]]`` from ``<df(.), df(.)>``."""
    df = differential(f)
    return _gram(df.wx, df.wy)


def first_fundamental_form_eta(triple: FactorizationTriple) -> np.ndarray:
    """Metric ``1/2 (eta (x) conj(eta) + conj(eta) (x) eta)`` from the (1,0)-form alone."""
    eta = triple.eta
    return _gram(eta.wx, eta.wy)


def _gram(u, v):
    E = np.sum(u * u, axis=-1)
    F = np.sum(u * v, axis=-1)
    G = np.sum(v * v, axis=-1)
    return np.stack([np.stack([E, F], -1), np.stack([F, G], -1)], -2)


def area_direct(f: QField, r: float | None = None, df: QOneForm | None = None) -> float:
    """``int_{D_r} -1/2 df ^ (conj(df) o J)``."""
    df = differential(f) if df is None else df
    dens = 0.5 * (Q.qnorm2(df.wx) + Q.qnorm2(df.wy))
    return integrate_scalar(f.domain, dens, r)


def area(f: QField, r: float | None = None, triple: FactorizationTriple | None = None) -> tuple[float, float]:
    """Area of ``f`` on ``D_r`` computed from ``df`` and from ``1/2 ||eta||^2``."""
    t = canonical_factorization(f) if triple is None else triple
    a_direct = area_direct(f, r, t.gauss.df)
    a_eta = 0.5 * l2_norm2(t.eta, r)
    return a_direct, a_eta


@dataclass(eq=False)
class MotionReport:
    moved: QField
    scale: float
    eta_modulus_error: float
    lemma_reconstruction_error: float
    lemma_ratio_imag: float
    lemma_ratio_real: float
    N_error: float
    Ntilde_error: float

    def as_dict(self) -> dict:
        return {
            "scale": self.scale,
            "eta_modulus_error": self.eta_modulus_error,
            "lemma_reconstruction_error": self.lemma_reconstruction_error,
            "lemma_ratio_imag": self.lemma_ratio_imag,
            "lemma_ratio_real": self.lemma_ratio_real,
            "N_error": self.N_error,
            "Ntilde_error": self.Ntilde_error,
        }


def apply_motion(f: QField, lam, mu, nu, triple: FactorizationTriple | None = None) -> MotionReport:
    """Move ``f`` to ``lam f mu^-1 + nu`` and compare the factorizations.

    The extracted ``eta`` of the moved map uses the fixed gauge section, so
    it is compared through gauge-invariant data: ``|eta|`` must scale by
    ``|lam|/|mu|`` and N, N-tilde must be conjugated by ``lam`` and ``mu``.
    The explicit factorization ``(lam a/|lam|, mu b/|mu|, |lam|/|mu| eta)``
    is also checked against the moved differential.
    """
    lam = Q.asq(lam)
    mu = Q.asq(mu)
    ln, mn = float(Q.qnorm(lam)), float(Q.qnorm(mu))
    if ln == 0 or mn == 0:
        raise ValueError("motion factors must be non-zero")
    t = canonical_factorization(f) if triple is None else triple
    moved = QField(f.domain, Q.qmul(Q.qmul(lam, f.values), Q.qinv(mu)) + Q.asq(nu))
    g2 = gauss_maps(moved, branch_eps=t.gauss.branch_eps * ln / mn)
    t2 = canonical_factorization(moved, g2, max_residual=None)
    s = ln / mn
    reg = t.gauss.regular & g2.regular
    mod_err = np.abs(np.abs(t2.eta_x) - s * np.abs(t.eta_x))
    lu, mu_u = lam / ln, mu / mn
    a_l = Q.qmul(lu, t.a)
    b_l = Q.qmul(mu_u, t.b)
    rec = reconstruct(a_l, b_l, s * t.eta_x, f.domain)
    rec_err = np.maximum(Q.qnorm(rec.wx - g2.df.wx), Q.qnorm(rec.wy - g2.df.wy))
    # relate the extracted gauge to the lemma's: a2 = a_l u, b2 = b_l v
    u = Q.to_complex(Q.qmul(Q.qconj(a_l), t2.a))
    v = Q.to_complex(Q.qmul(Q.qconj(b_l), t2.b))
    back = np.conj(u) * np.conj(v) * t2.eta_x
    big = reg & (np.abs(t.eta_x) > 1e-12)
    ratio = back[big] / t.eta_x[big]
    N_pred = Q.qprod(lu, t.gauss.N, Q.qconj(lu))
    Nt_pred = Q.qprod(mu_u, t.gauss.Ntilde, Q.qconj(mu_u))
    m = f.domain.mask
    return MotionReport(
        moved=moved,
        scale=s,
        eta_modulus_error=float(np.max(mod_err[reg])) if np.any(reg) else 0.0,
        lemma_reconstruction_error=float(np.max(rec_err[m])),
        lemma_ratio_imag=float(np.max(np.abs(ratio.imag))) if ratio.size else 0.0,
        lemma_ratio_real=float(np.median(ratio.real)) if ratio.size else s,
        N_error=float(np.max(Q.qnorm(g2.N - N_pred)[reg])) if np.any(reg) else 0.0,
        Ntilde_error=float(np.max(Q.qnorm(g2.Ntilde - Nt_pred)[reg])) if np.any(reg) else 0.0,
    )
