"""Holomorphy of the Gauss maps and of the canonical lifts, and super-conformality."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quat as Q
from .calculus import GridDomain, QField, _shift, ext_d_lower_order, partial
from .conformal import (
    GaussPair,
    NonConformalError,
    canonical_factorization,
    conformality_residual,
    gauss_maps,
)

HOLOMORPHIC = "holomorphic"
ANTI_HOLOMORPHIC = "anti_holomorphic"
BOTH = "both"
NEITHER = "neither"

# chart nodes with 1 - n_3 below this are treated as the pole
POLE_TOL = 1e-3
# the chart route has larger difference constants than the sphere route
CHART_SLACK = 10.0


def threshold(h: float, scale: float = 1.0) -> float:
    """Finite-difference floor ``max(10 h^2, 1e-8)``, times a user scale."""
    return scale * max(10.0 * h * h, 1e-8)


def _classify(res_holo: float, res_anti: float, tol: float) -> str:
    holo, anti = res_holo < tol, res_anti < tol
    if holo and anti:
        return BOTH
    if holo:
        return HOLOMORPHIC
    if anti:
        return ANTI_HOLOMORPHIC
    return NEITHER


def swap_class(c: str) -> str:
    return {HOLOMORPHIC: ANTI_HOLOMORPHIC, ANTI_HOLOMORPHIC: HOLOMORPHIC}.get(c, c)


def _dilate(m: np.ndarray, steps: int) -> np.ndarray:
    out = m.copy()
    for _ in range(steps):
        grown = out.copy()
        for ax in (0, 1):
            for k in (-1, 1):
                grown |= _shift(out, k, ax, False)
        out = grown
    return out


@dataclass(frozen=True)
class Classification:
    verdict: str
    residual_holo: float
    residual_anti: float
    threshold: float
    nodes: int
    scale: float = 1.0

    def as_dict(self) -> dict:
        return {
            "class": self.verdict,
            "residual_holo": self.residual_holo,
            "residual_anti": self.residual_anti,
            "threshold": self.threshold,
            "nodes": self.nodes,
            "scale": self.scale,
        }


def _finish(rh, ra, dn, use, h, tol_scale) -> Classification:
    """Maxima over ``use``, divided by ``max(1, sup |dN|)``, then thresholded."""
    tol = threshold(h, tol_scale)
    if not np.any(use):
        return Classification(BOTH, 0.0, 0.0, tol, 0)
    scale = max(1.0, float(np.max(dn[use])))
    res_h, res_a = float(np.max(rh[use])) / scale, float(np.max(ra[use])) / scale
    return Classification(_classify(res_h, res_a, tol), res_h, res_a, tol, int(np.sum(use)), scale)


def holomorphy_classify(
    N: np.ndarray | QField,
    domain: GridDomain | None = None,
    where: np.ndarray | None = None,
    tol_scale: float = 1.0,
) -> Classification:
    """Classify an S^2-valued field by ``|N_y + N N_x|`` and ``|N_y - N N_x|``.

    Both residuals are divided by ``max(1, sup |dN|)`` so that the
    ``max(10 h^2, 1e-8)`` threshold reads as a relative defect for fast
    varying fields and as an absolute one otherwise.  ``where`` restricts the nodes entering the maxima; nodes whose stencil
    touches a node outside ``where`` are dropped as well.
    """
    if isinstance(N, QField):
        domain, N = N.domain, N.values
    if domain is None:
        raise ValueError("a domain is required for raw arrays")
    use = domain.mask if where is None else (where & domain.mask)
    use = use & ~_dilate(domain.mask & ~use, 2)
    Nx, _ = partial(domain, N, 0)
    Ny, _ = partial(domain, N, 1)
    NNx = Q.qmul(N, Nx)
    rh = Q.qnorm(Ny + NNx)
    ra = Q.qnorm(Ny - NNx)
    dn = np.hypot(Q.qnorm(Nx), Q.qnorm(Ny))
    return _finish(rh, ra, dn, use, domain.h, tol_scale)


def chart_classify(
    n: np.ndarray, domain: GridDomain, where: np.ndarray, tol_scale: float = 1.0
) -> Classification:
    """Cauchy-Riemann test of an S^2-valued field read through the stereographic chart.

    Residuals are ``4|w_z| / (1 + |w|^2)`` and ``4|w_zbar| / (1 + |w|^2)``,
    which match ``|dN|``-sized quantities of the sphere-valued map.  Nodes
    on the upper hemisphere use the coordinate ``1/w`` of the opposite
    chart; it is holomorphic exactly when ``w`` is and yields the same
    residuals, so the pole needs no special treatment.
    """
    use = where & ~_dilate(domain.mask & ~where, 2)
    n = np.where(domain.mask[..., None], n, -Q.K)
    w = (n[..., 1] + 1j * n[..., 2]) / np.maximum(1.0 - n[..., 3], 1e-300)
    v = (n[..., 1] - 1j * n[..., 2]) / np.maximum(1.0 + n[..., 3], 1e-300)
    upper = n[..., 3] > 0
    out = []
    for c in (w, v):
        cx, _ = partial(domain, c, 0)
        cy, _ = partial(domain, c, 1)
        scale = 4.0 / (1.0 + np.abs(c) ** 2)
        dn = 0.5 * scale * np.hypot(np.abs(cx), np.abs(cy))
        out.append((0.5 * np.abs(cx - 1j * cy) * scale, 0.5 * np.abs(cx + 1j * cy) * scale, dn))
    cz, czb, dn = (np.where(upper, out[1][q], out[0][q]) for q in range(3))
    # holomorphic means w_zbar = 0
    return _finish(czb, cz, dn, use, domain.h, tol_scale)


@dataclass(eq=False)
class TwistorLiftData:
    """Gauss pair of a map with the chart coordinates of ``-N`` and ``-Ntilde``."""

    N: np.ndarray
    Ntilde: np.ndarray
    a: np.ndarray
    b: np.ndarray
    alpha_w: np.ndarray
    beta_w: np.ndarray
    alpha_ok: np.ndarray
    beta_ok: np.ndarray
    gauss: GaussPair

    @property
    def domain(self) -> GridDomain:
        return self.gauss.domain

    @classmethod
    def from_map(cls, f: QField, gauss: GaussPair | None = None) -> "TwistorLiftData":
        t = canonical_factorization(f, gauss, max_residual=None)
        g = t.gauss
        m = g.domain.mask[..., None]
        pa = np.where(m, Q.hopf(t.a), -Q.I)
        pb = np.where(m, Q.hopf(t.b), -Q.I)
        aw, aok = Q.stereo_inverse_masked(pa, POLE_TOL)
        bw, bok = Q.stereo_inverse_masked(pb, POLE_TOL)
        return cls(g.N, g.Ntilde, t.a, t.b, aw, bw, aok & g.regular, bok & g.regular, g)

    def lift_residual(self) -> float:
        """``max |hopf(a) + N|, |hopf(b) + Ntilde|`` over regular nodes."""
        reg = self.gauss.regular
        ea = Q.qnorm(Q.hopf(np.where(reg[..., None], self.a, Q.ONE)) + np.where(reg[..., None], self.N, -Q.I))
        eb = Q.qnorm(Q.hopf(np.where(reg[..., None], self.b, Q.ONE)) + np.where(reg[..., None], self.Ntilde, -Q.I))
        return float(np.max(np.maximum(ea, eb)[reg])) if np.any(reg) else 0.0


@dataclass
class LiftReport:
    N: Classification
    alpha: Classification
    Ntilde: Classification
    beta: Classification
    pole_nodes_alpha: int
    pole_nodes_beta: int
    lift_residual: float
    consistent_left: bool = field(init=False)
    consistent_right: bool = field(init=False)

    def __post_init__(self):
        self.consistent_left = _agree(self.N, self.alpha)
        self.consistent_right = _agree(self.Ntilde, self.beta)

    @property
    def consistent(self) -> bool:
        return self.consistent_left and self.consistent_right

    def as_dict(self) -> dict:
        return {
            "N": self.N.as_dict(),
            "alpha": self.alpha.as_dict(),
            "Ntilde": self.Ntilde.as_dict(),
            "beta": self.beta.as_dict(),
            "pole_nodes_alpha": self.pole_nodes_alpha,
            "pole_nodes_beta": self.pole_nodes_beta,
            "lift_residual": self.lift_residual,
            "consistent_left": self.consistent_left,
            "consistent_right": self.consistent_right,
        }


def _agree(sphere: Classification, chart: Classification) -> bool:
    """A Gauss map is holomorphic exactly when its lift is anti-holomorphic."""
    return sphere.verdict == swap_class(chart.verdict)


def analysis_nodes(gauss: GaussPair) -> np.ndarray:
    """Regular nodes where derivatives of the Gauss maps are second order."""
    return gauss.regular & ~ext_d_lower_order(gauss.domain)


def lift_holomorphy(lift: TwistorLiftData, tol_scale: float = 1.0) -> LiftReport:
    """Classify N, N-tilde and, independently, the chart images of ``hopf(a)``, ``hopf(b)``."""
    dom = lift.domain
    reg = lift.gauss.regular
    use = analysis_nodes(lift.gauss)
    m = dom.mask[..., None]
    pa = np.where(m, Q.hopf(lift.a), -Q.K)
    pb = np.where(m, Q.hopf(lift.b), -Q.K)
    return LiftReport(
        N=holomorphy_classify(lift.N, dom, use, tol_scale),
        alpha=chart_classify(pa, dom, use, tol_scale * CHART_SLACK),
        Ntilde=holomorphy_classify(lift.Ntilde, dom, use, tol_scale),
        beta=chart_classify(pb, dom, use, tol_scale * CHART_SLACK),
        pole_nodes_alpha=int(np.sum(reg & ~lift.alpha_ok)),
        pole_nodes_beta=int(np.sum(reg & ~lift.beta_ok)),
        lift_residual=lift.lift_residual(),
    )


@dataclass(frozen=True)
class SuperconformalResult:
    super_conformal: bool
    witness: str
    left: Classification
    right: Classification
    conformality: float

    def as_dict(self) -> dict:
        return {
            "super_conformal": self.super_conformal,
            "witness": self.witness,
            "N": self.left.as_dict(),
            "Ntilde": self.right.as_dict(),
            "conformality_residual": self.conformality,
        }


def superconformal_test(
    f: QField, tol_scale: float = 1.0, gauss: GaussPair | None = None, max_residual: float = 0.25
) -> SuperconformalResult:
    """Super-conformal iff N or N-tilde is anti-holomorphic.

    The witness is ``"left"`` when N qualifies (checked first), ``"right"``
    when only N-tilde does, and ``"none"`` otherwise.
    """
    g = gauss_maps(f) if gauss is None else gauss
    res = conformality_residual(f, g)
    if res > max_residual:
        raise NonConformalError(f"map is not conformal (residual {res:.3e})", res)
    use = analysis_nodes(g)
    left = holomorphy_classify(g.N, g.domain, use, tol_scale)
    right = holomorphy_classify(g.Ntilde, g.domain, use, tol_scale)
    anti = (ANTI_HOLOMORPHIC, BOTH)
    if left.verdict in anti:
        witness = "left"
    elif right.verdict in anti:
        witness = "right"
    else:
        witness = "none"
    return SuperconformalResult(witness != "none", witness, left, right, res)
