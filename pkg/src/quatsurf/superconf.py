"""Factorizations ``df = a~ zeta`` of super-conformal maps and the branch-point area bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quat as Q
from .calculus import GridDomain, QField, QOneForm, differential, partial
from .conformal import area_direct, gauss_maps
from .twistor import _dilate, threshold

ORDER_TOL = 0.2
ZERO_TOL = 1e-12
EQUALITY_TOL = 1e-3


class HypothesisError(ValueError):
    """An assumption of the area bound does not hold for the given data."""


@dataclass(frozen=True)
class ComponentSplit:
    """One complex component of ``a~ = a0 + k a1``."""

    values: np.ndarray
    order: float  # m = vanishing order + 1, ``inf`` for the zero function
    slope: float
    cr_residual: float

    @property
    def vanishes(self) -> bool:
        return math.isinf(self.order)


def _shells(domain: GridDomain) -> np.ndarray:
    r = np.abs(domain.Z)
    h = domain.h
    return domain.mask & (r >= 2 * h - 1e-12) & (r <= 8 * h + 1e-12)


def _order(domain: GridDomain, a: np.ndarray, scale: float) -> tuple[float, float]:
    """``(m, slope)`` from a log-log fit of ``|a|`` against ``|z|`` on the shells around 0."""
    if float(np.max(np.abs(a)[domain.mask])) <= ZERO_TOL * max(scale, 1.0):
        return math.inf, math.inf
    sh = _shells(domain)
    r = np.abs(domain.Z[sh])
    v = np.abs(a[sh])
    if np.any(v <= 0):
        raise HypothesisError("component vanishes on the order-estimation shells")
    slope = float(np.polyfit(np.log(r), np.log(v), 1)[0])
    k = round(slope)
    if abs(slope - k) > ORDER_TOL:
        raise HypothesisError(f"ambiguous vanishing order: fitted slope {slope:.3f}")
    return float(k + 1), slope


def _cr_residual(domain: GridDomain, a: np.ndarray, where: np.ndarray) -> float:
    ax, _ = partial(domain, a, 0)
    ay, _ = partial(domain, a, 1)
    dbar = 0.5 * np.abs(ax + 1j * ay)
    if not np.any(where):
        return 0.0
    scale = max(1.0, float(np.max(np.hypot(np.abs(ax), np.abs(ay))[where])))
    return float(np.max(dbar[where])) / scale


def vplus_split(atilde: QField) -> tuple[ComponentSplit, ComponentSplit]:
    """Split ``a~ = a0 + k a1`` with ``a0 = w + x i`` and ``a1 = z + y i``."""
    dom = atilde.domain
    v = atilde.values
    a0 = v[..., 0] + 1j * v[..., 1]
    a1 = v[..., 3] + 1j * v[..., 2]
    scale = float(np.max(Q.qnorm(v)[dom.mask]))
    where = dom.mask & ~_dilate(~dom.mask, 2)
    out = []
    for a in (a0, a1):
        m, slope = _order(dom, a, scale)
        out.append(ComponentSplit(np.where(dom.mask, a, 0.0), m, slope, _cr_residual(dom, a, where)))
    return out[0], out[1]


def _unit_disk(domain: GridDomain) -> np.ndarray:
    if domain.radius < 1.0 - 1e-12:
        raise HypothesisError(f"the bound is stated on the unit disk; domain radius is {domain.radius}")
    return domain.mask & (np.abs(domain.Z) <= 1.0 + 1e-12)


def bound_constant(domain: GridDomain, comp: ComponentSplit) -> float:
    """``sup_D |a / z^(m-2)|`` over lattice nodes, skipping ``|z| < 2h`` when ``m > 2``."""
    if comp.vanishes:
        return 0.0
    D = _unit_disk(domain)
    m = int(comp.order)
    r = np.abs(domain.Z)
    if m > 2:
        D = D & (r >= 2 * domain.h - 1e-12)
    z = np.where(D, domain.Z, 1.0)
    ratio = np.abs(comp.values) / np.abs(z) ** (m - 2)
    return float(np.max(ratio[D]))


def zeta_density_ratio(zeta: QOneForm) -> np.ndarray:
    """``zeta ^ (conj(zeta) o J)`` over ``dz ^ (conj(dz) o J)``, i.e. ``(|zeta_x|^2 + |zeta_y|^2) / 2``."""
    return 0.5 * (Q.qnorm2(zeta.wx) + Q.qnorm2(zeta.wy))


def bound_constants(
    domain: GridDomain, c0: ComponentSplit, c1: ComponentSplit, zeta: QOneForm
) -> tuple[float, float, float]:
    D = _unit_disk(domain)
    cz = float(np.max(zeta_density_ratio(zeta)[D]))
    return bound_constant(domain, c0), bound_constant(domain, c1), cz


def schwarz_ratio(domain: GridDomain, a) -> float:
    """``sup |a(z)| / |z|`` over nodes of the unit disk with ``|z| >= 2h``."""
    a = np.asarray(a)
    D = _unit_disk(domain) & (np.abs(domain.Z) >= 2 * domain.h - 1e-12)
    return float(np.max((np.abs(a) / np.abs(np.where(D, domain.Z, 1.0)))[D]))


def default_factorization(f: QField, clearance: int = 16, tol: float = 1e-3) -> tuple[QField, QOneForm, str]:
    """A factorization ``df = a~ zeta`` read off from a constant Gauss map.

    With N-tilde constant ``Nt0``: ``b0 = solve_gauge(Nt0)``, ``a~ = f_x b0``
    and ``zeta = dz b0^-1``.  With N constant: ``a~`` is the constant gauge
    ``a0`` of N and ``zeta = a0^-1 df``.  Constancy is judged away from a
    ``clearance``-node neighbourhood of branch points (difference errors of
    the Gauss maps grow like ``h^2 / dist``), shrunk to two nodes on grids too
    coarse to leave anything.  Other maps need a caller-supplied factorization.
    """
    dom = f.domain
    g = gauss_maps(f)
    use = g.regular & ~_dilate(g.branch_mask, clearance)
    if not np.any(use):
        use = g.regular & ~_dilate(g.branch_mask, 2)
    df = g.df
    for side, field_ in (("right", g.Ntilde), ("left", g.N)):
        vals = field_[use]
        if vals.size == 0:
            continue
        mean = Q.qnormalize(np.mean(vals, axis=0))
        if float(np.max(Q.qnorm(vals - mean))) > tol:
            continue
        if side == "right":
            b0 = Q.solve_gauge(mean, "right")
            at = QField(dom, Q.qmul(df.wx, b0))
            bi = Q.qconj(b0)
            dz = np.broadcast_to(Q.from_complex(1.0), df.wx.shape)
            zeta = QOneForm(dom, Q.qmul(dz, bi), Q.qmul(Q.from_complex(1j * np.ones(dom.Z.shape)), bi))
        else:
            a0 = Q.solve_gauge(mean, "left")
            at = QField(dom, np.broadcast_to(a0, df.wx.shape))
            zeta = df.left(Q.qconj(a0))
        return at, zeta, side
    raise HypothesisError("neither Gauss map is constant; supply a~ and zeta explicitly")


@dataclass
class BoundReport:
    r: float
    m0: float
    m1: float
    C_a0: float
    C_a1: float
    C_zeta: float
    area: float
    bound: float
    factorization_residual: float
    cr_residual_a0: float
    cr_residual_a1: float
    zeta_constant: bool
    witnesses: dict = field(default_factory=dict)
    equality_flag: bool = False

    @property
    def within_bound(self) -> bool:
        return self.area <= self.bound * (1 + EQUALITY_TOL)

    @property
    def relative_gap(self) -> float:
        return (self.bound - self.area) / self.bound if self.bound > 0 else 0.0

    def as_dict(self) -> dict:
        def num(x):
            return None if math.isinf(x) else x

        return {
            "r": self.r,
            "m0": num(self.m0),
            "m1": num(self.m1),
            "C_a0": self.C_a0,
            "C_a1": self.C_a1,
            "C_zeta": self.C_zeta,
            "area": self.area,
            "bound": self.bound,
            "relative_gap": self.relative_gap,
            "within_bound": self.within_bound,
            "equality_flag": self.equality_flag,
            "factorization_residual": self.factorization_residual,
            "cr_residual_a0": self.cr_residual_a0,
            "cr_residual_a1": self.cr_residual_a1,
            "zeta_constant": self.zeta_constant,
            "witnesses": self.witnesses,
        }


def _witness(domain: GridDomain, comp: ComponentSplit, C: float) -> list[list[float]]:
    """Interior nodes ``z0 != 0`` with ``|a(z0)| >= (1 - tol) C |z0|^(m-1)``."""
    if comp.vanishes or C == 0:
        return []
    r = np.abs(domain.Z)
    h = domain.h
    inside = domain.mask & (r >= 2 * h - 1e-12) & (r <= 1.0 - 2 * h)
    m = int(comp.order)
    hit = inside & (np.abs(comp.values) >= (1 - EQUALITY_TOL) * C * r ** (m - 1))
    pts = np.argwhere(hit)
    return [[float(domain.X[tuple(p)]), float(domain.Y[tuple(p)])] for p in pts[:3]]


def area_bound_report(
    f: QField,
    atilde: QField | None = None,
    zeta: QOneForm | None = None,
    r: float = 0.5,
    tol_scale: float = 1.0,
    require_branch: bool = True,
) -> BoundReport:
    """Area of ``f`` on ``D_r`` against ``pi C_zeta sum C^2 / m r^(2m)``."""
    dom = f.domain
    if not 0 < r <= 1.0:
        raise HypothesisError(f"radius r must lie in (0, 1], got {r}")
    if (atilde is None) != (zeta is None):
        raise ValueError("supply both a~ and zeta, or neither")
    if atilde is None:
        atilde, zeta, _ = default_factorization(f)
    df = differential(f)
    scale = max(df.sup_norm(), 1e-300)
    prod_x = Q.qmul(atilde.values, zeta.wx)
    prod_y = Q.qmul(atilde.values, zeta.wy)
    fres = float(np.max(np.maximum(Q.qnorm(df.wx - prod_x), Q.qnorm(df.wy - prod_y))[dom.mask])) / scale
    if fres > 100 * threshold(dom.h, tol_scale):
        raise HypothesisError(f"df differs from a~ zeta (relative residual {fres:.3e})")
    c0, c1 = vplus_split(atilde)
    if require_branch:
        finite = [c.order for c in (c0, c1) if not c.vanishes]
        if not dom.has_origin_node or not finite or min(finite) < 2:
            raise HypothesisError("f is not branched at 0 (a~(0) != 0)")
    ca0, ca1, cz = bound_constants(dom, c0, c1, zeta)
    bound = 0.0
    for comp, C in ((c0, ca0), (c1, ca1)):
        if not comp.vanishes:
            bound += C * C / comp.order * r ** (2 * comp.order)
    bound *= math.pi * cz
    area = area_direct(f, r, df)
    Dr = dom.mask & (np.abs(dom.Z) <= 1.0 + 1e-12)
    ratio = zeta_density_ratio(zeta)[Dr]
    zeta_const = bool(np.max(ratio) - np.min(ratio) <= EQUALITY_TOL * max(np.max(ratio), 1e-300))
    wit = {"a0": _witness(dom, c0, ca0), "a1": _witness(dom, c1, ca1), "zeta_constant": zeta_const}
    comps_ok = all(c.vanishes or wit[name] for c, name in ((c0, "a0"), (c1, "a1")))
    agree = abs(area - bound) <= EQUALITY_TOL * max(bound, 1e-300)
    return BoundReport(
        r=r,
        m0=c0.order,
        m1=c1.order,
        C_a0=ca0,
        C_a1=ca1,
        C_zeta=cz,
        area=area,
        bound=bound,
        factorization_residual=fres,
        cr_residual_a0=c0.cr_residual,
        cr_residual_a1=c1.cr_residual,
        zeta_constant=zeta_const,
        witnesses=wit,
        equality_flag=bool(agree and zeta_const and comps_ok),
    )
