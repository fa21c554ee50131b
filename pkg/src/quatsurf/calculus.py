"""Sampled disk domains and quaternion-valued differential forms on them.

A :class:`GridDomain` is a square lattice with a circular mask.  Fields and
forms keep full ``(n, n, 4)`` arrays (zero off the mask) so that stencils
and reductions stay vectorized; axis 0 is x and axis 1 is y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import quat as Q
from .expr import compile_expr, evaluate

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(12)


class DomainError(ValueError):
    pass


@dataclass(eq=False)
class GridDomain:
    """Disk of radius ``radius`` sampled on an ``n x n`` lattice over ``[-R, R]^2``."""

    radius: float = 1.0
    n: int = 129
    _weights: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n < 5:
            raise DomainError(f"need at least 5 nodes per axis, got {self.n}")
        if self.radius <= 0:
            raise DomainError("radius must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.radius / (self.n - 1)

    @cached_property
    def xs(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.n)

    @cached_property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.xs[:, None], (self.n, self.n))

    @cached_property
    def Y(self) -> np.ndarray:
        return np.broadcast_to(self.xs[None, :], (self.n, self.n))

    @cached_property
    def Z(self) -> np.ndarray:
        return self.X + 1j * self.Y

    @cached_property
    def mask(self) -> np.ndarray:
        return np.hypot(self.X, self.Y) <= self.radius * (1 + 1e-12)

    @property
    def center(self) -> tuple[int, int]:
        c = (self.n - 1) // 2
        return c, c

    @property
    def has_origin_node(self) -> bool:
        return self.n % 2 == 1

    def index_of(self, x: float, y: float) -> tuple[int, int]:
        """Nearest lattice index to the point ``(x, y)``."""
        i = int(round((x + self.radius) / self.h))
        j = int(round((y + self.radius) / self.h))
        return i, j

    def weights(self, r: float | None = None) -> np.ndarray:
        """Per-node quadrature weights for the sub-disk of radius ``r``."""
        r = self.radius if r is None else float(r)
        if r > self.radius * (1 + 1e-12):
            raise DomainError(f"subregion radius {r} exceeds domain radius {self.radius}")
        key = round(r, 15)
        if key not in self._weights:
            self._weights[key] = _disk_weights(self, r)
        return self._weights[key]

    def describe(self) -> dict:
        return {"type": "disk", "radius": self.radius, "n": self.n, "h": self.h}


# ---------------------------------------------------------------- fields and forms


@dataclass(eq=False)
class QField:
    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.where(self.domain.mask[..., None], Q.asq(self.values), 0.0)

    def __add__(self, other):
        return QField(self.domain, self.values + _vals(other))

    def __sub__(self, other):
        return QField(self.domain, self.values - _vals(other))

    def __neg__(self):
        return QField(self.domain, -self.values)

    def __mul__(self, other):
        return QField(self.domain, Q.qmul(self.values, _vals(other)))

    def __rmul__(self, other):
        return QField(self.domain, Q.qmul(_vals(other), self.values))

    def inverse(self) -> "QField":
        n = Q.qnorm(self.values)
        if np.any((n < 1e-14) & self.domain.mask):
            raise ZeroDivisionError("field vanishes on the domain")
        safe = np.where(self.domain.mask[..., None], self.values, Q.ONE)
        return QField(self.domain, Q.qinv(safe))

    def conj(self) -> "QField":
        return QField(self.domain, Q.qconj(self.values))

    def norm(self) -> np.ndarray:
        return np.where(self.domain.mask, Q.qnorm(self.values), 0.0)

    def at(self, x: float, y: float) -> np.ndarray:
        i, j = self.domain.index_of(x, y)
        return self.values[i, j]


@dataclass(eq=False)
class QOneForm:
    """``wx dx + wy dy`` with quaternion coefficients."""

    domain: GridDomain
    wx: np.ndarray
    wy: np.ndarray

    def __post_init__(self):
        m = self.domain.mask[..., None]
        self.wx = np.where(m, Q.asq(self.wx), 0.0)
        self.wy = np.where(m, Q.asq(self.wy), 0.0)

    def __add__(self, other: "QOneForm"):
        return QOneForm(self.domain, self.wx + other.wx, self.wy + other.wy)

    def __sub__(self, other: "QOneForm"):
        return QOneForm(self.domain, self.wx - other.wx, self.wy - other.wy)

    def __neg__(self):
        return QOneForm(self.domain, -self.wx, -self.wy)

    def scale(self, c: float) -> "QOneForm":
        return QOneForm(self.domain, c * self.wx, c * self.wy)

    def left(self, q) -> "QOneForm":
        """``q * omega`` for a quaternion or a field ``q``."""
        q = _vals(q)
        return QOneForm(self.domain, Q.qmul(q, self.wx), Q.qmul(q, self.wy))

    def right(self, q) -> "QOneForm":
        """``omega * q``."""
        q = _vals(q)
        return QOneForm(self.domain, Q.qmul(self.wx, q), Q.qmul(self.wy, q))

    def conj(self) -> "QOneForm":
        return QOneForm(self.domain, Q.qconj(self.wx), Q.qconj(self.wy))

    def sup_norm(self, where=None) -> float:
        m = self.domain.mask if where is None else where
        n = np.maximum(Q.qnorm(self.wx), Q.qnorm(self.wy))
        return float(np.max(n[m])) if np.any(m) else 0.0


@dataclass(eq=False)
class QTwoForm:
    """Coefficient of ``dx ^ dy``."""

    domain: GridDomain
    density: np.ndarray

    def __post_init__(self):
        self.density = np.where(self.domain.mask[..., None], Q.asq(self.density), 0.0)

    def __add__(self, other: "QTwoForm"):
        return QTwoForm(self.domain, self.density + other.density)

    def __sub__(self, other: "QTwoForm"):
        return QTwoForm(self.domain, self.density - other.density)

    def sup_norm(self, where=None) -> float:
        m = self.domain.mask if where is None else where
        n = Q.qnorm(self.density)
        return float(np.max(n[m])) if np.any(m) else 0.0


def _vals(obj):
    if isinstance(obj, QField):
        return obj.values
    return Q.asq(obj)


def one_form_from_coefficient(domain: GridDomain, c) -> QOneForm:
    """The (1,0)-form ``c dz`` for a complex coefficient field ``c``."""
    c = np.asarray(c, dtype=complex)
    return QOneForm(domain, Q.from_complex(c), Q.from_complex(1j * c))


# ---------------------------------------------------------------- sampling


def discretize(domain: GridDomain, expr) -> QField:
    """Sample an expression (source text or AST) at the masked nodes."""
    node = compile_expr(expr)
    full = np.zeros((domain.n, domain.n, 4))
    full[domain.mask] = evaluate(node, domain.Z[domain.mask])
    return QField(domain, full)


# ---------------------------------------------------------------- derivatives


def _shift(a: np.ndarray, k: int, axis: int, fill=0):
    """``out[i] = a[i + k]`` along ``axis``; entries that fall off are ``fill``."""
    out = np.full_like(a, fill)
    n = a.shape[axis]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k >= 0:
        src[axis] = slice(k, n)
        dst[axis] = slice(0, n - k)
    else:
        src[axis] = slice(0, n + k)
        dst[axis] = slice(-k, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


@dataclass(frozen=True)
class _Stencils:
    central: np.ndarray
    fwd: np.ndarray
    bwd: np.ndarray
    flagged: np.ndarray


def _stencils(mask: np.ndarray, axis: int) -> _Stencils:
    p1, p2 = _shift(mask, 1, axis, False), _shift(mask, 2, axis, False)
    m1, m2 = _shift(mask, -1, axis, False), _shift(mask, -2, axis, False)
    central = mask & p1 & m1
    fwd = mask & ~central & p1 & p2
    bwd = mask & ~central & ~fwd & m1 & m2
    flagged = mask & ~(central | fwd | bwd)
    return _Stencils(central, fwd, bwd, flagged)


def partial(domain: GridDomain, values: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Second-order derivative of ``values`` along ``axis`` on the masked nodes.

    Central differences where both neighbours are masked, one-sided
    three-point stencils at the rim.  Nodes with no admissible stencil are
    returned in the second output and filled by linear extrapolation of the
    derivative from their neighbours along the other axis.
    """
    st = _stencils(domain.mask, axis)
    h = domain.h
    v = values
    e = lambda m: m.reshape(m.shape + (1,) * (v.ndim - 2))  # noqa: E731
    sh = lambda k: _shift(v, k, axis)  # noqa: E731
    d = np.zeros_like(v)
    d = np.where(e(st.central), (sh(1) - sh(-1)) / (2 * h), d)
    d = np.where(e(st.fwd), (-3 * v + 4 * sh(1) - sh(2)) / (2 * h), d)
    d = np.where(e(st.bwd), (3 * v - 4 * sh(-1) + sh(-2)) / (2 * h), d)
    flagged = st.flagged.copy()
    if np.any(flagged):
        d = _extrapolate(domain, d, flagged, other=1 - axis, values=v, axis=axis)
    return d, flagged


def _extrapolate(domain, d, flagged, other, values, axis):
    valid = domain.mask & ~flagged
    todo = flagged.copy()
    for _ in range(4):
        if not np.any(todo):
            break
        for k in (1, -1):
            n1 = _shift(valid, k, other, False)
            n2 = _shift(valid, 2 * k, other, False)
            ok = todo & n1 & n2
            if np.any(ok):
                guess = 2 * _shift(d, k, other) - _shift(d, 2 * k, other)
                d = np.where(ok[..., None] if d.ndim > 2 else ok, guess, d)
                valid = valid | ok
                todo = todo & ~ok
    if np.any(todo):
        # single-neighbour first-order difference as the last resort
        h = domain.h
        p1 = _shift(domain.mask, 1, axis, False)
        m1 = _shift(domain.mask, -1, axis, False)
        sel = lambda m: m[..., None] if d.ndim > 2 else m  # noqa: E731
        d = np.where(sel(todo & p1), (_shift(values, 1, axis) - values) / h, d)
        d = np.where(sel(todo & ~p1 & m1), (values - _shift(values, -1, axis)) / h, d)
    return d


def flagged_nodes(domain: GridDomain) -> np.ndarray:
    """Nodes whose derivative in some direction is not a standard stencil."""
    return _stencils(domain.mask, 0).flagged | _stencils(domain.mask, 1).flagged


def differential(f: QField) -> QOneForm:
    fx, _ = partial(f.domain, f.values, 0)
    fy, _ = partial(f.domain, f.values, 1)
    return QOneForm(f.domain, fx, fy)


def pullback_J(w: QOneForm) -> QOneForm:
    """``omega o J`` with ``J d/dx = d/dy`` and ``J d/dy = -d/dx``."""
    return QOneForm(w.domain, w.wy, -w.wx)


def wedge(w: QOneForm, s: QOneForm) -> QTwoForm:
    """``(w ^ s)(d/dx, d/dy) = w_x s_y - w_y s_x``, products in written order."""
    return QTwoForm(w.domain, Q.qmul(w.wx, s.wy) - Q.qmul(w.wy, s.wx))


def _trap_average(domain: GridDomain, v: np.ndarray, axis: int) -> np.ndarray:
    """``(v[i-1] + 2 v[i] + v[i+1]) / 4`` where both neighbours exist, else ``v``."""
    st = _stencils(domain.mask, axis)
    avg = (_shift(v, -1, axis) + 2 * v + _shift(v, 1, axis)) / 4
    return np.where(st.central[..., None], avg, v)


def ext_d(w: QOneForm) -> QTwoForm:
    """Exterior derivative as a cell circulation density.

    Interior nodes use the circulation of ``w`` around the ``2h`` square
    centred on the node with trapezoidal edge sums, divided by the square's
    area.  Rim nodes fall back to the plain difference ``d_x w_y - d_y w_x``.
    """
    dom = w.domain
    dxwy, _ = partial(dom, w.wy, 0)
    dywx, _ = partial(dom, w.wx, 1)
    stx = _stencils(dom.mask, 0).central
    sty = _stencils(dom.mask, 1).central
    interior = (stx & sty)[..., None]
    circ = _trap_average(dom, dxwy, 1) - _trap_average(dom, dywx, 0)
    return QTwoForm(dom, np.where(interior, circ, dxwy - dywx))


def ext_d_lower_order(domain: GridDomain) -> np.ndarray:
    """Masked nodes where :func:`ext_d` is only first order.

    A node is second order when it and its eight neighbours all carry
    central stencils in both directions.
    """
    both = _stencils(domain.mask, 0).central & _stencils(domain.mask, 1).central
    good = both.copy()
    for k in (-1, 1):
        for axis in (0, 1):
            good &= _shift(both, k, axis, False)
        good &= _shift(_shift(both, k, 0, False), 1, 1, False)
        good &= _shift(_shift(both, k, 0, False), -1, 1, False)
    return domain.mask & ~good


# ---------------------------------------------------------------- quadrature


def integrate_2form(mu: QTwoForm, r: float | None = None) -> np.ndarray:
    """Integral of the density over the sub-disk of radius ``r``."""
    w = mu.domain.weights(r)
    return np.tensordot(w, mu.density, axes=([0, 1], [0, 1]))


def integrate_scalar(domain: GridDomain, g: np.ndarray, r: float | None = None) -> float:
    w = domain.weights(r)
    return float(np.sum((w * np.where(domain.mask, g, 0.0)).ravel()))


def l2_inner(w1: QOneForm, w2: QOneForm, r: float | None = None) -> float:
    """Symmetric L2 pairing; real part of ``-1/2 int (w1 ^ conj(w2) o J + w2 ^ conj(w1) o J)``."""
    t1 = wedge(w1, pullback_J(w2.conj()))
    t2 = wedge(w2, pullback_J(w1.conj()))
    total = integrate_2form(QTwoForm(w1.domain, -0.5 * (t1.density + t2.density)), r)
    return float(total[0])


def l2_norm2(w: QOneForm, r: float | None = None) -> float:
    return l2_inner(w, w, r)


def _clipped_moments(x0, x1, y0, y1, cx, cy, r, pmax):
    """Moments ``int (x-cx)^p (y-cy)^q`` over ``[x0,x1]x[y0,y1]`` intersected with the disk of radius ``r``.

    Vectorized over boxes.  The x-integral is split where the chord bounds
    change form and integrated by Gauss-Legendre; the y-integral is exact.
    """
    nb = x0.shape[0]
    cand = [x0, x1]
    for yy in (y0, y1):
        s = np.sqrt(np.maximum(r * r - yy * yy, 0.0))
        cand += [s, -s]
    cand += [np.full(nb, r), np.full(nb, -r)]
    pts = np.stack([np.clip(c, x0, x1) for c in cand], axis=1)
    pts.sort(axis=1)
    a, b = pts[:, :-1], pts[:, 1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    xg = mid[..., None] + half[..., None] * _GAUSS_X
    wg = half[..., None] * _GAUSS_W
    s = np.sqrt(np.maximum(r * r - xg * xg, 0.0))
    lo = np.maximum(y0[:, None, None], -s)
    hi = np.minimum(y1[:, None, None], s)
    live = hi > lo
    cyb = cy[:, None, None]
    cxb = cx[:, None, None]
    out = np.zeros((nb, pmax + 1, pmax + 1))
    for q in range(pmax + 1):
        yint = np.where(live, ((hi - cyb) ** (q + 1) - (lo - cyb) ** (q + 1)) / (q + 1), 0.0)
        for p in range(pmax + 1):
            out[:, p, q] = np.sum(wg * yint * (xg - cxb) ** p, axis=(1, 2))
    return out


_BILIN = np.array([[0.5, -1.0], [0.5, 1.0]])  # rows: corner 0/1, cols: coefficient of t^0, t^1 (t scaled by h)


def _disk_weights(domain: GridDomain, r: float) -> np.ndarray:
    """Positive quadrature weights for ``int_{D_r} g``.

    Full 2h x 2h macro cells inside the disk get tensor Simpson weights; any
    cell crossing the circle is split into h x h cells integrated with the
    bilinear interpolant over the clipped region.
    """
    n, h, xs, mask = domain.n, domain.h, domain.xs, domain.mask
    W = np.zeros((n, n))
    simpson = (n - 1) % 2 == 0
    sub_cells = []
    if simpson:
        s1 = np.array([1.0, 4.0, 1.0]) * (h / 3)
        sw = np.outer(s1, s1)
        for P in range(0, n - 2, 2):
            for Qi in range(0, n - 2, 2):
                xa, xb, ya, yb = xs[P], xs[P + 2], xs[Qi], xs[Qi + 2]
                near = math.hypot(min(max(0.0, xa), xb), min(max(0.0, ya), yb))
                if near >= r:
                    continue
                far = max(math.hypot(x, y) for x in (xa, xb) for y in (ya, yb))
                if far <= r and mask[P : P + 3, Qi : Qi + 3].all():
                    W[P : P + 3, Qi : Qi + 3] += sw
                else:
                    for dp in (0, 1):
                        for dq in (0, 1):
                            sub_cells.append((P + dp, Qi + dq))
    else:
        for P in range(n - 1):
            for Qi in range(n - 1):
                sub_cells.append((P, Qi))
    if not sub_cells:
        return W
    cells = np.array(sub_cells)
    x0 = xs[cells[:, 0]]
    y0 = xs[cells[:, 1]]
    near = np.hypot(np.clip(0.0, x0, x0 + h), np.clip(0.0, y0, y0 + h))
    keep = near < r
    cells, x0, y0 = cells[keep], x0[keep], y0[keep]
    if cells.size == 0:
        return W
    m = _clipped_moments(x0, x0 + h, y0, y0 + h, x0 + h / 2, y0 + h / 2, r, 1)
    # scale local moments to t = (x - cx)/h
    m[:, 1, :] /= h
    m[:, :, 1] /= h
    for a in (0, 1):
        for b in (0, 1):
            w_ab = sum(_BILIN[a, p] * _BILIN[b, q] * m[:, p, q] for p in (0, 1) for q in (0, 1))
            ii = cells[:, 0] + a
            jj = cells[:, 1] + b
            ok = mask[ii, jj]
            np.add.at(W, (ii[ok], jj[ok]), w_ab[ok])
            if np.any(~ok):
                _reassign(W, mask, cells[~ok], w_ab[~ok])
    return W


def _reassign(W, mask, cells, weights):
    """Move weight owed to an unmasked corner onto a masked corner of the same cell."""
    for (P, Qi), w in zip(cells, weights):
        if w == 0:
            continue
        corners = [(P + a, Qi + b) for a in (0, 1) for b in (0, 1) if mask[P + a, Qi + b]]
        if not corners:
            idx = np.argwhere(mask)
            d = np.hypot(idx[:, 0] - P - 0.5, idx[:, 1] - Qi - 0.5)
            corners = [tuple(idx[int(np.argmin(d))])]
        c = corners[0]
        W[c] += w


# ---------------------------------------------------------------- path integrals


class PathError(ValueError):
    pass


def _bilinear(domain: GridDomain, arr: np.ndarray, x: float, y: float) -> np.ndarray:
    h = domain.h
    u = (x + domain.radius) / h
    v = (y + domain.radius) / h
    i = min(max(int(math.floor(u)), 0), domain.n - 2)
    j = min(max(int(math.floor(v)), 0), domain.n - 2)
    if not domain.mask[i : i + 2, j : j + 2].all():
        raise PathError(f"path leaves the sampled domain near ({x:.6g}, {y:.6g})")
    s, t = u - i, v - j
    return (
        (1 - s) * (1 - t) * arr[i, j]
        + s * (1 - t) * arr[i + 1, j]
        + (1 - s) * t * arr[i, j + 1]
        + s * t * arr[i + 1, j + 1]
    )


def integrate_path(w: QOneForm, path) -> np.ndarray:
    """Line integral of ``w`` along a polyline of ``(x, y)`` vertices.

    Each segment is cut into pieces no longer than ``h / 2`` and sampled at
    piece midpoints with bilinear interpolation of the coefficients.  Sums are
    exactly rounded, so reversing the path negates the result exactly.
    """
    dom = w.domain
    pts = [tuple(map(float, p)) for p in path]
    terms: list[np.ndarray] = []
    for (xa, ya), (xb, yb) in zip(pts[:-1], pts[1:]):
        length = math.hypot(xb - xa, yb - ya)
        if length == 0:
            continue
        m = max(1, int(math.ceil(2 * length / dom.h)))
        dx, dy = (xb - xa) / m, (yb - ya) / m
        for s in range(m):
            # the midpoint of piece s, computed symmetrically in both directions
            t = (2 * s + 1) / (2 * m)
            xm = xa + (xb - xa) * t if t <= 0.5 else xb - (xb - xa) * (1 - t)
            ym = ya + (yb - ya) * t if t <= 0.5 else yb - (yb - ya) * (1 - t)
            terms.append(_bilinear(dom, w.wx, xm, ym) * dx + _bilinear(dom, w.wy, xm, ym) * dy)
    if not terms:
        return np.zeros(4)
    stacked = np.array(terms)
    return np.array([math.fsum(stacked[:, c]) for c in range(4)])


def staircase_integral(w: QOneForm, base: tuple[int, int] | None = None, base_value=None) -> QField:
    """Primitive of ``w`` along x-then-y lattice staircases from ``base``.

    Trapezoidal sums along the base row, then up and down every column.
    """
    dom = w.domain
    i0, j0 = dom.center if base is None else base
    if not dom.mask[i0, j0]:
        raise PathError("base point is outside the domain")
    h = dom.h
    F = np.zeros((dom.n, dom.n, 4))
    F[i0, j0] = Q.asq(0.0 if base_value is None else base_value)
    # along the base row
    row = dom.mask[:, j0]
    for i in range(i0 + 1, dom.n):
        if not row[i]:
            break
        F[i, j0] = F[i - 1, j0] + 0.5 * h * (w.wx[i - 1, j0] + w.wx[i, j0])
    for i in range(i0 - 1, -1, -1):
        if not row[i]:
            break
        F[i, j0] = F[i + 1, j0] - 0.5 * h * (w.wx[i + 1, j0] + w.wx[i, j0])
    # up and down every column, vectorized across columns
    reached = np.zeros((dom.n, dom.n), dtype=bool)
    reached[:, j0] = _contiguous(row, i0)
    alive = reached[:, j0].copy()
    for j in range(j0 + 1, dom.n):
        alive = alive & dom.mask[:, j]
        F[alive, j] = F[alive, j - 1] + 0.5 * h * (w.wy[alive, j - 1] + w.wy[alive, j])
        reached[:, j] = alive
    alive = reached[:, j0].copy()
    for j in range(j0 - 1, -1, -1):
        alive = alive & dom.mask[:, j]
        F[alive, j] = F[alive, j + 1] - 0.5 * h * (w.wy[alive, j + 1] + w.wy[alive, j])
        reached[:, j] = alive
    if np.any(dom.mask & ~reached):
        raise PathError("some masked nodes are not reachable by a lattice staircase")
    return QField(dom, F)


def _contiguous(row: np.ndarray, i0: int) -> np.ndarray:
    out = np.zeros_like(row)
    i = i0
    while i < row.size and row[i]:
        out[i] = True
        i += 1
    i = i0
    while i >= 0 and row[i]:
        out[i] = True
        i -= 1
    return out
