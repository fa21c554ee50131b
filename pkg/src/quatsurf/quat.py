"""Quaternion algebra on numpy arrays.

Quaternions are stored as arrays whose last axis holds ``(w, x, y, z)`` for
``w + x i + y j + z k``.  Every function broadcasts over leading axes, so the
same code handles a single value and a whole sampled field.

The oriented frame of R^4 used throughout the package is ``(1, i, k, j)``;
the product itself is the ordinary Hamilton product (``ij = k``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALG_TOL = 1e-12
UNIT_TOL = 1e-9
GAUGE_FALLBACK = 1e-6


class NormalizationError(ValueError):
    """A quaternion that should be a unit is too far from one."""


class PoleError(ValueError):
    """The stereographic chart was asked for its pole."""


ONE = np.array([1.0, 0.0, 0.0, 0.0])
I = np.array([0.0, 1.0, 0.0, 0.0])
J = np.array([0.0, 0.0, 1.0, 0.0])
K = np.array([0.0, 0.0, 0.0, 1.0])
BASIS = {"1": ONE, "i": I, "j": J, "k": K}


def asq(q) -> np.ndarray:
    """Coerce ``q`` to a float quaternion array (complex scalars embed as w + x i)."""
    if isinstance(q, Quaternion):
        return q.array
    arr = np.asarray(q)
    if np.iscomplexobj(arr):
        return from_complex(arr)
    if arr.ndim == 0:
        return np.array([float(arr), 0.0, 0.0, 0.0])
    arr = arr.astype(float, copy=False)
    if arr.shape[-1] != 4:
        raise ValueError(f"quaternion arrays need a trailing axis of length 4, got {arr.shape}")
    return arr


def from_complex(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    out = np.zeros(c.shape + (4,))
    out[..., 0] = c.real
    out[..., 1] = c.imag
    return out


def to_complex(q: np.ndarray) -> np.ndarray:
    """Project onto the complex subalgebra spanned by 1 and i."""
    return q[..., 0] + 1j * q[..., 1]


def qmul(p, q) -> np.ndarray:
    p = asq(p)
    q = asq(q)
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def qprod(*factors) -> np.ndarray:
    """Product of the factors in the written order."""
    out = asq(factors[0])
    for f in factors[1:]:
        out = qmul(out, f)
    return out


def qconj(q) -> np.ndarray:
    q = asq(q)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qnorm2(q) -> np.ndarray:
    q = asq(q)
    return np.sum(q * q, axis=-1)


def qnorm(q) -> np.ndarray:
    return np.sqrt(qnorm2(q))


def qinv(q) -> np.ndarray:
    q = asq(q)
    return qconj(q) / qnorm2(q)[..., None]


def qnormalize(q) -> np.ndarray:
    q = asq(q)
    return q / qnorm(q)[..., None]


def qre(q) -> np.ndarray:
    q = asq(q)
    out = np.zeros_like(q)
    out[..., 0] = q[..., 0]
    return out


def qim(q) -> np.ndarray:
    q = asq(q)
    out = q.copy()
    out[..., 0] = 0.0
    return out


def qexp(q) -> np.ndarray:
    q = asq(q)
    v = q[..., 1:]
    theta = np.sqrt(np.sum(v * v, axis=-1))
    # sin(t)/t written via np.sinc to stay finite at t = 0
    s = np.sinc(theta / np.pi)
    ew = np.exp(q[..., 0])
    out = np.empty_like(q)
    out[..., 0] = ew * np.cos(theta)
    out[..., 1:] = (ew * s)[..., None] * v
    return out


def require_unit(q, tol: float = UNIT_TOL) -> np.ndarray:
    """Return ``q`` renormalized, or raise if it is not a unit within ``tol``."""
    q = asq(q)
    dev = np.abs(qnorm(q) - 1.0)
    if np.any(dev > tol):
        raise NormalizationError(f"expected unit quaternion, |q| deviates by {float(np.max(dev)):.3e}")
    return qnormalize(q)


def hopf(a) -> np.ndarray:
    """Hopf projection ``a i a^-1`` of unit quaternions onto S^2."""
    a = require_unit(a)
    return qprod(a, I, qconj(a))


def rotate_phi(a, b, v) -> np.ndarray:
    """The SO(4) action ``v -> a v b^-1`` of a pair of unit quaternions."""
    a = require_unit(a)
    b = require_unit(b)
    return qprod(a, v, qconj(b))


def stereo_forward(w) -> np.ndarray:
    """Holomorphic chart of S^2 minus ``k``; ``0 -> -k`` and ``1 -> i``."""
    w = np.asarray(w, dtype=complex)
    m = np.abs(w) ** 2
    out = np.zeros(w.shape + (4,))
    out[..., 1] = 2 * w.real / (m + 1)
    out[..., 2] = 2 * w.imag / (m + 1)
    out[..., 3] = (m - 1) / (m + 1)
    return out


def stereo_inverse(n, pole_tol: float = ALG_TOL) -> np.ndarray:
    """Chart coordinate of a point of S^2; raises at the pole ``k``."""
    n = asq(n)
    denom = 1.0 - n[..., 3]
    if np.any(denom <= pole_tol):
        raise PoleError("stereographic inverse evaluated at the pole k")
    return (n[..., 1] + 1j * n[..., 2]) / denom


def stereo_inverse_masked(n, pole_tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`stereo_inverse` but returns ``(w, ok)`` and leaves pole nodes at 0."""
    n = asq(n)
    denom = 1.0 - n[..., 3]
    ok = denom > pole_tol
    safe = np.where(ok, denom, 1.0)
    w = np.where(ok, (n[..., 1] + 1j * n[..., 2]) / safe, 0.0)
    return w, ok


def solve_gauge(n, side: str = "left", axis=None) -> np.ndarray:
    """Unit quaternion ``a`` with ``-a i a^-1 = n``.

    The same section serves both sides: ``side='left'`` is read as a lift of
    N and ``side='right'`` as a lift of N-tilde.  The representative is
    ``normalize(1 + n i)``; within ``GAUGE_FALLBACK`` of ``n = i`` it switches to
    the composite rotation ``i -> k -> -n``, sign-fixed so that ``n = i`` gives ``j``.

    ``axis`` moves the singular point of the section from ``i`` to the given
    unit imaginary quaternion ``p``: with ``R i R^-1 = p`` the result is
    ``R s(R^-1 n R)``.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if axis is not None:
        R = solve_gauge(-qnormalize(qim(axis)))
        inner = solve_gauge(qprod(qconj(R), n, R))
        return qnormalize(qmul(R, inner))
    n = qnormalize(qim(n))
    primary = ONE + qmul(n, I)
    pn = qnorm(primary)
    fallback = -qmul(ONE + qmul(n, K), ONE - J)
    use_fb = pn < GAUGE_FALLBACK
    out = np.where(use_fb[..., None], fallback, primary)
    return qnormalize(out)


_AXES = np.array(
    [I, -I, J, -J, K, -K]
    + [np.array([0.0, sx, sy, sz]) / np.sqrt(3.0) for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)]
)


def gauge_axis(n, where=None, clearance: float = 0.25):
    """Singular axis for :func:`solve_gauge` suited to the S^2 field ``n``.

    Returns ``None`` (the default section, singular at ``i``) when the field
    stays ``clearance`` away from ``i`` or is identically ``i``; otherwise
    the candidate axis farthest from the field's values.
    """
    n = asq(n)
    vals = n[where] if where is not None else n.reshape(-1, 4)
    if vals.size == 0:
        return None
    d_i = qnorm(vals - I)
    if np.min(d_i) >= clearance or np.max(d_i) <= GAUGE_FALLBACK:
        return None
    dist = np.array([np.min(qnorm(vals - ax)) for ax in _AXES])
    return _AXES[int(np.argmax(dist))].copy()


def project_v1v2(v, alpha_gauge, beta_gauge) -> tuple[np.ndarray, np.ndarray]:
    """Split ``v`` into the V1 and V2 summands fixed by the two gauges.

    With ``P = a i a^-1`` and ``Q = b i b^-1`` the map ``v -> -P v Q`` is an
    involution whose +1 and -1 eigenspaces are V1 and V2.
    """
    v = asq(v)
    p = hopf(alpha_gauge)
    q = hopf(beta_gauge)
    pvq = qprod(p, v, q)
    return 0.5 * (v - pvq), 0.5 * (v + pvq)


@dataclass(frozen=True)
class Quaternion:
    """A single quaternion value ``w + x i + y j + z k``."""

    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def of(cls, q) -> "Quaternion":
        arr = asq(q)
        return cls(*(float(c) for c in arr))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def __add__(self, other):
        return Quaternion.of(self.array + asq(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Quaternion.of(self.array - asq(other))

    def __rsub__(self, other):
        return Quaternion.of(asq(other) - self.array)

    def __neg__(self):
        return Quaternion.of(-self.array)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion.of(self.array * other)
        return Quaternion.of(qmul(self.array, other))

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion.of(self.array * other)
        return Quaternion.of(qmul(other, self.array))

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion.of(self.array / other)
        return Quaternion.of(qmul(self.array, qinv(other)))

    def __abs__(self):
        return float(qnorm(self.array))

    def conj(self) -> "Quaternion":
        return Quaternion.of(qconj(self.array))

    def inverse(self) -> "Quaternion":
        return Quaternion.of(qinv(self.array))

    def isclose(self, other, tol: float = ALG_TOL) -> bool:
        return bool(qnorm(self.array - asq(other)) <= tol)

    def __str__(self):
        return f"{self.w:+.6g}{self.x:+.6g}i{self.y:+.6g}j{self.z:+.6g}k"
