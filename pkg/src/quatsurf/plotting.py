"""Static figures written next to CLI reports (Agg backend, no display)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .calculus import GridDomain, QField  # noqa: E402
from .conformal import GaussPair  # noqa: E402

# PNG metadata otherwise embeds the matplotlib version string
_META = {"Software": None}


def _image(ax, domain: GridDomain, values: np.ndarray, title: str, cmap="RdBu_r", lim=None):
    data = np.where(domain.mask, values, np.nan)
    r = domain.radius
    if lim is None:
        lim = float(np.nanmax(np.abs(data))) or 1.0
        kw = {"vmin": -lim, "vmax": lim}
    else:
        kw = {"vmin": lim[0], "vmax": lim[1]}
    im = ax.imshow(data.T, origin="lower", extent=(-r, r, -r, r), cmap=cmap, **kw)
    ax.set_title(title, fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])
    return im


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=90, metadata=_META)
    plt.close(fig)
    return path


def gauss_figure(f: QField, gauss: GaussPair, path: Path, title: str = "") -> Path:
    """Imaginary components of N (top row) and N-tilde (bottom row), branch nodes marked."""
    dom = f.domain
    fig, axes = plt.subplots(2, 4, figsize=(11, 5.4), constrained_layout=True)
    for row, (name, field) in enumerate((("N", gauss.N), ("Nt", gauss.Ntilde))):
        for col, comp in enumerate("ijk"):
            _image(axes[row, col], dom, field[..., col + 1], f"{name}_{comp}", lim=(-1, 1))
    speed = np.hypot(np.linalg.norm(gauss.df.wx, axis=-1), np.linalg.norm(gauss.df.wy, axis=-1))
    im = _image(axes[0, 3], dom, speed, "|df|", cmap="viridis", lim=(0.0, float(np.max(speed[dom.mask])) or 1.0))
    fig.colorbar(im, ax=axes[0, 3], shrink=0.8)
    ax = axes[1, 3]
    _image(ax, dom, np.log10(np.maximum(gauss.residual, 1e-16)), "log10 conformality defect",
           cmap="magma", lim=(-16, 0))
    pts = np.argwhere(gauss.branch_mask)
    if len(pts):
        ax.plot(dom.xs[pts[:, 0]], dom.xs[pts[:, 1]], "c+", ms=6)
    if title:
        fig.suptitle(title, fontsize=10)
    return _save(fig, path)


def components_figure(fields: dict[str, QField], path: Path, title: str = "") -> Path:
    """One row per named field showing its four real components."""
    names = list(fields)
    fig, axes = plt.subplots(len(names), 4, figsize=(10, 2.6 * len(names)), constrained_layout=True, squeeze=False)
    for row, name in enumerate(names):
        q = fields[name]
        for col, comp in enumerate("1ijk"):
            _image(axes[row, col], q.domain, q.values[..., col], f"{name}[{comp}]")
    if title:
        fig.suptitle(title, fontsize=10)
    return _save(fig, path)


def bound_figure(rs, areas, bounds, path: Path, title: str = "") -> Path:
    """Area of ``f`` on ``D_r`` against the branch-point bound as ``r`` varies."""
    fig, ax = plt.subplots(figsize=(5.5, 4), constrained_layout=True)
    ax.plot(rs, bounds, "-", color="C1", label="bound")
    ax.plot(rs, areas, "o", color="C0", ms=4, label="area")
    ax.set_xlabel("r")
    ax.set_ylabel("area of f(D_r)")
    ax.set_yscale("log")
    ax.legend()
    if title:
        ax.set_title(title, fontsize=10)
    return _save(fig, path)
