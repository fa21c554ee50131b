"""Named invariant checks run by ``quatsurf verify``.

Each check takes a :class:`Context` and returns a JSON-ready dict with at
least ``passed`` (bool) and the measured values next to their thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quat as Q
from .calculus import QField
from .conformal import (
    FactorizationTriple,
    GaussPair,
    NonConformalError,
    apply_motion,
    area,
    area_direct,
    canonical_factorization,
    conformality_residual,
    gauss_maps,
)
from .transforms import check_integrability
from .twistor import TwistorLiftData, lift_holomorphy, superconformal_test, threshold

AREA_TOL = 1e-4
INVARIANCE_TOL = 1e-10
RANDOM_TRIALS = 20
# same gate as the factorization routines
MAX_CONFORMAL = 0.25


@dataclass
class Context:
    f: QField
    tol_scale: float = 1.0
    seed: int = 0
    _gauss: GaussPair | None = field(default=None, repr=False)
    _triple: FactorizationTriple | None = field(default=None, repr=False)

    @property
    def gauss(self) -> GaussPair:
        if self._gauss is None:
            self._gauss = gauss_maps(self.f)
        return self._gauss

    @property
    def triple(self) -> FactorizationTriple:
        if self._triple is None:
            self._triple = canonical_factorization(self.f, self.gauss)
        return self._triple

    @property
    def h(self) -> float:
        return self.f.domain.h


def conformal(ctx: Context) -> dict:
    res = conformality_residual(ctx.f, ctx.gauss)
    tol = threshold(ctx.h, ctx.tol_scale)
    return {
        "passed": res <= tol,
        "residual": res,
        "threshold": tol,
        "branch_nodes": int(np.sum(ctx.gauss.branch_mask)),
    }


def factorization(ctx: Context) -> dict:
    t = ctx.triple
    scale = ctx.gauss.df.sup_norm()
    res = t.reconstruction_residual()
    tol = ctx.tol_scale * max(10 * ctx.h**2 * scale, 1e-10)
    return {"passed": res <= tol, "residual": res, "threshold": tol, "sup_df": scale}


def area_identity_eta(ctx: Context) -> dict:
    a_direct, a_eta = area(ctx.f, None, ctx.triple)
    rel = abs(a_direct - a_eta) / max(a_eta, 1e-300)
    tol = AREA_TOL * ctx.tol_scale
    return {"passed": rel <= tol, "area_direct": a_direct, "area_eta": a_eta, "relative_gap": rel, "threshold": tol}


def superconformal(ctx: Context) -> dict:
    r = superconformal_test(ctx.f, ctx.tol_scale, ctx.gauss)
    out = r.as_dict()
    out["passed"] = r.super_conformal
    return out


def lift(ctx: Context) -> dict:
    res = conformality_residual(ctx.f, ctx.gauss)
    if res > MAX_CONFORMAL:
        raise NonConformalError(f"map is not conformal (residual {res:.3e})", res)
    data = TwistorLiftData.from_map(ctx.f, ctx.gauss)
    rep = lift_holomorphy(data, ctx.tol_scale)
    out = rep.as_dict()
    tol = ctx.tol_scale * 1e-8
    out["lift_threshold"] = tol
    out["passed"] = rep.consistent and rep.lift_residual <= tol
    return out


def integrability(ctx: Context) -> dict:
    t = ctx.triple
    rep = check_integrability(ctx.f.domain, t.a, t.b, t.eta_x, ctx.gauss.branch_mask, ctx.tol_scale)
    out = rep.as_dict()
    out["passed"] = rep.ok
    return out


def _phases(rng: np.random.Generator, dom) -> np.ndarray:
    """A smooth random U(1) field ``exp(i theta)``."""
    c = rng.normal(size=4)
    theta = c[0] * np.pi + c[1] * dom.X + c[2] * dom.Y + c[3] * dom.X * dom.Y
    return np.exp(1j * theta)


def gauge(ctx: Context) -> dict:
    """Random U(1) regauges leave ``a k eta b^-1``, N, N-tilde, ``|eta|`` and the area unchanged."""
    t = ctx.triple
    dom = ctx.f.domain
    m, reg = dom.mask, ctx.gauss.regular
    rng = np.random.default_rng(ctx.seed)
    base = t.reconstruct()
    na, nb = Q.hopf(t.a), Q.hopf(t.b)
    _, a_eta = area(ctx.f, None, t)
    worst = {"reconstruction": 0.0, "N": 0.0, "Ntilde": 0.0, "eta_modulus": 0.0, "area": 0.0}
    for _ in range(RANDOM_TRIALS):
        t2 = t.regauge(_phases(rng, dom), _phases(rng, dom))
        rec = t2.reconstruct()
        worst["reconstruction"] = max(
            worst["reconstruction"],
            float(np.max(np.maximum(Q.qnorm(rec.wx - base.wx), Q.qnorm(rec.wy - base.wy))[m])),
        )
        worst["N"] = max(worst["N"], float(np.max(Q.qnorm(Q.hopf(t2.a) - na)[m])))
        worst["Ntilde"] = max(worst["Ntilde"], float(np.max(Q.qnorm(Q.hopf(t2.b) - nb)[m])))
        worst["eta_modulus"] = max(worst["eta_modulus"], float(np.max(np.abs(np.abs(t2.eta_x) - np.abs(t.eta_x))[reg])))
        _, a2 = area(ctx.f, None, t2)
        worst["area"] = max(worst["area"], abs(a2 - a_eta) / max(a_eta, 1e-300))
    tol = INVARIANCE_TOL * ctx.tol_scale
    return {"passed": max(worst.values()) <= tol, "trials": RANDOM_TRIALS, "max_errors": worst, "threshold": tol}


def _unit(rng: np.random.Generator) -> np.ndarray:
    return Q.qnormalize(rng.normal(size=4))


def motion(ctx: Context) -> dict:
    """Random unit motions ``lam f mu^-1 + nu`` and the scaling ``lam = 2``."""
    t = ctx.triple
    rng = np.random.default_rng(ctx.seed)
    a0 = area_direct(ctx.f, None, ctx.gauss.df)
    worst = {"N": 0.0, "Ntilde": 0.0, "eta_modulus": 0.0, "area": 0.0}
    for _ in range(RANDOM_TRIALS):
        rep = apply_motion(ctx.f, _unit(rng), _unit(rng), rng.normal(size=4), t)
        worst["N"] = max(worst["N"], rep.N_error)
        worst["Ntilde"] = max(worst["Ntilde"], rep.Ntilde_error)
        worst["eta_modulus"] = max(worst["eta_modulus"], rep.eta_modulus_error)
        worst["area"] = max(worst["area"], abs(area_direct(rep.moved) - a0) / max(a0, 1e-300))
    scaled = apply_motion(ctx.f, 2.0 * Q.ONE, Q.ONE, 0.0, t)
    tol = INVARIANCE_TOL * ctx.tol_scale
    ok = max(worst.values()) <= tol and scaled.eta_modulus_error <= tol
    return {
        "passed": ok,
        "trials": RANDOM_TRIALS,
        "max_errors": worst,
        "scaling_eta_error": scaled.eta_modulus_error,
        "threshold": tol,
    }


REGISTRY = {
    "conformal": conformal,
    "factorization": factorization,
    "area_identity_eta": area_identity_eta,
    "superconformal": superconformal,
    "lift": lift,
    "integrability": integrability,
    "gauge": gauge,
    "motion": motion,
}


def run(name: str, ctx: Context) -> dict:
    """Run one check; a non-conformal map fails the checks that need a factorization."""
    try:
        return REGISTRY[name](ctx)
    except NonConformalError as exc:
        return {"passed": False, "error": str(exc), "residual": exc.residual}
