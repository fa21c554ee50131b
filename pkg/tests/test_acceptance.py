"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (lines go straight to the
terminal) or as a script, ``python3 tests/test_acceptance.py``.
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (  # noqa: E402
    AREA_UNIT_DISK,
    BOUND_EXACT,
    BOUND_R,
    CLIFFORD,
    DARBOUX_EXACT,
    DARBOUX_R,
    MAPS,
    TABLE,
)
from quatsurf import quat as Q  # noqa: E402
from quatsurf.calculus import (  # noqa: E402
    GridDomain,
    differential,
    discretize,
    ext_d,
    ext_d_lower_order,
    integrate_path,
    one_form_from_coefficient,
)
from quatsurf.checks import Context, gauge, motion  # noqa: E402
from quatsurf.conformal import area, canonical_factorization  # noqa: E402
from quatsurf.expr import Add, Call, Div, Mul, Neg, Num, Pow, Sub, Sym, evaluate, parse, to_text  # noqa: E402
from quatsurf.superconf import area_bound_report  # noqa: E402
from quatsurf.transforms import area_identity, build_conformal, check_integrability, darboux, spin_transform  # noqa: E402
from quatsurf.twistor import superconformal_test  # noqa: E402

N_GRID = 257
REL = 1e-4
INVARIANCE = 1e-10
SECOND_ORDER = (3.0, 5.0)
SPIN_SEEDS = range(5)
PATH_PAIRS = 10
ROUND_TRIPS = 1000

_domains: dict[int, GridDomain] = {}
_triples: dict[str, object] = {}


def _dom(n=N_GRID):
    if n not in _domains:
        _domains[n] = GridDomain(1.0, n)
    return _domains[n]


def _triple(key):
    if key not in _triples:
        _triples[key] = canonical_factorization(discretize(_dom(), MAPS[key]))
    return _triples[key]


def factorization_round_trip():
    h = _dom().h
    worst = []
    ok = True
    for key in sorted(MAPS):
        t = _triple(key)
        res = t.reconstruction_residual()
        tol = 1e-10 if key == "E1" else 10 * h**2 * t.gauss.df.sup_norm()
        ok &= res <= tol
        worst.append(f"{key}={res:.1e}/{tol:.1e}")
    return ok, " ".join(worst)


def area_identity_eta():
    rels = {}
    for key in sorted(MAPS):
        a_direct, a_eta = area(discretize(_dom(), MAPS[key]), None, _triple(key))
        rels[key] = abs(a_direct - a_eta) / a_eta
        # sanity against the closed form, at discretization accuracy
        assert abs(a_direct - AREA_UNIT_DISK[key]) <= 20 * _dom().h ** 2 * AREA_UNIT_DISK[key]
    worst = max(rels.values())
    return worst <= REL, f"max relative gap {worst:.2e} (tol {REL:g})"


def _spin_chain(dom, seed):
    # lambda = 1 + j(alpha0 + alpha1 z) and mu = beta0 + beta1 z are holomorphic sections for f = z;
    # the constant keeps h = int conj(lambda) dz mu away from zero on the disk
    rng = np.random.default_rng(seed)
    alpha = 0.3 * (rng.normal(size=2) + 1j * rng.normal(size=2))
    beta0 = rng.uniform(1.5, 2.5) * np.exp(2j * np.pi * rng.uniform())
    beta1 = rng.uniform(0.0, 0.5) * np.exp(2j * np.pi * rng.uniform())
    lam = Q.ONE + Q.qmul(Q.J, Q.from_complex(alpha[0] + alpha[1] * dom.Z))
    mu = Q.from_complex(beta0 + beta1 * dom.Z)
    c = (1 + abs(alpha[0]) + abs(alpha[1])) * (abs(beta0) + abs(beta1)) + 1
    f = discretize(dom, "z")
    h = spin_transform(f, lam, mu, constant=c).g
    return area_identity(darboux(f, h, "left"), DARBOUX_R)


def darboux_area_identity():
    dom = _dom()
    rec = darboux(discretize(dom, "z"), discretize(dom, "z + 2"), "left", constant=2.0)
    ai = area_identity(rec, DARBOUX_R)
    ok = abs(ai.lhs - DARBOUX_EXACT) <= REL * DARBOUX_EXACT and abs(ai.rhs - DARBOUX_EXACT) <= REL * DARBOUX_EXACT
    gaps = [_spin_chain(dom, s).relative_gap for s in SPIN_SEEDS]
    ok &= max(gaps) <= REL
    return ok, f"lhs={ai.lhs:.10f} rhs={ai.rhs:.10f} exact={DARBOUX_EXACT:.10f}; spin chains max gap {max(gaps):.1e}"


def area_bound():
    dom = _dom()
    dz = one_form_from_coefficient(dom, np.ones(dom.Z.shape))
    eq = area_bound_report(discretize(dom, "z^2/2"), discretize(dom, "z"), dz, BOUND_R)
    gap = area_bound_report(discretize(dom, "z^2/4 + z^3/6"), discretize(dom, "z*(1 + z)/2"), dz, BOUND_R)
    ok = (
        abs(eq.area - BOUND_EXACT) <= REL * BOUND_EXACT
        and abs(eq.bound - BOUND_EXACT) <= REL * BOUND_EXACT
        and eq.equality_flag
        and gap.relative_gap >= 0.05
        and not gap.equality_flag
    )
    return ok, (
        f"area={eq.area:.10f} bound={eq.bound:.10f} exact={BOUND_EXACT:.10f} equality={eq.equality_flag}; "
        f"strict gap {gap.relative_gap:.1%}"
    )


def classification():
    dom = _dom()
    parts = []
    ok = True
    for expr, want in (("z", True), ("z + j*z^2", True), (CLIFFORD, False)):
        r = superconformal_test(discretize(dom, expr))
        sides = {"left": r.left, "right": r.right}
        if want:
            c = sides[r.witness] if r.witness in sides else r.left
            good = r.super_conformal and c.residual_anti <= c.threshold
        else:
            good = not r.super_conformal and all(c.residual_anti > c.threshold for c in sides.values())
        ok &= good
        name = "Clifford" if expr == CLIFFORD else expr
        parts.append(f"{name}: {r.super_conformal} ({r.witness})")
    return ok, "; ".join(parts)


def _closedness(n, expr):
    dom = _dom(n)
    rho = Q.qnorm(ext_d(differential(discretize(dom, expr))).density)
    return float(np.max(rho[dom.mask & ~ext_d_lower_order(dom)]))


def _integrability(n, expr):
    dom = _dom(n)
    t = canonical_factorization(discretize(dom, expr))
    return check_integrability(dom, t.a, t.b, t.eta_x, t.gauss.branch_mask).residual


def convergence():
    ratios = {}
    for expr in ("exp(z)", "z + j*exp(z)"):
        ratios[f"d(df) {expr}"] = _closedness(129, expr) / _closedness(257, expr)
    for expr in (MAPS["E3"], MAPS["E4"], "exp(z) + j*z^2"):
        ratios[f"integrability {expr}"] = _integrability(129, expr) / _integrability(257, expr)
    lo, hi = SECOND_ORDER
    ok = all(lo <= v <= hi for v in ratios.values())
    return ok, "ratios " + ", ".join(f"{v:.3f}" for v in ratios.values())


def invariance():
    dom = _dom()
    worst = 0.0
    ok = True
    for key in ("E4", "E5"):
        ctx = Context(discretize(dom, MAPS[key]), seed=7)
        ctx._triple = _triple(key)
        g, m = gauge(ctx), motion(ctx)
        ok &= g["passed"] and m["passed"]
        worst = max(worst, *g["max_errors"].values(), *m["max_errors"].values(), m["scaling_eta_error"])
    return ok and worst <= INVARIANCE, f"20 gauges + 20 motions per map, worst error {worst:.1e} (tol {INVARIANCE:g})"


def inversion():
    dom = _dom()
    tol = 10 * dom.h**2
    rng = np.random.default_rng(11)
    dev_worst = path_worst = 0.0
    for key in sorted(MAPS):
        f = discretize(dom, MAPS[key])
        t = _triple(key)
        g = build_conformal(dom, t.a, t.b, t.eta_x, check=False)
        diff = (g.values - f.values)[dom.mask]
        diff -= diff.mean(axis=0)
        dev_worst = max(dev_worst, float(np.max(Q.qnorm(diff))))
        # corners of the L-shaped detours stay inside the disk for |z| < 0.65
        nodes = np.argwhere(dom.mask & (np.abs(dom.Z) < 0.65))
        w = t.reconstruct()
        for _ in range(PATH_PAIRS):
            p, q = (tuple(nodes[i]) for i in rng.choice(len(nodes), 2, replace=False))
            a, b = (dom.X[p], dom.Y[p]), (dom.X[q], dom.Y[q])
            routes = [[a, b], [a, (b[0], a[1]), b], [a, (a[0], b[1]), b]]
            vals = [integrate_path(w, r) for r in routes] + [g.values[q] - g.values[p]]
            path_worst = max(path_worst, max(float(Q.qnorm(v - vals[0])) for v in vals[1:]))
    ok = dev_worst <= tol and path_worst <= tol
    return ok, f"max deviation {dev_worst:.1e}, path spread {path_worst:.1e} (tol {tol:.1e})"


_SYMS = ["i", "j", "k", "pi", "z", "zbar", "x", "y", "r"]
_FUNCS = ["conj", "re", "im", "exp"]


def _random_ast(rng, depth=0):
    if depth >= 5 or rng.uniform() < 0.3:
        if rng.uniform() < 0.5:
            return Num(float(rng.choice([0.0, 1.0, 0.5, 2.5e-7, 1e6, rng.uniform(0, 1e3)])))
        return Sym(str(rng.choice(_SYMS)))
    kind = rng.integers(7)
    if kind < 4:
        op = (Add, Sub, Mul, Div)[kind]
        return op(_random_ast(rng, depth + 1), _random_ast(rng, depth + 1))
    if kind == 4:
        return Neg(_random_ast(rng, depth + 1))
    if kind == 5:
        return Call(str(rng.choice(_FUNCS)), _random_ast(rng, depth + 1))
    return Pow(_random_ast(rng, depth + 1), int(rng.integers(-4, 7)))


def parser():
    rng = np.random.default_rng(2024)
    bad = sum(parse(to_text(node)) != node for node in (_random_ast(rng) for _ in range(ROUND_TRIPS)))
    wrong = 0
    for (u, v), (sign, unit) in TABLE.items():
        wrong += not np.array_equal(evaluate(parse(f"{u}*{v}"), 0.3 - 0.2j), sign * Q.BASIS[unit])
    return bad == 0 and wrong == 0, f"{ROUND_TRIPS - bad}/{ROUND_TRIPS} round trips exact, {16 - wrong}/16 products"


CRITERIA = [
    (1, "factorization round trip", factorization_round_trip),
    (2, "area identity via eta", area_identity_eta),
    (3, "Darboux area identity", darboux_area_identity),
    (4, "super-conformal area bound", area_bound),
    (5, "super-conformal classification", classification),
    (6, "second-order convergence", convergence),
    (7, "gauge and motion invariance", invariance),
    (8, "representation inversion", inversion),
    (9, "parser correctness", parser),
]


def evaluate_criterion(fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return bool(ok), detail, time.perf_counter() - t0


def _line(num, title, ok, detail, secs):
    return f"{'PASS' if ok else 'FAIL'} criterion {num} ({title}): {detail} [{secs:.1f}s]"


@pytest.fixture
def say(request):
    reporter = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(text):
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(text)
        else:
            print(text)

    return emit


@pytest.mark.parametrize("num, title, fn", CRITERIA, ids=[f"criterion{c[0]}" for c in CRITERIA])
def test_criterion(num, title, fn, say):
    ok, detail, secs = evaluate_criterion(fn)
    say(_line(num, title, ok, detail, secs))
    assert ok, detail
    assert secs < 30


if __name__ == "__main__":
    results = []
    for num, title, fn in CRITERIA:
        ok, detail, secs = evaluate_criterion(fn)
        results.append(ok)
        print(_line(num, title, ok, detail, secs), flush=True)
    sys.exit(0 if all(results) else 1)
