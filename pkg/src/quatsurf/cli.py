"""Scene-driven command line front end.

Commands:
  verify     run named invariant checks on the scene's surface
  build      integrate a factorization ``(a, b, eta)`` into a surface
  transform  apply the quotient, Darboux and spin transforms listed in the scene
  bound      compare areas of ``f(D_r)`` with the branch-point bound
  export     write the sampled surface and its Gauss maps as CSV

Every command writes a JSON report and a text rendering into the output
directory, plus CSV tables and PNG figures when those formats are enabled.
Exit status: 0 when every check passes, 1 when one fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, checks
from . import quat as Q
from .calculus import DomainError, GridDomain, QField, QOneForm
from .conformal import NoDataError, NonConformalError, conformality_residual, gauss_maps
from .expr import ExprError
from .scene import Scene, SceneError, load, quaternion
from .superconf import HypothesisError, area_bound_report, default_factorization
from .transforms import (
    TransformError,
    _match_tol,
    area_identity,
    build_conformal,
    check_integrability,
    darboux,
    quotient_transform,
    spin_transform,
)
from .twistor import threshold

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
DEFAULT_CHECKS = ["conformal", "factorization", "area_identity_eta"]
CSV_COLUMNS = ["x", "y", "f_w", "f_x", "f_y", "f_z", "N_x", "N_y", "N_z", "Nt_x", "Nt_y", "Nt_z", "branch"]
AREA_TOL = 1e-4
BOUND_SWEEP = np.linspace(0.1, 1.0, 10)


def _threads() -> int | None:
    raw = os.environ.get("QUATSURF_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise SceneError(f"QUATSURF_THREADS must be a positive integer, got {raw!r}")
    return n


def _clean(obj):
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


class Run:
    """State shared by one command invocation: scene, flags and output sink."""

    def __init__(self, command: str, scene: Scene, args, out_dir: Path, threads: int | None):
        self.command = command
        self.scene = scene
        self.tol = args.tol
        self.seed = args.seed
        self.radii = args.r
        self.out_dir = out_dir
        self.threads = threads
        self.domain = scene.domain()
        opts = scene.output()
        self.stem = opts["stem"]
        self.formats = set(opts["formats"])
        self.results: dict[str, dict] = {}
        self.artifacts: list[str] = []

    # -- surfaces

    def surface(self) -> QField:
        """The scene's map, sampled or built from its factorization."""
        if self.scene.has_map:
            return self.scene.field(self.domain, self.scene.data["map"]["expr"], "scene.map.expr")
        f, info = self.build()
        self.results["build"] = info
        if not info["passed"]:
            raise TransformError(info.get("error", "factorization data is not integrable"), info.get("residual"))
        return f

    def build(self) -> tuple[QField, dict]:
        spec = self.scene.data["factorization"]
        dom = self.domain
        a = self._unit_field(spec["a_expr"], "scene.factorization.a_expr")
        b = self._unit_field(spec["b_expr"], "scene.factorization.b_expr")
        eta = self.scene.complex_field(dom, spec["eta_expr"], "scene.factorization.eta_expr")
        base = dom.index_of(*spec["base_point"]) if "base_point" in spec else None
        if base is not None and not dom.mask[base]:
            raise SceneError("scene.factorization.base_point: lies outside the disk")
        base_value = quaternion(spec.get("base_value", 0.0))
        rep = check_integrability(dom, a, b, eta, tol_scale=self.tol)
        info = {"integrability": rep.as_dict(), "residual": rep.residual, "threshold": rep.threshold, "passed": rep.ok}
        if not rep.ok:
            info["error"] = f"factorization data is not integrable (residual {rep.residual:.3e})"
            return QField(dom, np.zeros((dom.n, dom.n, 4))), info
        f = build_conformal(dom, a, b, eta, base, base_value, check=False)
        return f, info

    def _unit_field(self, text: str, what: str) -> QField:
        q = self.scene.field(self.domain, text, what)
        dev = float(np.max(np.abs(Q.qnorm(q.values) - 1.0)[self.domain.mask]))
        if dev > 1e-8:
            raise SceneError(f"{what} must be unit length (deviation {dev:.3e})")
        return q

    # -- output

    def path(self, suffix: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        p = self.out_dir / f"{self.stem}.{suffix}"
        self.artifacts.append(p.name)
        return p

    def write_surface(self, f: QField, label: str, source: str) -> None:
        if "csv" not in self.formats and "png" not in self.formats:
            return
        g = gauss_maps(f)
        if "csv" in self.formats:
            write_csv(self.path(f"{label}.csv"), f, g)
            meta = {
                "columns": CSV_COLUMNS,
                "rows": int(np.sum(f.domain.mask)),
                "domain": f.domain.describe(),
                "source": source,
                "tolerances": {
                    "tol_scale": self.tol,
                    "threshold": threshold(f.domain.h, self.tol),
                    "branch_eps_max": float(np.max(g.branch_eps[f.domain.mask])),
                },
                "residuals": {
                    "conformality": conformality_residual(f, g),
                    "branch_nodes": int(np.sum(g.branch_mask)),
                },
            }
            self.path(f"{label}.meta.json").write_text(_dumps(meta))
        if "png" in self.formats:
            from .plotting import gauss_figure

            gauss_figure(f, g, self.path(f"{label}.png"), f"{self.stem}: {label}")

    def report(self) -> dict:
        passed = all(r.get("passed", False) for r in self.results.values())
        return _clean(
            {
                "command": self.command,
                "scene": self.scene.name,
                "version": __version__,
                "domain": self.domain.describe(),
                "tol_scale": self.tol,
                "seed": self.seed,
                "threads": self.threads,
                "results": self.results,
                "passed": passed,
                "artifacts": sorted(self.artifacts),
            }
        )


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_csv(path: Path, f: QField, gauss) -> Path:
    """One row per disk node, row-major in ``(x, y)``."""
    dom = f.domain
    m = dom.mask
    cols = [
        dom.X[m],
        dom.Y[m],
        *(f.values[..., c][m] for c in range(4)),
        *(gauss.N[..., c][m] for c in (1, 2, 3)),
        *(gauss.Ntilde[..., c][m] for c in (1, 2, 3)),
    ]
    table = np.column_stack(cols)
    branch = gauss.branch_mask[m].astype(int)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row, br in zip(table, branch):
            fh.write(",".join(repr(float(v)) for v in row) + f",{br}\n")
    return path


def render_text(report: dict) -> str:
    d = report["domain"]
    lines = [
        f"quatsurf {report['command']}  scene={report['scene']}",
        f"grid n={d['n']} radius={d['radius']} h={d['h']:.6g}  tol_scale={report['tol_scale']}  seed={report['seed']}",
    ]
    for name in sorted(report["results"]):
        r = report["results"][name]
        flag = "PASS" if r.get("passed") else "FAIL"
        scalars = []
        for k in sorted(r):
            v = r[k]
            if k == "passed" or isinstance(v, (dict, list)):
                continue
            scalars.append(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}")
        lines.append(f"[{flag}] {name}: " + " ".join(scalars))
    lines.append("overall: " + ("PASS" if report["passed"] else "FAIL"))
    if report["artifacts"]:
        lines.append("artifacts: " + ", ".join(report["artifacts"]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- commands


def cmd_verify(run: Run) -> None:
    f = run.surface()
    names = run.scene.data.get("checks") or DEFAULT_CHECKS
    ctx = checks.Context(f, run.tol, run.seed)
    for name in names:
        run.results[name] = checks.run(name, ctx)
    run.write_surface(f, "surface", _source(run.scene))


def cmd_build(run: Run) -> None:
    if run.scene.has_map:
        raise SceneError("scene: 'build' needs a 'factorization' entry")
    f = run.surface()
    g = gauss_maps(f)
    res = conformality_residual(f, g)
    tol = threshold(run.domain.h, run.tol)
    run.results["conformal"] = {"passed": res <= tol, "residual": res, "threshold": tol}
    expect = run.scene.data.get("expect")
    if expect:
        ref = run.scene.field(run.domain, expect, "scene.expect")
        m = run.domain.mask
        diff = f.values - ref.values
        shift = np.mean(diff[m], axis=0)
        dev = float(np.max(Q.qnorm(diff - shift)[m]))
        tol_e = 10 * run.domain.h**2 * run.tol
        run.results["expect"] = {"passed": dev <= tol_e, "max_deviation": dev, "threshold": tol_e}
    run.write_surface(f, "surface", _source(run.scene))


def _transform(run: Run, f: QField, spec: dict) -> tuple[dict, QField | None]:
    dom = run.domain
    kind = spec["kind"]
    tol = _match_tol(dom.h, run.tol)
    side = spec.get("side", "left")
    if kind == "quotient":
        g = run.scene.field(dom, spec["partner"], "partner")
        q = quotient_transform(f, g, side, run.tol)
        out = q.as_dict()
        out.update(threshold=tol, passed=q.prediction_error <= tol)
        return out, q.h
    if kind == "darboux":
        h = run.scene.field(dom, spec["partner"], "partner")
        rec = darboux(f, h, side, quaternion(spec.get("constant", 0.0)), tol_scale=run.tol)
        ai = area_identity(rec, spec.get("r"))
        out = dict(rec.diagnostics)
        out["area_identity"] = ai.as_dict()
        out["threshold"] = tol
        out["passed"] = (
            rec.diagnostics["backlund"]["ok"]
            and rec.diagnostics["lift_error"] <= tol
            and ai.relative_gap <= AREA_TOL * run.tol
        )
        return out, rec.fhat
    lam = run.scene.field(dom, spec["lambda"], "lambda")
    mu = run.scene.field(dom, spec["mu"], "mu")
    s = spin_transform(f, lam, mu, constant=quaternion(spec.get("constant", 0.0)), tol_scale=run.tol)
    out = s.as_dict()
    out.update(threshold=tol, passed=s.N_error <= tol and s.Ntilde_error <= tol)
    return out, s.g


def cmd_transform(run: Run) -> None:
    specs = run.scene.data.get("transforms") or []
    if not specs:
        raise SceneError("scene: 'transform' needs a non-empty 'transforms' list")
    f = run.surface()
    figures = {"f": f}
    for i, spec in enumerate(specs):
        label = f"transform{i}_{spec['kind']}"
        try:
            out, g = _transform(run, f, spec)
        except (TransformError, NoDataError) as exc:
            out, g = {"passed": False, "error": str(exc), "residual": getattr(exc, "residual", None)}, None
        out["spec"] = spec
        run.results[label] = out
        if g is not None:
            figures[label] = g
            if "csv" in run.formats:
                write_csv(run.path(f"{label}.csv"), g, gauss_maps(g))
    if "png" in run.formats:
        from .plotting import components_figure

        components_figure(figures, run.path("transforms.png"), run.stem)


def _bound_inputs(run: Run, f: QField):
    spec = run.scene.data.get("bound", {})
    has_a, has_z = "atilde_expr" in spec, "zeta_expr" in spec
    if has_a != has_z:
        raise SceneError("scene.bound: give both atilde_expr and zeta_expr, or neither")
    if not has_a:
        at, zeta, _ = default_factorization(f)
        return at, zeta
    dom = run.domain
    at = run.scene.field(dom, spec["atilde_expr"], "scene.bound.atilde_expr")
    q = run.scene.field(dom, spec["zeta_expr"], "scene.bound.zeta_expr").values
    # zeta = dz q, so zeta(d/dy) = i q
    return at, QOneForm(dom, q.copy(), Q.qmul(Q.I, q))


def cmd_bound(run: Run) -> None:
    spec = run.scene.data.get("bound", {})
    radii = run.radii or spec.get("r") or [0.5]
    for r in radii:
        if not 0 < r <= 1:
            raise SceneError(f"--r: radius {r} must lie in (0, 1]")
    f = run.surface()
    try:
        at, zeta = _bound_inputs(run, f)
        reports = [area_bound_report(f, at, zeta, r, run.tol) for r in radii]
    except HypothesisError as exc:
        run.results["bound"] = {"passed": False, "error": str(exc)}
        return
    for rep in reports:
        d = rep.as_dict()
        d["passed"] = rep.within_bound
        run.results[f"bound_r{rep.r:g}"] = d
    if "csv" in run.formats or "png" in run.formats:
        sweep = sorted(set(float(r) for r in BOUND_SWEEP) | set(float(r) for r in radii))
        rows = [area_bound_report(f, at, zeta, r, run.tol) for r in sweep]
        if "csv" in run.formats:
            with open(run.path("bound.csv"), "w") as fh:
                fh.write("r,area,bound,relative_gap,equality_flag\n")
                for rep in rows:
                    fh.write(f"{rep.r!r},{rep.area!r},{rep.bound!r},{rep.relative_gap!r},{int(rep.equality_flag)}\n")
        if "png" in run.formats:
            from .plotting import bound_figure

            bound_figure(sweep, [x.area for x in rows], [x.bound for x in rows], run.path("bound.png"), run.stem)


def cmd_export(run: Run) -> None:
    f = run.surface()
    g = gauss_maps(f)
    res = conformality_residual(f, g)
    run.results["export"] = {
        "passed": True,
        "rows": int(np.sum(run.domain.mask)),
        "conformality_residual": res,
        "branch_nodes": int(np.sum(g.branch_mask)),
    }
    run.formats |= {"csv"}
    run.write_surface(f, "surface", _source(run.scene))


def _source(scene: Scene) -> dict:
    if scene.has_map:
        return {"map": scene.data["map"]["expr"]}
    return {"factorization": scene.data["factorization"]}


HELP = {
    "verify": "run the scene's named checks",
    "build": "integrate the scene's factorization into a surface",
    "transform": "apply the scene's quotient, Darboux and spin transforms",
    "bound": "area of f(D_r) against the branch-point bound",
    "export": "write the surface with N, N-tilde and branch flags as CSV",
}

COMMANDS = {
    "verify": cmd_verify,
    "build": cmd_build,
    "transform": cmd_transform,
    "bound": cmd_bound,
    "export": cmd_export,
}


# ---------------------------------------------------------------- entry point


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quatsurf",
        description="Verify, build and transform conformal maps into quaternions from JSON scenes.",
    )
    parser.add_argument("--version", action="version", version=f"quatsurf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("scene", help="path to a JSON scene file")
        p.add_argument("--grid", type=int, help="override the scene's grid size n (odd)")
        p.add_argument("--tol", type=_positive, default=1.0, help="scale every threshold by this factor")
        p.add_argument("--r", type=float, action="append", help="bound radius, repeatable")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
        p.add_argument("--out", help="output directory (default: scene output.dir or <scene>_out)")
        p.add_argument("--quiet", action="store_true", help="do not print the text report")
    return parser


def _out_dir(args, scene: Scene, scene_path: Path) -> Path:
    if args.out:
        return Path(args.out)
    d = scene.output().get("dir")
    if d:
        p = Path(d)
        return p if p.is_absolute() else scene_path.parent / p
    return scene_path.parent / f"{scene_path.stem}_out"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    scene_path = Path(args.scene)
    try:
        threads = _threads()
        scene = Scene(load(scene_path), args.grid)
        run = Run(args.command, scene, args, _out_dir(args, scene, scene_path), threads)
        try:
            COMMANDS[args.command](run)
        except (TransformError, NonConformalError, NoDataError) as exc:
            run.results.setdefault("error", {"passed": False, "error": str(exc), "residual": getattr(exc, "residual", None)})
    except (SceneError, ExprError, DomainError) as exc:
        print(f"quatsurf: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    json_path = run.path(f"{args.command}.json") if "json" in run.formats else None
    text_path = run.path(f"{args.command}.txt") if "text" in run.formats else None
    report = run.report()
    text = render_text(report)
    if json_path:
        json_path.write_text(_dumps(report))
    if text_path:
        text_path.write_text(text)
    if not args.quiet:
        sys.stdout.write(text)
    return EXIT_OK if report["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
