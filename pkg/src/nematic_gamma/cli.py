"""Command-line front end: relax, extract, e0, profile, recover, validate.

Exit codes: 0 success, 1 configuration, 2 numerical, 3 resources.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time


EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 1, 2, 3


def _exit_code(exc):
    from .config import ConfigError
    from .defects import AmbiguityError, ExtractionResolutionError
    from .limit_energy import ConsistencyError, UnsupportedGeometryError
    from .potentials import NumericalFailure, RegimeError
    from .profile1d import ProfileSolverError
    from .recovery import BudgetError, ConstructionError
    from .relax import NumericPoison, ResolutionError, StepFailure
    if isinstance(exc, (MemoryError, BudgetError)):
        return EXIT_RESOURCE
    if isinstance(exc, (ConfigError, RegimeError, UnsupportedGeometryError, FileNotFoundError)):
        return EXIT_CONFIG
    if isinstance(exc, (NumericPoison, StepFailure, NumericalFailure, ConsistencyError,
                        ProfileSolverError, ConstructionError, AmbiguityError,
                        ExtractionResolutionError, ResolutionError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, OSError):
        return EXIT_RESOURCE
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return EXIT_NUMERIC


class Run:
    """Output directory plus the resolved configuration echo."""

    def __init__(self, cfg, args, command):
        self.cfg = cfg
        self.out = args.out or cfg.output.directory
        os.makedirs(self.out, exist_ok=True)
        self.command = command

    def path(self, name):
        return os.path.join(self.out, name)

    def echo_config(self, **extra):
        from . import __version__
        info = dict(command=self.command, version=__version__)
        info.update(extra)
        self.cfg.dump(self.path("resolved_config.yaml"), info)


def _material(cfg):
    from .potentials import MaterialParams
    m = cfg.material
    return MaterialParams(m.a, m.b, m.c)


def _domain(cfg):
    from .domain import build_box, build_domain
    shape = cfg.shape()
    if shape is None:
        return None, build_box(cfg.box(), cfg.h), None
    grid, mesh = build_domain(shape, cfg.box(), cfg.h)
    return shape, grid, mesh


def _thresholds(cfg):
    from .defects import Thresholds
    e = cfg.extraction
    return Thresholds(e.s_min, e.gap_min, e.dot_min, e.max_excluded)


# --------------------------------------------------------------------------
# subcommands


def cmd_relax(cfg, args):
    from .relax import QField, SolverConfig, minimize, pin_values, save_checkpoint
    from .io import write_csv
    run = Run(cfg, args, "relax")
    reg = cfg.regimes()[0]
    shape, grid, _ = _domain(cfg)
    f = QField.constant(grid, reg)
    pin_values(f, shape)
    s = cfg.solver
    f, rep = minimize(f, SolverConfig(step_rule=s.step_rule, tol=s.tol, max_iter=s.max_iter, dt=s.dt))
    save_checkpoint(run.path("checkpoint.vol"), f)
    rep.write_csv(run.path("trace.csv"))
    last = rep.trace[-1]
    write_csv(run.path("relax_summary.csv"),
              ["iterations", "converged", "grad_norm", "E_total", "eta_E_total", "eta", "xi"],
              [[rep.iterations, int(rep.converged), rep.grad_norm, last["total"],
                reg.eta * last["total"], reg.eta, reg.xi]])
    run.echo_config(eta=reg.eta, xi=reg.xi, grid_shape=list(grid.shape))
    print(f"relax: {rep.iterations} iterations, converged={rep.converged}, "
          f"grad_norm={rep.grad_norm:.3e}, E={last['total']:.10g}")
    return EXIT_OK


def _field_from_checkpoint(cfg, path):
    import numpy as np
    from .config import ConfigError
    from .potentials import RegimeParams
    from .relax import QField, load_checkpoint, pinned_mask
    Q, h, p = load_checkpoint(path)
    shape, grid, mesh = _domain(cfg)
    if Q.shape[:3] != tuple(grid.shape) or abs(h - grid.h) > 1e-12 * max(h, 1.0):
        raise ConfigError(f"checkpoint grid {Q.shape[:3]} h={h} does not match the config grid "
                          f"{tuple(grid.shape)} h={grid.h}")
    beta = None if math.isnan(p["beta"]) else p["beta"]
    reg = RegimeParams(eta=p["eta"], xi=p["xi"], beta=beta, gamma=cfg.regime.gamma,
                       material=_material(cfg))
    pinned = pinned_mask(grid) if shape is not None else np.zeros(grid.shape, bool)
    return QField(Q, grid, reg, pinned), shape, mesh


def cmd_extract(cfg, args):
    from .defects import extract_geometry, sample_Y, write_F, write_S, write_T
    from .io import write_csv
    from .limit_energy import F_region, admissibility_residual
    from .relax import mollify
    if not args.checkpoint:
        from .config import ConfigError
        raise ConfigError("extract needs --checkpoint")
    run = Run(cfg, args, "extract")
    f, shape, mesh = _field_from_checkpoint(cfg, args.checkpoint)
    if cfg.extraction.mollify:
        f = mollify(f, cfg.extraction.mollify)
    y = sample_Y(cfg.extraction.alpha_Y, cfg.extraction.seed)
    geom, lines, surf = extract_geometry(f, y, shape=shape, mesh=mesh, thresholds=_thresholds(cfg),
                                         strict=False)
    write_S(run.path("S.txt"), lines.polylines)
    write_T(run.path("T.obj"), surf)
    h = f.grid.h
    rows = [["S_length", lines.length], ["S_components", len(lines.polylines)],
            ["T_area_bulk", geom.mass_T], ["T_excluded_fraction", surf.excluded_fraction]]
    if mesh is not None:
        F = F_region(mesh, geom.G)
        write_F(run.path("F.obj"), run.path("F.csv"), mesh, F)
        write_csv(run.path("G.csv"), ["vertex", "G"], [[i, int(g)] for i, g in enumerate(geom.G)])
        rows.append(["boundary_residual", admissibility_residual(geom, mesh, match=3 * h)])
    rows.append(["h", h])
    write_csv(run.path("extract_report.csv"), ["quantity", "value"], rows)
    run.echo_config(checkpoint=os.path.abspath(args.checkpoint))
    print(f"extract: S length {lines.length:.6g} in {len(lines.polylines)} pieces, "
          f"T bulk area {geom.mass_T:.6g}")
    return EXIT_OK


def _load_geometry(cfg, args, mesh):
    import numpy as np
    from .config import ConfigError
    from .domain import read_obj
    from .geometry import DefectGeometry
    from .io import read_csv, read_polylines
    from .limit_energy import preset_geometry
    if args.preset:
        if mesh is None:
            raise ConfigError("presets need a particle")
        return preset_geometry(args.preset, mesh)
    S = read_polylines(args.S) if args.S else []
    V, F = read_obj(args.T) if args.T else (np.zeros((0, 3)), np.zeros((0, 3), np.int64))
    G = None
    if args.G:
        if mesh is None:
            raise ConfigError("--G needs a particle")
        header, rows = read_csv(args.G)
        G = np.array([int(r[1]) for r in rows], bool)
        if len(G) != len(mesh.vertices):
            raise ConfigError(f"--G has {len(G)} rows, particle mesh has {len(mesh.vertices)} vertices")
        if header[1] == "F":
            # F = {nu3 > 0} outside G, {nu3 <= 0} inside it
            G = G != (mesh.normals[:, 2] > 0)
        elif header[1] != "G":
            raise ConfigError(f"--G expects a 'G' or 'F' column, got {header[1]!r}")
    return DefectGeometry(S, V, F, G)


def cmd_e0(cfg, args):
    from .domain import surface_mesh
    from .io import write_csv
    from .limit_energy import curvature_diagnostics, e0_total, young_law_residual
    run = Run(cfg, args, "e0")
    shape = cfg.shape()
    mesh = surface_mesh(shape, args.mesh_h or cfg.h) if shape is not None else None
    geom = _load_geometry(cfg, args, mesh)
    m = _material(cfg)
    beta = cfg.regime.beta if cfg.regime.beta is not None else cfg.regimes()[0].beta
    b = e0_total(geom, mesh, m, beta)
    b.write_csv(run.path("e0.csv"))
    rows = []
    if mesh is not None:
        y = young_law_residual(geom, mesh).stats()
        rows += [["young_count", y["count"]], ["young_mean", y["mean"]], ["young_max", y["max"]]]
    c = curvature_diagnostics(geom, m, beta)
    rows += [["T_mean_H", c.T_mean_H], ["T_max_abs_H", c.T_max_abs_H],
             ["degenerate_faces", c.degenerate_faces], ["S_mean_curvature", c.S_mean_kappa],
             ["S_max_dev", c.S_max_dev], ["S_target_curvature", c.S_target]]
    rows += [["flag", f] for f in b.flags]
    write_csv(run.path("diagnostics.csv"), ["quantity", "value"], rows)
    run.echo_config(preset=args.preset, S=args.S, T=args.T, G=args.G)
    print(f"e0: total {b.total:.10g} (base {b.term_surface_base:.6g}, G {b.term_G:.6g}, "
          f"line {b.term_line:.6g}, bulk T {b.term_bulkT:.6g})")
    for flag in b.flags:
        print(f"e0: warning: {flag}")
    return EXIT_OK


def cmd_profile(cfg, args):
    import numpy as np
    from .io import write_csv
    from .profile1d import I_closed_form, ProfileQuery, optimal_n3, solve_bvp
    run = Run(cfg, args, "profile")
    m = _material(cfg)
    th = args.theta
    rows = []
    curve = None
    for sign in (+1, -1):
        sol = solve_bvp(ProfileQuery(0.0, math.inf, math.cos(th), float(sign), m))
        ref = I_closed_form(th, sign, m)
        rows.append([th, sign, ref, sol.value, abs(sol.value - ref) / max(abs(ref), 1e-300)])
        if sign > 0:
            curve = [[r, optimal_n3(r, th, m), n] for r, n in zip(sol.r, sol.n3)]
    write_csv(run.path("profile.csv"), ["theta", "sign", "I_closed_form", "I_bvp", "rel_err"], rows)
    write_csv(run.path("profile_curve.csv"), ["r", "n3_closed_form", "n3_bvp"],
              [[float(a), float(np.asarray(b)), float(c)] for a, b, c in curve])
    run.echo_config(theta=th)
    print(f"profile: I(+) = {rows[0][3]:.10g} (closed form {rows[0][2]:.10g}), "
          f"I(-) = {rows[1][3]:.10g} (closed form {rows[1][2]:.10g})")
    return EXIT_OK


def cmd_recover(cfg, args):
    from .config import ConfigError
    from .geometry import disk_with_ring
    from .recovery import (hemisphere_box, limsup_trend_ok, plate_box, plate_geometry, plate_target,
                           validate_limsup)
    run = Run(cfg, args, "recover")
    regs = cfg.regimes()
    rc = cfg.recovery
    h_rule = lambda eta: rc.h_over_eta * eta
    kw = dict(h_rule=h_rule, piece2=rc.piece2, budget=rc.budget_points,
              csv_path=run.path("limsup.csv"))
    preset = args.preset or rc.preset
    if preset == "plate":
        rows = validate_limsup(plate_geometry(), regs, plate_target(h_rule=h_rule), box_fn=plate_box(), **kw)
    elif preset == "hemisphere":
        shape = cfg.shape()
        if shape is None:
            raise ConfigError("the hemisphere preset needs a particle")
        from .domain import surface_mesh
        from .geometry import DefectGeometry
        from .limit_energy import e0_surface_base
        base = e0_surface_base(surface_mesh(shape, min(h_rule(r.eta) for r in regs)))
        tgt = lambda r: 2 * r.material.s_star * r.material.c_star * base
        rows = validate_limsup(DefectGeometry(), regs, tgt, shape=shape, box_fn=hemisphere_box(shape),
                               multiplicity=2.0, **kw)
    elif preset == "disk":
        geom = disk_with_ring(1.0)
        tgt = lambda r: (4 * r.material.s_star * r.material.c_star * math.pi
                         + 0.5 * math.pi * r.material.s_star**2 * r.beta * 2 * math.pi)
        rows = validate_limsup(geom, regs, tgt, **kw)
    else:
        raise ConfigError(f"unknown recovery preset {preset!r}")
    ok, ratios = limsup_trend_ok(rows)
    run.echo_config(preset=preset, eta=[r.eta for r in regs])
    for r in rows:
        print(f"recover: eta={r.eta:.4g} h={r.h:.4g} ratio={r.ratio:.6f}")
    print(f"recover: trend {'ok' if ok else 'not monotone toward 1'}")
    return EXIT_OK


def cmd_validate(cfg, args):
    from . import acceptance
    from .io import write_csv
    run = Run(cfg, args, "validate")
    only = [int(x) for x in args.only.split(",")] if args.only else None
    results = acceptance.run(only)
    write_csv(run.path("validate.csv"), ["criterion", "title", "passed", "seconds", "metrics", "note"],
              [[r.number, r.title, int(r.passed), r.seconds,
                "; ".join(f"{k}={acceptance._fmt(v)}" for k, v in r.metrics.items()), r.note]
               for r in results])
    run.echo_config(only=only)
    failed = [r.number for r in results if not r.passed]
    print(f"validate: {len(results) - len(failed)} of {len(results)} criteria pass"
          + (f"; failing: {failed}" if failed else ""))
    return EXIT_OK if not failed else EXIT_NUMERIC


COMMANDS = dict(relax=cmd_relax, extract=cmd_extract, e0=cmd_e0, profile=cmd_profile,
                recover=cmd_recover, validate=cmd_validate)


def build_parser():
    p = argparse.ArgumentParser(prog="nematic-gamma", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.directory)")
    common.add_argument("--threads", type=int, metavar="N", help="BLAS threads (results do not depend on it)")
    common.add_argument("--seed", type=int, metavar="N", help="seed for the extraction perturbation")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("relax", parents=[common], help="gradient-flow relaxation")
    e = sub.add_parser("extract", parents=[common], help="extract S, T and F from a checkpoint")
    e.add_argument("--checkpoint", metavar="PATH")
    z = sub.add_parser("e0", parents=[common], help="evaluate the limit energy")
    z.add_argument("--S", metavar="PATH", help="polyline file")
    z.add_argument("--T", metavar="PATH", help="OBJ triangle soup")
    z.add_argument("--G", metavar="PATH", help="per-vertex G (or F) csv on the particle mesh")
    z.add_argument("--preset", choices=("stuck", "glued", "detached"))
    z.add_argument("--mesh-h", type=float, dest="mesh_h", help="particle mesh spacing")
    pr = sub.add_parser("profile", parents=[common], help="one-dimensional profile")
    pr.add_argument("--theta", type=float, required=True)
    rc = sub.add_parser("recover", parents=[common], help="recovery-sequence energy table")
    rc.add_argument("--preset", choices=("plate", "hemisphere", "disk"))
    v = sub.add_parser("validate", parents=[common], help="acceptance suite")
    v.add_argument("--only", metavar="LIST", help="comma-separated criterion numbers")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        from . import config
        cfg = config.load(args.config)
        if args.threads is not None:
            cfg.threads = args.threads
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.extraction.seed = args.seed
        cfg.validate()
        from threadpoolctl import threadpool_limits
        t0 = time.perf_counter()
        with threadpool_limits(limits=cfg.threads):
            code = COMMANDS[args.command](cfg, args)
        print(f"{args.command}: done in {time.perf_counter() - t0:.1f}s")
        return code
    except Exception as exc:
        code = _exit_code(exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
