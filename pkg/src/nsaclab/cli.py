"""Command-line entry point.

Each subcommand runs one report operation, writes its artifacts plus a
``manifest.json`` into ``--output-dir`` and prints a short summary.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
64 usage error (no or unknown subcommand).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .io import (ConfigError, MobilityConfig, PhysicalValidityError, RunManifest, StudyConfig,
                 config_hash, parse_config, serialize_config, tolerances, worker_count)
from .solver import SimConfig

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _out_dir(args):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_checks(path, rows):
    """``rows``: ``{name: (value, threshold, ok)}``."""
    import csv
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "value", "threshold", "passed"])
        for name, (value, thr, ok) in rows.items():
            w.writerow([name, repr(float(value)), repr(float(thr)), bool(ok)])
    return Path(path)


# -------------------------------------------------------------- commands

def cmd_profile(args, man, tol):
    from .potential import compute_profile, named_well
    try:
        well = named_well(args.potential)
    except ValueError as exc:
        raise ConfigError("--potential", str(exc)) from exc
    prof = compute_profile(L_rho=args.L, n=args.n, well=well, tol=tol["profile.newton"])
    out = _out_dir(args)
    man.add(prof.to_csv(out / "profile.csv"))
    print(f"sigma = {prof.sigma:.10f}")
    print(f"alpha = {prof.alpha:.10f}")
    print(f"residual = {prof.residual:.3e}")
    return True


def cmd_ode(args, man, tol):
    from .matched_ode import ode_suite, solve_linearized_ac, write_solution_csv
    from .potential import ViscosityModel, compute_profile
    prof = compute_profile(tol=tol["profile.newton"])
    rows = ode_suite(prof, ViscosityModel(args.nu_plus, args.nu_minus),
                     tol["matched_ode.solvability"])
    out = _out_dir(args)
    w = solve_linearized_ac(prof.theta0pp, prof, tol["matched_ode.solvability"])
    man.add(write_solution_csv(out / "ode_theta0pp.csv", prof.rho, w))
    thr = {"ac_theta0pp_error": 1e-5, "weighted_eta_error": 1e-5}
    man.add(_write_checks(out / "ode_report.csv",
                          {k: (v, thr.get(k, 1.0), ok) for k, (v, ok) in rows.items()}))
    for k, (v, ok) in rows.items():
        print(f"{k} = {v:.3e} {'ok' if ok else 'FAILED'}")
    return all(ok for _, ok in rows.values())


def cmd_spectrum(args, man, tol):
    from .spectral import spectral_gap_report, write_report_csv
    rows = spectral_gap_report(args.eps, n=args.n, L_factor=args.L)
    man.add(write_report_csv(rows, _out_dir(args) / "spectrum.csv"))
    for r in rows:
        print(f"eps = {r['epsilon']:g}: lambda0 = {r['lambda0']:.6g}, "
              f"lambda1 = {r['lambda1']:.6g}")
    return all(r["bound_ok"] for r in rows)


def cmd_coords(args, man, tol):
    from .geometry import circle, coords_check, ellipse, write_coords_report
    curve = circle(args.a) if args.curve == "circle" else ellipse(args.a, args.b)
    rep = coords_check(curve, eps=args.eps, eps_list=tuple(args.eps_list))
    man.add(write_coords_report(rep, _out_dir(args) / "coords_report.csv"))
    for k, (v, thr, ok) in rep.items():
        print(f"{k} = {v:.3e} (threshold {thr:g}) {'ok' if ok else 'FAILED'}")
    return all(ok for _, _, ok in rep.values())


def cmd_surfpde(args, man, tol):
    from .surface_pde import (exact_solution_error, fixed_data_family, kappa_scaling_report,
                              scaled_forcing_family, write_kappa_report)
    err = exact_solution_error(n=args.n, dt=args.dt)
    fam = scaled_forcing_family if args.family == "scaled" else fixed_data_family
    rep = kappa_scaling_report(fam, args.kappa)
    out = _out_dir(args)
    man.add(write_kappa_report(rep, out / "kappa_report.csv"))
    summary = {"exact_error": err, **{k: v for k, v in rep.items() if k != "rows"}}
    (out / "surfpde_summary.json").write_text(json.dumps(summary, indent=2))
    man.add(out / "surfpde_summary.json")
    print(f"exact-solution error = {err:.3e}")
    for key in ("_l2", "_h1"):
        print(f"{key[1:]} estimate: spread = {rep['spread' + key]:.3f}, "
              f"slope = {rep['slope' + key]:+.3f}")
    return err <= 1e-3 and rep["passed"]


def _load(args, kind):
    if args.config is None:
        return kind()
    cfg = parse_config(args.config)
    if not isinstance(cfg, kind):
        raise ConfigError("config.kind", f"expected a {kind.__name__} file")
    return cfg


def cmd_simulate(args, man, tol):
    from .solver import run, write_run
    cfg = _load(args, SimConfig)
    if args.T is not None:
        cfg = replace(cfg, T=args.T)
    man.config_hash = config_hash(cfg)
    out = _out_dir(args)
    serialize_config(cfg, out / "config.json")
    man.add(out / "config.json")
    res = run(cfg, energy_tol=(tol["solver.energy_step"], tol["solver.energy_run"]))
    man.add(*write_run(res, out))
    d = res.diagnostics
    print(f"t = {res.final.t:.6g} after {res.final.nstep} steps, E = {d['E'][-1]:.6g}, "
          f"energy_ok = {res.energy_ok}")
    return res.energy_ok


def cmd_study(args, man, tol):
    from .study import convergence_study, write_report
    cfg = _load(args, StudyConfig)
    man.config_hash = config_hash(cfg)
    rep = convergence_study(cfg.alpha, cfg.eps_list, cfg.scenario, cfg.base, T=cfg.T,
                            n_snap=cfg.n_snap, cells_per_eps=cfg.cells_per_eps,
                            workers=worker_count())
    man.add(*write_report(rep, _out_dir(args)))
    if rep.failed:
        print(f"study stopped: {rep.failed}", file=sys.stderr)
        return False
    for ref in ("corrected", "uncorrected"):
        fit = rep.fits.get((ref, "linf_l2"))
        if fit is not None:
            print(f"{ref}: LinfL2 order = {fit.order:.3f} "
                  f"[{fit.ci_low:.3f}, {fit.ci_high:.3f}]")
    return True


def cmd_mobility(args, man, tol):
    import csv
    from .study import mobility_comparison
    cfg = _load(args, MobilityConfig)
    man.config_hash = config_hash(cfg)
    rows = mobility_comparison(cfg.eps, cfg.alpha_list, cfg.scenario, cfg.base,
                               cells_per_eps=cfg.cells_per_eps, shrink=cfg.shrink,
                               workers=worker_count())
    path = _out_dir(args) / "mobility.csv"
    cols = ["eps", "alpha", "T", "rate", "expected", "rel_error", "energy_ok"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) for c in cols])
    man.add(path)
    for r in rows:
        print(f"alpha = {r['alpha']:g}: d(R^2)/dt = {r['rate']:.5g} "
              f"(expected {r['expected']:.5g}, rel. error {r['rel_error']:.3f})")
    return all(r["energy_ok"] for r in rows)


# ---------------------------------------------------------------- parser

def build_parser():
    p = _Parser(prog="nsaclab", description="Diffuse-interface limit toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--output-dir", default=".", help="directory for artifacts")
    common.add_argument("--tol-overrides", default=None,
                        help='JSON object of tolerance overrides, e.g. \'{"profile.newton": 1e-12}\'')
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("profile", parents=[common], help="optimal profile and surface tension")
    s.add_argument("--potential", choices=("quartic", "sextic"), default="quartic")
    s.add_argument("--L", type=float, default=15.0)
    s.add_argument("--n", type=int, default=3001)
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("ode", parents=[common], help="matched-asymptotics ODE checks")
    s.add_argument("--nu-plus", type=float, default=1.0)
    s.add_argument("--nu-minus", type=float, default=1.0)
    s.set_defaults(func=cmd_ode)

    s = sub.add_parser("spectrum", parents=[common], help="linearized operator eigenvalues")
    s.add_argument("--eps", type=float, nargs="+", default=[1.0])
    s.add_argument("--n", type=int, default=4096)
    s.add_argument("--L", type=float, default=20.0, help="domain half-width in units of eps")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("coords-check", parents=[common], help="perturbed coordinate checks")
    s.add_argument("--curve", choices=("circle", "ellipse"), default="ellipse")
    s.add_argument("--a", type=float, default=0.3)
    s.add_argument("--b", type=float, default=0.2)
    s.add_argument("--eps", type=float, default=0.01)
    s.add_argument("--eps-list", type=float, nargs="+", default=[0.1, 0.05, 0.025])
    s.set_defaults(func=cmd_coords)

    s = sub.add_parser("surfpde", parents=[common], help="surface PDE accuracy and kappa scaling")
    s.add_argument("--kappa", type=float, nargs="+", default=[1.0, 0.25, 1 / 16, 1 / 64])
    s.add_argument("--family", choices=("scaled", "fixed"), default="scaled")
    s.add_argument("--n", type=int, default=256)
    s.add_argument("--dt", type=float, default=1e-3)
    s.set_defaults(func=cmd_surfpde)

    s = sub.add_parser("simulate", parents=[common], help="run the 2D solver")
    s.add_argument("config", nargs="?")
    s.add_argument("--T", type=float, default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("study", parents=[common], help="epsilon convergence study")
    s.add_argument("config", nargs="?")
    s.set_defaults(func=cmd_study)

    s = sub.add_parser("mobility", parents=[common], help="mobility scaling comparison")
    s.add_argument("config", nargs="?")
    s.set_defaults(func=cmd_mobility)
    return p


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        tol = tolerances(args.tol_overrides)
        man = RunManifest(command=args.command, tolerances=tol)
        ok = args.func(args, man, tol)
        man.write(_out_dir(args))
    except (ConfigError, PhysicalValidityError, FileNotFoundError, json.JSONDecodeError,
            ValueError) as exc:
        if _numerical(exc):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # solver blow-ups, convergence and inversion failures
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK if ok else EXIT_NUMERICAL


def _numerical(exc):
    from .geometry import AmbiguousProjection
    from .solver import NoInterfaceError
    return isinstance(exc, (AmbiguousProjection, NoInterfaceError))


if __name__ == "__main__":
    sys.exit(main())
