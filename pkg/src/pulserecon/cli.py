"""Command-line entry point: family -> fit -> reconstruct / verify / evolve / bench.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""

import argparse
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy
from filelock import FileLock

from . import __version__
from .config import ConfigError, RunConfig
from .grape import check_grid, load_family, pulse_filename, save_family, sweep_family
from .harness import (TargetFamily, benchmark, dynamic_mass_simulation, evolve_repeated,
                      exact_evolution, device_propagator, max_population_deviation, verify_model)
from .hydrogen import StoBasis
from .linalg import EigenConvergenceError
from .reconstruction import (FitError, SymmetryError, fit_poly_model, fit_spectral_model,
                             load_model, reconstruct, save_model)
from .transmon import DeviceConfig, save_pulse_csv

log = logging.getLogger("pulserecon")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class NumericalFailure(RuntimeError):
    pass


# -- shared helpers ------------------------------------------------------------

def _config(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _targets_meta(targets):
    return {"basis": targets.basis.to_dict(), "parameter": targets.parameter_name,
            "dt_hartree_inv": targets.dt, "m_e": targets.m_e}


def _targets_from_meta(meta):
    t = meta["targets"]
    return TargetFamily(StoBasis.from_dict(t["basis"]), t["parameter"], dt=t["dt_hartree_inv"],
                        m_e=t["m_e"])


def _load_model(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    model = load_model(path)
    if "targets" not in model.meta or "device" not in model.meta:
        raise ConfigError(f"{path}: model lacks target/device metadata")
    return model, _targets_from_meta(model.meta), DeviceConfig.from_dict(model.meta["device"])


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _manifest(out, command, cfg, args, outputs):
    """Merge this command's record into ``out/manifest.json``."""
    path = Path(out) / "manifest.json"
    doc = json.loads(path.read_text()) if path.exists() else {"commands": {}}
    skip = {"func", "out", "config"}
    doc["commands"][command] = {
        "config_hash": cfg.digest() if cfg is not None else None,
        "config": cfg.to_dict() if cfg is not None else None,
        "arguments": {k: str(v) if isinstance(v, Path) else v
                      for k, v in sorted(vars(args).items()) if k not in skip},
        "outputs": sorted(str(Path(o).name) for o in outputs),
    }
    doc["versions"] = {"pulserecon": __version__, "numpy": np.__version__,
                       "scipy": scipy.__version__, "python": platform.python_version()}
    _write_json(path, doc)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _lambda_arg(args, targets):
    values = {"dt": args.dt, "m_e": args.m_e}
    lam = values[targets.parameter_name] if values[targets.parameter_name] is not None else args.value
    if lam is None:
        flag = "--dt" if targets.parameter_name == "dt" else "--m-e"
        raise ConfigError(f"model is parameterized by {targets.parameter_name}; pass {flag} or --value")
    return float(lam)


# -- commands ----------------------------------------------------------------------

def cmd_family(args):
    cfg = _config(args)
    device, settings, targets = cfg.device(), cfg.grape_settings(), cfg.targets()
    grid = check_grid(cfg.grid)
    plan = {"parameter": cfg.parameter, "grid": grid.tolist(), "device": device.to_dict(),
            "settings": {k: getattr(settings, k) for k in settings.__dataclass_fields__},
            "outputs": ["family.json", "manifest.json"]
                       + [pulse_filename(cfg.parameter, v) for v in grid.tolist()]}
    if args.dry_run:
        print(json.dumps(plan, indent=2))
        return EXIT_OK
    out = _out_dir(args)
    with FileLock(str(out / ".lock")):
        def report(lam, res):
            log.info("%s=%g fidelity=%.10f iterations=%d", cfg.parameter, lam,
                     res.final_fidelity, res.iterations)
        family = sweep_family(targets.targets(grid), device, settings, cfg.parameter,
                              callback=report, stop_on_failure=not args.allow_partial)
        save_family(family, out, settings, extra={"targets": _targets_meta(targets),
                                                  "complete": family.all_converged})
        marker = out / "PARTIAL"
        outputs = [out / "family.json"] + [out / pulse_filename(cfg.parameter, v)
                                           for v in family.parameter_values.tolist()]
        if family.all_converged:
            marker.unlink(missing_ok=True)
        else:
            bad = family.unconverged()
            marker.write_text(f"unconverged {cfg.parameter} values: {bad}\n")
            outputs.append(marker)
        _manifest(out, "family", cfg, args, outputs)
    print(f"family: {len(family)} members written to {out}")
    if not family.all_converged:
        msg = f"unconverged members at {cfg.parameter}={family.unconverged()}"
        if not args.allow_partial:
            raise NumericalFailure(msg + " (partial archive marked; use --allow-partial to keep going)")
        log.warning(msg)
    return EXIT_OK


def cmd_fit(args):
    cfg = RunConfig.load(args.config) if args.config else None
    fam_dir = Path(args.family)
    if not (fam_dir / "family.json").is_file():
        raise FileNotFoundError(f"no family archive at {fam_dir}")
    family, doc = load_family(fam_dir)
    if (fam_dir / "PARTIAL").exists() and not args.allow_partial:
        raise ConfigError(f"{fam_dir} is a partial archive; pass --allow-partial to fit it anyway")
    method = args.method or (cfg.method if cfg else "poly")
    meta = {"targets": doc["targets"]} if "targets" in doc else {}
    if method == "poly":
        default_t, default_p = (10, 4) if family.parameter_name == "dt" else (6, 8)
        dtime = args.degree_time if args.degree_time is not None else (cfg.degree_time if cfg else default_t)
        dparam = args.degree_param if args.degree_param is not None else (cfg.degree_param if cfg else default_p)
        model = fit_poly_model(family, dtime, dparam, meta=meta)
        name = "model_poly.json"
    else:
        boundary = args.spline_boundary or (cfg.spline_boundary if cfg else "not-a-knot")
        model = fit_spectral_model(family, meta=meta, boundary=boundary)
        name = "model_spectral.json"
    out = _out_dir(args) if args.out else fam_dir
    with FileLock(str(out / ".lock")):
        save_model(model, out / name)
        _manifest(out, "fit", cfg, args, [out / name])
    print(f"fit: {method} model written to {out / name}")
    if method == "poly":
        worst = max(model.diagnostics["node_rms"])
        peak = max(np.max(np.abs(p.to_vector())) for p in family.pulses)
        print(f"fit: worst node rms {worst:.3e} (peak amplitude {peak:.3e})")
        if worst > 1e-2 * peak:
            log.warning("family is poorly described by the polynomial model; check for a rough "
                        "optimization branch or raise degree_time")
    return EXIT_OK


def cmd_reconstruct(args):
    model, targets, device = _load_model(args.model)
    lam = _lambda_arg(args, targets)
    pulse = reconstruct(model, lam, extrapolate=args.extrapolate)
    out = _out_dir(args)
    path = out / pulse_filename(targets.parameter_name, lam)
    with FileLock(str(out / ".lock")):
        save_pulse_csv(pulse, path)
        _manifest(out, "reconstruct", None, args, [path])
    print(f"reconstruct: {path}")
    return EXIT_OK


def cmd_verify(args):
    model, targets, device = _load_model(args.model)
    cfg = RunConfig.load(args.config) if args.config else None
    if args.grid:
        grid = check_grid(args.grid)
    elif args.nodes:
        grid = np.asarray(model.grid)
    elif cfg is not None and cfg.holdout is not None:
        grid = check_grid(cfg.holdout)
    else:
        grid = np.asarray(model.grid)
        grid = (grid[:-1] + grid[1:]) / 2
    report = verify_model(model, targets, grid, device)
    out = _out_dir(args)
    path = out / "fidelity_report.json"
    with FileLock(str(out / ".lock")):
        _write_json(path, report.to_dict())
        _manifest(out, "verify", cfg, args, [path])
    print(f"verify: mean fidelity {report.mean:.12f}, min {report.min:.12f} over {grid.size} points")
    return EXIT_OK


def cmd_evolve(args):
    model, targets, device = _load_model(args.model)
    cfg = _config(args)
    psi0 = cfg.psi0()
    out = _out_dir(args)
    if args.schedule == "sin":
        if targets.parameter_name != "m_e":
            raise ConfigError("the sinusoidal schedule needs a mass-parameterized model")
        schedule = cfg.schedule()
        if args.nmax is not None:
            schedule = type(schedule)(args.nmax, schedule.amplitude, schedule.base)
        rec, ex = dynamic_mass_simulation(model, schedule, device, psi0, targets.basis, targets.dt)
    else:
        lam = _lambda_arg(args, targets)
        steps = args.steps if args.steps is not None else cfg.evolve_steps
        U = device_propagator(model, lam, device, psi0.size)
        dt = lam if targets.parameter_name == "dt" else targets.dt
        rec = evolve_repeated(U, psi0, steps, dt)
        ex = exact_evolution(targets.model(lam), psi0, rec.times)
    paths = [out / "trace_reconstructed.csv", out / "trace_exact.csv"]
    with FileLock(str(out / ".lock")):
        rec.save_csv(paths[0])
        ex.save_csv(paths[1])
        _manifest(out, "evolve", cfg, args, paths)
    print(f"evolve: max population deviation {max_population_deviation(rec, ex):.3e} "
          f"over {rec.times.size - 1} steps")
    return EXIT_OK


def cmd_bench(args):
    model, targets, device = _load_model(args.model)
    cfg = _config(args)
    if args.samples:
        samples = args.samples
    elif cfg.holdout is not None:
        samples = cfg.holdout
    else:
        grid = np.asarray(model.grid)
        samples = ((grid[:-1] + grid[1:]) / 2).tolist()
    report = benchmark(model, device, cfg.grape_settings(), samples, targets)
    out = _out_dir(args)
    path = out / "timing.json"
    with FileLock(str(out / ".lock")):
        _write_json(path, report.to_dict())
        _manifest(out, "bench", cfg, args, [path])
    print(f"bench: reconstruct {report.mean_reconstruct_seconds:.4f} s, optimize "
          f"{report.mean_optimize_seconds:.4f} s, speedup {report.speedup_ratio:.1f}x")
    return EXIT_OK


# -- parser --------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat JSON run configuration")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--allow-partial", action="store_true",
                        help="keep going past unconverged family members")
    common.add_argument("--dry-run", action="store_true", help="validate and print the plan only")
    common.add_argument("-v", "--verbose", action="store_true")

    lam = argparse.ArgumentParser(add_help=False)
    lam.add_argument("--dt", type=float, help="time step in inverse Hartree")
    lam.add_argument("--m-e", dest="m_e", type=float, help="electron mass in atomic units")
    lam.add_argument("--value", type=float, help="parameter value for either kind of model")

    parser = argparse.ArgumentParser(prog="pulserecon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("family", parents=[common], help="optimize a warm-started pulse family")
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("fit", parents=[common], help="fit a reconstruction model to a family")
    p.add_argument("--family", type=Path, required=True, help="family archive directory")
    p.add_argument("--method", choices=["poly", "spectral"])
    p.add_argument("--degree-time", type=int)
    p.add_argument("--degree-param", type=int)
    p.add_argument("--spline-boundary", choices=["not-a-knot", "natural"],
                   help="end condition of the per-bin splines (spectral method)")
    p.set_defaults(func=cmd_fit, out=None)

    p = sub.add_parser("reconstruct", parents=[common, lam], help="emit a pulse at a parameter value")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--extrapolate", action="store_true")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("verify", parents=[common], help="fidelity of reconstructed pulses")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--grid", type=float, nargs="+")
    p.add_argument("--nodes", action="store_true", help="verify on the training grid")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evolve", parents=[common, lam], help="reconstructed vs exact dynamics")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--schedule", choices=["sin", "fixed"], default="fixed")
    p.add_argument("--nmax", type=int)
    p.add_argument("--steps", type=int)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("bench", parents=[common], help="reconstruction vs re-optimization timing")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--samples", type=float, nargs="+")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.dry_run and args.command != "family":
        try:
            _config(args)
        except (ConfigError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        print(f"{args.command}: configuration valid (dry run, nothing written)")
        return EXIT_OK
    try:
        return args.func(args)
    except (NumericalFailure, SymmetryError, EigenConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, FitError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
