"""Command line entry point: ``ergoid {simulate,identify,certify,phase-diagram}``.

Exit status is 0 on success, 1 on usage or configuration errors and 2 on
numerical or experiment failures. ``ERGOID_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import ExperimentConfig, load_config
from .dynamics import (
    density_lower_bound,
    estimate_density,
    read_density_csv,
    read_observations_csv,
    simulate,
    write_density_csv,
    write_trajectory_csv,
)
from .exceptions import ConfigError, ErgoidError
from .experiments import (
    choose_lambda,
    run_identification,
    run_phase_diagram,
    trial_seed,
    write_identification,
    write_phase_diagram,
)
from .lasso import LassoConfig, save_solution, solve_lasso
from .sensing import build_measurement, covariance_from_density
from .spectra import certify, save_report
from .trigpoly import FrequencySet, load_trigpoly, random_sparse_map, save_trigpoly

log = logging.getLogger("ergoid")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def configure_logging(env=None) -> int:
    env = os.environ if env is None else env
    name = env.get("ERGOID_LOG", "warn").strip().lower()
    level = LOG_LEVELS.get(name)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("ergoid")
    root.handlers[:] = [handler]
    root.setLevel(level if level is not None else logging.WARNING)
    if level is None:
        log.warning("ignoring unknown ERGOID_LOG value %r", name)
    return root.level


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML experiment configuration")
    common.add_argument("--seed", type=_u64, metavar="U64", help="master seed (overrides config)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--threads", type=_nonneg_int, default=1, metavar="N", help="worker processes, 0 = auto")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="tabular output format")

    parser = _Parser(prog="ergoid", description="Identify sparse circle maps from their own orbits.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("simulate", parents=[common], help="orbit and density of a map")
    p.add_argument("--map", metavar="PATH", help="map JSON; otherwise one is generated from the config")
    p.add_argument("--x0", type=float, help="initial state in [0, 1)")
    p.add_argument("--length", type=int, help="number of kept states")
    p.add_argument("--burn-in", type=int, help="discarded transient")
    p.add_argument("--bins", type=int, help="histogram bins")

    p = sub.add_parser("identify", parents=[common], help="recover a map from observations")
    p.add_argument("--observations", metavar="PATH", help="x,y CSV; otherwise run end to end")
    p.add_argument("--nmax", type=int, help="largest frequency")
    p.add_argument("--sigma", type=float, help="noise level for the lambda rule")
    p.add_argument("--lam", type=float, help="explicit regularisation level")

    p = sub.add_parser("certify", parents=[common], help="check recovery conditions of a density")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--density", metavar="uniform|PATH", help="'uniform' or a density CSV")
    src.add_argument("--map", metavar="PATH", help="map JSON whose orbit histogram is used")
    p.add_argument("--nmax", type=int, help="largest frequency")
    p.add_argument("--xi", type=float, help="density floor to certify (default: minimum of the density)")
    p.add_argument("--sparsities", type=_int_list, default=[1, 2, 3], help="comma-separated sparse levels")
    p.add_argument("--re-samples", type=int, default=0, help="Monte Carlo restricted-eigenvalue samples")

    sub.add_parser("phase-diagram", parents=[common], help="seeded sweep over the configured grid")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out"] = args.out
    return cfg.replace(**changes) if changes else cfg


def _report(paths) -> None:
    for p in paths:
        print(p)


def cmd_simulate(args, cfg: ExperimentConfig) -> List[Path]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(trial_seed(cfg.seed, 0, 0))
    if args.map:
        poly = load_trigpoly(args.map, real_valued=True)
    else:
        poly = random_sparse_map(cfg.sparsity[0], cfg.nmax, cfg.dc, cfg.budget,
                                 seed=int(rng.integers(2 ** 63)))
    x0 = args.x0 if args.x0 is not None else float(rng.uniform())
    length = args.length if args.length is not None else cfg.density_length
    burn = args.burn_in if args.burn_in is not None else cfg.burn_in
    traj = simulate(poly, x0, burn, length, seed=cfg.seed)
    est = estimate_density(traj, args.bins or cfg.density_bins)
    log.info("simulated %d states; density floor %.4g", len(traj), density_lower_bound(est))
    map_path = out / "map.json"
    save_trigpoly(poly, map_path)
    if args.format == "json":
        path = out / "simulation.json"
        path.write_text(json.dumps({
            "burn_in": traj.burn_in,
            "states": traj.states.tolist(),
            "bin_edges": est.edges.tolist(),
            "density": est.density.tolist(),
            "xi_h": density_lower_bound(est),
        }, indent=2) + "\n")
        return [map_path, path]
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_density_csv(est, out / "density.csv")
    return [map_path, out / "trajectory.csv", out / "density.csv"]


def cmd_identify(args, cfg: ExperimentConfig) -> List[Path]:
    if args.nmax is not None:
        cfg = cfg.replace(nmax=args.nmax)
    if args.lam is not None:
        cfg = cfg.replace(lambda_override=args.lam)
    if args.sigma is not None:
        cfg = cfg.replace(noise=(args.sigma,))
    if not args.observations:
        return write_identification(run_identification(cfg), cfg.out)
    sigma = cfg.noise[0]
    obs = read_observations_csv(args.observations, sigma)
    freqs = FrequencySet(cfg.nmax)
    system = build_measurement(obs, freqs)
    lam = choose_lambda(cfg, sigma, freqs.size, system.M)
    sol = solve_lasso(system, LassoConfig(lam, cfg.max_iterations, cfg.tolerance, cfg.symmetrize,
                                          cfg.path_points_per_decade))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_solution(sol, out / "solution.json")
    support = [int(freqs.indices[k]) for k in sol.support(max(lam, cfg.support_tol))]
    metrics = {"M": system.M, "N": system.N, "sigma": sigma, "lambda": lam,
               "kkt_residual": sol.kkt_residual, "objective_value": sol.objective_value,
               "converged": sol.converged, "iterations_used": sol.iterations_used, "support": support}
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    return [out / "solution.json", out / "metrics.json"]


def cmd_certify(args, cfg: ExperimentConfig) -> List[Path]:
    nmax = args.nmax if args.nmax is not None else cfg.nmax
    if args.density == "uniform":
        density, floor = "uniform", 1.0
    else:
        if args.density:
            est = read_density_csv(args.density)
        else:
            poly = load_trigpoly(args.map, real_valued=True)
            x0 = float(np.random.default_rng(trial_seed(cfg.seed, 0, 0)).uniform())
            est = estimate_density(simulate(poly, x0, cfg.burn_in, cfg.density_length), cfg.density_bins)
        density, floor = est, density_lower_bound(est)
    xi = args.xi if args.xi is not None else floor
    V = covariance_from_density(density, nmax)
    report = certify(V, xi, sparsities=args.sparsities, s=cfg.sparsity[0], C2=cfg.c2,
                     re_samples=args.re_samples, rng_seed=cfg.seed)
    log.info("lambda_min %.6g, kappa bound %.6g, passed %s", report.lambda_min, report.kappa_bound,
             report.passed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "certificate.json"
    save_report(report, path)
    return [path]


def cmd_phase_diagram(args, cfg: ExperimentConfig) -> List[Path]:
    results = run_phase_diagram(cfg, threads=args.threads)
    failed = sum(not r.ok for r in results)
    if failed:
        log.warning("%d of %d trials failed", failed, len(results))
    return write_phase_diagram(results, cfg.out, args.format)


COMMANDS = {"simulate": cmd_simulate, "identify": cmd_identify, "certify": cmd_certify,
            "phase-diagram": cmd_phase_diagram}


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
        cfg = _load(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"ergoid: configuration error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        _report(COMMANDS[args.command](args, cfg))
    except (ConfigError, FileNotFoundError) as exc:
        print(f"ergoid: {exc}", file=sys.stderr)
        return 1
    except (ErgoidError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"ergoid: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
