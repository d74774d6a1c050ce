"""Command-line entry point ``dunkl-isp``.

Exit status: 0 on success, 2 for configuration or domain errors, 3 for
numerical failures (including residual checks above ``tolerance.residual``).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, Profile, RunConfig, load_config, parse_profile
from .dunkl import (
    PhysicalFunction,
    SpectralFunction,
    dunkl_transform,
    inverse_dunkl_transform,
)
from .forward import SolutionField, SpectralField, solve_forward, solve_forward_spectral_ibp
from .inverse import solve_isp, stability_report
from .serialize import fmt, write_field_csv, write_function_csv, write_json
from .specfun import MLParams, mittag_leffler

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class NumericalFailure(ArithmeticError):
    """A run finished but failed its own verification."""


def _physical(cfg: RunConfig, profile: Profile, grids, what: str) -> PhysicalFunction:
    if profile.csv_kind() == "spectral":
        raise ConfigError(f"{what} must be a physical-space function, got a spectral CSV")
    return PhysicalFunction(grids.physical, profile.sample(grids.physical.nodes))


def _output_dir(cfg: RunConfig) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir


def _check_residual(cfg: RunConfig, diagnostics: dict) -> None:
    rel = diagnostics["residual_max_relative"]
    diagnostics["residual_tolerance"] = cfg.residual_tol
    diagnostics["residual_ok"] = bool(rel <= cfg.residual_tol)


def cmd_forward(cfg: RunConfig, workers: int = 1) -> int:
    grids = cfg.grids()
    tgrid = grids.time
    g = _physical(cfg, cfg.profiles["g"], grids, "data.g")
    f = _physical(cfg, cfg.profiles["f"], grids, "data.f")
    f_t = SolutionField(tgrid, grids.physical, np.outer(cfg.f_time.factor(tgrid.nodes), f.values))
    u = solve_forward(cfg.params, g, f_t, grids, workers=workers)
    diagnostics = dict(u.info["diagnostics"])

    # the integrated-by-parts representation as an independent cross-check
    uhat: SpectralField = u.info["spectral"]
    fhat = dunkl_transform(cfg.params.alpha, f, grids.spectral)
    ghat = dunkl_transform(cfg.params.alpha, g, grids.spectral)
    fhat_t = SpectralField(tgrid, grids.spectral, np.outer(cfg.f_time.factor(tgrid.nodes), fhat.values))
    dfhat_t = SpectralField(tgrid, grids.spectral, np.outer(cfg.f_time.derivative(tgrid.nodes), fhat.values))
    alt = solve_forward_spectral_ibp(cfg.params, ghat, fhat_t, dfhat_t, tgrid, workers=workers)
    scale = float(np.max(np.abs(uhat.values)))
    gap = float(np.max(np.abs(alt.values - uhat.values)))
    diagnostics["representation_gap"] = gap / scale if scale > 0 else gap
    _check_residual(cfg, diagnostics)

    out = _output_dir(cfg)
    write_field_csv(out / "solution.csv", tgrid.nodes, grids.physical.nodes, u.values, cfg.params.alpha)
    write_json(out / "solution.json", {**cfg.describe(), "diagnostics": diagnostics})
    print(f"wrote {out / 'solution.csv'}; residual {diagnostics['residual_max_relative']:.3e} "
          f"(relative), initial-condition error {diagnostics['initial_condition_error']:.3e}")
    if not diagnostics["residual_ok"]:
        raise NumericalFailure(f"spectral residual {diagnostics['residual_max_relative']:.3e} exceeds "
                               f"tolerance {cfg.residual_tol:.3e}")
    return EXIT_OK


def cmd_inverse(cfg: RunConfig) -> int:
    grids = cfg.grids()
    phi = _physical(cfg, cfg.profiles["phi"], grids, "data.phi")
    psi = _physical(cfg, cfg.profiles["psi"], grids, "data.psi")
    pair = solve_isp(cfg.params, phi, psi, grids)
    diagnostics = dict(pair.diagnostics)
    _check_residual(cfg, diagnostics)
    out = _output_dir(cfg)
    write_field_csv(out / "state.csv", grids.time.nodes, grids.physical.nodes, pair.u.values, cfg.params.alpha)
    write_function_csv(out / "source.csv", pair.f, cfg.params.alpha)
    write_json(out / "isp.json", {**cfg.describe(), "diagnostics": diagnostics})
    print(f"wrote {out / 'state.csv'} and {out / 'source.csv'}; "
          f"min denominator {diagnostics['min_denominator']:.6g}")
    if not diagnostics["residual_ok"]:
        raise NumericalFailure(f"spectral residual {diagnostics['residual_max_relative']:.3e} exceeds "
                               f"tolerance {cfg.residual_tol:.3e}")
    return EXIT_OK


def stability_rows(cfg: RunConfig, epsilons, emit_profiles: bool = False) -> list[tuple[float, ...]]:
    grids = cfg.grids()
    zero = PhysicalFunction(grids.physical, np.zeros(grids.physical.size))
    shape = _physical(cfg, cfg.profiles["stability"], grids, "stability.profile")
    rows = []
    for eps in epsilons:
        psi_d = PhysicalFunction(grids.physical, eps * shape.values)
        rec = stability_report(cfg.params, (zero, zero), (zero, psi_d), grids)
        rows.append((eps, rec.psi_diff, rec.f_diff, rec.u_diff))
        if emit_profiles:
            pair = solve_isp(cfg.params, zero, psi_d, grids)
            prof = _output_dir(cfg) / "profiles"
            prof.mkdir(exist_ok=True)
            tag = format(eps, "g")
            write_function_csv(prof / f"source_eps{tag}.csv", pair.f, cfg.params.alpha)
            write_field_csv(prof / f"state_eps{tag}.csv", grids.time.nodes, grids.physical.nodes,
                            pair.u.values, cfg.params.alpha)
    return rows


def cmd_stability_test(cfg: RunConfig, epsilons=None, emit_profiles: bool = False) -> int:
    eps_list = tuple(epsilons) if epsilons else cfg.epsilons
    rows = stability_rows(cfg, eps_list, emit_profiles)
    out = _output_dir(cfg)
    lines = ["epsilon,psi_diff,f_diff,u_diff"] + [",".join(fmt(v) for v in row) for row in rows]
    (out / "stability.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{'epsilon':>10} {'psi_diff':>12} {'f_diff':>12} {'u_diff':>12}")
    for row in rows:
        print(" ".join(f"{v:>{10 if i == 0 else 12}.6g}" for i, v in enumerate(row)))
    return EXIT_OK


def cmd_mlf(gamma: float, beta: float, z: float) -> int:
    value = mittag_leffler(MLParams(gamma, beta), z)
    print(fmt(value))
    return EXIT_OK


def cmd_transform(cfg: RunConfig, direction: str, source: str | None = None) -> int:
    grids = cfg.grids()
    alpha = cfg.params.alpha
    profile = parse_profile(source, Path.cwd()) if source else cfg.profiles["input"]
    kind = profile.csv_kind()
    out = _output_dir(cfg)
    if direction == "forward":
        if kind == "spectral":
            raise ConfigError("forward transform needs a physical-space input")
        f = PhysicalFunction(grids.physical, profile.sample(grids.physical.nodes))
        result = dunkl_transform(alpha, f, grids.spectral, tol=cfg.transform_tol)
    else:
        if kind == "physical":
            raise ConfigError("inverse transform needs a spectral input")
        fhat = SpectralFunction(grids.spectral, profile.sample(grids.spectral.nodes))
        result = inverse_dunkl_transform(alpha, fhat, grids.physical, tol=cfg.transform_tol)
    path = out / f"transform_{direction}.csv"
    write_function_csv(path, result, alpha)
    print(f"wrote {path}" + ("; input does not decay at the grid ends" if result.truncated else ""))
    return EXIT_OK


def _epsilons(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("no epsilons given")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value configuration file")
    common.add_argument("--out", type=Path, help="output directory (overrides output.dir)")

    parser = argparse.ArgumentParser(prog="dunkl-isp", description=(
        "Direct and inverse source problems for the time-fractional Dunkl pseudo-parabolic equation."))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", parents=[common], help="solve for u given g and f")
    p.add_argument("--workers", type=int, default=1, help="threads for the per-frequency solve")
    sub.add_parser("inverse", parents=[common], help="recover (u, f) from phi = u(0) and psi = u(T)")
    p = sub.add_parser("stability-test", parents=[common], help="difference norms for scaled perturbations")
    p.add_argument("--epsilons", type=_epsilons, help="comma-separated perturbation sizes")
    p.add_argument("--emit-profiles", action="store_true", help="also write the perturbed source and state")
    p = sub.add_parser("mlf", help="evaluate E_{gamma,beta}(z)")
    p.add_argument("gamma", type=float)
    p.add_argument("beta", type=float)
    p.add_argument("z", type=float)
    p = sub.add_parser("transform", parents=[common], help="forward or inverse Dunkl transform")
    p.add_argument("direction", choices=("forward", "inverse"))
    p.add_argument("--input", help="profile expression or function CSV (default: data.input)")
    return parser


def run(args: argparse.Namespace) -> int:
    if args.command == "mlf":
        return cmd_mlf(args.gamma, args.beta, args.z)
    overrides = {"output.dir": str(args.out)} if args.out else None
    cfg = load_config(args.config, overrides)
    if args.command == "forward":
        return cmd_forward(cfg, workers=args.workers)
    if args.command == "inverse":
        return cmd_inverse(cfg)
    if args.command == "stability-test":
        return cmd_stability_test(cfg, args.epsilons, args.emit_profiles)
    return cmd_transform(cfg, args.direction, args.input)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

if __name__ == "__main__":
    sys.exit(main())
