"""
Command-line entry point for the point-scatterer toolkit.

Sub-commands:
    norms       Norm table and gap report of the dual lattice
    specfun     Spectral function F(lambda) sampled on a grid
    spectrum    Perturbed eigenvalues up to X
    matrix      Matrix elements <e_zeta g, g> over (lambda, zeta)
    equidist    Dyadic-window decay of matrix elements along the sieved spectrum
    sieve       Lambda_g, Lambda_zeta and Lambda_J reports
    rankone     Secular-equation solver against the dense oracle
    density     |g_{lambda,L}|^2 on a uniform grid
    truncation  Relative truncation defect along Lambda_g
    normbound   ||G_lambda|| against the lambda^(-epsilon) floor
    szeta       Growth of #S_zeta over dyadic cutoffs

Usage:
    python main.py norms --lattice 1/1 --X 100
    python main.py spectrum --phi 0.5 --X 10000
    python main.py equidist --zeta 1,0 --X 8192
    python main.py rankone --demo
    python main.py density --lam 1000.5 --L 15 --size 256
    python main.py szeta --zeta 1,0 --X 65536

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O failure.
"""

import argparse
import logging
import math
import sys
from datetime import datetime

import numpy as np
import pandas as pd
from pydantic import ValidationError

from config.settings import LOG_LEVEL

# Configure logging
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

from scatterer.errors import ScattererError
from scatterer.experiments import (
    equidistribution_experiment,
    matrix_element_grid,
    rankone_demo,
    rankone_oracle_suite,
    truncation_decay,
)
from scatterer.export import write_csv, write_json
from scatterer.greens import FULL, GreensContext, density_grid, norm_lower_bound_sweep, truncate
from scatterer.lattice import (
    build_norm_table,
    count_upto,
    gap_stats,
    landau_ratio,
    remainder_exponent_fit,
)
from scatterer.run_config import RunConfig, load_run_config
from scatterer.sieves import lambda_g_filter, lambda_J_intersection, lambda_zeta_filter, s_zeta_count
from scatterer.spectral import perturbed_spectrum, specfun_scan, spectrum_weyl_ratio


# =============================================================================
# ARGUMENT PARSING
# =============================================================================

def parse_zeta(text: str):
    try:
        m, n = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"zeta must be 'm,n' with integers, got '{text}'") from None
    return (m, n)


def parse_truncation(text: str):
    if text.lower() == FULL:
        return FULL
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"L must be a number or 'full', got '{text}'") from None


def parse_point(text: str):
    try:
        x, y = (float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"point must be 'x,y', got '{text}'") from None
    return (x, y)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file with RunConfig values")
    common.add_argument("--lattice", help="'p/q' (a^4 = p/q) or 'irr:<a2>'")
    common.add_argument("--phi", type=float, help="Extension phase in (-pi, pi)")
    common.add_argument("--X", type=float, help="Norm / eigenvalue cutoff")
    common.add_argument("--delta", type=float, help="Annulus exponent")
    common.add_argument("--eps-gap", dest="epsilon_gap", type=float, help="Gap-filter exponent")
    common.add_argument("--theta", type=float, help="Weyl remainder exponent")
    common.add_argument("--tail-tol", dest="tail_tol", type=float, help="Absolute tail tolerance")
    common.add_argument("--window", type=float, help="Exactly summed band half-width")
    common.add_argument("--seed", type=int, help="Seed for randomized sweeps")
    common.add_argument("--out", dest="output_dir", help="Output directory")

    parser = argparse.ArgumentParser(description="Point scatterer on a flat torus")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("norms", parents=[common], help="Norm table and gap report")

    specfun = sub.add_parser("specfun", parents=[common], help="Spectral function on a grid")
    specfun.add_argument("--lo", type=float, default=0.0, help="Grid start")
    specfun.add_argument("--hi", type=float, default=60.0, help="Grid end")
    specfun.add_argument("--samples", type=int, default=6000, help="Grid points")

    sub.add_parser("spectrum", parents=[common], help="Perturbed spectrum up to X")

    matrix = sub.add_parser("matrix", parents=[common], help="Matrix elements over (lambda, zeta)")
    matrix.add_argument("--zeta", type=parse_zeta, action="append", help="Dual vector m,n (repeatable)")
    matrix.add_argument("--L", type=parse_truncation, help="Annulus half-width or 'full' (default lambda^delta)")
    matrix.add_argument("--count", type=int, default=20, help="Eigenvalues sampled from Lambda_g")

    equidist = sub.add_parser("equidist", parents=[common], help="Equidistribution decay experiment")
    equidist.add_argument("--zeta", type=parse_zeta, action="append", help="Dual vector m,n (repeatable)")
    equidist.add_argument(
        "--L", type=parse_truncation, default=FULL, help="Annulus half-width or 'full' (default full)"
    )

    sieve = sub.add_parser("sieve", parents=[common], help="Density-one sieves")
    sieve.add_argument("--zeta", type=parse_zeta, action="append", help="Dual vector m,n (repeatable)")
    sieve.add_argument("--J", type=float, help="Also intersect over all 0 < |zeta| <= J")
    sieve.add_argument("--verify", action="store_true", help="Recheck every kept eigenvalue")

    rankone = sub.add_parser("rankone", parents=[common], help="Rank-one oracle suite")
    rankone.add_argument("--demo", action="store_true", help="Print the 2x2 analytic case")
    rankone.add_argument("--count", type=int, default=100, help="Random models")

    density = sub.add_parser("density", parents=[common], help="Density of a truncated eigenfunction")
    density.add_argument("--lam", type=float, required=True, help="Spectral parameter lambda")
    density.add_argument("--L", type=float, help="Annulus half-width (default lambda^delta)")
    density.add_argument("--size", type=int, default=256, help="Grid points per side")
    density.add_argument("--x0", type=parse_point, default=(0.0, 0.0), help="Scatterer position x,y")

    truncation = sub.add_parser("truncation", parents=[common], help="Truncation defect along Lambda_g")
    truncation.add_argument("--exponent", type=float, default=0.4, help="L = lambda^exponent")

    normbound = sub.add_parser("normbound", parents=[common], help="Green's function norm against its floor")
    normbound.add_argument("--epsilon", type=float, default=0.25, help="Floor lambda^(-epsilon)")

    szeta = sub.add_parser("szeta", parents=[common], help="Counts of S_zeta over dyadic cutoffs")
    szeta.add_argument("--zeta", type=parse_zeta, action="append", help="Dual vector m,n (repeatable)")

    return parser


CONFIG_KEYS = ("lattice", "phi", "X", "delta", "epsilon_gap", "theta", "tail_tol", "window", "seed", "output_dir")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, key, None) for key in CONFIG_KEYS}
    return load_run_config(args.config, overrides)


def _header_value(value):
    if isinstance(value, list):
        return ";".join(_header_value(item) for item in value)
    if isinstance(value, tuple):
        return ",".join(f"{item:g}" if isinstance(item, float) else str(item) for item in value)
    return value


def command_params(args: argparse.Namespace):
    """Sub-command name and its own options, in header form."""
    params = {"command": args.command}
    for key, value in sorted(vars(args).items()):
        if key in CONFIG_KEYS or key in ("config", "command") or value is None:
            continue
        params[key] = _header_value(value)
    return params


# =============================================================================
# COMMANDS
# =============================================================================

def _emit(args, config: RunConfig, name: str, frame=None, summary=None):
    out = config.output_path
    command = command_params(args)
    params = config.header_params(command)
    digest = config.config_hash(command)
    if frame is not None:
        write_csv(frame, out / f"{name}.csv", digest, params)
    if summary is not None:
        write_json(summary, out / f"{name}.json", digest, params)


def cmd_norms(args, config: RunConfig) -> None:
    table = build_norm_table(config.spec, config.X)
    with_mult, distinct = count_upto(table, config.X)
    summary = {"X": config.X, "distinct_norms": distinct, "vectors": with_mult}

    _emit(args, config, "norms", table.to_frame())
    if table.positive_norms.size >= 2:
        report = gap_stats(table, config.epsilon_gap)
        _emit(args, config, "gaps", report.to_frame())
        summary.update({
            "max_gap": report.max_gap,
            "mean_gap": report.mean_gap,
            "fraction_small": report.fraction_small,
            "fitted_c": report.fitted_c,
            "gap_windows": report.windows().to_dict(orient="records"),
        })
    if config.X > 16:
        xs = np.geomspace(16, config.X, 16)
        theta, constant = remainder_exponent_fit(table, xs)
        summary.update({"remainder_theta": theta, "remainder_c": constant})
        if config.spec.is_rational:
            summary["landau_ratio"] = landau_ratio(table, config.X)
    _emit(args, config, "norms_summary", summary=summary)
    print(f"distinct norms <= {config.X:g}: {distinct} ({with_mult} lattice vectors)")


def cmd_specfun(args, config: RunConfig) -> None:
    grid = np.linspace(args.lo, args.hi, args.samples)
    frame = specfun_scan(config.spec, grid, config.spectral_params())
    _emit(args, config, "specfun", frame)
    print(f"spectral function: {len(frame)} rows on [{args.lo:g}, {args.hi:g}]")


def cmd_spectrum(args, config: RunConfig) -> None:
    spectrum = perturbed_spectrum(config.spec, config.phi, config.X, config.spectral_params())
    summary = {
        "c0": spectrum.c0,
        "target": spectrum.target,
        "eigenvalues": len(spectrum),
        "max_residual": max((e.residual for e in spectrum.entries), default=0.0),
        "unconverged": len(spectrum.unconverged),
    }
    if config.X > math.e:
        summary["weyl_ratio"] = spectrum_weyl_ratio(spectrum, config.X)
    _emit(args, config, "spectrum", spectrum.to_frame(), summary)
    print(f"perturbed eigenvalues up to {config.X:g}: {len(spectrum)} (c0 = {spectrum.c0:.12g})")


def cmd_matrix(args, config: RunConfig) -> None:
    spec = config.spec
    zetas = [spec.vector(m, n) for m, n in (args.zeta or [(1, 0)])]
    spectrum = perturbed_spectrum(spec, config.phi, config.X, config.spectral_params())
    lams = lambda_g_filter(spectrum, config.epsilon_gap).kept_lambdas
    if lams.size > args.count:
        lams = lams[np.unique(np.linspace(0, lams.size - 1, args.count).round().astype(int))]
    frame = matrix_element_grid(spec, lams, zetas, args.L, delta=config.delta, tail_tol=config.tail_tol)
    _emit(args, config, "matrix", frame)
    print(f"matrix elements: {len(frame)} rows")


def cmd_equidist(args, config: RunConfig) -> None:
    spec = config.spec
    spectrum = perturbed_spectrum(spec, config.phi, config.X, config.spectral_params())
    results = {}
    for m, n in args.zeta or [(1, 0)]:
        result = equidistribution_experiment(
            spec,
            spec.vector(m, n),
            config.X,
            phi=config.phi,
            delta=config.delta,
            epsilon_gap=config.epsilon_gap,
            theta=config.theta,
            L=args.L,
            spectrum=spectrum,
            tail_tol=config.tail_tol,
        )
        _emit(args, config, f"equidist_{m}_{n}", result.rows)
        results[f"{m},{n}"] = result.summary
        print(
            f"zeta=({m},{n}): {result.summary['kept']} eigenvalues, "
            f"{result.summary['windows_nondecreasing']}/{len(result.windows)} windows nondecreasing"
        )
    _emit(args, config, "equidist_summary", summary={"experiments": results})


def cmd_sieve(args, config: RunConfig) -> None:
    spec = config.spec
    spectrum = perturbed_spectrum(spec, config.phi, config.X, config.spectral_params())
    summary = {}

    gap_report = lambda_g_filter(spectrum, config.epsilon_gap)
    _emit(args, config, "lambda_g", gap_report.frame)
    summary["lambda_g"] = gap_report.summary()

    for m, n in args.zeta or [(1, 0)]:
        report = lambda_zeta_filter(spectrum, spec.vector(m, n), config.delta, config.theta, verify=args.verify)
        _emit(args, config, f"lambda_zeta_{m}_{n}", report.frame)
        summary[f"lambda_zeta_{m}_{n}"] = report.summary()

    if args.J is not None:
        report = lambda_J_intersection(spectrum, args.J, config.delta, config.epsilon_gap, config.theta)
        _emit(args, config, "lambda_J", report.frame)
        summary["lambda_J"] = report.summary()

    _emit(args, config, "sieve_summary", summary=summary)
    for name, item in summary.items():
        print(f"{name}: kept {item['kept']}/{item['total']} (density {item['density']:.4f})")


def cmd_rankone(args, config: RunConfig) -> None:
    if args.demo:
        demo = rankone_demo()
        print(f"eps={demo['eps']} v={demo['v_coeffs']} alpha={demo['alpha']}")
        print(f"roots: {demo['roots'][0]:.15f}, {demo['roots'][1]:.15f}")
        print(f"exact: {demo['exact'][0]:.15f}, {demo['exact'][1]:.15f}")
        print(f"max error {demo['max_error']:.2e}, dense oracle delta {demo['oracle_delta']:.2e}")
    result = rankone_oracle_suite(seed=config.seed, count=args.count)
    _emit(args, config, "rankone", result.rows, result.summary)
    print(
        f"oracle suite: {args.count} models, max delta {result.summary['max_oracle_delta']:.2e}, "
        f"max residual {result.summary['max_residual']:.2e}"
    )


def cmd_density(args, config: RunConfig) -> None:
    context = GreensContext(config.spec, args.lam, args.x0)
    L = args.L if args.L is not None else args.lam ** config.delta
    trunc = truncate(context, L, config.tail_tol)
    frame = density_grid(trunc, args.size)
    summary = {
        "lambda": context.lam,
        "L": L,
        "x0": list(context.x0),
        "terms": int(trunc.values.size),
        "mean_density": float(frame["density"].mean()),
        "max_density": float(frame["density"].max()),
    }
    _emit(args, config, "density", frame, summary)
    print(f"density: {args.size}x{args.size} grid, {summary['terms']} terms, max {summary['max_density']:.4g}")


def cmd_truncation(args, config: RunConfig) -> None:
    spectrum = perturbed_spectrum(config.spec, config.phi, config.X, config.spectral_params())
    result = truncation_decay(spectrum, args.exponent, config.epsilon_gap, config.tail_tol)
    _emit(args, config, "truncation", result.rows, result.summary)
    print(f"truncation defect: {result.summary['count']} eigenvalues, L = lambda^{args.exponent:g}")


def cmd_normbound(args, config: RunConfig) -> None:
    spectrum = perturbed_spectrum(config.spec, config.phi, config.X, config.spectral_params())
    frame = norm_lower_bound_sweep(spectrum, args.epsilon, config.epsilon_gap, config.tail_tol)
    summary = {
        "epsilon": args.epsilon,
        "count": len(frame),
        "passes": int(frame["passes"].sum()),
        "min_scaled_norm": float(frame["scaled_norm"].min()) if len(frame) else None,
    }
    _emit(args, config, "normbound", frame, summary)
    print(f"norm floor lambda^-{args.epsilon:g}: {summary['passes']}/{summary['count']} above")


def _dyadic_cutoffs(X: float):
    cutoffs = [2.0 ** j for j in range(4, int(math.log2(X)) + 1)] if X >= 16 else []
    if not cutoffs or cutoffs[-1] < X:
        cutoffs.append(float(X))
    return cutoffs


def cmd_szeta(args, config: RunConfig) -> None:
    spec = config.spec
    rows = []
    for m, n in args.zeta or [(1, 0)]:
        for cutoff in _dyadic_cutoffs(config.X):
            count, normalized = s_zeta_count(spec, spec.vector(m, n), config.delta, cutoff)
            rows.append({"zeta_m": m, "zeta_n": n, "X": cutoff, "count": count, "normalized": normalized})
    frame = pd.DataFrame(rows)
    _emit(args, config, "szeta", frame)
    print(f"S_zeta counts: {len(frame)} rows up to X={config.X:g}")


COMMANDS = {
    "norms": cmd_norms,
    "specfun": cmd_specfun,
    "spectrum": cmd_spectrum,
    "matrix": cmd_matrix,
    "equidist": cmd_equidist,
    "sieve": cmd_sieve,
    "rankone": cmd_rankone,
    "density": cmd_density,
    "truncation": cmd_truncation,
    "normbound": cmd_normbound,
    "szeta": cmd_szeta,
}


# =============================================================================
# MAIN
# =============================================================================

def _validation_message(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in error['loc']) or 'config'}: {error['msg'].removeprefix('Value error, ')}"
        for error in exc.errors()
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    inicio = datetime.now()

    try:
        config = config_from_args(args)
        command = command_params(args)
        logger.info("=" * 60)
        logger.info(f"SCATTERER {args.command.upper()}")
        logger.info(f"Config {config.config_hash(command)[:12]}: {config.canonical_json(command)}")
        logger.info("=" * 60)
        COMMANDS[args.command](args, config)
    except ValidationError as exc:
        print(f"error: domain: {_validation_message(exc)}", file=sys.stderr)
        return 2
    except ScattererError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return exc.exit_code

    logger.info(f"Duration: {datetime.now() - inicio}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
