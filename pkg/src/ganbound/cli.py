"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical or domain error,
4 IO error.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import compute_bound_report
from .config import (
    BoundsRequest,
    DistanceRequest,
    config_dict,
    config_hash,
    example_config,
    parse_config,
)
from .distance import make_data, sup_over_w
from .distributions import SampleSet, draw_samples
from .errors import (
    ConfigError,
    DomainError,
    GanBoundError,
    NumericalError,
    OracleCapError,
    ReportIOError,
    ShapeError,
)
from .experiments import (
    REGRESSORS,
    ExperimentConfig,
    dyadic_blocking_summary,
    fit_rate,
    run_error_experiment,
    trend_spearman,
)
from .plots import plot_dyadic, plot_rate
from .report import (
    emit_results,
    finalize_manifest,
    new_manifest,
    plot_csv,
    plot_rows,
    read_gaps_csv,
    summary_lines,
    to_json,
    write_manifest,
    write_text,
)
from .verification import (
    decomposition_suite,
    envelope_suite,
    lipschitz_suite,
    oracle_equivalence_suite,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, argparse.ArgumentError)):
        return EXIT_CONFIG
    if isinstance(exc, (ReportIOError, OSError)):
        return EXIT_IO
    if isinstance(exc, (DomainError, NumericalError, OracleCapError, ShapeError, GanBoundError,
                        ArithmeticError, ValueError)):
        return EXIT_NUMERIC
    return 1


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    common.add_argument("--seed", type=_u64, help="master seed, overrides the config")
    common.add_argument("--threads", type=int, default=1, help="parallel replicate workers (default: 1)")
    common.add_argument("--sup-method", choices=("pgd", "grid"), help="override the sup search method")
    common.add_argument("--abs-mode", choices=("on", "off"), help="override the absolute-value convention")

    p = argparse.ArgumentParser(
        prog="ganbound",
        description="Envelope constants, GAN objective distances, and generalization-rate experiments.",
        epilog="Experiment defaults: replicates=200, N_pop=100000, sup_method=grid, inf_method=grid, "
               "epsilon_slack=0, abs_mode=on; search defaults: 201 grid points per weight, cap 3 weights, "
               "pgd 20 restarts x 500 iterations, step 0.1 decaying by 0.99.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--example-config", metavar="KIND",
                   help="print a template config (an error kind, 'bounds' or 'distance') and exit")
    sub = p.add_subparsers(dest="command")
    sub.add_parser("bounds", parents=[common], help="envelope and Lipschitz constants for two classes")
    sub.add_parser("distance", parents=[common], help="one distance query")
    sub.add_parser("experiment", parents=[common], help="full generalization-gap experiment")
    rf = sub.add_parser("rate-fit", parents=[common], help="fit rates from an existing gaps.csv")
    rf.add_argument("--gaps", type=Path, required=True, help="gaps.csv from an experiment run")
    vf = sub.add_parser("verify", parents=[common], help="envelope, Lipschitz, oracle and decomposition suites")
    vf.add_argument("--quick", action="store_true", help="fewer instances per suite")
    return p


# ----------------------------------------------------------------- commands


def _overrides(cfg, args):
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.sup_method is not None:
        changes["sup_method" if isinstance(cfg, ExperimentConfig) else "method"] = args.sup_method
    if args.abs_mode is not None:
        changes["abs_mode"] = args.abs_mode == "on"
    if not changes:
        return cfg
    try:
        return replace(cfg, **changes)
    except GanBoundError as exc:
        raise ConfigError(str(exc)) from exc


def _need_config(args) -> Path:
    if args.config is None:
        raise ConfigError("--config PATH required")
    return args.config


def cmd_bounds(args) -> int:
    req: BoundsRequest = parse_config(_need_config(args), "bounds")
    manifest = new_manifest(config_hash(req), None, config_dict(req), "bounds")
    write_manifest(manifest, args.out)
    rep = compute_bound_report(req.fspec, req.gspec, req.phi, req.B_X, req.B_Z, req.weights_f, req.weights_g)
    path = write_text(args.out / "bound_report.json", to_json(rep.to_dict()))
    finalize_manifest(manifest, args.out, [path])
    print(to_json(rep.to_dict()), end="")
    return EXIT_OK


def _distance_samples(req: DistanceRequest, rng) -> SampleSet | None:
    if req.samples is not None:
        x = np.atleast_2d(np.asarray(req.samples["x"], dtype=np.float64))
        z = np.atleast_2d(np.asarray(req.samples["z"], dtype=np.float64))
        return SampleSet(x, z)
    if req.variant == "population":
        return None
    m = req.m if req.variant == "empirical_mn" else 0
    return draw_samples(req.target, req.base, req.n, m, rng, req.master_seed)


def cmd_distance(args) -> int:
    req: DistanceRequest = _overrides(parse_config(_need_config(args), "distance"), args)
    manifest = new_manifest(config_hash(req), req.master_seed, config_dict(req), "distance")
    write_manifest(manifest, args.out)
    rng = np.random.default_rng(req.master_seed)
    samples = _distance_samples(req, rng)
    data = make_data(req.variant, req.fspec, req.gspec, req.phi, samples=samples, target=req.target,
                     base=req.base, n_pop=req.N_pop, rng=rng)
    res = sup_over_w(req.fspec, req.gspec, req.theta, req.phi, data, req.method, req.search, req.abs_mode,
                     np.random.default_rng(req.master_seed))
    record = {"value": res.value, "method": res.method, "variant": req.variant,
              "abs_mode": "on" if req.abs_mode else "off", "phi": req.phi.to_dict(),
              "theta": req.theta.to_list(), "argmax_weights": res.argmax_weights.to_list(),
              "diagnostics": res.diagnostics, "master_seed": req.master_seed,
              "N_pop": data.n_pop, "population_source": [data.x.source, data.z.source]}
    path = write_text(args.out / "distance.json", to_json(record))
    finalize_manifest(manifest, args.out, [path])
    print(to_json(record), end="")
    return EXIT_OK


def _fits(records) -> dict:
    fits: dict = {}
    for kind in REGRESSORS:
        try:
            fits[kind] = fit_rate(records, kind)
        except ValueError as exc:
            fits[kind] = {"error": str(exc)}
    try:
        fits["spearman_n_vs_gap"] = trend_spearman(records)
    except ValueError as exc:
        fits["spearman_n_vs_gap"] = {"error": str(exc)}
    return fits


def _figures(records, fits, out: Path, title: str) -> tuple[list[Path], dict]:
    paths, extra = [], {}
    fit = fits.get("log_sqrt_logn_over_n")
    rows = plot_rows(records, fit if not isinstance(fit, dict) else None)
    paths.append(plot_rate(rows, out / "rate_fit.png", title))
    try:
        dy = dyadic_blocking_summary(records)
        extra["dyadic_blocks.json"] = {"rows": dy.rows, "notes": dy.notes, "spread": dy.spread()}
        paths.append(plot_dyadic(dy.rows, out / "dyadic_blocks.png"))
    except ValueError as exc:
        extra["dyadic_blocks.json"] = {"rows": [], "notes": [str(exc)]}
    return paths, extra


def cmd_experiment(args) -> int:
    cfg: ExperimentConfig = _overrides(parse_config(_need_config(args), "experiment"), args)
    manifest = new_manifest(config_hash(cfg), cfg.master_seed, config_dict(cfg), "experiment")
    write_manifest(manifest, args.out)
    try:
        rep = compute_bound_report(cfg.fspec, cfg.gspec, cfg.phi, cfg.target.norm_bound(), cfg.base.norm_bound())
        diagnostics: list = []
        records = run_error_experiment(cfg, threads=max(1, args.threads), diagnostics=diagnostics)
        if not records:
            raise NumericalError(f"every grid point aborted: {diagnostics}")
        fits = _figures_and_fits(records, args.out, cfg, manifest, diagnostics)
        emit_results(records, fits["fits"], manifest, args.out, rep, fits["extra"])
    except BaseException as exc:
        finalize_manifest(manifest, args.out, [], status=f"failed: {exc}")
        raise
    for line in summary_lines(records, fits["fits"]):
        print(line)
    return EXIT_OK


def _figures_and_fits(records, out, cfg, manifest, diagnostics) -> dict:
    fits = _fits(records)
    figs, extra = _figures(records, fits, out, f"{cfg.experiment_id} ({cfg.error_kind})")
    if diagnostics:
        extra["diagnostics.json"] = diagnostics
    manifest["outputs"] = sorted(p.name for p in figs)
    return {"fits": fits, "extra": extra}


def cmd_rate_fit(args) -> int:
    digest = hashlib.sha256(Path(args.gaps).read_bytes()).hexdigest()
    manifest = new_manifest(digest, None, {"gaps": str(args.gaps)}, "rate-fit")
    write_manifest(manifest, args.out)
    records = read_gaps_csv(args.gaps)
    if not records:
        raise ValueError(f"{args.gaps} has no records")
    fits = _fits(records)
    figs, extra = _figures(records, fits, args.out, Path(args.gaps).stem)
    fit = fits["log_sqrt_logn_over_n"]
    paths = [write_text(args.out / "rate_fit.json", to_json({k: (v.to_dict() if hasattr(v, "to_dict") else v)
                                                            for k, v in fits.items()})),
             write_text(args.out / "plot_data.csv",
                        plot_csv(plot_rows(records, None if isinstance(fit, dict) else fit)))]
    paths += [write_text(args.out / k, to_json(v)) for k, v in extra.items()]
    finalize_manifest(manifest, args.out, paths + figs)
    for line in summary_lines(records, fits):
        print(line)
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 0
    manifest = new_manifest(hashlib.sha256(f"verify:{seed}:{args.quick}".encode()).hexdigest(), seed,
                            {"quick": args.quick}, "verify")
    write_manifest(manifest, args.out)
    ss = np.random.SeedSequence(seed).spawn(4)
    q = args.quick
    results = {
        "envelope": envelope_suite(np.random.default_rng(ss[0]), draws=2000 if q else 10_000),
        "lipschitz": lipschitz_suite(np.random.default_rng(ss[1]), draws=2000 if q else 10_000),
        "oracle_equivalence": oracle_equivalence_suite(np.random.default_rng(ss[2]), 20 if q else 100),
        "decomposition": decomposition_suite(np.random.default_rng(ss[3]), 12 if q else 50),
    }
    path = write_text(args.out / "verify.json", to_json(results))
    ok = all(r["passed"] for r in results.values())
    finalize_manifest(manifest, args.out, [path], "complete" if ok else "failed checks")
    for name, r in results.items():
        print(f"{name}: {'PASS' if r['passed'] else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {"bounds": cmd_bounds, "distance": cmd_distance, "experiment": cmd_experiment,
            "rate-fit": cmd_rate_fit, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.example_config is not None:
            print(example_config(args.example_config), end="")
            return EXIT_OK
        if args.command is None:
            parser.print_help()
            return EXIT_CONFIG
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - mapped to the exit-code contract
        code = exit_code(exc)
        print(f"ganbound: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
