"""Command line entry point.

    fisherbound run --model saleh --csv saleh.csv --svg saleh.svg
    fisherbound validate --suite tightness
    fisherbound oracle --model rician --theta 0.5
    fisherbound regen-fixtures
    fisherbound figures --outdir out/

Exit status: 0 success, 1 run-level failure, 2 invalid arguments.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from fisherbound.errors import FisherBoundError, RunFailedError
from fisherbound.experiments import (
    DEFAULT_N,
    DEFAULT_SEED,
    FULL_BANK,
    ExperimentConfig,
    curve_to_csv,
    run_cubic_setups,
    run_experiment,
)
from fisherbound.models import MODEL_NAMES

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_FIXTURE = os.path.join("tests", "data", "rician_fim.csv")

# flags accepted in --config files (names without the leading dashes)
RUN_KEYS = (
    "model", "a", "b", "sigma2", "angle", "transforms", "theta-min", "theta-max", "theta-steps",
    "n-samples", "seed", "fd-step", "reg-mode", "reg-tol", "workers", "csv", "svg",
)


class UsageError(Exception):
    pass


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in RUN_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown or malformed entry {raw.strip()!r}")
        values[key.replace("-", "_")] = value.strip()
    return values


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=MODEL_NAMES, default="saleh")
    p.add_argument("--a", type=float, help="saleh gain / cubic input mean")
    p.add_argument("--b", type=float, help="saleh saturation / cubic input variance")
    p.add_argument("--sigma2", type=float, help="noise variance for ref:gauss-mean")
    p.add_argument("--angle", type=float, help="rician line-of-sight angle in radians")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fisherbound", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sweep a theta grid and write the bound curve")
    _add_model_flags(run)
    run.add_argument("--transforms", default=FULL_BANK)
    run.add_argument("--theta-min", type=float)
    run.add_argument("--theta-max", type=float)
    run.add_argument("--theta-steps", type=int)
    run.add_argument("--n-samples", type=int, default=DEFAULT_N)
    run.add_argument("--seed", type=int, default=DEFAULT_SEED)
    run.add_argument("--fd-step", type=float, help="absolute finite-difference step (default: relative rule)")
    run.add_argument("--reg-mode", choices=("truncated", "ridge"), default="truncated")
    run.add_argument("--reg-tol", type=float, default=1e-10)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--csv", help="output CSV (stdout when omitted)")
    run.add_argument("--svg", help="output SVG chart")
    run.add_argument("--config", help="key = value file; command-line flags take precedence")

    val = sub.add_parser("validate", help="run a property suite")
    from fisherbound.validation import SUITES

    val.add_argument("--suite", choices=SUITES + ("all",), required=True)
    val.add_argument("--n-samples", type=int, default=DEFAULT_N)

    orc = sub.add_parser("oracle", help="print closed-form and quadrature Fisher information")
    _add_model_flags(orc)
    orc.add_argument("--theta", type=float, required=True)

    reg = sub.add_parser("regen-fixtures", help="recompute the Rician reference table")
    reg.add_argument("--out", default=DEFAULT_FIXTURE)
    reg.add_argument("--rel-tol", type=float, default=1e-10)

    fig = sub.add_parser("figures", help="reproduce the three case-study figures (CSV + SVG)")
    fig.add_argument("--outdir", default="figures")
    fig.add_argument("--n-samples", type=int, default=DEFAULT_N)
    fig.add_argument("--seed", type=int, default=DEFAULT_SEED)
    fig.add_argument("--workers", type=int, default=1)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run" and args.config:
        try:
            defaults = read_config_file(args.config)
        except UsageError as exc:
            parser.error(str(exc))
        run_parser = parser._subparsers._group_actions[0].choices["run"]
        run_parser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _config_from_args(args) -> ExperimentConfig:
    return ExperimentConfig(
        model=args.model, a=args.a, b=args.b, sigma2=args.sigma2, angle=args.angle,
        transforms=args.transforms, theta_min=args.theta_min, theta_max=args.theta_max,
        theta_steps=args.theta_steps, n_samples=args.n_samples, seed=args.seed, fd_step=args.fd_step,
        reg_mode=args.reg_mode, reg_tol=args.reg_tol, workers=args.workers, csv=args.csv, svg=args.svg,
    )


def _report_curve(curve) -> None:
    print(f"# {curve.label} fingerprint={curve.meta.get('fingerprint', '')}", file=sys.stderr)
    if curve.flagged:
        print(f"# {curve.flagged} flagged point(s)", file=sys.stderr)


def cmd_run(args) -> int:
    config = _config_from_args(args)
    if config.model == "cubic" and config.a is None and config.b is None:
        config.validate()
        try:
            for c in run_cubic_setups(config, write=True):
                _report_curve(c)
                if not config.csv:
                    sys.stdout.write(f"# {c.label}\n" + curve_to_csv(c))
        except RunFailedError as exc:
            print(f"run failed: {exc}", file=sys.stderr)
            return EXIT_FAIL
        return EXIT_OK
    try:
        config.validate()
    except FisherBoundError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        curve = run_experiment(config)
    except RunFailedError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        if not config.csv:
            sys.stdout.write(curve_to_csv(exc.curve))
        return EXIT_FAIL
    _report_curve(curve)
    if not config.csv:
        sys.stdout.write(curve_to_csv(curve))
    return EXIT_OK


def cmd_validate(args) -> int:
    from fisherbound.validation import SUITES, validate

    names = SUITES if args.suite == "all" else (args.suite,)
    ok = True
    for name in names:
        report = validate(name, n_samples=args.n_samples)
        print("\n".join(report.lines()))
        ok &= report.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_oracle(args) -> int:
    from fisherbound.validation import oracle_summary

    params = {k: getattr(args, k) for k in ("a", "b", "sigma2", "angle")}
    out = oracle_summary(args.model, args.theta, **params)

    def fmt(v):
        return "n/a" if v is None else f"{v:.12g}"

    print(f"model={out['model']} theta={args.theta:g}")
    print(f"closed_form={fmt(out['closed_form'])}")
    if out["input_fisher"] is not None:
        print(f"input_fisher={fmt(out['input_fisher'])}")
    print(f"quadrature={fmt(out['quadrature'])}")
    return EXIT_OK


def cmd_regen(args) -> int:
    from fisherbound.oracle import write_rician_fixture

    directory = os.path.dirname(args.out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    rows = write_rician_fixture(args.out, rel_tol=args.rel_tol)
    for theta, fim, _ in rows:
        print(f"theta={theta:g} fim={fim:.15g}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_figures(args) -> int:
    from fisherbound.plotting import FIGURE_YLIM, plot_curves

    os.makedirs(args.outdir, exist_ok=True)
    base = ExperimentConfig(n_samples=args.n_samples, seed=args.seed, workers=args.workers)
    failed = False
    for name in ("saleh", "rician"):
        cfg = replace(base, model=name, csv=os.path.join(args.outdir, f"{name}.csv"))
        try:
            curve = run_experiment(cfg)
        except RunFailedError as exc:
            failed, curve = True, exc.curve
        plot_curves([curve], os.path.join(args.outdir, f"{name}.svg"), "loss_db",
                    ylim=FIGURE_YLIM[name], title=curve.label)
        print(f"wrote {cfg.csv}")
    cfg = replace(base, model="cubic", csv=os.path.join(args.outdir, "cubic.csv"),
                  svg=os.path.join(args.outdir, "cubic.svg"))
    try:
        run_cubic_setups(cfg)
    except RunFailedError:
        failed = True
    print(f"wrote {cfg.svg}")
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "validate": cmd_validate,
    "oracle": cmd_oracle,
    "regen-fixtures": cmd_regen,
    "figures": cmd_figures,
}


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except FisherBoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
