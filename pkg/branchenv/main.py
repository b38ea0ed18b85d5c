import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from branchenv import __version__
from branchenv.classify import UNICRIT_WINDOW, classify
from branchenv.genfun import extinction_curve, series_table
from branchenv.model import dump_model, load_model, skip_with_report, validate_model
from branchenv.simulate import (
    conditioned_stats,
    ensemble_moments,
    inverse_mean_integral,
    ks_exponential,
    load_ct_model,
    martingale_check,
    moment_ode,
    run_ensemble,
    simulate_ct,
    skeleton_extinction,
    type_proportions,
    validate_ct_model,
)
from branchenv.spectral import duality_drift, eigen_sequence
from branchenv.tools.cli_tools import display_summary, print_diagnostic
from branchenv.tools.errors import BranchingError, EmptyConditioningError, ModelValidationError
from branchenv.tools.logger import Logger
from branchenv.tools.reports import provenance, write_csv, write_json
from branchenv.tools.settings import Settings

DEFAULT_HORIZON = 1024
CLASSIFY_HORIZON = 4096

# Flags that only change presentation or scheduling, never results
UNRECORDED = {"command", "config", "out", "quiet", "threads", "verbose"}


class CLIInputError(Exception):
    """A command-line argument could not be parsed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIInputError(message)


def _int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got '{text}'"
        ) from None
    if any(v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"counts must be nonnegative, got '{text}'")
    return values


def _float_list(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got '{text}'"
        ) from None
    if any(not v > 0 for v in values):
        raise argparse.ArgumentTypeError(f"weights must be positive, got '{text}'")
    return values


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def _nonnegative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'") from None
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a finite number > 0, got {text}")
    return value


def _mass_tol(text: str) -> float:
    value = _positive_float(text)
    if value > 1e-6:
        raise argparse.ArgumentTypeError(f"mass tolerance must lie in (0, 1e-6], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    """
    Build the argument parser with one subcommand per pipeline.

    Returns:
        argparse.ArgumentParser: Parser whose errors raise CLIInputError.
    """
    common = _Parser(add_help=False)
    common.add_argument("model", help="path to a JSON model file")
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--config", help="dotenv settings file with BRANCHENV_* keys")
    common.add_argument("--verbose", action="store_true", help="echo log records to stderr")
    common.add_argument("--quiet", action="store_true", help="skip the summary table")

    spectral = _Parser(add_help=False)
    spectral.add_argument("--horizon", type=_positive_int, help="generations N")
    spectral.add_argument("--tol", type=_positive_float, help="target error of the forward vectors")
    spectral.add_argument("--u0", type=_float_list, help="comma-separated initial backward vector")

    sampling = _Parser(add_help=False)
    sampling.add_argument("-R", "--reps", type=_nonnegative_int, default=1000, help="trajectories")
    sampling.add_argument("--seed", type=_nonnegative_int, default=0, help="master seed")
    sampling.add_argument("--initial", type=_int_list, help="comma-separated initial counts")
    sampling.add_argument("--threads", type=_positive_int, default=1, help="worker processes")

    parser = _Parser(
        prog="branchenv",
        description="Branching processes in varying environments: analysis and simulation.",
    )
    parser.add_argument("--version", action="version", version=f"branchenv {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    validate = commands.add_parser("validate", parents=[common], help="check the assumptions")
    validate.add_argument("--horizon", type=_positive_int, help="generations to check")

    commands.add_parser("spectral", parents=[common, spectral], help="eigen sequence CSV")
    commands.add_parser("series", parents=[common, spectral], help="series table CSV")
    commands.add_parser("classify", parents=[common, spectral], help="classification JSON")

    simulate = commands.add_parser("simulate", parents=[common, sampling], help="discrete ensemble")
    simulate.add_argument("-n", "--generations", type=_nonnegative_int, default=100)
    simulate.add_argument("--traces", action="store_true", help="keep per-generation counts")
    simulate.add_argument("--tol", type=_positive_float, help="target error of the forward vectors")

    ct_simulate = commands.add_parser(
        "ct-simulate", parents=[common, sampling], help="continuous-time ensemble"
    )
    ct_simulate.add_argument("-T", "--time", type=_positive_float, default=5.0, help="final time")
    ct_simulate.add_argument("--step", type=_positive_float, default=0.01, help="largest ODE step")

    moments = commands.add_parser("moment-ode", parents=[common], help="first-moment ODE CSV")
    moments.add_argument("-T", "--time", type=_positive_float, default=5.0, help="final time")
    moments.add_argument("--step", type=_positive_float, default=0.01, help="largest ODE step")
    moments.add_argument("--initial", type=_int_list, help="comma-separated initial counts")

    skip = commands.add_parser("skip", parents=[common], help="write the skip-generation model")
    skip.add_argument("--skip", type=_positive_int, default=2, help="generations per step")
    skip.add_argument("--mass-tol", type=_mass_tol, help="mass each law may lose to truncation")

    return parser


class BranchenvCLI:
    """Runs one parsed subcommand and writes its artifacts."""

    def __init__(self, args: argparse.Namespace, settings: Settings):
        self.args = args
        self.settings = settings
        self.logger = Logger("branchenv.main")
        self.out = Path(args.out)
        self.stem = Path(args.model).stem

    def _get_commands(self) -> Dict[str, Callable[[], tuple]]:
        """
        Map subcommand names to their handlers.

        Returns:
            dict: Subcommand name to a handler returning (title, rows, artifacts).
        """
        return {
            "validate": self.run_validate,
            "spectral": self.run_spectral,
            "series": self.run_series,
            "classify": self.run_classify,
            "simulate": self.run_simulate,
            "ct-simulate": self.run_ct_simulate,
            "moment-ode": self.run_moment_ode,
            "skip": self.run_skip,
        }

    def meta(self, seed=None, **resolved) -> dict:
        """Provenance block: every result-relevant flag plus the settings."""
        config = {k: v for k, v in vars(self.args).items() if k not in UNRECORDED}
        config.update(resolved)
        config["settings"] = self.settings.as_dict()
        return provenance(self.args.command, seed, config)

    @staticmethod
    def check_length(flag: str, values, d: int):
        """Reject a per-type flag whose length does not match the model."""
        if values is not None and len(values) != d:
            raise CLIInputError(f"{flag} needs {d} comma-separated values, got {len(values)}")

    def artifact(self, suffix: str) -> Path:
        return self.out / f"{self.stem}_{suffix}"

    def horizon(self, default: int = DEFAULT_HORIZON) -> int:
        return default if self.args.horizon is None else self.args.horizon

    def run(self) -> int:
        handler = self._get_commands()[self.args.command]
        self.logger.info(f"Running '{self.args.command}' on {self.args.model}")
        title, rows, artifacts = handler()
        if not self.args.quiet:
            display_summary(title, rows, artifacts=artifacts)
        self.logger.info(f"'{self.args.command}' wrote {len(artifacts)} artifact(s)")
        return 0

    def run_validate(self) -> tuple:
        """Write the AssumptionReport as JSON."""
        model = load_model(self.args.model)
        N = max(self.horizon(), model.distinct_span())
        report = validate_model(
            model,
            N,
            floor=self.settings.assumption_floor,
            product_horizon=min(N, UNICRIT_WINDOW),
        )
        path = write_json(
            self.artifact("validate.json"),
            {"model": model.describe(), "report": report.to_dict()},
            self.meta(horizon=N),
        )
        return f"Assumptions of '{model.name}'", report.summary().items(), [path]

    def _eigs(self, model, N: int):
        self.check_length("--u0", self.args.u0, model.d)
        return eigen_sequence(
            model,
            N,
            u0=self.args.u0,
            tol=self.settings.spectral_tol,
            max_lookahead=self.settings.max_lookahead,
            floor=self.settings.assumption_floor,
        )

    def run_spectral(self) -> tuple:
        """Write the EigenSequence as CSV."""
        model = load_model(self.args.model)
        N = self.horizon()
        eigs = self._eigs(model, N)
        path = write_csv(
            self.artifact("spectral.csv"),
            eigs.csv_header(),
            eigs.csv_rows(),
            self.meta(horizon=N),
        )
        rows = list(eigs.summary().items()) + [("duality_drift", duality_drift(eigs))]
        return f"Eigen sequence of '{model.name}'", rows, [path]

    def run_series(self) -> tuple:
        """Write the SeriesTable as CSV."""
        model = load_model(self.args.model)
        N = self.horizon()
        table = series_table(model, self._eigs(model, N), N)
        path = write_csv(
            self.artifact("series.csv"),
            table.csv_header(),
            table.csv_rows(),
            self.meta(horizon=N),
        )
        return f"Series of '{model.name}'", table.summary().items(), [path]

    def run_classify(self) -> tuple:
        """Write the ClassificationReport as JSON; the verdict never changes the exit code."""
        model = load_model(self.args.model)
        N = self.horizon(CLASSIFY_HORIZON)
        if N < 2:
            raise CLIInputError(f"classify needs --horizon >= 2, got {N}")
        self.check_length("--u0", self.args.u0, model.d)
        report = classify(model, N, settings=self.settings, u0=self.args.u0)
        path = write_json(
            self.artifact("classify.json"),
            {"model": model.describe(), "classification": report.to_dict()},
            self.meta(horizon=N),
        )
        rows = [
            ("verdict", report.verdict.value),
            ("exact", report.exact),
            ("heuristic verdict", report.heuristic_verdict.value),
            ("rho", report.rho),
            ("Xi ratio", report.xi_ratio),
            ("Lambda Xi ratio", report.lambda_xi_ratio),
        ]
        return f"Classification of '{model.name}'", rows, [path]

    def _conditioned(self, ensemble) -> Optional[dict]:
        try:
            stats = conditioned_stats(ensemble)
        except EmptyConditioningError as e:
            self.logger.warning(str(e))
            return None
        return {
            **stats.summary(),
            "ks_exponential": ks_exponential(stats.samples),
            "type_proportions": type_proportions(ensemble),
        }

    def _moments(self, ensemble) -> Optional[dict]:
        return ensemble_moments(ensemble) if ensemble.R >= 2 else None

    def run_simulate(self) -> tuple:
        """Write the discrete ensemble as CSV and its statistics as JSON."""
        args = self.args
        model = load_model(args.model)
        self.check_length("--initial", args.initial, model.d)
        ensemble = run_ensemble(
            model,
            args.generations,
            args.reps,
            args.seed,
            initial=args.initial,
            particle_cap=self.settings.particle_cap,
            workers=args.threads,
            traces=args.traces,
            progress=not args.quiet,
        )

        # Step 1: statistics, computed before anything is written
        stats = {
            "ensemble": ensemble.summary(),
            "moments": self._moments(ensemble),
            "conditioned": self._conditioned(ensemble),
        }
        if args.generations >= 1:
            survival = extinction_curve(model, args.generations)[-1]
            stats["exact_survival"] = 1.0 - float(np.prod((1.0 - survival) ** ensemble.initial))
        if args.traces:
            eigs = eigen_sequence(
                model,
                args.generations,
                tol=self.settings.spectral_tol,
                max_lookahead=self.settings.max_lookahead,
                floor=self.settings.assumption_floor,
            )
            stats["martingale"] = martingale_check(model, eigs, ensemble)

        # Step 2: artifacts
        meta = self.meta(seed=args.seed, initial=ensemble.initial.tolist())
        csv_path = write_csv(
            self.artifact("ensemble.csv"), ensemble.csv_header(), ensemble.csv_rows(), meta
        )
        json_path = write_json(self.artifact("stats.json"), stats, meta)

        rows = list(ensemble.summary().items())
        if "exact_survival" in stats:
            rows.append(("exact survival", stats["exact_survival"]))
        if stats["conditioned"] is not None:
            rows.append(("KS vs Exp(1)", stats["conditioned"]["ks_exponential"]))
        return f"Ensemble of '{model.name}'", rows, [csv_path, json_path]

    def run_ct_simulate(self) -> tuple:
        """Write the continuous-time ensemble as CSV and its statistics as JSON."""
        args = self.args
        ct = load_ct_model(args.model)
        self.check_length("--initial", args.initial, ct.d)
        ensemble = simulate_ct(
            ct,
            args.time,
            args.reps,
            args.seed,
            initial=args.initial,
            particle_cap=self.settings.particle_cap,
            workers=args.threads,
            progress=not args.quiet,
        )

        # Step 1: deterministic references at T
        path = moment_ode(ct, args.time, args.step, ensemble.initial)
        stats = {
            "model": ct.describe(),
            "assumptions": validate_ct_model(ct, self.settings.assumption_floor).to_dict(),
            "ensemble": ensemble.summary(),
            "moments": self._moments(ensemble),
            "conditioned": self._conditioned(ensemble),
            "moment_ode_mean": path.at(args.time),
        }
        if ensemble.initial.sum() > 0:
            stats["inverse_mean_integral"] = inverse_mean_integral(
                ct, args.time, args.step, ensemble.initial
            )
        if args.time >= 1:
            survival = skeleton_extinction(ct, args.time, args.step)
            stats["skeleton_survival"] = survival
            stats["skeleton_survival_initial"] = 1.0 - float(
                np.prod((1.0 - survival[-1]) ** ensemble.initial)
            )

        # Step 2: artifacts
        meta = self.meta(seed=args.seed, initial=ensemble.initial.tolist())
        csv_path = write_csv(
            self.artifact("ct_ensemble.csv"), ensemble.csv_header(), ensemble.csv_rows(), meta
        )
        json_path = write_json(self.artifact("ct_stats.json"), stats, meta)

        rows = list(ensemble.summary().items()) + [("moment ODE mean", stats["moment_ode_mean"])]
        return f"Continuous-time ensemble of '{ct.name}'", rows, [csv_path, json_path]

    def run_moment_ode(self) -> tuple:
        """Write t, M_1..M_d as CSV."""
        args = self.args
        ct = load_ct_model(args.model)
        self.check_length("--initial", args.initial, ct.d)
        initial = None if args.initial is None else np.asarray(args.initial, dtype=float)
        path = moment_ode(ct, args.time, args.step, initial)
        csv_path = write_csv(
            self.artifact("moments.csv"),
            path.csv_header(),
            path.csv_rows(),
            self.meta(),
        )
        rows = [("T", args.time), ("steps", len(path.times) - 1), ("M(T)", path.means[-1])]
        return f"Moment ODE of '{ct.name}'", rows, [csv_path]

    def run_skip(self) -> tuple:
        """Write the skip-generation model as a new model file."""
        model = load_model(self.args.model)
        result = skip_with_report(
            model,
            self.args.skip,
            mass_tol=self.settings.mass_tol,
            support_cap=self.settings.support_cap,
        )
        path = dump_model(
            result.model,
            self.artifact(f"skip{self.args.skip}.json"),
            self.meta(truncation=result.to_dict()),
        )
        rows = [
            ("l", result.l),
            ("schedule entries", len(result.model.schedule)),
            ("tail", result.model.tail.to_dict()),
            ("max support", result.max_support),
            ("max truncated mass", result.total_truncated),
        ]
        return f"Skip-generation model '{result.model.name}'", rows, [path]


def resolve_settings(args: argparse.Namespace) -> Settings:
    """Settings file values overridden by explicit flags."""
    settings = Settings.from_file(args.config) if args.config else Settings()
    return settings.with_overrides(
        spectral_tol=getattr(args, "tol", None),
        mass_tol=getattr(args, "mass_tol", None),
    )


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map failures to exit codes.

    Args:
        argv: Arguments without the program name; sys.argv[1:] by default.

    Returns:
        int: 0 on success, 1 on a computation error, 2 on an input error.
    """
    logger = Logger("branchenv.main")
    try:
        args = build_parser().parse_args(argv)
        settings = resolve_settings(args)
    except (CLIInputError, ModelValidationError) as e:
        print_diagnostic(str(e), prefix="input error")
        return 2
    except SystemExit as e:
        # --help and --version
        return e.code if isinstance(e.code, int) else 0

    Logger.configure(
        log_dir=settings.log_dir,
        console_level=logging.DEBUG if args.verbose else logging.CRITICAL + 10,
    )
    try:
        return BranchenvCLI(args, settings).run()
    except (CLIInputError, ModelValidationError) as e:
        logger.error(f"Input error: {e}")
        print_diagnostic(str(e), prefix="input error")
        return 2
    except (BranchingError, ValueError, ArithmeticError, OSError) as e:
        logger.error(f"Computation failed: {e}")
        print_diagnostic(str(e))
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
