"""
Command line front end.

::

    amlest mc --preset tobit --seed 1 --threads 4 --out results/tobit
    amlest fit --preset sp500-msm --data sp500.csv --estimator aml
    amlest backtest --config backtest.json
    amlest timing --preset timing
    amlest presets [NAME]

``--config`` and ``--preset`` give the base configuration (a JSON file may
itself name a preset); the remaining flags override single fields.
"""
import argparse
import json
import sys

from . import Verbs
from .builder import ExperimentBuilder
from .errors import AmlError, ConfigError
from .presets import get_preset, preset_names

_VERBS = {
    "mc": Verbs.MonteCarlo,
    "fit": Verbs.Fit,
    "backtest": Verbs.Backtest,
    "timing": Verbs.Timing,
}


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None,
                        help="JSON configuration file")
    parser.add_argument("--preset", type=str, default=None,
                        help="embedded preset to start from")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out", type=str, default=None,
                        help="output directory")
    parser.add_argument("--data", type=str, default=None,
                        help="CSV input of fits and backtests")
    parser.add_argument("--estimator", action="append", default=None,
                        choices=("auxiliary", "aml", "uaml", "ml"),
                        help="estimator to report; repeat for several")
    parser.add_argument("--replications", type=int, default=None)
    parser.add_argument("--demean", action="store_true",
                        help="demean returns read from --data")
    parser.add_argument("--log", action="store_true",
                        help="write a run log and print progress")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amlest",
        description="Approximate maximum likelihood experiments.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    verbs = parser.add_subparsers(dest="verb", required=True)
    for name, help_text in (
        ("mc", "Monte Carlo accuracy tables"),
        ("fit", "estimation on a CSV dataset"),
        ("backtest", "particle-filter VaR/ES backtest"),
        ("timing", "likelihood versus AML criterion timing"),
    ):
        _add_run_arguments(verbs.add_parser(name, help=help_text))
    presets = verbs.add_parser("presets", help="list or dump presets")
    presets.add_argument("name", nargs="?", default=None,
                         help="preset to dump as JSON")
    return parser


def configure(args: argparse.Namespace) -> ExperimentBuilder:
    """Builder holding the configuration described by ``args``."""
    builder = ExperimentBuilder()
    if args.preset is not None:
        builder.load_preset(args.preset)
    if args.config is not None:
        builder.load_json(args.config)
    builder.set_verb(_VERBS[args.verb])
    overrides = {
        "seed": args.seed,
        "threads": args.threads,
        "out_dir": args.out,
        "data_path": args.data,
        "estimators": args.estimator,
        "replications": args.replications,
    }
    for name, value in overrides.items():
        if value is not None:
            builder.set_parameter(name, value)
    if args.demean:
        builder.set_demean(True)
    if args.log:
        builder.set_record_log(True)
    return builder


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "presets":
        if args.name is None:
            print("\n".join(preset_names()))
        else:
            try:
                print(json.dumps(get_preset(args.name), indent=2))
            except KeyError as exc:
                print(exc.args[0], file=sys.stderr)
                return 2
        return 0
    try:
        builder = configure(args)
        results = builder.execute()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (AmlError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, TypeError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    for path in results.get("files", []):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
