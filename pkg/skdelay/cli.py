import argparse
import logging
import sys
from typing import List, Optional

from skdelay.error import SkdelayError
from skdelay.experiments import MODES, ExperimentConfig, parse_suite, run

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skdelay",
        description="Simulation and verification runs for singular delay"
        " equations with fractional perturbations.",
    )
    subparsers = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sub = subparsers.add_parser(mode, help=f"Run the {mode} pipeline.")
        sub.add_argument(
            "--config", help="Experiment config, .json or .cfg.", default=None
        )
        sub.add_argument("--seed", type=int, default=None, help="Master seed.")
        sub.add_argument(
            "--paths", type=int, default=None, help="Number of paths."
        )
        sub.add_argument("--out", default=None, help="Output directory.")
        sub.add_argument(
            "--suite",
            default=None,
            help="Comma separated checks or groups for verify.",
        )
        verbosity = sub.add_mutually_exclusive_group()
        verbosity.add_argument("--verbose", "-v", action="store_true")
        verbosity.add_argument("--quiet", "-q", action="store_true")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Runs one pipeline; the exit status is nonzero iff it failed."""
    args = build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )
    try:
        if args.config is None:
            config = ExperimentConfig({})
        else:
            config = ExperimentConfig.from_disk(args.config)
        config = config.override(
            mode=args.mode,
            seed=args.seed,
            n_paths=args.paths,
            out=args.out,
            suite=parse_suite(args.suite),
        )
        summary = run(config)
    except SkdelayError as error:
        logger.error("%s", error)
        return 2
    if not summary.get("passed", True):
        logger.error("Run %s failed.", summary["manifest"])
        return 1
    logger.info("Run %s passed.", summary["manifest"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
