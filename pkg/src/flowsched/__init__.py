import sys
from fractions import Fraction
from pathlib import Path

from importlib import metadata
import argparse
import logging
import appdirs
import yaml

from flowsched.models import parse_rat

__version__ = metadata.version("flowsched")
VERSION = __version__
logger = logging.getLogger(__name__)


def set_loglevel(loglevel: int):
    logging.basicConfig(level=loglevel)
    logger.debug("loglevel set to '%s'", logging._levelToName[loglevel])


def rat(text: str) -> Fraction:
    try:
        return parse_rat(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def rat_list(text: str) -> list[Fraction]:
    return [rat(t) for t in text.split(",")]


def run_flowsched():
    from flowsched import runner, verify
    from flowsched.policies import REGISTRY

    dirs = appdirs.AppDirs("flowsched", "flowsched", version=VERSION)
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s version {VERSION}",
    )

    verbose = argparse.ArgumentParser(add_help=False)

    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    init = subparsers.add_parser("init")
    init.set_defaults(func=runner.init)

    run = subparsers.add_parser("run")
    run.set_defaults(func=runner.cmd_run)
    run.add_argument(
        "--policy",
        choices=sorted(REGISTRY),
        required=True,
        help="The policy to simulate.",
    )
    run.add_argument(
        "--instance",
        default=None,
        help="Instance file to simulate. Defaults to a generated instance.",
    )

    sweep = subparsers.add_parser("sweep")
    sweep.set_defaults(func=runner.cmd_sweep)
    sweep.add_argument(
        "--grid",
        default=None,
        help="YAML file with the sweep grid. Defaults to the packaged grid.",
    )
    sweep.add_argument(
        "--svg",
        action="store_true",
        default=False,
        help="Also write SVG charts of the ratios.",
    )

    adversary = subparsers.add_parser("adversary")
    adversary.set_defaults(func=runner.cmd_adversary)
    adversary.add_argument(
        "--phases",
        "-M",
        type=int,
        default=8,
        help="Number of adversary phases.",
    )
    adversary.add_argument(
        "--bombardment",
        type=int,
        default=200,
        help="Number of bombardment jobs released after the last phase.",
    )
    adversary.add_argument(
        "--victim",
        choices=sorted(REGISTRY),
        default="srpt-pred",
        help="The policy attacked by the adversary.",
    )

    verify_ = subparsers.add_parser("verify")
    verify_.set_defaults(func=verify.cmd_verify)
    verify_.add_argument(
        "--only",
        default=None,
        help="Comma separated subset of criteria to run.",
    )
    verify_.add_argument(
        "--mutate",
        action="store_true",
        default=False,
        help="Switch off the rotation of the two-bins policy; the suite has to fail.",
    )

    gen = subparsers.add_parser("gen")
    gen.set_defaults(func=runner.cmd_gen)
    gen.add_argument(
        "--rho",
        type=rat,
        default=None,
        help="Replace predictions by semiclairvoyant classes of this base.",
    )
    gen.add_argument(
        "--name",
        default=None,
        help="Stem of the instance file. Defaults to 'random-<seed>'.",
    )

    for p in [parser, verbose]:
        p.add_argument(
            "--verbose",
            "-v",
            action="count",
            default=0,
            help="Increase verbosity by one level.",
        )
        p.add_argument(
            "--quiet",
            "-q",
            action="count",
            default=0,
            help="Decrease verbosity by one level.",
        )

    for p in [init, run, sweep, adversary, verify_, gen]:
        p.add_argument(
            "--yaml",
            "-y",
            help="Return output as a yaml.",
            action="store_true",
            default=False,
        )
        p.add_argument(
            "--appdir",
            "-A",
            type=Path,
            help="Settings directory for flowsched",
            default=Path(dirs.user_config_dir),
        )

    for p in [run, sweep, adversary, verify_, gen]:
        p.add_argument(
            "--out",
            "-o",
            default=None,
            help="Output directory. Defaults to $FLOWSCHED_OUT, then the settings.",
        )

    for p in [run, gen, adversary]:
        p.add_argument(
            "--mu",
            type=rat,
            default=None,
            required=p is adversary,
            help="Distortion parameter, as <int> or <int>/<int>.",
        )

    for p in [run, gen]:
        p.add_argument("--seed", type=int, default=0, help="Seed of the generator.")
        p.add_argument("--n", type=int, default=10, help="Number of generated jobs.")
        p.add_argument(
            "--weights",
            type=rat_list,
            default=None,
            help="Comma separated weight set of generated jobs.",
        )
        p.add_argument(
            "--mode",
            choices=["uniform", "extremal", "exact"],
            default="uniform",
            help="Distortion of generated jobs.",
        )
        p.add_argument(
            "--anchor",
            choices=["pred", "true"],
            default="pred",
            help="Draw predicted or true processing times.",
        )

    run.add_argument(
        "--check",
        default="all",
        help="Checkers to run: 'all', 'none' or a comma separated list.",
    )

    for p in [sweep, verify_]:
        p.add_argument(
            "--jobs",
            "-j",
            type=int,
            default=None,
            help="Number of worker processes. Defaults to the number of cores.",
        )

    # parse subparser args
    args, extras = parser.parse_known_args()
    # parse extras for verbose tags
    args, extras = verbose.parse_known_args(extras, args)
    if len(extras) > 0:
        parser.error(f"unrecognized arguments: {' '.join(extras)}")

    verbosity = min(max((2 + args.quiet - args.verbose) * 10, 10), 50)
    set_loglevel(verbosity)

    if "func" in args:
        ret = args.func(**vars(args))
        if args.yaml:
            print(yaml.dump(ret.model_dump(mode="json")))
        else:
            print(f"{'Success' if ret.success else 'Failure'}: {ret.msg}")
        sys.exit(ret.code)
