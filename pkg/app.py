"""
Orbit Geodesics Workbench - Command line entry point
Builds the truncated operators and runs the numerical checks on the orbit of b
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from config import CHECK_NAMES, CONFIG_TEMPLATE, Config, load_run_config
from src.cli.commands import cmd_build, cmd_curve, cmd_probe, cmd_qnorm, cmd_verify
from src.linalg.errors import ConfigError, OrbitGeodesicsError

logger = logging.getLogger(__name__)

USAGE_ERROR = 2


def setup_logging(json_output: bool = False):
    """File log plus a console stream; machine-readable runs keep stdout clean"""
    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(Config.LOG_FILE),
            logging.StreamHandler(sys.stderr if json_output else sys.stdout)
        ],
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbit-geodesics", description=__doc__)
    parser.add_argument("command", choices=["build", "verify", "curve", "qnorm", "probe", "template"])
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--n", type=int, help="truncation size")
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--suite", help=f"comma-separated checks from {', '.join(CHECK_NAMES)}")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--t-max", type=float, help="curve: last sample time")
    parser.add_argument("--samples", type=int, help="curve: number of sample times")
    parser.add_argument("--operator", default="z_o", help="qnorm: z_dg, z_o, z2 or a JSON file")
    parser.add_argument("--json", action="store_true", help="print the result as JSON on stdout")
    return parser


def overrides_from(args: argparse.Namespace) -> dict:
    return {
        "n": args.n,
        "gamma": args.gamma,
        "delta": args.delta,
        "suite": args.suite,
        "seed": args.seed,
        "output_dir": args.out,
        "workers": args.workers,
        "t_max": args.t_max,
        "samples": args.samples,
    }


def emit(result, as_json: bool):
    if as_json:
        print(json.dumps(result, indent=2, sort_keys=True, default=str))
    elif isinstance(result, dict):
        for key, value in result.items():
            print(f"{key}: {value}")
    else:
        print(result)


def main(argv=None) -> int:
    """Main application entry point; returns the process exit status"""
    args = build_parser().parse_args(argv)
    setup_logging(args.json)

    if args.command == "template":
        print(CONFIG_TEMPLATE)
        return 0
    if not Config.validate():
        return USAGE_ERROR

    try:
        config = load_run_config(args.config, overrides_from(args))
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return USAGE_ERROR

    logger.info(f"Running {args.command} with n={config.n}, gamma={config.gamma}, delta={config.delta}")
    try:
        if args.command == "build":
            emit({name: str(path) for name, path in cmd_build(config).items()}, args.json)
            return 0
        if args.command == "verify":
            report, status = cmd_verify(config)
            if args.json:
                emit(report, True)
            else:
                for check in report["checks"]:
                    print(f"{check['check']:<12} {check['verdict']}")
                print(f"report: {Path(config.output_dir) / 'report.json'}")
            return status
        if args.command == "curve":
            emit(str(cmd_curve(config, args.t_max, args.samples)), args.json)
            return 0
        if args.command == "qnorm":
            emit(cmd_qnorm(config, args.operator), args.json)
            return 0
        emit(cmd_probe(config), args.json)
        return 0
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return 130
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except OrbitGeodesicsError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"❌ Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
