import argparse
import logging
import sys
from pathlib import Path

from cli.runner import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, exit_code_for, run
from cli.verify import verify
from utils.config import get_settings
from utils.errors import CsepError

logger = logging.getLogger(__name__)


def build_parser():
    parser = argparse.ArgumentParser(prog='csep',
                                     description="Bounds on channel discrimination with limited memory.")
    commands = parser.add_subparsers(dest='command', required=True)

    run_cmd = commands.add_parser('run', help="Compute the bounds a run configuration asks for")
    run_cmd.add_argument('--config', type=Path, required=True, help="JSON run configuration")
    run_cmd.add_argument('--out', type=Path, default=None, help="Report path (default: the config's output field)")
    run_cmd.add_argument('--workers', type=int, default=None, help="Worker pool size for restarts and facet SDPs")
    run_cmd.add_argument('--dump-problems', type=Path, default=None, metavar='DIR',
                         help="Write every SDP in SDPA sparse format to DIR")
    run_cmd.add_argument('--seed', type=int, default=None, help="Override the config's seed")
    run_cmd.add_argument('--verbose', action='store_true', help="Log at DEBUG level")

    verify_cmd = commands.add_parser('verify', help="Re-check a report's factors without re-solving")
    verify_cmd.add_argument('report', type=Path)
    verify_cmd.add_argument('--verbose', action='store_true', help="Log at DEBUG level")
    return parser


def configure_logging(verbose):
    try:
        level = 'DEBUG' if verbose else get_settings().log_level
    except CsepError as exc:
        level = 'INFO'
        print(f"[config] {exc}", file=sys.stderr)
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def _summary(report):
    parts = []
    for name in ('exact', 'lower', 'upper', 'oracle'):
        bound = getattr(report, name)
        if bound is not None:
            parts.append(f"{name}={bound.value} ({bound.status})")
    if report.seesaw_certificate is not None:
        low, high = report.seesaw_certificate.interval
        parts.append(f"interval=[{low}, {high}]")
    for failure in report.failures:
        parts.append(f"{failure.task} failed (exit {failure.exit_code})")
    return ', '.join(parts) or 'no bounds'


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    if args.command == 'run':
        if args.workers is not None and args.workers < 1:
            print("[run] --workers must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        try:
            report, code = run(args.config, args.out, args.workers, args.dump_problems, args.seed)
        except CsepError as exc:
            print(f"[run] {exc}", file=sys.stderr)
            return exit_code_for(exc)
        print(f"[run] {report.config.method}: {_summary(report)}")
        return code

    try:
        result = verify(args.report)
    except CsepError as exc:
        print(f"[verify] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if result.passed:
        print(f"[verify] OK ({', '.join(f'{k}={v:.3g}' for k, v in result.checks.items())})")
        return EXIT_OK
    print(f"[verify] FAIL ({'; '.join(result.messages)})")
    return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
