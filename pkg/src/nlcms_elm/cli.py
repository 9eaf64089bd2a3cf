"""``nlcms-elm`` command line: run sweeps from a config file."""

import argparse
import logging
import sys

from .errors import NlcmsError
from .experiment import ExperimentConfig, format_csv, run, summarize, write_csv


def _parser():
    p = argparse.ArgumentParser(prog="nlcms-elm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a sweep and write CSV records")
    r.add_argument("--config", required=True, help="YAML key/value config file")
    r.add_argument("--out", help="output CSV path (default: stdout)")
    r.add_argument("--seed", type=int, help="master seed (overrides the config)")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. n_r=[16,64] or pgd.max_iters=500")
    r.add_argument("--workers", type=int, help="worker processes")
    r.add_argument("--no-timing", action="store_true",
                   help="leave wallclock_ms empty so reruns are byte-identical")
    r.add_argument("--summary", action="store_true",
                   help="print mean test accuracy per sweep point to stderr")
    r.add_argument("-v", "--verbose", action="store_true")

    d = sub.add_parser("defaults", help="print the default config")
    d.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    return p


def _config(args):
    config = ExperimentConfig.load(args.config)
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    if args.no_timing:
        overrides.append("timing=false")
    return config.with_overrides(overrides)


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "defaults":
        try:
            sys.stdout.write(ExperimentConfig().with_overrides(args.override).to_yaml())
        except NlcmsError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _config(args)
    except (OSError, NlcmsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    def progress(done, total):
        if args.verbose:
            print(f"{done}/{total} records", file=sys.stderr)

    try:
        records = run(config, progress=progress)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if args.out:
        try:
            write_csv(records, args.out)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 4
    else:
        sys.stdout.write(format_csv(records))
    if args.summary:
        for key, acc in summarize(records).items():
            print(" ".join(str(k) for k in key), f"{acc:.4f}", file=sys.stderr)
    failed = sum(1 for r in records if r.error)
    if failed:
        print(f"warning: {failed} of {len(records)} records failed", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
