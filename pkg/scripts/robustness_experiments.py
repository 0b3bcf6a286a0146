"""Influence, breakdown and distribution-shift experiments through the CLI.

    python scripts/robustness_experiments.py [--network network1] [--out results] [--threads 4]

Defaults for each experiment come from the ``experiments`` section of the
network config.
"""
import argparse
import sys

from lapue.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--network", default="network1")
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", choices=["influence", "breakdown", "shift"], default=None)
    args = ap.parse_args()
    codes = {}
    for cmd in ("influence", "breakdown", "shift"):
        if args.only and cmd != args.only:
            continue
        print(f"== {cmd}")
        codes[cmd] = cli([cmd, "--network", args.network, "--threads", str(args.threads),
                          "--out", f"{args.out}/{args.network}_{cmd}.csv"])
    failed = {k: v for k, v in codes.items() if v}
    if failed:
        print(f"non-zero exit codes: {failed}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
