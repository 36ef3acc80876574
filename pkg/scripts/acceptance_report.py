"""Run the acceptance suite and write a deterministic JSON report.

    python scripts/acceptance_report.py --threads 8 --out report.json
    python scripts/acceptance_report.py --only 1 2 4

The report holds no wall times, so reruns with the same inputs are byte-identical.
"""
import argparse
import sys
from pathlib import Path

from ergolab.acceptance import CRITERIA, determinism, report_text, run_suite


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", type=int, nargs="*", help="criterion numbers (default: all but 12)")
    ap.add_argument("--determinism", action="store_true", help="also rerun with 8 threads (criterion 12)")
    ap.add_argument("--out", type=Path)
    args = ap.parse_args(argv)

    outcomes = run_suite(args.only or sorted(CRITERIA), threads=args.threads)
    if args.determinism:
        outcomes.append(determinism(outcomes if args.threads == 1 and not args.only else None))
    for o in outcomes:
        print(o.line())
    text = report_text(outcomes)
    if args.out:
        args.out.write_text(text)
    return 0 if all(o.passed for o in outcomes) else 1


if __name__ == "__main__":
    sys.exit(main())
