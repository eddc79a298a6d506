"""Generate a tube corpus and compare load times across the three formats.

Defaults mirror the acceptance smoke run (32 tubes of 128x224x224x3, about
1.85 GB per format). Timings depend on the machine and its page cache; only
the relative structure of the report is meaningful.
"""

import argparse
import json
import shutil
import tempfile
from pathlib import Path

from tubeforge.bench import format_table, generate_corpus, run_bench


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=32)
    parser.add_argument("--shape", default="128,224,224,3")
    parser.add_argument("--repetitions", type=int, default=5)
    parser.add_argument("--access", nargs="+", default=["full-read", "random-frame"])
    parser.add_argument("--cache-evasion-mb", type=int, default=0)
    parser.add_argument("--keep", help="keep the corpus in this directory instead of a temp dir")
    parser.add_argument("--output", help="write all reports as a JSON list here")
    args = parser.parse_args()

    shape = tuple(int(x) for x in args.shape.split(","))
    root = Path(args.keep) if args.keep else Path(tempfile.mkdtemp(prefix="tubebench"))
    try:
        corpus = generate_corpus(args.count, shape, seed=0, out_dir=root)
        reports = []
        for access in args.access:
            report = run_bench(corpus, args.repetitions, access, args.cache_evasion_mb << 20)
            print(f"== {access}")
            print(format_table(report))
            reports.append(report.to_json())
        if args.output:
            Path(args.output).write_text(json.dumps(reports, indent=1) + "\n")
    finally:
        if not args.keep:
            shutil.rmtree(root)


if __name__ == "__main__":
    main()
