#!/usr/bin/env python3
"""Full pipeline demo: synthesize data, train both targets, explain, serve-ready.

Writes everything under ./runs/demo (data, two model files, loss curves,
metric reports, one explanation, the global attribution summary). Slowish:
two full default trainings (~2 min combined on a desktop CPU).

    python scripts/end_to_end.py [--fast]
"""

import argparse
import sys
from pathlib import Path

from shear_oracle.cli import execute


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--fast", action="store_true", help="reduced epochs for a quick smoke run")
    parser.add_argument("--out-dir", default="runs/demo")
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = out / "synthetic.csv"
    epochs = ["--epochs", "120"] if args.fast else []

    steps = [
        ["gen-data", "--n", "500", "--seed", "42", "--out", str(data)],
        ["train", "--data", str(data), "--target", "friction", "--seed", "42",
         "--out", str(out / "friction.model"), "--report-out", str(out / "friction.report.json"),
         *epochs],
        ["train", "--data", str(data), "--target", "cohesion", "--seed", "43",
         "--out", str(out / "cohesion.model"), "--report-out", str(out / "cohesion.report.json"),
         *epochs],
        ["evaluate", "--model", str(out / "friction.model"), "--data", str(data),
         "--out", str(out / "friction.eval.json")],
        ["explain", "--model", str(out / "friction.model"), "--input", str(data),
         "--method", "kernel", "--n-samples", "512",
         "--out", str(out / "explain_all.json")],
        ["summary", "--model", str(out / "friction.model"), "--data", str(data),
         "--method", "kernel", "--n-samples", "256",
         "--out", str(out / "summary.json")],
    ]
    # explaining all 500 rows is slow; trim the explain step to 3 rows
    sample = out / "sample3.csv"
    lines = None

    for argv in steps:
        if argv[0] == "explain":
            if lines is None:
                lines = data.read_text().splitlines()
                sample.write_text("\n".join(lines[:4]) + "\n")
            argv[argv.index("--input") + 1] = str(sample)
        print(f"\n$ shear-oracle {' '.join(argv)}")
        code = execute(argv)
        if code != 0:
            print(f"step failed with exit {code}", file=sys.stderr)
            return code

    print(f"\nDone. Serve the models with:\n  shear-oracle serve "
          f"--friction-model {out / 'friction.model'} --cohesion-model {out / 'cohesion.model'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
