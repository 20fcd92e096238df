"""Run the shipped coding sweeps and turn each CSV into a whitespace table for plotting."""

import argparse
import sys
from pathlib import Path

from fbcap import cli

ROOT = Path(__file__).resolve().parents[1]
SWEEPS = ("sweep_L_nf", "sweep_rate_nf")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "results" / "curves"))
    args = ap.parse_args()
    out = Path(args.out)
    for name in SWEEPS:
        code = cli.main(["sweep", str(ROOT / "configs" / f"{name}.json"), "-o", str(out)])
        if code:
            return code
        code = cli.main(["plotdata", str(out / f"{name}.csv"), "-o", str(out / f"{name}.dat")])
        if code:
            return code
        print((out / f"{name}.dat").read_text(), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
