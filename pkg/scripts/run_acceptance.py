"""Run the numbered acceptance checks and keep their numbers under results/acceptance."""

import argparse
import os
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "results" / "acceptance"))
    ap.add_argument("-k", default=None, help="pytest -k expression, e.g. 'not state2'")
    args = ap.parse_args()
    Path(args.out).mkdir(parents=True, exist_ok=True)
    env = dict(os.environ, FBCAP_ACCEPTANCE_DIR=args.out)
    cmd = [sys.executable, "-m", "pytest", str(ROOT / "tests" / "test_acceptance.py"), "-q"]
    if args.k:
        cmd += ["-k", args.k]
    return subprocess.call(cmd, env=env, cwd=ROOT)


if __name__ == "__main__":
    sys.exit(main())
