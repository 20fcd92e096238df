"""Print C_n, C_FB,n and the history-blind rate for the shipped m=1 gated channel."""

import argparse
import sys

import numpy as np

from fbcap import capacity as cap
from fbcap import channel as chmod
from fbcap.processes import NoiseModel, block_marginal


def gated_xor(xs, zs):
    return (xs[1] ^ zs[0] ^ zs[1]) if xs[0] == xs[1] else zs[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--persistence", type=float, default=0.9)
    ap.add_argument("--nmax", type=int, default=3)
    ap.add_argument("--multistarts", type=int, default=8)
    args = ap.parse_args()
    ch = chmod.SlidingBlockChannel.from_function(1, 2, 2, 2, gated_xor)
    noise = NoiseModel.symmetric_markov(args.persistence)
    print(f"{'n':>2} {'C_n':>9} {'C_FB,n':>9} {'blind':>9}")
    for n in range(2, args.nmax + 1):
        k = chmod.n_block_law(ch, block_marginal(noise, n), n)
        nf = cap.nonfeedback_capacity(k).value
        fb = cap.cfb_ascent(k, multistarts=args.multistarts).value
        blind = cap.history_blind_rate(k, multistarts=args.multistarts).value
        print(f"{n:>2} {nf:9.6f} {fb:9.6f} {blind:9.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
