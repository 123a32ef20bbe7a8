"""AW_1 and W_1 for the oscillating grid pair on [0,1]^2 as eps shrinks.

Usage: python scripts/sharpness_pair.py [--k 1] [--eps 0.1,0.0625,0.05]
W_1 is an exact min-cost flow on the full grid; this takes a while for small eps.
"""

import argparse
import math

from awbounds.adapted import adapted_wasserstein_pp
from awbounds.examples import gen_example43
from awbounds.smoothing import quantize, w1_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--eps", default="0.1,0.0625,0.05")
    args = ap.parse_args()
    k = args.k
    print(f"{'eps':>8} {'W1':>11} {'AW1':>11} {'AW1/W1^(k/(k+1))':>18} {'eps^k/pi':>10}")
    for eps in (float(v) for v in args.eps.split(",")):
        mesh = 1 / (20 * math.ceil(1 / eps))
        f, g = gen_example43(eps, k, mesh)
        aw = adapted_wasserstein_pp(quantize(f), quantize(g), 1.0)
        w1, _ = w1_grid(f, g, max_cells=f.values.size)
        print(f"{eps:>8.4f} {w1:>11.4e} {aw:>11.4e} {aw / w1 ** (k / (k + 1)):>18.4f} {eps**k / math.pi:>10.4e}")


if __name__ == "__main__":
    main()
