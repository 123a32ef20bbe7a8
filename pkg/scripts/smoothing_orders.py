"""Smoothing error ||K_h*f - f||_1 against h for a few smooth densities.

Usage: python scripts/smoothing_orders.py
"""

import numpy as np

from awbounds.smoothing import GridDensity, decay_order, lemma41_check, make_kernel, shifted_gaussian

DENSITIES = {
    "bump": lambda x, y: np.exp(-(x**2 + y**2) / 2),
    "mixture": lambda x, y: np.exp(-((x - 1) ** 2 + y**2) / 2) + 0.6 * np.exp(-((x + 1.2) ** 2 + (y - 0.8) ** 2) / 1.2),
}
KERNELS = {
    1: make_kernel("custom", 1, 2, shifted_gaussian(1.0)),
    2: make_kernel("gaussian", 2, 2),
    4: make_kernel("gaussian_order", 4, 2),
}


def main():
    hs = [0.8, 0.5, 0.25, 0.125]
    for name, fn in DENSITIES.items():
        f = GridDensity.from_function(fn, (-7, -7), (7, 7), (224, 224), T=2)
        for k, K in KERNELS.items():
            rows = lemma41_check(f, K, min(k, 3), hs)
            ratios = " ".join(f"{r['ratio']:.3f}" for r in rows)
            print(f"{name:8s} kernel order {k} (bound uses k={min(k, 3)}): decay {decay_order(rows):.2f}  lhs/rhs per h {ratios}")


if __name__ == "__main__":
    main()
