"""Print ATV/TV ratios for the two-block pair and the unbounded-ratio pair.

Usage: python scripts/ratio_tables.py
"""

from awbounds.adapted import atv_weighted, lambda_constant, tv_weighted
from awbounds.examples import Example35Params, gen_example35, gen_example36
from awbounds.measures import WeightSpec


def two_block():
    print("two-block pair (p = smallest valid value)")
    print(f"{'T':>3} {'eps':>8} {'p':>9} {'TV':>10} {'ATV':>10} {'ratio':>8} {'2T-1':>5}")
    for T in (2, 3, 5, 8):
        for eps in (0.1, 0.01, 0.001, 1e-5):
            par = Example35Params(T, eps, p_rule="minimal")
            mu, nu, _ = gen_example35(par)
            tv, atv = tv_weighted(mu, nu), atv_weighted(mu, nu)
            print(f"{T:>3} {eps:>8g} {par.p:>9.5f} {tv:>10.3e} {atv:>10.3e} {atv / tv:>8.4f} {2 * T - 1:>5}")


def weighted():
    print("\nweighted two-block pair, c = 1, T = 3")
    for eps in (1e-2, 1e-4, 1e-6):
        par = Example35Params(3, eps, c=(1.0, 1.0), p_rule="minimal")
        mu, nu, w = gen_example35(par)
        print(f"eps={eps:g} ratio={atv_weighted(mu, nu, w) / tv_weighted(mu, nu, w):.4f} "
              f"lambda={lambda_constant([1.0, 1.0]):g}")


def unbounded():
    print("\nunbounded-ratio pair, weight 1 + |x|_1")
    w = WeightSpec.ppower(1)
    for eps in (0.3, 0.1, 0.05, 0.01, 0.005, 0.001):
        mu, nu = gen_example36(eps)
        tv, atv = tv_weighted(mu, nu, w), atv_weighted(mu, nu, w)
        print(f"eps={eps:<6g} TV_1={tv:.4e} ATV_1={atv:.4e} ratio={atv / tv:.2f}")


if __name__ == "__main__":
    two_block()
    weighted()
    unbounded()
