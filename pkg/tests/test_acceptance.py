"""Acceptance suite: one test per criterion, each printing a single
``criterion N: PASS|FAIL`` line (collected again in the terminal summary).

Criteria whose stated targets cannot be met by a faithful implementation are
left failing on purpose; the notes next to them say why.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from awbounds.adapted import (
    adapted_wasserstein_pp, atv_dp, atv_weighted, bound_report, lambda_constant, tv_lp, tv_weighted,
)
from awbounds.cli import main as cli_main
from awbounds.estimators import RateExperimentConfig, rate_experiment
from awbounds.examples import Example35Params, gen_example35, gen_example36, gen_example43
from awbounds.hfun import HParams, h_inf_closed, h_inf_oracle, h_lower_cor, random_params
from awbounds.measures import WeightSpec, random_tree
from awbounds.ot_exact import bicausal_lp, pairwise_cost
from awbounds.smoothing import (
    GridDensity, decay_order, lemma41_check, make_kernel, quantize, shifted_gaussian, theorem29_bound, w1_grid,
)

from conftest import ACCEPTANCE, random_pair

pytestmark = pytest.mark.acceptance


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


# ------------------------------------------------------------------ 1
def test_criterion_01_two_block_regression():
    # The literal p = 2eps/(1+eps) gives kernels with d_2 = 1 (not probabilities)
    # once T >= 3.  The pair is therefore built with the smallest valid p and the
    # engine values are compared with the formula evaluated at the literal p.
    t0 = time.perf_counter()
    worst_tv = worst_atv = 0.0
    for T, eps in itertools.product((2, 3, 5), (0.1, 0.01, 0.001)):
        rule = "literal" if T == 2 else "minimal"
        mu, nu, _ = gen_example35(Example35Params(T, eps, p_rule=rule))
        p = 2 * eps / (1 + eps)
        worst_tv = max(worst_tv, abs(tv_weighted(mu, nu) - 2 * eps))
        worst_atv = max(worst_atv, abs(atv_weighted(mu, nu) - 2 * eps * ((2 * T - 2) * (1 - p) + 1)))
    mu, nu, _ = gen_example35(Example35Params(5, 0.001, p_rule="minimal"))
    ratio = atv_weighted(mu, nu) / tv_weighted(mu, nu)
    elapsed = time.perf_counter() - t0
    ok = worst_tv <= 1e-10 and worst_atv <= 1e-10 and abs(ratio / 9 - 1) <= 0.005 and elapsed < 1
    record(1, ok, f"max|TV-2eps|={worst_tv:.2e} max|ATV-formula|={worst_atv:.2e} "
                  f"ratio(T=5,eps=1e-3)={ratio:.4f} (target 9) time={elapsed:.2f}s")


# ------------------------------------------------------------------ 2
def test_criterion_02_weighted_blocks():
    par = Example35Params(3, 1e-4, c=(1.0, 1.0), p_rule="minimal")
    mu, nu, w = gen_example35(par)
    ratio = atv_weighted(mu, nu, w) / tv_weighted(mu, nu, w)
    lam = lambda_constant([1.0, 1.0])
    ok = abs(ratio / 13 - 1) <= 0.01 and lam == 13
    record(2, ok, f"ratio ATV_w/TV_w={ratio:.4f} (target 13 +-1%) lambda_constant={lam!r}")


# ------------------------------------------------------------------ 3
def test_criterion_03_unbounded_ratio_pair():
    # Stated targets: TV_1 = 2eps^2 and ATV_1 = 2 + eps - eps^2.  Direct evaluation
    # of the definitions on this pair gives TV_1 = 3eps^2 and
    # ATV_1 = 2eps + 5eps^2 - 4eps^3 (see tests/test_examples.py), so the ratio
    # grows like 2/(3eps) and only doubles when eps halves.
    w = WeightSpec.ppower(1)
    gaps, ratios = [], {}
    for eps in (0.3, 0.1, 0.01, 0.05, 0.005):
        mu, nu = gen_example36(eps)
        tv, atv = tv_weighted(mu, nu, w), atv_weighted(mu, nu, w)
        if eps in (0.3, 0.1, 0.01):
            gaps.append(max(abs(tv - 2 * eps**2), abs(atv - (2 + eps - eps**2))))
        ratios[eps] = atv / tv
    growth = [ratios[e / 2] / ratios[e] for e in (0.1, 0.01)]
    ok = max(gaps) <= 1e-12 and all(abs(g / 4 - 1) <= 0.01 for g in growth)
    record(3, ok, f"max gap to stated forms={max(gaps):.3e} ratio growth on halving={[round(float(g), 4) for g in growth]}"
                  " (target 4)")


# ------------------------------------------------------------------ 4
def test_criterion_04_closed_forms_vs_optimizers():
    t0 = time.perf_counter()
    gap = 0.0
    for seed in range(200):
        mu, nu = random_pair(10_000 + seed)
        w = (WeightSpec.one(), WeightSpec.ppower(1), WeightSpec.ppower(2))[seed % 3]
        gap = max(gap, abs(tv_weighted(mu, nu, w) - tv_lp(mu, nu, w)), abs(atv_weighted(mu, nu, w) - atv_dp(mu, nu, w)))
    elapsed = time.perf_counter() - t0
    record(4, gap <= 1e-8 and elapsed < 30, f"200 pairs max gap={gap:.2e} time={elapsed:.1f}s")


# ------------------------------------------------------------------ 5
def test_criterion_05_bound_chain():
    violations, worst = 0, math.inf
    for seed, p in itertools.product(range(500), (1.0, 2.0)):
        mu, nu = random_pair(20_000 + seed)
        rep = bound_report(mu, nu, p)
        checks = rep.recheck()
        violations += sum(not c["ok"] for c in checks)
        worst = min(worst, min(c["slack"] for c in checks))
    record(5, violations == 0, f"1000 reports violations={violations} min slack={worst:.2e}")


# ------------------------------------------------------------------ 6
def test_criterion_06_dp_vs_exhaustive():
    gap = 0.0
    for seed in range(50):
        rng = np.random.default_rng(30_000 + seed)
        mu, nu = random_tree(rng, 2, max_children=3), random_tree(rng, 2, max_children=3)
        p = (1.0, 2.0)[seed % 2]
        C = pairwise_cost(mu.paths.reshape(mu.n_leaves, -1), nu.paths.reshape(nu.n_leaves, -1), p)
        gap = max(gap, abs(adapted_wasserstein_pp(mu, nu, p) - bicausal_lp(mu, nu, C)))
    record(6, gap <= 1e-9, f"50 instances max |DP - LP|={gap:.2e}")


# ------------------------------------------------------------------ 7
def test_criterion_07_h_function():
    rng = np.random.default_rng(40_000)
    bad = 0
    for _ in range(1000):
        par = random_params(rng)
        lo, cl, orc = h_lower_cor(par), h_inf_closed(par), h_inf_oracle(par, 400)
        bad += not (lo <= cl + 1e-12 and cl <= orc + 5e-3)
    cont = 0.0
    for _ in range(200):
        l, c, kappa, a = rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 1)
        lam = kappa + rng.uniform(0, 2)
        below = h_inf_closed(HParams(l, c, lam, kappa, a, 1.0 - 1e-15))
        above = h_inf_closed(HParams(l, c, lam, kappa, a, 1.0 + 1e-15))
        cont = max(cont, abs(below - above))
    record(7, bad == 0 and cont <= 1e-12, f"ordering violations={bad}/1000 continuity gap at b=1={cont:.2e}")


# ------------------------------------------------------------------ 8
SMOOTH_SUITE = {
    "bump": lambda x, y: np.exp(-(x**2 + y**2) / 2),
    "mixture": lambda x, y: np.exp(-((x - 1) ** 2 + y**2) / 2) + 0.6 * np.exp(-((x + 1.2) ** 2 + (y - 0.8) ** 2) / 1.2),
    "modulated": lambda x, y: np.exp(-(x**2 + y**2) / 3) * (1 + 0.5 * np.cos(x) * np.sin(y)),
}


def test_criterion_08_smoothing_error():
    # order 1 uses an asymmetric kernel so the first moment does not vanish
    kernels = {1: make_kernel("custom", 1, 2, shifted_gaussian(1.0)), 2: make_kernel("gaussian", 2, 2)}
    rows_ok, orders = True, []
    for name, fn in SMOOTH_SUITE.items():
        f = GridDensity.from_function(fn, (-7, -7), (7, 7), (192, 192), T=2)
        for k, K in kernels.items():
            rows = lemma41_check(f, K, k, [0.5, 0.25, 0.125])
            rows_ok &= all(r["ok"] for r in rows)
            orders.append((name, k, decay_order(rows)))
    order_ok = all(abs(o - k) <= 0.3 for _, k, o in orders)
    record(8, rows_ok and order_ok, f"all rows within bound={rows_ok} decay orders="
                                    + ", ".join(f"{n}/k={k}:{o:.2f}" for n, k, o in orders))


# ------------------------------------------------------------------ 9
def test_criterion_09_sharpness_pair():
    # The perturbation carries mass eps^k * 2eps per unit of x1, so AW_1 scales
    # like eps^{k+1} rather than eps^k; the AW_1 lower target fails for k = 1.
    t0 = time.perf_counter()
    lines, ok = [], True
    for k, eps in itertools.product((1, 2), (1 / 10, 1 / 16)):
        mesh = 1 / (20 * round(1 / eps))
        f, g = gen_example43(eps, k, mesh)
        diam = 2 * mesh  # l1 diameter of one cell, matching the ground metric
        aw = adapted_wasserstein_pp(quantize(f), quantize(g), 1.0)
        w1, allow = w1_grid(f, g, max_cells=f.values.size)  # exact flow on the full grid
        w1 += allow
        ratio = aw / w1 ** (k / (k + 1))
        c_w = w1 <= 2 * math.sqrt(2) * eps ** (k + 1) + diam
        c_aw = aw >= eps**k / math.pi - diam
        ok &= c_w and c_aw and ratio >= 0.15
        lines.append(f"k={k} eps=1/{round(1 / eps)}: W1={w1:.3e}({'ok' if c_w else 'X'}) "
                     f"AW1={aw:.3e} vs {eps**k / math.pi - diam:.3e}({'ok' if c_aw else 'X'}) ratio={ratio:.3f}")
    elapsed = time.perf_counter() - t0
    record(9, ok and elapsed < 300, "; ".join(lines) + f"; time={elapsed:.0f}s")


# ------------------------------------------------------------------ 10
def _mixture(rng):
    m = rng.uniform(-1.2, 1.2, (2, 2))
    s = rng.uniform(0.5, 1.0, 2)
    a = rng.dirichlet([2, 2])
    return lambda x, y: sum(a[i] * np.exp(-((x - m[i, 0]) ** 2 + (y - m[i, 1]) ** 2) / (2 * s[i] ** 2)) / s[i] ** 2
                            for i in range(2))


def test_criterion_10_aw_from_wq_bound():
    K = make_kernel("gaussian", 2, 2)
    worst, bad = math.inf, 0
    for i in range(20):
        rng = np.random.default_rng(50_000 + i)
        f = GridDensity.from_function(_mixture(rng), (-3, -3), (3, 3), (48, 48), T=2)
        g = GridDensity.from_function(_mixture(rng), (-3, -3), (3, 3), (48, 48), T=2)
        rep = theorem29_bound(f, g, 1 + i % 2, K, p=1.0 + (i % 4 >= 2), q=2.0)
        bad += not rep.AW_pp <= rep.rhs + 1e-6
        worst = min(worst, rep.rhs - rep.AW_pp)
    record(10, bad == 0, f"20 pairs violations={bad} min slack={worst:.3e}")


# ------------------------------------------------------------------ 11
def test_criterion_11_rate_experiment():
    t0 = time.perf_counter()
    rows = rate_experiment(RateExperimentConfig(ns=(250, 500, 1000, 2000, 4000), reps=10, seed=2024,
                                                estimator="kde", h_const=0.5))
    elapsed = time.perf_counter() - t0
    means = [r["mean"] for r in rows]
    sds = [r["sd"] for r in rows]
    decreasing = all(b < a + 2 * s for a, b, s in zip(means, means[1:], sds[1:]))
    slope = rows[0]["slope"]
    ok = decreasing and slope < 0 and abs(slope) >= 0.1 and elapsed < 600
    record(11, ok, f"means={[f'{m:.4f}' for m in means]} slope={slope:.3f} time={elapsed:.0f}s")


# ------------------------------------------------------------------ 12
def test_criterion_12_cli_determinism(tmp_path, capsys):
    mu, nu, _ = gen_example35(Example35Params(3, 0.05, p_rule="minimal"))
    (tmp_path / "mu.json").write_text(mu.to_json())
    (tmp_path / "nu.json").write_text(nu.to_json())
    f, g = gen_example43(0.1, 1, 0.005)
    f.save(tmp_path / "f.grid")
    g.save(tmp_path / "g.grid")
    commands = [
        ["rate", "--ns", "50,100,200", "--reps", "3", "--seed", "11", "--resolution", "16"],
        ["rate", "--estimator", "wavelet", "--ns", "64,256,1024", "--reps", "3", "--seed", "5"],
        ["report", str(tmp_path / "mu.json"), str(tmp_path / "nu.json")],
        ["aw", "--p", "2", str(tmp_path / "mu.json"), str(tmp_path / "nu.json")],
        ["example", "--id", "3.5", "--T", "4", "--eps", "0.01"],
        ["lemma41", str(tmp_path / "g.grid"), "--kernel", "gaussian", "--hs", "0.05,0.1"],
    ]
    same = 0
    for i, cmd in enumerate(commands):
        outs = []
        for threads in (1, 8):
            path = tmp_path / f"out{i}_{threads}"
            assert cli_main(cmd + ["--threads", str(threads), "--out", str(path)]) == 0
            outs.append(path.read_bytes())
        same += outs[0] == outs[1]
    capsys.readouterr()
    record(12, same == len(commands), f"{same}/{len(commands)} commands byte-identical across --threads 1/8")
