"""The auxiliary function H used in the induction step behind the ATV/TV bound,
its closed-form infimum, the relaxed lower bound, and a grid oracle.

H(l, u, lam, kappa, a, b, y) = (l + u) ((lam - kappa)|1 - b y|
                                        + 2 kappa (a min(1, y) - min(1, b y)))

The infimum is taken over random (Y, dW) >= 0 with E[Y] = 1, E[dW] <= c l.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, ResolutionTooCoarse

MIN_RES = 50


@dataclass(frozen=True)
class HParams:
    l: float
    c: float
    lam: float
    kappa: float
    a: float
    b: float

    def __post_init__(self):
        vals = (self.l, self.c, self.lam, self.kappa, self.a, self.b)
        if not all(np.isfinite(vals)):
            raise InvalidParams("parameters must be finite")
        if self.l < 0 or self.c < 0 or self.kappa < 0 or self.b < 0 or self.a < 0:
            raise InvalidParams("l, c, kappa, a, b must be non-negative")
        if self.lam < self.kappa:
            raise InvalidParams(f"need lambda >= kappa, got {self.lam} < {self.kappa}")
        if self.a > min(1.0, self.b):
            raise InvalidParams(f"need a <= min(1, b), got a={self.a}, b={self.b}")


def phi(p: HParams, y):
    """The bracket of H, i.e. H / (l + u)."""
    y = np.asarray(y, dtype=float)
    return (p.lam - p.kappa) * np.abs(1 - p.b * y) + 2 * p.kappa * (
        p.a * np.minimum(1.0, y) - np.minimum(1.0, p.b * y)
    )


def h_eval(p: HParams, u: float, y: float) -> float:
    if u < 0 or y < 0:
        raise InvalidParams("u and y must be non-negative")
    return float((p.l + u) * phi(p, y))


def h_inf_closed(p: HParams) -> float:
    """Closed-form infimum; at b = 0 the b <= 1 branch is used (its b -> 0+ limit)."""
    if p.b <= 1:
        inner = abs(1 - p.b) * (p.lam - p.kappa) + 2 * p.kappa * (p.b + p.c) * (p.a - 1)
    else:
        inner = abs(1 - p.b) * (p.lam - p.kappa) + 2 * p.kappa * (1 + p.c) * (p.a / p.b - 1)
    return p.l * inner


def h_lower_cor(p: HParams) -> float:
    """Relaxed lower bound l(|1-b|(lam - kappa - 2kappa(c+1)) + 2kappa(c+1)(a - min(b,1)))."""
    k1 = 2 * p.kappa * (p.c + 1)
    return p.l * (abs(1 - p.b) * (p.lam - p.kappa - k1) + k1 * (p.a - min(p.b, 1.0)))


def y_grid(p: HParams, res: int) -> np.ndarray:
    ymax = max(4.0, 4.0 / p.b) if p.b > 0 else 4.0
    pts = [np.linspace(0.0, ymax, res), [1.0]]
    if p.b > 0:
        pts.append([1.0 / p.b])
    return np.unique(np.concatenate(pts))


def h_inf_oracle(p: HParams, res: int = 400) -> float:
    """Minimum of E[H] over two-point laws of Y on a grid, with the dW budget
    c l placed on the atom where the bracket is most negative.

    Every candidate is feasible, so the result is an upper bound on the
    infimum.  The grid contains the kinks y = 1 and y = 1/b.
    """
    if res < MIN_RES:
        raise ResolutionTooCoarse(f"resolution {res} < {MIN_RES}")
    g = y_grid(p, res)
    lo, hi = g[g <= 1.0], g[g >= 1.0]
    f_lo, f_hi = phi(p, lo), phi(p, hi)
    y1, y2 = lo[:, None], hi[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        w2 = np.where(y2 > y1, (1.0 - y1) / (y2 - y1), 0.0)
    w1 = 1.0 - w2
    mean_phi = w1 * f_lo[:, None] + w2 * f_hi[None, :]
    # an atom only carries the dW budget if it has positive probability
    f1 = np.where(w1 > 0, f_lo[:, None], np.inf)
    f2 = np.where(w2 > 0, f_hi[None, :], np.inf)
    worst = np.minimum(np.minimum(f1, f2), 0.0)
    vals = p.l * mean_phi + p.c * p.l * worst
    return float(vals.min())


def kappa_lambda(c) -> tuple[np.ndarray, np.ndarray]:
    """Recursive constants for t = 1..T from c = (c_2, ..., c_T).

    kappa_T = 1, kappa_t = (c_{t+1} + 1) kappa_{t+1};
    lambda_1 = kappa_1, lambda_{t+1} = lambda_t + kappa_{t+1} + 2 kappa_{t+1}(c_{t+1} + 1) - kappa_t.
    Returned arrays are indexed by t - 1.
    """
    c = np.asarray(c, dtype=float)
    T = len(c) + 1
    kappa = np.ones(T)
    for t in range(T - 1, 0, -1):  # t = T-1..1 (1-based)
        kappa[t - 1] = (c[t - 1] + 1) * kappa[t]  # c_{t+1} = c[t-1]
    lam = np.empty(T)
    lam[0] = kappa[0]
    for t in range(1, T):
        lam[t] = lam[t - 1] + kappa[t] + 2 * kappa[t] * (c[t - 1] + 1) - kappa[t - 1]
    return kappa, lam


def telescope_check(c, a, b, l) -> tuple[float, float]:
    """Walk the induction chain for given per-step (a_t, b_t, l_t), t = 1..T-1.

    At each step the relaxed bound with (lambda_{t+1}, kappa_{t+1}, c_{t+1})
    must equal l ((lambda_t - kappa_t)|1 - b| + 2 kappa_t (a - min(b, 1))).
    Returns (max identity defect, first-step value with a_1 = min(b_1, 1)).
    """
    kappa, lam = kappa_lambda(c)
    T = len(kappa)
    defect = 0.0
    for t in range(1, T):  # step from t to t+1, 1-based t
        at, bt, lt = float(a[t - 1]), float(b[t - 1]), float(l[t - 1])
        hp = HParams(lt, float(c[t - 1]), lam[t], kappa[t], at, bt)
        lhs = h_lower_cor(hp)
        rhs = lt * ((lam[t - 1] - kappa[t - 1]) * abs(1 - bt) + 2 * kappa[t - 1] * (at - min(bt, 1.0)))
        defect = max(defect, abs(lhs - rhs))
    b1 = float(b[0])
    first = float(l[0]) * ((lam[0] - kappa[0]) * abs(1 - b1) + 2 * kappa[0] * (min(b1, 1.0) - min(b1, 1.0)))
    return defect, first


def random_params(rng: np.random.Generator) -> HParams:
    """A random valid parameter set (b straddles 1 on purpose)."""
    b = float(rng.choice([rng.uniform(0, 1), rng.uniform(1, 4), 1.0], p=[0.45, 0.45, 0.1]))
    a = float(rng.uniform(0, min(1.0, b)))
    kappa = float(rng.uniform(0, 3))
    lam = kappa + float(rng.uniform(0, 5))
    return HParams(float(rng.uniform(0, 3)), float(rng.uniform(0, 2)), lam, kappa, a, b)
