"""Generators for three counterexample families.

* ``gen_example35``: two-block tree pair whose ATV/TV ratio approaches
  2T - 1 (and, with tabulated weights, the weighted multiplier lambda).
* ``gen_example36``: a two-stage pair with bounded first moments and an
  unbounded ATV_1/TV_1 ratio.
* ``gen_example43``: a pair of densities on [0,1]^2 for which AW_1 decays
  like W_1^{k/(k+1)}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidEpsilon, InvalidParams, MeshTooCoarse
from .measures import PathMeasure, WeightSpec
from .smoothing import GridDensity

P_RULES = ("literal", "minimal")


@dataclass(frozen=True)
class Example35Params:
    """Parameters of the two-block construction.

    ``p_rule="literal"`` uses p = 2eps/(1+eps); the resulting kernels are only
    valid for T = 2.  ``p_rule="minimal"`` uses the smallest p with
    p^{T-1} >= 2eps/(1+eps), which is valid for every T >= 2 and coincides with
    the literal rule at T = 2.
    """

    T: int
    eps: float
    c: tuple = ()
    p_rule: str = "literal"

    def __post_init__(self):
        if self.T < 2:
            raise InvalidParams("T must be >= 2")
        if not 0 < self.eps < 0.5:
            raise InvalidEpsilon(f"eps must lie in (0, 1/2), got {self.eps}")
        if self.p_rule not in P_RULES:
            raise InvalidParams(f"p_rule must be one of {P_RULES}")
        if self.c and len(self.c) != self.T - 1:
            raise InvalidParams(f"need c_2..c_T ({self.T - 1} values), got {len(self.c)}")
        if any(x < 0 for x in self.c):
            raise InvalidParams("c_t must be non-negative")
        bad = self.violations()
        if bad:
            raise InvalidEpsilon(f"kernels are not probabilities for eps={self.eps}, T={self.T}, "
                                 f"p_rule={self.p_rule!r}: {bad[0]}")

    @property
    def q(self) -> float:
        return 2 * self.eps / (1 + self.eps)

    @property
    def p(self) -> float:
        if self.p_rule == "literal" or self.T == 2:
            return self.q
        return self.q ** (1.0 / (self.T - 1))

    def d(self, t: int) -> float:
        return self.q / self.p ** (t - 1)

    def r(self, t: int) -> float:
        return 1.0 / (1.0 - self.d(t))

    def u(self, t: int) -> float:
        return self.p - self.d(t)

    def violations(self) -> list:
        out = []
        for t in range(1, self.T):
            d = self.d(t)
            if not d < 1:
                out.append(f"d_{t} = {d:.6g} >= 1")
                continue
            up = self.r(t) * (1 - self.p)
            if not -1e-15 <= up <= 1 + 1e-15:
                out.append(f"r_{t}(1-p) = {up:.6g} outside [0, 1]")
        return out

    @property
    def weighted(self) -> bool:
        return bool(self.c) and any(x != 0 for x in self.c)

    def lambda_limit(self) -> float:
        c = np.asarray(self.c if self.c else [0.0] * (self.T - 1), float)
        return 1.0 + 2.0 * sum(float(np.prod(1.0 + c[t - 1:])) for t in range(1, self.T))

    def closed_form(self) -> dict:
        """TV, ATV (and weighted versions) predicted for these parameters."""
        tv = 2 * self.eps
        atv = 2 * self.eps * ((2 * self.T - 2) * (1 - self.p) + 1)
        c = np.asarray(self.c if self.c else [0.0] * (self.T - 1), float)
        s = sum(float(np.prod(1.0 + c[i - 1:])) for i in range(1, self.T))
        atv_w = 2 * self.eps * (1 - self.p) * 2 * s + 2 * self.eps
        return {"TV": tv, "ATV": atv, "TV_w": tv, "ATV_w": atv_w, "p": self.p}


def _leaf(i: int, T: int) -> tuple:
    """x^i = sum_{j > i} e^j (1-based i)."""
    return tuple(0.0 if t <= i else 1.0 for t in range(1, T + 1))


def _gammas(par: Example35Params) -> tuple[list, list]:
    T, p, eps = par.T, par.p, par.eps
    g1, g2 = [], []
    m1, m2 = (1 - eps) / 2, (1 + eps) / 2  # mass still sitting at the zero path
    for i in range(1, T):
        up1 = min(par.r(i) * (1 - p), 1.0)
        g1.append(m1 * up1)
        g2.append(m2 * (1 - p))
        m1 *= 1 - up1
        m2 *= p
    g1.append(m1)
    g2.append(m2)
    return g1, g2


def gen_example35(par: Example35Params) -> tuple[PathMeasure, PathMeasure, WeightSpec]:
    T = par.T
    g1, g2 = _gammas(par)
    paths, wm, wn = [], [], []
    for j in (1, -1):
        for i in range(1, T + 1):
            paths.append([x + j for x in _leaf(i, T)])
            # mu = gamma_1 shifted up + gamma_2 shifted down; nu swaps the blocks
            wm.append(g1[i - 1] if j == 1 else g2[i - 1])
            wn.append(g2[i - 1] if j == 1 else g1[i - 1])
    paths = np.array(paths)
    mu = PathMeasure.from_paths(paths, np.array(wm))
    nu = PathMeasure.from_paths(paths, np.array(wn))
    if not par.weighted:
        return mu, nu, WeightSpec.one()
    c = [0.0, 0.0] + [float(x) for x in par.c]  # c[s] = c_s for s = 2..T
    table = {}
    for j in (1, -1):
        for i in range(1, T + 1):
            x = [v + j for v in _leaf(i, T)]
            for t in range(1, T + 1):
                w = float(np.prod([1 + c[s] for s in range(i + 1, t + 1)])) if t > i else 1.0
                table[tuple((v,) for v in x[:t])] = w
    return mu, nu, WeightSpec.tabulated(table)


def gen_example36(eps: float) -> tuple[PathMeasure, PathMeasure]:
    if not 0 < eps < 1:
        raise InvalidEpsilon(f"eps must lie in (0, 1), got {eps}")
    mu = PathMeasure.from_paths(np.array([[1.0, 1.0 / eps], [1.0, 0.0], [0.0, 0.0]]),
                                np.array([eps * (1 - eps), eps**2, 1 - eps]))
    nu = PathMeasure.from_paths(np.array([[1.0, 1.0 / eps], [0.0, 0.0]]),
                                np.array([eps * (1 - eps), 1 - eps + eps**2]))
    return mu, nu


def example36_closed_form(eps: float) -> dict:
    """Values implied by the definitions (weights 1 + |x|_1):
    TV_1 = 3 eps^2 and ATV_1 = 2 eps + 5 eps^2 - 4 eps^3."""
    return {"TV_1": 3 * eps**2, "ATV_1": 2 * eps + 5 * eps**2 - 4 * eps**3}


def _band(s):
    return np.sin(s - math.pi / 2) + 1.0


def p_nu_function(eps: float, k: int):
    def f(x1, x2):
        bottom = np.where(x2 <= 2 * eps, _band(math.pi * x2 / eps), 0.0)
        top = np.where(x2 >= 1 - 2 * eps, _band(math.pi * (1 - x2) / eps), 0.0)
        return 1.0 + eps**k * np.sin(math.pi * x1 / eps) * (bottom - top)
    return f


@dataclass(frozen=True)
class Example43Params:
    eps: float
    k: int
    mesh: float
    n: int = field(init=False)

    def __post_init__(self):
        if not 0 < self.eps < 0.125:
            raise InvalidEpsilon(f"eps must lie in (0, 1/8), got {self.eps}")
        if self.k < 1:
            raise InvalidParams("k must be >= 1")
        n = int(round(1.0 / self.mesh))
        if n < 1 or abs(n * self.mesh - 1.0) > 1e-9:
            raise MeshTooCoarse(f"mesh {self.mesh} does not divide [0, 1]")
        if self.mesh > self.eps / 20 * (1 + 1e-9):
            raise MeshTooCoarse(f"mesh {self.mesh} > eps/20 = {self.eps / 20}")
        object.__setattr__(self, "n", n)


def gen_example43(eps: float, k: int, mesh: float) -> tuple[GridDensity, GridDensity]:
    par = Example43Params(eps, k, mesh)
    shape = (par.n, par.n)
    p_mu = GridDensity((0, 0), (1, 1), np.ones(shape), T=2, d=1, meta={"example": "4.3"})
    vals = p_nu_function(eps, k)(*p_mu.mesh_grid())
    p_nu = p_mu.with_values(vals, normalized=True)
    return p_mu, p_nu


def example43_closed_form(eps: float, k: int) -> dict:
    """Bounds stated with the construction (upper bound on W_1, lower bound on AW_1)."""
    return {"W1_upper": 2 * math.sqrt(2) * eps ** (k + 1), "AW1_lower": eps**k / math.pi,
            "ratio_lower": 1 / (math.pi * 8 ** 0.25)}
