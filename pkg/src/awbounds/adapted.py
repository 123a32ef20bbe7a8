"""Bicausal transport on scenario trees, weighted (adapted) total variation and
the bound chain relating them.

The adapted Wasserstein distance is computed by backward induction over pairs
of nodes (one node of each tree at the same depth): the value of a node pair is
the optimal transport cost between the two one-step kernels, with the cost of
moving x_{t+1} to y_{t+1} equal to the stage cost plus the value of the child
pair.  A path-global terminal cost on leaf pairs is supported as well, which is
what the weighted ATV costs (w(x) + w(y)) 1{x != y} need.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .measures import PathMeasure, WeightSpec
from .ot_exact import ot_value, pairwise_cost, transport_lp, wasserstein_1d_pp, wasserstein_pp

CHARGED = 1e-15
CHAIN_TOL = 1e-9


def _same_shape(mu, nu):
    if (mu.T, mu.d) != (nu.T, nu.d):
        raise ShapeMismatch(f"(T, d) = {(mu.T, mu.d)} vs {(nu.T, nu.d)}")


def _as_weight(w) -> WeightSpec:
    if w is None:
        return WeightSpec.one()
    if isinstance(w, WeightSpec):
        return w
    return WeightSpec.ppower(float(w))


# -------------------------------------------------------------- closed forms
def _leaf_masses(mu: PathMeasure) -> dict:
    return dict(zip(mu.leaf_paths, mu.weights))


def tv_weighted(mu: PathMeasure, nu: PathMeasure, w=None) -> float:
    """sum_x w(x) |mu(x) - nu(x)| over the union of the supports."""
    _same_shape(mu, nu)
    w = _as_weight(w)
    a, b = _leaf_masses(mu), _leaf_masses(nu)
    total = 0.0
    for x in sorted(set(a) | set(b)):
        total += w(x) * abs(a.get(x, 0.0) - b.get(x, 0.0))
    return total


def common_part(mu: PathMeasure, nu: PathMeasure) -> dict:
    """Leaf masses of mu_1 ^ nu_1 prod_t mu_{x_{1:t}} ^ nu_{x_{1:t}}."""
    _same_shape(mu, nu)
    out = {}
    stack = [(0, 0, (), 1.0)]
    while stack:
        i, j, pre, mass = stack.pop()
        theirs = {s: (q, c) for s, q, c in nu.nodes[j]}
        for s, pr, ci in mu.nodes[i]:
            if s not in theirs:
                continue
            q, cj = theirs[s]
            m = mass * min(pr, q)
            if ci is None:
                out[pre + (s,)] = m
            else:
                stack.append((ci, cj, pre + (s,), m))
    return out


def atv_weighted(mu: PathMeasure, nu: PathMeasure, w=None) -> float:
    """int w dmu + int w dnu - 2 int w d(stagewise kernel minimum)."""
    _same_shape(mu, nu)
    w = _as_weight(w)
    common = common_part(mu, nu)
    total = float(w.on_leaves(mu) @ mu.weights + w.on_leaves(nu) @ nu.weights)
    return total - 2.0 * sum(w(x) * m for x, m in sorted(common.items()))


def tv_cost_matrix(mu: PathMeasure, nu: PathMeasure, w=None) -> np.ndarray:
    """(w(x) + w(y)) 1{x != y} on leaf pairs."""
    w = _as_weight(w)
    wx, wy = w.on_leaves(mu), w.on_leaves(nu)
    C = wx[:, None] + wy[None, :]
    index = {x: j for j, x in enumerate(nu.leaf_paths)}
    for i, x in enumerate(mu.leaf_paths):
        j = index.get(x)
        if j is not None:
            C[i, j] = 0.0
    return C


def tv_lp(mu, nu, w=None) -> float:
    """TV_w as a plain transport LP (oracle for :func:`tv_weighted`)."""
    return transport_lp(mu.weights, nu.weights, tv_cost_matrix(mu, nu, w))[0]


# ------------------------------------------------------------ bicausal DP
def _pairwise_w1d_last_stage(mu, nu, I, J, p):
    """W_p^p between every pair of last-stage kernels for d = 1."""
    ka = [mu.child_arrays[i] for i in I]
    kb = [nu.child_arrays[j] for j in J]
    if p != 1:
        return np.array([[wasserstein_1d_pp(xa[:, 0], pa, xb[:, 0], pb, p) for xb, pb, _ in kb]
                         for xa, pa, _ in ka])
    grid = np.unique(np.concatenate([k[0][:, 0] for k in ka + kb]))
    gaps = np.diff(grid)

    def cdfs(kernels):
        F = np.zeros((len(kernels), grid.size))
        for r, (xs, ps, _) in enumerate(kernels):
            F[r, np.searchsorted(grid, xs[:, 0])] += ps
        return np.cumsum(F, axis=1)[:, :-1]

    Fa, Fb = cdfs(ka), cdfs(kb)
    return np.stack([np.abs(f[None, :] - Fb) @ gaps for f in Fa])


def bicausal_dp(mu: PathMeasure, nu: PathMeasure, p: float | None = None, terminal=None,
                plans: bool = False):
    """Optimal bicausal cost with stage cost |x_t - y_t|_p^p (if ``p`` is given)
    plus an optional terminal cost matrix on leaf pairs.

    Returns ``(value, plans_dict)``; plans are keyed by (depth, mu node, nu node).
    """
    _same_shape(mu, nu)
    T = mu.T
    if terminal is not None:
        terminal = np.asarray(terminal, float)
        if terminal.shape != (mu.n_leaves, nu.n_leaves):
            raise ShapeMismatch("terminal cost must be (mu leaves) x (nu leaves)")
    out_plans = {}
    V = None
    for t in reversed(range(T)):
        I, J = mu.levels[t], nu.levels[t]
        last = t == T - 1
        if last and terminal is None and p is not None and mu.d == 1 and not plans:
            V = _pairwise_w1d_last_stage(mu, nu, I, J, p)
            continue
        Vt = np.empty((len(I), len(J)))
        for a, i in enumerate(I):
            xs, ps, ti = mu.child_arrays[i]
            for b, j in enumerate(J):
                ys, qs, tj = nu.child_arrays[j]
                C = pairwise_cost(xs, ys, p) if p is not None else np.zeros((len(ps), len(qs)))
                if last:
                    if terminal is not None:
                        C = C + terminal[np.ix_(ti, tj)]
                else:
                    C = C + V[np.ix_(mu.level_pos[ti], nu.level_pos[tj])]
                if plans:
                    Vt[a, b], out_plans[(t, i, j)] = transport_lp(ps, qs, C)
                else:
                    Vt[a, b] = ot_value(ps, qs, C)
        V = Vt
    return float(V[0, 0]), out_plans


def adapted_wasserstein_pp(mu: PathMeasure, nu: PathMeasure, p: float = 1.0) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    return max(bicausal_dp(mu, nu, p=p)[0], 0.0)


def adapted_wasserstein_dp(mu: PathMeasure, nu: PathMeasure, p: float = 1.0, plans: bool = False):
    """(AW_p(mu, nu), stagewise plans)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    value, out = bicausal_dp(mu, nu, p=p, plans=plans)
    return max(value, 0.0) ** (1.0 / p), out


def atv_dp(mu: PathMeasure, nu: PathMeasure, w=None) -> float:
    """ATV_w through the bicausal DP (oracle for :func:`atv_weighted`)."""
    return bicausal_dp(mu, nu, terminal=tv_cost_matrix(mu, nu, w))[0]


def first_stage_lower_bound(mu: PathMeasure, nu: PathMeasure, p: float = 1.0) -> float:
    """inf over couplings pi_1 of the first marginals of
    int W_p^p(mu_{x_1}, nu_{y_1}) dpi_1, with the kernels taken as laws of the
    remaining path x_{2:T}.  A lower bound for AW_p^p."""
    _same_shape(mu, nu)
    if mu.T < 2:
        return 0.0
    xa, pa, ta = mu.child_arrays[0]
    xb, pb, tb = nu.child_arrays[0]
    if mu.T == 2 and mu.d == 1:
        C = _pairwise_w1d_last_stage(mu, nu, list(ta), list(tb), p)
    else:
        def sub(m, node):
            pre = m.prefixes[node]
            rows = [(x[1:], w / m.node_mass[node]) for x, w in zip(m.leaf_paths, m.weights) if x[:1] == pre]
            return PathMeasure.from_paths(np.array([r[0] for r in rows]), np.array([r[1] for r in rows]))
        subs_a = [sub(mu, i) for i in ta]
        subs_b = [sub(nu, j) for j in tb]
        C = np.array([[wasserstein_pp(sa, sb, p) for sb in subs_b] for sa in subs_a])
    return transport_lp(pa, pb, C)[0]


# ---------------------------------------------------------------- constants
@dataclass(frozen=True)
class CtVector:
    """c_t for t = 2..T (``c[t-2]``) plus the per-node ratios behind the maxima."""

    c: np.ndarray
    ratios: dict = field(default_factory=dict, compare=False)
    off_support: dict = field(default_factory=dict, compare=False)

    @property
    def T(self) -> int:
        return len(self.c) + 1

    def __getitem__(self, t: int) -> float:
        return float(self.c[t - 2])


def _node_ratio(weight: WeightSpec, pre, states, probs) -> float:
    if weight.kind == "ppower":
        num = float(probs @ (np.abs(states) ** weight.p).sum(axis=1))
        return num / weight.stage(pre)
    base = weight.stage(pre)
    num = float(sum(pr * weight.stage(pre + (tuple(s),)) for s, pr in zip(states, probs)))
    if base == 0:
        return 0.0 if num == 0 else np.inf
    return num / base - 1.0


def compute_ct(nu: PathMeasure, weight=1.0, mu: PathMeasure | None = None) -> CtVector:
    """c_t = max over nu-charged nodes x_{1:t-1} of
    int w_t(x_{1:t-1}, .) dnu_{x_{1:t-1}} / w_{t-1}(x_{1:t-1}) - 1.

    For p-power weights this is E_nu[|X_t|^p | x_{1:t-1}] / (1 + |x_{1:t-1}|_p^p).
    When ``mu`` is given, the same ratio is reported for mu's kernels at
    prefixes nu does not charge; those values do not enter c_t.
    """
    weight = _as_weight(weight)
    c = np.zeros(max(nu.T - 1, 0))
    ratios, off = {}, {}
    for node, pre in enumerate(nu.prefixes):
        if len(pre) == 0 or nu.node_mass[node] <= CHARGED:
            continue
        states, probs = nu.kernel_at(node)
        r = _node_ratio(weight, pre, states, probs)
        ratios[pre] = r
        t = len(pre) + 1
        c[t - 2] = max(c[t - 2], r)
    if mu is not None:
        charged = set(ratios)
        for node, pre in enumerate(mu.prefixes):
            if len(pre) and pre not in charged:
                states, probs = mu.kernel_at(node)
                try:
                    off[pre] = _node_ratio(weight, pre, states, probs)
                except KeyError:
                    off[pre] = float("nan")
    return CtVector(np.maximum(c, 0.0), ratios, off)


def lambda_constant(ct) -> float:
    """1 + 2 sum_{t=1}^{T-1} prod_{s=t+1}^{T} (1 + c_s)."""
    c = np.asarray(ct.c if isinstance(ct, CtVector) else ct, dtype=float)
    T = len(c) + 1
    total = 0.0
    for t in range(1, T):
        total += float(np.prod(1.0 + c[t - 1:]))  # s = t+1..T  <->  c[t-1:]
    return 1.0 + 2.0 * total


# ------------------------------------------------------------------ report
@dataclass
class BoundReport:
    T: int
    p: float
    TV: float
    ATV: float
    TV_pp: float
    ATV_pp: float
    AW_pp: float
    W_pp: float
    diam_pp: float
    c: list
    lambda_plain: float
    lambda_weighted: float
    tol: float = CHAIN_TOL
    checks: list = field(default_factory=list)

    def _inequalities(self):
        tp = 2.0 ** self.p
        return [
            ("W_pp <= AW_pp", self.W_pp, self.AW_pp),
            ("AW_pp <= 2^p ATV_pp", self.AW_pp, tp * self.ATV_pp),
            ("2^p ATV_pp <= 2^p lambda_weighted TV_pp", tp * self.ATV_pp, tp * self.lambda_weighted * self.TV_pp),
            ("ATV <= (2T-1) TV", self.ATV, self.lambda_plain * self.TV),
            ("AW_pp <= diam^p ATV", self.AW_pp, self.diam_pp * self.ATV),
            ("diam^p ATV <= (2T-1) diam^p TV", self.diam_pp * self.ATV, self.lambda_plain * self.diam_pp * self.TV),
        ]

    def recheck(self) -> list:
        out = []
        for name, lhs, rhs in self._inequalities():
            slack = rhs - lhs
            out.append({"name": name, "lhs": lhs, "rhs": rhs, "slack": slack, "ok": bool(slack >= -self.tol)})
        return out

    def __post_init__(self):
        if not self.checks:
            self.checks = self.recheck()

    @property
    def ok(self) -> bool:
        return all(ch["ok"] for ch in self.checks)

    @property
    def min_slack(self) -> float:
        return min(ch["slack"] for ch in self.checks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c"] = [float(x) for x in self.c]
        d["all_ok"] = self.ok
        return d


def bound_report(mu: PathMeasure, nu: PathMeasure, p: float = 1.0, tol: float = CHAIN_TOL) -> BoundReport:
    _same_shape(mu, nu)
    wp = WeightSpec.ppower(p)
    ct = compute_ct(nu, wp)
    diam = float(pairwise_cost(*(np.array(sorted(set(mu.leaf_paths) | set(nu.leaf_paths))),) * 2, p).max())
    return BoundReport(
        T=mu.T,
        p=float(p),
        TV=tv_weighted(mu, nu),
        ATV=atv_weighted(mu, nu),
        TV_pp=tv_weighted(mu, nu, wp),
        ATV_pp=atv_weighted(mu, nu, wp),
        AW_pp=adapted_wasserstein_pp(mu, nu, p),
        W_pp=wasserstein_pp(mu, nu, p),
        diam_pp=diam,
        c=[float(x) for x in ct.c],
        lambda_plain=float(2 * mu.T - 1),
        lambda_weighted=lambda_constant(ct),
        tol=tol,
    )
