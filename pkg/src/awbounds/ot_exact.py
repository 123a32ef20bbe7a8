"""Exact discrete optimal transport.

The transportation LP is solved by POT's network simplex (``ot.emd``); every
returned plan is checked against the dual potentials the solver reports.  The
bicausal LP in :func:`bicausal_lp` is an independent, brute-force formulation
(HiGHS via scipy) used only as an oracle for the dynamic program in
:mod:`awbounds.adapted`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

for _backend in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402

from .errors import Degenerate, ShapeMismatch, TooLarge  # noqa: E402
from .measures import PathMeasure  # noqa: E402

MAX_ATOMS = 2000
DUAL_TOL = 1e-9


@dataclass(frozen=True)
class Coupling:
    """Sparse plan: ``mass[k]`` sits on (support_a[rows[k]], support_b[cols[k]])."""

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    a: np.ndarray
    b: np.ndarray
    u: np.ndarray | None = None
    v: np.ndarray | None = None

    @classmethod
    def from_dense(cls, G, a, b, u=None, v=None, cutoff=0.0):
        rows, cols = np.nonzero(G > cutoff)
        return cls(rows, cols, G[rows, cols], np.asarray(a), np.asarray(b), u, v)

    def dense(self) -> np.ndarray:
        G = np.zeros((len(self.a), len(self.b)))
        np.add.at(G, (self.rows, self.cols), self.mass)
        return G

    def marginal_gap(self) -> float:
        G = self.dense()
        return float(max(np.abs(G.sum(1) - self.a).max(), np.abs(G.sum(0) - self.b).max()))

    def cost(self, C) -> float:
        return float(self.mass @ np.asarray(C)[self.rows, self.cols])


def _check_weights(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise Degenerate("empty support")
    if a.size > MAX_ATOMS or b.size > MAX_ATOMS:
        raise TooLarge(f"{a.size} x {b.size} atoms exceeds the {MAX_ATOMS} cap; coarsen first")
    if np.any(a < 0) or np.any(b < 0):
        raise Degenerate("negative weight")
    sa, sb = a.sum(), b.sum()
    if abs(sa - 1) > 1e-9 or abs(sb - 1) > 1e-9:
        raise Degenerate(f"weights sum to {sa!r} and {sb!r}, expected 1")
    return a, b * (sa / sb)


def certify(G, u, v, a, b, C, tol=DUAL_TOL) -> float:
    """Return the worst violation of primal feasibility, dual feasibility and
    complementary slackness for the plan G and potentials (u, v)."""
    red = C - u[:, None] - v[None, :]
    primal = max(np.abs(G.sum(1) - a).max(), np.abs(G.sum(0) - b).max(), -min(G.min(), 0.0))
    dual = max(-red.min(), 0.0)
    support = G > 1e-14
    slack = float(np.abs(red[support]).max()) if support.any() else 0.0
    return float(max(primal, dual, slack))


def _highs_transport(a, b, C):
    n, m = C.shape
    rows = np.concatenate([np.repeat(np.arange(n), m), n + np.tile(np.arange(m), n)])
    cols = np.concatenate([np.arange(n * m), np.arange(n * m)])
    A = sparse.csr_matrix((np.ones(2 * n * m), (rows, cols)), shape=(n + m, n * m))
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise Degenerate(f"transport LP failed: {res.message}")
    y = res.eqlin.marginals
    return res.x.reshape(n, m), y[:n], y[n:]


def transport_lp(a, b, C) -> tuple[float, Coupling]:
    """Exact optimal value and plan of the transportation problem."""
    a, b = _check_weights(a, b)
    C = np.ascontiguousarray(C, dtype=float)
    if C.shape != (a.size, b.size):
        raise ShapeMismatch(f"cost shape {C.shape} does not match ({a.size}, {b.size})")
    if not np.all(np.isfinite(C)):
        raise Degenerate("non-finite cost")
    G, log = ot.emd(a, b, C, log=True, numItermax=10_000_000)
    u, v = np.asarray(log["u"]), np.asarray(log["v"])
    scale = max(1.0, float(np.abs(C).max()))
    if certify(G, u, v, a, b, C) > DUAL_TOL * scale:
        G, u, v = _highs_transport(a, b, C)
        G = np.clip(G, 0, None)
    value = float(np.sum(G * C))
    return value, Coupling.from_dense(G, a, b, u, v)


def ot_value(a, b, C) -> float:
    """Optimal transport value without building a Coupling (inner DP solves)."""
    if len(a) == 1:
        return float(b @ C[0])
    if len(b) == 1:
        return float(a @ C[:, 0])
    return float(ot.emd2(a, b, C, numItermax=10_000_000))


def pairwise_cost(X, Y, p: float) -> np.ndarray:
    """C[i, j] = |X_i - Y_j|_p^p = sum_k |X_ik - Y_jk|^p for flattened paths."""
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    Y = np.asarray(Y, dtype=float).reshape(len(Y), -1)
    diff = np.abs(X[:, None, :] - Y[None, :, :])
    return (diff if p == 1 else diff**p).sum(axis=2)


def _same_shape(mu: PathMeasure, nu: PathMeasure):
    if (mu.T, mu.d) != (nu.T, nu.d):
        raise ShapeMismatch(f"(T, d) = {(mu.T, mu.d)} vs {(nu.T, nu.d)}")


def wasserstein_pp(mu: PathMeasure, nu: PathMeasure, p: float) -> float:
    """W_p^p(mu, nu) with cost |x - y|_p^p."""
    _same_shape(mu, nu)
    if p < 1:
        raise ValueError("p must be >= 1")
    value, _ = transport_lp(mu.weights, nu.weights, pairwise_cost(mu.paths, nu.paths, p))
    return max(value, 0.0)


def wasserstein_p(mu: PathMeasure, nu: PathMeasure, p: float) -> float:
    return wasserstein_pp(mu, nu, p) ** (1.0 / p)


def wasserstein_1d_pp(xa, a, xb, b, p: float = 1.0) -> float:
    """W_p^p between two discrete laws on R through the quantile coupling."""
    xa, a = np.asarray(xa, float).ravel(), np.asarray(a, float).ravel()
    xb, b = np.asarray(xb, float).ravel(), np.asarray(b, float).ravel()
    ia, ib = np.argsort(xa, kind="stable"), np.argsort(xb, kind="stable")
    xa, a, xb, b = xa[ia], a[ia], xb[ib], b[ib]
    ca, cb = np.cumsum(a), np.cumsum(b)
    ca /= ca[-1]
    cb /= cb[-1]
    levels = np.union1d(ca, cb)
    widths = np.diff(np.concatenate([[0.0], levels]))
    mids = levels - widths / 2
    qa = xa[np.minimum(np.searchsorted(ca, mids, side="left"), len(xa) - 1)]
    qb = xb[np.minimum(np.searchsorted(cb, mids, side="left"), len(xb) - 1)]
    return float(widths @ np.abs(qa - qb) ** p)


def wasserstein_1d(xa, a, xb, b, p: float = 1.0) -> float:
    return wasserstein_1d_pp(xa, a, xb, b, p) ** (1.0 / p)


def _grid_arcs(shape):
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    tails, heads, axes = [], [], []
    for ax in range(len(shape)):
        lo = np.take(idx, np.arange(shape[ax] - 1), axis=ax).ravel()
        hi = np.take(idx, np.arange(1, shape[ax]), axis=ax).ravel()
        tails += [lo, hi]
        heads += [hi, lo]
        axes += [np.full(lo.size, ax)] * 2
    return np.concatenate(tails), np.concatenate(heads), np.concatenate(axes)


def w1_grid_flow(diff: np.ndarray, spacing, method: str = "auto") -> float:
    """Exact W_1 with l1 ground cost between two measures on a common regular
    grid, given their cell-mass difference ``diff`` (shape = grid shape).

    With l1 ground cost every monotone lattice path is a shortest path, so the
    min-cost flow routing ``diff`` through nearest-neighbour edges equals the
    transport cost.  ``method="network"`` solves the flow with an integer
    network-simplex solver (supplies scaled by 2^S and rounded; needs equal
    spacing on all axes), ``method="lp"`` with a sparse HiGHS LP.
    """
    diff = np.asarray(diff, dtype=float)
    shape = diff.shape
    spacing = np.broadcast_to(np.asarray(spacing, float), (len(shape),))
    supply = diff.ravel() - diff.sum() / diff.size
    if not np.any(supply):
        return 0.0
    uniform = np.allclose(spacing, spacing[0], rtol=1e-12, atol=0)
    if method == "auto":
        method = "network" if uniform else "lp"
    tails, heads, axes = _grid_arcs(shape)
    if method == "network":
        if not uniform:
            raise ShapeMismatch("the network solver needs equal spacing on all axes")
        return _grid_flow_network(supply, tails, heads, sum(shape)) * float(spacing[0])
    if method != "lp":
        raise ValueError(f"unknown method {method!r}")
    n, m = supply.size, tails.size
    A = sparse.csr_matrix(
        (np.concatenate([np.ones(m), -np.ones(m)]), (np.concatenate([tails, heads]), np.tile(np.arange(m), 2))),
        shape=(n, m),
    )
    res = linprog(spacing[axes], A_eq=A, b_eq=supply, bounds=(0, None), method="highs-ipm",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise Degenerate(f"grid flow LP failed: {res.message}")
    return float(res.fun)


def _grid_flow_network(supply, tails, heads, max_hops) -> float:
    from ortools.graph.python import min_cost_flow

    # keep total cost (scale * mass * hops) inside int64
    total = float(np.abs(supply).sum())
    scale_bits = min(50, int(np.floor(61 - np.log2(max(total, 1e-300) * max_hops + 1))))
    scale = 2.0 ** scale_bits
    sup = np.rint(supply * scale).astype(np.int64)
    sup[np.argmax(np.abs(sup))] -= int(sup.sum())
    flow = min_cost_flow.SimpleMinCostFlow()
    cap = np.full(tails.size, int(np.abs(sup).sum()), dtype=np.int64)
    flow.add_arcs_with_capacity_and_unit_cost(tails, heads, cap, np.ones(tails.size, dtype=np.int64))
    flow.set_nodes_supplies(np.arange(sup.size), sup)
    status = flow.solve()
    if status != flow.OPTIMAL:
        raise Degenerate(f"grid min-cost flow failed with status {status}")
    return flow.optimal_cost() / scale


# ------------------------------------------------------------------- oracle
def _prefix_index(paths_list, t):
    keys = sorted({p[:t] for p in paths_list})
    pos = {k: i for i, k in enumerate(keys)}
    return keys, pos, np.array([pos[p[:t]] for p in paths_list])


def bicausal_lp(mu: PathMeasure, nu: PathMeasure, C) -> float:
    """Brute-force bicausal transport: one LP over all leaf pairs.

    Bicausality is imposed through the linear constraints
    pi(x_{1:t+1}, y_{1:t}) = mu_{x_{1:t}}(x_{t+1}) pi(x_{1:t}, y_{1:t}) and the
    symmetric ones in y, for t = 1..T-1.  Meant for tiny instances only.
    """
    _same_shape(mu, nu)
    X, Y = mu.leaf_paths, nu.leaf_paths
    n, m = len(X), len(Y)
    C = np.asarray(C, float)
    var_x = np.repeat(np.arange(n), m)
    var_y = np.tile(np.arange(m), n)
    rows, cols, vals, rhs = [var_x, n + var_y], [np.arange(n * m)] * 2, [np.ones(n * m)] * 2, [mu.weights, nu.weights]
    r = n + m
    for t in range(1, mu.T):
        for own, other, meas, own_var, oth_var in ((X, Y, mu, var_x, var_y), (Y, X, nu, var_y, var_x)):
            par_keys, par_pos, par_idx = _prefix_index(own, t)
            ch_keys, _, ch_idx = _prefix_index(own, t + 1)
            _, _, oth_idx = _prefix_index(other, t)
            n_oth = int(oth_idx.max()) + 1
            pm = meas.prefix_mass
            cond = np.array([pm[k] / pm[k[:-1]] for k in ch_keys])
            children = [[] for _ in par_keys]
            for c, k in enumerate(ch_keys):
                children[par_pos[k[:-1]]].append(c)
            rr, cc, vv = [], [], []
            for v in range(n * m):
                a_par, a_ch = par_idx[own_var[v]], ch_idx[own_var[v]]
                b = oth_idx[oth_var[v]]
                for c in children[a_par]:
                    rr.append(r + c * n_oth + b)
                    cc.append(v)
                    vv.append((1.0 if c == a_ch else 0.0) - cond[c])
            rows.append(np.array(rr, dtype=int))
            cols.append(np.array(cc, dtype=int))
            vals.append(np.array(vv))
            rhs.append(np.zeros(len(ch_keys) * n_oth))
            r += len(ch_keys) * n_oth
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(r, n * m))
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate(rhs), bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise Degenerate(f"bicausal LP failed: {res.message}")
    return float(res.fun)
