"""Finitely supported path measures stored as scenario trees.

A path measure on R^{dT} is kept in tree-factorized form: node 0 is the root
(no state), every node at depth t < T carries a list of children entries
``(state, conditional prob, child id)``; entries of depth-(T-1) nodes are the
leaves and have ``child=None``.  Nodes are numbered in breadth-first order with
children sorted lexicographically by state, so two equal measures always have
identical node tables.
"""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BadStage, NonProbability, RaggedDepth, ShapeMismatch

DECIMALS = 12
PROB_TOL = 1e-9
NORM_TOL = 1e-12

State = tuple  # tuple of d floats
Prefix = tuple  # tuple of States


def canon_state(x) -> State:
    """Round a state vector to the canonical grid used for support matching."""
    return tuple(round(float(v), DECIMALS) + 0.0 for v in np.atleast_1d(x))


@dataclass(frozen=True, eq=False)
class PathMeasure:
    T: int
    d: int
    nodes: tuple  # nodes[i] = tuple of (state, prob, child | None)

    # ------------------------------------------------------------------ build
    @classmethod
    def from_paths(cls, paths, weights=None, T=None, d=None) -> "PathMeasure":
        """Build the canonical tree of ``sum_i weights[i] * delta_{paths[i]}``.

        ``paths`` has shape (n, T, d) or (n, T) for d = 1.  Duplicated paths are
        merged, zero weights pruned and the total renormalized to one.
        """
        arr = np.asarray(paths, dtype=float)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ShapeMismatch(f"paths must have shape (n, T, d), got {arr.shape}")
        n, T_, d_ = arr.shape
        if n == 0:
            raise NonProbability("empty support")
        if T is not None and T != T_ or d is not None and d != d_:
            raise ShapeMismatch(f"paths have (T, d)=({T_}, {d_}), expected ({T}, {d})")
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (n,):
            raise ShapeMismatch("weights do not match paths")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise NonProbability("negative or non-finite weight")
        leaf = defaultdict(float)
        for path, wi in zip(arr, w):
            if wi > 0:
                leaf[tuple(canon_state(x) for x in path)] += float(wi)
        return cls._from_leaf_weights(T_, d_, leaf)

    @classmethod
    def _from_leaf_weights(cls, T: int, d: int, leaf: Mapping) -> "PathMeasure":
        items = sorted((p, w) for p, w in leaf.items() if w > 0)
        total = sum(w for _, w in items)
        if not items or not total > 0:
            raise NonProbability("weights are not normalizable (zero total mass)")
        mass = defaultdict(float)
        kids = defaultdict(set)
        for path, w in items:
            for t in range(T):
                mass[path[: t + 1]] += w / total
                kids[path[:t]].add(path[t])
        mass[()] = 1.0
        nodes = []
        queue = deque([()])
        n_ids = 1
        while queue:
            pre = queue.popleft()
            entries = []
            for s in sorted(kids[pre]):
                cp = pre + (s,)
                if len(cp) < T:
                    cid = n_ids
                    n_ids += 1
                    queue.append(cp)
                else:
                    cid = None
                entries.append((s, mass[cp] / mass[pre], cid))
            nodes.append(tuple(entries))
        return cls(T, d, tuple(nodes))

    @classmethod
    def from_nested(cls, T: int, d: int, edges) -> "PathMeasure":
        """Build from nested ``[(state, prob, subtree-or-None), ...]`` lists."""
        leaf = defaultdict(float)

        def walk(entries, pre, mass, where):
            if not isinstance(entries, (list, tuple)) or len(entries) == 0:
                raise RaggedDepth(f"node at {where} (depth {len(pre)}) has no children")
            probs = [float(e[1]) for e in entries]
            if any(pr < 0 or not np.isfinite(pr) for pr in probs):
                raise NonProbability(f"negative probability below node at {where}")
            s = sum(probs)
            if abs(s - 1.0) > PROB_TOL:
                raise NonProbability(f"probabilities below node at {where} sum to {s!r}")
            for k, e in enumerate(entries):
                state = canon_state(e[0])
                if len(state) != d:
                    raise ShapeMismatch(f"state {e[0]!r} below node at {where} is not {d}-dimensional")
                sub = e[2] if len(e) > 2 else None
                path = pre + (state,)
                if len(path) == T:
                    if sub:
                        raise RaggedDepth(f"path through {where}/{k} is longer than T={T}")
                    leaf[path] += mass * probs[k] / s
                elif not sub:
                    raise RaggedDepth(f"leaf {where}/{k} at depth {len(path)}, expected {T}")
                else:
                    walk(sub, path, mass * probs[k] / s, f"{where}/{k}")

        walk(edges, (), 1.0, "root")
        return cls._from_leaf_weights(T, d, leaf)

    # ---------------------------------------------------------------- derived
    @cached_property
    def prefixes(self) -> tuple:
        """prefixes[i] = tuple of states leading to node i."""
        out = [None] * len(self.nodes)
        out[0] = ()
        for i, entries in enumerate(self.nodes):
            for s, _, c in entries:
                if c is not None:
                    out[c] = out[i] + (s,)
        return tuple(out)

    @cached_property
    def node_mass(self) -> np.ndarray:
        m = np.zeros(len(self.nodes))
        m[0] = 1.0
        for i, entries in enumerate(self.nodes):
            for _, pr, c in entries:
                if c is not None:
                    m[c] = m[i] * pr
        return m

    @cached_property
    def levels(self) -> list:
        """levels[t] = list of node ids at depth t, t = 0..T-1."""
        lv = [[] for _ in range(self.T)]
        for i, pre in enumerate(self.prefixes):
            lv[len(pre)].append(i)
        return lv

    @cached_property
    def _leaf_table(self):
        paths, weights, owner = [], [], []
        for i, entries in enumerate(self.nodes):
            for s, pr, c in entries:
                if c is None:
                    paths.append(self.prefixes[i] + (s,))
                    weights.append(self.node_mass[i] * pr)
                    owner.append(i)
        return paths, np.array(weights), owner

    @cached_property
    def child_arrays(self) -> list:
        """Per node: (states (k, d), probs (k,), targets (k,)) where targets are
        node ids for internal children and leaf indices at the last stage."""
        out = []
        leaf = 0
        for entries in self.nodes:
            states = np.array([e[0] for e in entries], dtype=float).reshape(-1, self.d)
            probs = np.array([e[1] for e in entries])
            if entries[0][2] is None:
                targets = np.arange(leaf, leaf + len(entries))
                leaf += len(entries)
            else:
                targets = np.array([e[2] for e in entries])
            out.append((states, probs, targets))
        return out

    @cached_property
    def level_pos(self) -> np.ndarray:
        """Position of each node inside its depth level."""
        pos = np.zeros(len(self.nodes), dtype=int)
        for lv in self.levels:
            pos[lv] = np.arange(len(lv))
        return pos

    @property
    def leaf_paths(self) -> list:
        """Leaf paths as tuples of state tuples, in canonical leaf order."""
        return self._leaf_table[0]

    @property
    def paths(self) -> np.ndarray:
        return np.array(self._leaf_table[0], dtype=float).reshape(-1, self.T, self.d)

    @property
    def weights(self) -> np.ndarray:
        return self._leaf_table[1]

    @cached_property
    def prefix_mass(self) -> dict:
        """Mass of every prefix x_{1:t}, t = 0..T (leaves included)."""
        out = {pre: float(self.node_mass[i]) for i, pre in enumerate(self.prefixes)}
        for path, w in zip(self.leaf_paths, self.weights):
            out[path] = float(w)
        return out

    @cached_property
    def node_of(self) -> dict:
        return {pre: i for i, pre in enumerate(self.prefixes)}

    @property
    def n_leaves(self) -> int:
        return len(self.weights)

    def kernel_at(self, node) -> tuple[np.ndarray, np.ndarray]:
        """Conditional law of the next state at ``node`` (id or prefix)."""
        i = self.node_of[tuple(node)] if isinstance(node, tuple) else int(node)
        entries = self.nodes[i]
        states = np.array([e[0] for e in entries], dtype=float).reshape(-1, self.d)
        return states, np.array([e[1] for e in entries])

    def check(self) -> None:
        """Re-verify the structural invariants (normalization, depth)."""
        for i, entries in enumerate(self.nodes):
            s = sum(e[1] for e in entries)
            if abs(s - 1.0) > NORM_TOL * max(1, len(entries)):
                raise NonProbability(f"node {i}: children probabilities sum to {s!r}")
            if any(e[1] <= 0 for e in entries):
                raise NonProbability(f"node {i}: non-positive branch survived pruning")
            for s_, _, c in entries:
                depth = len(self.prefixes[i]) + 1
                if (c is None) != (depth == self.T):
                    raise RaggedDepth(f"node {i}: child at depth {depth} breaks T={self.T}")

    # --------------------------------------------------------------- json io
    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "d": self.d,
            "nodes": [
                {"id": i, "children": [{"state": list(s), "prob": pr, "child": c} for s, pr, c in entries]}
                for i, entries in enumerate(self.nodes)
            ],
            "root": 0,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj: dict) -> "PathMeasure":
        try:
            T, d = int(obj["T"]), int(obj["d"])
            nodes = obj["nodes"]
            root = int(obj.get("root", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise NonProbability(f"malformed tree document: {exc!r}") from None
        raw = {}
        for pos, n in enumerate(nodes):
            try:
                raw[int(n["id"])] = n["children"]
            except (KeyError, TypeError, ValueError):
                where = n.get("id", f"#{pos}") if isinstance(n, dict) else f"#{pos}"
                raise NonProbability(f"node {where}: malformed node entry {n!r}") from None
        if T < 1 or d < 1:
            raise RaggedDepth(f"T={T}, d={d} must both be >= 1")
        if root not in raw:
            raise RaggedDepth(f"root node {root} missing")
        seen = set()

        def nested(nid, depth):
            if nid in seen:
                raise RaggedDepth(f"node {nid} is referenced twice (not a tree)")
            seen.add(nid)
            if nid not in raw:
                raise RaggedDepth(f"node {nid} referenced but not defined")
            children = raw[nid]
            if not children:
                raise RaggedDepth(f"node {nid} at depth {depth} has no children")
            out = []
            for ch in children:
                try:
                    pr = float(ch["prob"])
                    st = ch["state"]
                    c = ch.get("child")
                except (KeyError, TypeError, ValueError):
                    raise NonProbability(f"node {nid}: malformed child entry {ch!r}") from None
                if pr < 0:
                    raise NonProbability(f"node {nid}: negative probability {pr}")
                if c is None and depth + 1 != T:
                    raise RaggedDepth(f"node {nid}: leaf at depth {depth + 1}, expected {T}")
                if c is not None and depth + 1 >= T:
                    raise RaggedDepth(f"node {nid}: child {c} below depth T={T}")
                out.append((st, pr, None if c is None else nested(int(c), depth + 1)))
            s = sum(e[1] for e in out)
            if abs(s - 1.0) > PROB_TOL:
                raise NonProbability(f"node {nid}: probabilities sum to {s!r}")
            return out

        tree = nested(root, 0)
        canonical = cls._canonical_direct(T, d, tree)
        return canonical if canonical is not None else cls.from_nested(T, d, tree)

    @classmethod
    def _canonical_direct(cls, T, d, tree):
        """Keep stored probabilities verbatim when the input is already canonical."""
        nodes = []
        queue = deque([tree])
        n_ids = 1
        while queue:
            entries = queue.popleft()
            entries = [(canon_state(st), pr, sub) for st, pr, sub in entries if pr > 0]
            states = [e[0] for e in entries]
            if len(set(states)) != len(states) or any(len(s) != d for s in states):
                return None
            s = sum(e[1] for e in entries)
            scale = 1.0 if abs(s - 1.0) <= NORM_TOL else 1.0 / s
            row = []
            for st, pr, sub in sorted(entries, key=lambda e: e[0]):
                if sub is None:
                    cid = None
                else:
                    cid = n_ids
                    n_ids += 1
                    queue.append(sub)
                row.append((st, pr * scale, cid))
            nodes.append(tuple(row))
        return cls(T, d, tuple(nodes))

    @classmethod
    def from_json(cls, text: str) -> "PathMeasure":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise NonProbability(f"invalid JSON: {exc}") from None
        return cls.from_dict(obj)

    def __eq__(self, other):
        return isinstance(other, PathMeasure) and (self.T, self.d, self.nodes) == (other.T, other.d, other.nodes)

    def __hash__(self):
        return hash((self.T, self.d, self.nodes))

    def __repr__(self):
        return f"PathMeasure(T={self.T}, d={self.d}, nodes={len(self.nodes)}, leaves={self.n_leaves})"


def make_tree(T: int, d: int, edges) -> PathMeasure:
    """Nested edge list -> normalized, pruned PathMeasure."""
    return PathMeasure.from_nested(T, d, edges)


def dirac(path) -> PathMeasure:
    arr = np.asarray(path, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return PathMeasure.from_paths(arr[None], [1.0])


def marginal_upto(mu: PathMeasure, t: int) -> PathMeasure:
    if not 1 <= t <= mu.T:
        raise BadStage(f"stage {t} outside 1..{mu.T}")
    leaf = defaultdict(float)
    for path, w in zip(mu.leaf_paths, mu.weights):
        leaf[path[:t]] += w
    return PathMeasure._from_leaf_weights(t, mu.d, leaf)


def kernel_at(mu: PathMeasure, node) -> tuple[np.ndarray, np.ndarray]:
    return mu.kernel_at(node)


def moment(mu: PathMeasure, r: float) -> float:
    """M_r(mu) = int |x|^r dmu with |x|^r = sum_k |x_k|^r; M_0 = 1."""
    if r < 0:
        raise ValueError("moment order must be >= 0")
    if r == 0:
        return float(mu.weights.sum())
    vals = np.abs(mu.paths.reshape(mu.n_leaves, -1)) ** r
    return float(mu.weights @ vals.sum(axis=1))


def sample(mu: PathMeasure, n: int, seed=None) -> np.ndarray:
    """Ancestral sampling; returns an array of shape (n, T, d)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((n, mu.T, mu.d))
    current = np.zeros(n, dtype=int)
    for t in range(mu.T):
        nxt = np.empty(n, dtype=int)
        for node in np.unique(current):
            idx = np.flatnonzero(current == node)
            states, probs = mu.kernel_at(int(node))
            pick = rng.choice(len(probs), size=len(idx), p=probs / probs.sum())
            out[idx, t] = states[pick]
            kids = [e[2] for e in mu.nodes[node]]
            nxt[idx] = [-1 if kids[k] is None else kids[k] for k in pick]
        current = nxt
    return out


def union_support(mu: PathMeasure, nu: PathMeasure) -> list:
    if (mu.T, mu.d) != (nu.T, nu.d):
        raise ShapeMismatch(f"(T, d) = {(mu.T, mu.d)} vs {(nu.T, nu.d)}")
    return sorted(set(mu.leaf_paths) | set(nu.leaf_paths))


# ---------------------------------------------------------------------- weights
@dataclass(frozen=True)
class WeightSpec:
    """A weighting function w together with its stagewise sequence (w_t).

    ``kind`` is ``"one"``, ``"ppower"`` (w_t = 1 + |x_{1:t}|_p^p) or
    ``"tabulated"`` (values per prefix in ``table``).
    """

    kind: str = "one"
    p: float = 1.0
    table: Mapping = field(default=None, hash=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("one", "ppower", "tabulated"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "ppower" and self.p < 1:
            raise ValueError("p-power weights need p >= 1")
        if self.kind == "tabulated" and self.table is None:
            raise ValueError("tabulated weights need a table")

    @classmethod
    def one(cls):
        return cls("one")

    @classmethod
    def ppower(cls, p):
        return cls("ppower", p=float(p))

    @classmethod
    def tabulated(cls, table: Mapping):
        canon = {tuple(canon_state(s) for s in pre): float(v) for pre, v in table.items()}
        if any(v < 0 for v in canon.values()):
            raise ValueError("tabulated weights must be non-negative")
        return cls("tabulated", table=canon)

    def stage(self, prefix) -> float:
        """w_t(x_{1:t}) for a prefix of length t."""
        if self.kind == "one":
            return 1.0
        if self.kind == "ppower":
            return 1.0 + float(sum(np.sum(np.abs(np.asarray(s)) ** self.p) for s in prefix))
        try:
            return self.table[tuple(prefix)]
        except KeyError:
            raise KeyError(f"no tabulated weight for prefix {prefix!r}") from None

    def __call__(self, path) -> float:
        return self.stage(path)

    def on_leaves(self, mu: PathMeasure) -> np.ndarray:
        if self.kind == "one":
            return np.ones(mu.n_leaves)
        if self.kind == "ppower":
            return 1.0 + (np.abs(mu.paths.reshape(mu.n_leaves, -1)) ** self.p).sum(axis=1)
        return np.array([self.stage(p) for p in mu.leaf_paths])

    def monotonicity_violations(self, mu: PathMeasure) -> list:
        """Prefixes where w_{t-1}(x_{1:t-1}) > w_t(x_{1:t}) on the support of mu."""
        if self.kind != "tabulated":
            return []
        bad = []
        for pre in mu.prefix_mass:
            if len(pre) >= 2 and self.stage(pre[:-1]) > self.stage(pre) + 1e-15:
                bad.append(pre)
        return sorted(bad)

    def to_dict(self) -> dict:
        if self.kind == "one":
            return {"kind": "one"}
        if self.kind == "ppower":
            return {"kind": "ppower", "p": self.p}
        entries = [{"prefix": [list(s) for s in pre], "w": v} for pre, v in sorted(self.table.items())]
        return {"kind": "tabulated", "entries": entries}

    @classmethod
    def from_dict(cls, obj: dict) -> "WeightSpec":
        kind = obj.get("kind")
        if kind == "one":
            return cls.one()
        if kind == "ppower":
            return cls.ppower(obj["p"])
        if kind == "tabulated":
            return cls.tabulated({tuple(tuple(s) for s in e["prefix"]): e["w"] for e in obj["entries"]})
        raise ValueError(f"unknown weight kind {kind!r}")


# ------------------------------------------------------------ density process
@dataclass(frozen=True, eq=False)
class DensityProcess:
    """Density processes of (mu, nu) against P = (mu + nu) / 2 on the union tree.

    All maps are keyed by prefixes x_{1:t}, t = 1..T, of the common tree.
    """

    tree: PathMeasure
    Z1: dict
    Z2: dict
    D1: dict
    D2: dict

    def leaf_overlap(self) -> float:
        """sum over leaves of min(Z1, Z2) * P(leaf)."""
        P = self.tree.prefix_mass
        return float(sum(min(self.Z1[x], self.Z2[x]) * P[x] for x in self.tree.leaf_paths))

    def adapted_overlap(self, w: np.ndarray | None = None) -> float:
        """E_P[w(X) prod_t min(D1_t, D2_t)]."""
        P = self.tree.prefix_mass
        leaves = self.tree.leaf_paths
        w = np.ones(len(leaves)) if w is None else w
        total = 0.0
        for wi, x in zip(w, leaves):
            prod = 1.0
            for t in range(1, len(x) + 1):
                prod *= min(self.D1[x[:t]], self.D2[x[:t]])
            total += wi * prod * P[x]
        return total


def refine_pair(mu: PathMeasure, nu: PathMeasure) -> tuple[PathMeasure, DensityProcess]:
    """Common tree with dominating measure (mu + nu)/2 and both density processes."""
    if (mu.T, mu.d) != (nu.T, nu.d):
        raise ShapeMismatch(f"(T, d) = {(mu.T, mu.d)} vs {(nu.T, nu.d)}")
    leaf = defaultdict(float)
    for m in (mu, nu):
        for path, w in zip(m.leaf_paths, m.weights):
            leaf[path] += 0.5 * w
    common = PathMeasure._from_leaf_weights(mu.T, mu.d, leaf)
    P = common.prefix_mass
    mu_m, nu_m = mu.prefix_mass, nu.prefix_mass
    Z1, Z2, D1, D2 = {(): 1.0}, {(): 1.0}, {}, {}
    for pre in sorted(P, key=len):
        if not pre:
            continue
        Z1[pre] = mu_m.get(pre, 0.0) / P[pre]
        Z2[pre] = nu_m.get(pre, 0.0) / P[pre]
        par = pre[:-1]
        D1[pre] = Z1[pre] / Z1[par] if Z1[par] > 0 else 1.0
        D2[pre] = Z2[pre] / Z2[par] if Z2[par] > 0 else 1.0
    del Z1[()], Z2[()]
    return common, DensityProcess(common, Z1, Z2, D1, D2)


def mixture(measures: Sequence[PathMeasure], weights: Iterable[float]) -> PathMeasure:
    m0 = measures[0]
    leaf = defaultdict(float)
    for m, a in zip(measures, weights):
        if (m.T, m.d) != (m0.T, m0.d):
            raise ShapeMismatch("mixture components differ in (T, d)")
        for path, w in zip(m.leaf_paths, m.weights):
            leaf[path] += a * w
    return PathMeasure._from_leaf_weights(m0.T, m0.d, leaf)


def random_tree(rng: np.random.Generator, T: int, d: int = 1, max_children: int = 3,
                low: float = -1.0, high: float = 1.0, grid: int | None = None) -> PathMeasure:
    """Random scenario tree; states on a coarse grid when ``grid`` is set so that
    supports of independent draws overlap."""

    def draw_state():
        if grid:
            return rng.integers(0, grid + 1, size=d) * (high - low) / grid + low
        return rng.uniform(low, high, size=d)

    def build(depth):
        k = int(rng.integers(1, max_children + 1))
        probs = rng.dirichlet(np.ones(k))
        return [(draw_state(), pr, build(depth + 1) if depth + 1 < T else None) for pr in probs]

    return PathMeasure.from_nested(T, d, build(0))
