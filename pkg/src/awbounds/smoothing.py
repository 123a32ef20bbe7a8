"""Grid densities, higher-order product kernels, Sobolev norms and the
kernel-smoothing estimates that turn W-distances into AW-distances.

Conventions
-----------
* A :class:`GridDensity` lives on a box in R^{dT}; axis ``t*d + j`` is
  coordinate j of stage t+1.  Cell values are densities, cell masses are
  ``values * cell_volume``.
* Kernels are products of a 1-D profile.  ``grad_l1`` is
  max_k int |d_k K| (the total variation of K along one axis); it is the
  Lipschitz constant of phi * K for |phi| <= 1 w.r.t. the l1 path norm, and is
  the quantity the smoothing estimates use.  ``lip`` is the pointwise
  Lipschitz constant of K itself and is recorded for comparison only.
* Distances on grids use the l1 ground metric |x - y|_1 = sum_k |x_k - y_k|.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.ndimage import convolve1d
from scipy.special import ndtr

from .adapted import adapted_wasserstein_pp, compute_ct, lambda_constant
from .errors import BandwidthTooSmall, GridMismatch, GridTooCoarse, InvalidParams, UnsupportedOrder
from .measures import PathMeasure, WeightSpec
from .ot_exact import MAX_ATOMS, pairwise_cost, transport_lp, w1_grid_flow

MOMENT_TOL = 1e-6
MIN_CELLS = 8


# ----------------------------------------------------------------- grids
@dataclass(frozen=True, eq=False)
class GridDensity:
    lo: tuple
    hi: tuple
    values: np.ndarray
    T: int
    d: int = 1
    normalized: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lo", tuple(float(x) for x in self.lo))
        object.__setattr__(self, "hi", tuple(float(x) for x in self.hi))
        if v.ndim != self.T * self.d or len(self.lo) != v.ndim or len(self.hi) != v.ndim:
            raise GridMismatch(f"grid of rank {v.ndim} does not match T*d={self.T * self.d}")
        if not all(np.isfinite(self.lo + self.hi)) or any(h <= l for l, h in zip(self.lo, self.hi)):
            raise GridMismatch("extents must be finite with lo < hi")

    # geometry
    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def mesh(self) -> float:
        return float(self.spacing.max())

    @property
    def cell_diam(self) -> float:
        """l1 diameter of a cell."""
        return float(self.spacing.sum())

    def centers(self, axis: int) -> np.ndarray:
        return self.lo[axis] + (np.arange(self.shape[axis]) + 0.5) * self.spacing[axis]

    def mesh_grid(self) -> list:
        return np.meshgrid(*[self.centers(a) for a in range(self.values.ndim)], indexing="ij")

    def masses(self) -> np.ndarray:
        return self.values * self.cell_volume

    def total_mass(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def l1(self) -> float:
        return float(np.abs(self.values).sum() * self.cell_volume)

    def with_values(self, values, normalized=None, **meta) -> "GridDensity":
        return GridDensity(self.lo, self.hi, values, self.T, self.d,
                           self.normalized if normalized is None else normalized, {**self.meta, **meta})

    def normalize(self) -> "GridDensity":
        m = self.total_mass()
        if not m > 0:
            raise InvalidParams("cannot normalize a grid with non-positive mass")
        return self.with_values(self.values / m, normalized=True)

    def same_grid(self, other: "GridDensity") -> bool:
        return (self.lo, self.hi, self.shape, self.T, self.d) == (other.lo, other.hi, other.shape, other.T, other.d)

    def path_weight(self, p: float) -> np.ndarray:
        """1 + |x|_p^p at cell centers."""
        return 1.0 + sum(np.abs(c) ** p for c in self.mesh_grid())

    def weighted(self, p: float) -> "GridDensity":
        return self.with_values(self.values * self.path_weight(p), normalized=False)

    def moment(self, r: float) -> float:
        """int sum_k |x_k|^r f(x) dx by cell-center quadrature; M_0 = mass."""
        if r == 0:
            return self.total_mass()
        return float((self.masses() * sum(np.abs(c) ** r for c in self.mesh_grid())).sum())

    @classmethod
    def from_function(cls, fn: Callable, lo, hi, shape, T: int, d: int = 1, normalize: bool = True):
        proto = cls(lo, hi, np.zeros(shape), T, d)
        vals = np.asarray(fn(*proto.mesh_grid()), dtype=float)
        g = proto.with_values(np.broadcast_to(vals, shape).copy(), normalized=False)
        return g.normalize() if normalize else g

    # file format: one JSON header line, then little-endian float64 cells (row-major)
    def header(self) -> dict:
        return {"format": "awgrid", "version": 1, "T": self.T, "d": self.d, "lo": list(self.lo),
                "hi": list(self.hi), "shape": list(self.shape), "normalized": self.normalized, "dtype": "<f8"}

    def to_bytes(self) -> bytes:
        head = json.dumps(self.header(), sort_keys=True).encode() + b"\n"
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridDensity":
        nl = blob.index(b"\n")
        try:
            head = json.loads(blob[:nl])
        except json.JSONDecodeError as exc:
            raise GridMismatch(f"bad grid header: {exc}") from None
        if head.get("format") != "awgrid":
            raise GridMismatch("not an awgrid file")
        shape = tuple(head["shape"])
        vals = np.frombuffer(blob[nl + 1:], dtype="<f8")
        if vals.size != int(np.prod(shape)):
            raise GridMismatch(f"cell block has {vals.size} values, header says {shape}")
        return cls(head["lo"], head["hi"], vals.reshape(shape).astype(float), head["T"], head["d"],
                   head.get("normalized", True))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "GridDensity":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def coarsen(f: GridDensity, factor) -> GridDensity:
    """Merge blocks of ``factor`` cells per axis (mass preserving)."""
    fac = np.broadcast_to(np.asarray(factor, dtype=int), (f.values.ndim,))
    if any(s % k for s, k in zip(f.shape, fac)):
        raise GridMismatch(f"shape {f.shape} not divisible by {tuple(fac)}")
    shp = []
    for s, k in zip(f.shape, fac):
        shp += [s // k, k]
    v = f.values.reshape(shp).mean(axis=tuple(range(1, 2 * f.values.ndim, 2)))
    return GridDensity(f.lo, f.hi, v, f.T, f.d, f.normalized, dict(f.meta))


def coarsen_to(f: GridDensity, max_cells: int) -> GridDensity:
    """Smallest uniform integer coarsening with at most ``max_cells`` cells."""
    for k in range(1, max(f.shape) + 1):
        if all(s % k == 0 for s in f.shape) and np.prod(f.shape) / k ** f.values.ndim <= max_cells:
            return coarsen(f, k) if k > 1 else f
    raise GridMismatch(f"cannot coarsen {f.shape} below {max_cells} cells with a uniform factor")


def quantize(f: GridDensity) -> PathMeasure:
    """Cell-center atoms with cell masses; stage t uses axes t*d .. t*d+d-1."""
    m = np.clip(f.masses(), 0, None)
    total = m.sum()
    if not total > 0:
        raise InvalidParams("grid has no positive mass")
    m = m / total
    T, d = f.T, f.d
    centers = [[round(float(c), 12) + 0.0 for c in f.centers(a)] for a in range(m.ndim)]
    # prefix masses at depth t (t = 1..T) as arrays over the first t*d axes
    prefix = [m.sum(axis=tuple(range(t * d, T * d))) if t < T else m for t in range(1, T + 1)]
    ids = []  # node id of each charged prefix at depth 0..T-1
    next_id = 1
    ids.append(np.zeros((), dtype=int))
    for t in range(1, T):
        charged = prefix[t - 1] > 0
        arr = -np.ones(prefix[t - 1].shape, dtype=int)
        arr[charged] = np.arange(next_id, next_id + charged.sum())
        next_id += int(charged.sum())
        ids.append(arr)
    nodes = []
    for t in range(T):
        parent_mass = np.ones(()) if t == 0 else prefix[t - 1]
        child_mass = prefix[t]
        for pidx in zip(*np.nonzero(parent_mass > 0)) if t else [()]:
            pm = float(parent_mass[pidx])
            block = child_mass[pidx]
            entries = []
            for cidx in zip(*np.nonzero(block > 0)):
                state = tuple(centers[t * d + j][cidx[j]] for j in range(d))
                child = None if t == T - 1 else int(ids[t + 1][pidx + cidx])
                entries.append((state, float(block[cidx]) / pm, child))
            nodes.append(tuple(entries))
    return PathMeasure(T, d, tuple(nodes))


# --------------------------------------------------------------- kernels
SQ2PI = math.sqrt(2 * math.pi)


def _phi(z):
    return np.exp(-0.5 * np.asarray(z, float) ** 2) / SQ2PI


PROFILES = {
    # name: (order, pdf, cdf, support radius, breakpoints)
    "gaussian": (2, _phi, ndtr, 12.0, ()),
    "gaussian4": (4, lambda z: (3 - np.asarray(z) ** 2) / 2 * _phi(z),
                  lambda z: ndtr(z) + np.asarray(z) * _phi(z) / 2, 12.0, (-math.sqrt(3), math.sqrt(3))),
    "gaussian6": (6, lambda z: (15 - 10 * np.asarray(z) ** 2 + np.asarray(z) ** 4) / 8 * _phi(z),
                  lambda z: ndtr(z) + (7 * np.asarray(z) - np.asarray(z) ** 3) * _phi(z) / 8, 12.0,
                  tuple(s * math.sqrt(5 + r * math.sqrt(10)) for s in (-1, 1) for r in (-1, 1))),
    "box": (2, lambda z: ((np.asarray(z) >= -0.5) & (np.asarray(z) < 0.5)).astype(float),
            lambda z: np.clip(np.asarray(z, float) + 0.5, 0.0, 1.0), 0.5, (-0.5, 0.5)),
}


def shifted_gaussian(shift: float = 1.0) -> dict:
    """An asymmetric smooth profile phi(z - shift): order exactly 1."""
    return {"pdf": lambda z: _phi(np.asarray(z) - shift), "cdf": lambda z: ndtr(np.asarray(z) - shift),
            "support": (shift - 12.0, shift + 12.0), "breakpoints": (), "name": f"shifted_gaussian({shift:g})"}


@dataclass(frozen=True)
class KernelSpec:
    family: str
    k: int
    dims: int
    pdf: Callable = field(repr=False, compare=False)
    cdf: Callable = field(repr=False, compare=False)
    support: tuple = (-12.0, 12.0)
    l1_1d: float = 1.0
    abs_moments_1d: tuple = ()
    moments_1d: tuple = ()
    grad_l1_1d: float = 0.0
    lip_1d: float = 0.0
    sup_1d: float = 0.0

    @property
    def l1(self) -> float:
        return self.l1_1d ** self.dims

    @property
    def grad_l1(self) -> float:
        return self.grad_l1_1d * self.l1_1d ** (self.dims - 1)

    @property
    def lip(self) -> float:
        return self.lip_1d * self.sup_1d ** (self.dims - 1)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, float)
        return np.prod(self.pdf(z), axis=-1)

    def stencil(self, h: float, dx: float) -> np.ndarray:
        """Cell-averaged weights of K_h on a grid with spacing dx (odd length)."""
        lo, hi = self.support
        m = int(math.ceil(max(abs(lo), abs(hi)) * h / dx)) + 1
        edges = (np.arange(-m, m + 2) - 0.5) * dx / h
        return np.diff(self.cdf(edges))

    def describe(self) -> dict:
        return {"family": self.family, "order": self.k, "dims": self.dims, "l1": self.l1,
                "grad_l1": self.grad_l1, "lip": self.lip, "ckk": ckk_constant(self, self.k)}


def _quad(fn, lo, hi, points):
    pts = [p for p in points if lo < p < hi]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(fn, lo, hi, points=pts or None, limit=400, epsabs=1e-14, epsrel=1e-12)
    return val


def make_kernel(family: str, k: int, dims: int = 1, profile: dict | None = None) -> KernelSpec:
    """Product kernel of order >= k on R^dims.

    ``family`` is ``box``, ``gaussian``, ``gaussian_order`` (smallest Hermite
    construction of order >= k: 2, 4 or 6) or ``custom`` with ``profile`` a dict
    holding ``pdf``, ``cdf``, ``support``, ``breakpoints``.
    """
    if k < 1:
        raise UnsupportedOrder("order must be >= 1")
    if dims < 1:
        raise InvalidParams("dims must be >= 1")
    if family == "gaussian_order":
        if k > 6:
            raise UnsupportedOrder(f"order {k} > 6 not supported")
        name = "gaussian" if k <= 2 else "gaussian4" if k <= 4 else "gaussian6"
    elif family in ("gaussian", "box"):
        name = family
    elif family == "custom":
        if profile is None:
            raise InvalidParams("custom kernels need a profile")
        name = profile.get("name", "custom")
    else:
        raise InvalidParams(f"unknown kernel family {family!r}")
    if family == "custom":
        pdf, cdf = profile["pdf"], profile["cdf"]
        support = tuple(profile["support"])
        bps = tuple(profile.get("breakpoints", ()))
        order = None
    else:
        order, pdf, cdf, radius, bps = PROFILES[name]
        support = (-radius, radius)
        if k > order:
            raise UnsupportedOrder(f"{name} has order {order} < {k}; use gaussian_order")
    lo, hi = support
    moments = tuple(_quad(lambda z, j=j: pdf(z) * z**j, lo, hi, bps) for j in range(7))
    abs_moments = tuple(_quad(lambda z, j=j: abs(pdf(z) * z**j), lo, hi, bps) for j in range(7))
    if abs(moments[0] - 1) > MOMENT_TOL or any(abs(moments[j]) > MOMENT_TOL for j in range(1, k)):
        raise UnsupportedOrder(f"{name} fails the order-{k} moment conditions: {moments[:k]}")
    if name == "box":
        grad_l1, lip, sup = 2.0, math.inf, 1.0
    else:
        z = np.linspace(lo, hi, 800_001)
        vals = pdf(z)
        dv = np.abs(np.diff(vals))
        grad_l1 = float(dv.sum())
        lip = float(dv.max() / (z[1] - z[0]))
        sup = float(np.abs(vals).max())
    return KernelSpec(name, k, dims, pdf, cdf, support, abs_moments[0], abs_moments, moments, grad_l1, lip, sup)


def ckk_constant(K: KernelSpec, k: int) -> float:
    """sup over |alpha| <= k of (1/alpha!) int |K(z) z^alpha| dz (product kernel)."""
    if k > 6:
        raise UnsupportedOrder("moments stored up to order 6")
    m = [K.abs_moments_1d[j] / math.factorial(j) for j in range(k + 1)]
    best = 0.0
    for alpha in itertools.product(range(k + 1), repeat=K.dims):
        if sum(alpha) <= k:
            best = max(best, float(np.prod([m[a] for a in alpha])))
    return best


# ----------------------------------------------------------- operations
def convolve(f: GridDensity, K: KernelSpec, h: float) -> GridDensity:
    """K_h * f with separable cell-averaged stencils and zero padding."""
    if K.dims != f.values.ndim:
        raise GridMismatch(f"kernel dims {K.dims} vs grid rank {f.values.ndim}")
    if h <= 0:
        raise BandwidthTooSmall("bandwidth must be positive")
    if h < f.mesh * (1 - 1e-12):
        raise BandwidthTooSmall(f"h={h} below cell size {f.mesh}")
    out = f.values
    for ax in range(out.ndim):
        w = K.stencil(h, f.spacing[ax])
        out = convolve1d(out, w, axis=ax, mode="constant", cval=0.0)
    return f.with_values(out, normalized=False, smoothed_h=h)


def _derivatives(f: GridDensity, k: int) -> dict:
    out = {(0,) * f.values.ndim: f.values}
    for order in range(1, k + 1):
        for alpha in itertools.product(range(order + 1), repeat=f.values.ndim):
            if sum(alpha) != order:
                continue
            ax = next(i for i, a in enumerate(alpha) if a > 0)
            parent = tuple(a - (i == ax) for i, a in enumerate(alpha))
            base = out[parent]
            out[alpha] = np.gradient(base, f.spacing[ax], axis=ax, edge_order=2 if base.shape[ax] > 2 else 1)
    return out


def sobolev_norm(f: GridDensity, k: int, r: float = 1) -> float:
    """sum_{|alpha| <= k} ||D^alpha f||_r by finite differences (r in {1, inf})."""
    if k > 3:
        raise InvalidParams("sobolev_norm supports k <= 3")
    if min(f.shape) < MIN_CELLS:
        raise GridTooCoarse(f"need >= {MIN_CELLS} cells per axis, got {f.shape}")
    total = 0.0
    for arr in _derivatives(f, k).values():
        total += float(np.abs(arr).max()) if r == math.inf else float(np.abs(arr).sum() * f.cell_volume)
    return total


def lemma41_check(f: GridDensity, K: KernelSpec, k: int, hs) -> list:
    """Rows (h, lhs = ||K_h*f - f||_1, rhs = h^k C_{k,K} ||f||_{k,1}, ratio, allowance)."""
    ck = ckk_constant(K, k)
    norm = sobolev_norm(f, k, 1)
    rows = []
    for h in hs:
        lhs = convolve(f, K, h).with_values(convolve(f, K, h).values - f.values).l1()
        rhs = h**k * ck * norm
        allow = 1 + 5 * f.mesh / h
        rows.append({"h": float(h), "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs, "allowance": allow,
                     "ok": bool(lhs <= rhs * allow), "ckk": ck, "sobolev": norm, "mesh": f.mesh})
    return rows


def decay_order(rows) -> float:
    """Least-squares slope of log lhs against log h."""
    h = np.log([r["h"] for r in rows])
    y = np.log([r["lhs"] for r in rows])
    return float(np.polyfit(h, y, 1)[0])


def _check_pair(f: GridDensity, g: GridDensity):
    if not f.same_grid(g):
        raise GridMismatch("densities live on different grids")


def w1_grid(f: GridDensity, g: GridDensity, max_cells: int = 40_000) -> tuple[float, float]:
    """(value on the working grid, discretization allowance) for W_1 with l1
    ground metric; the working grid is a coarsening with <= max_cells cells."""
    _check_pair(f, g)
    if np.array_equal(f.values, g.values):
        return 0.0, 0.0
    fc, gc = coarsen_to(f, max_cells), coarsen_to(g, max_cells)
    diff = (fc.masses() / fc.total_mass()) - (gc.masses() / gc.total_mass())
    val = w1_grid_flow(diff, fc.spacing)
    allowance = float((fc.spacing - f.spacing).sum())
    return val, allowance


def wq_grid(f: GridDensity, g: GridDensity, q: float, max_atoms: int = MAX_ATOMS) -> tuple[float, float]:
    """(W_q on the coarsened grid with l1 ground metric, allowance)."""
    _check_pair(f, g)
    if np.array_equal(f.values, g.values):
        return 0.0, 0.0
    fc, gc = coarsen_to(f, max_atoms), coarsen_to(g, max_atoms)
    X = np.stack([c.ravel() for c in fc.mesh_grid()], axis=1)
    a = np.clip(fc.masses().ravel(), 0, None)
    b = np.clip(gc.masses().ravel(), 0, None)
    ia, ib = a > 0, b > 0
    C = pairwise_cost(X[ia], X[ib], 1) ** q
    val, _ = transport_lp(a[ia] / a.sum(), b[ib] / b.sum(), C)
    return max(val, 0.0) ** (1 / q), float((fc.spacing - f.spacing).sum())


def _moment_pow(f: GridDensity, r: float, e: float) -> float:
    return f.moment(r) ** e


def lemma42_bounds(f: GridDensity, g: GridDensity, K: KernelSpec, h: float, p: float = 1.0, q: float = 2.0) -> dict:
    """Both smoothing estimates for the difference of two grid densities.

    (i)  ||K_h*(f - g)||_1 <= grad_l1(K) W_1 / h
    (ii) ||K_h*(w f - w g)||_1 <= C1 W_q + C2 W_q / h, w = 1 + |x|_p^p.
    W values enter the right-hand sides with their coarsening allowance added.
    """
    _check_pair(f, g)
    if p < 1 or q <= 1:
        raise InvalidParams("need p >= 1 and q > 1")
    lhs1 = convolve(f.with_values(f.values - g.values), K, h).l1()
    w1, a1 = w1_grid(f, g)
    rhs1 = K.grad_l1 / h * w1
    fw, gw = f.weighted(p), g.weighted(p)
    lhs2 = convolve(fw.with_values(fw.values - gw.values), K, h).l1()
    wq, aq = wq_grid(f, g, q)
    C1, C2 = smoothing_constants(f, g, K, p, q)
    rhs2 = (C1 + C2 / h) * wq
    # the *_budget values add the coarsening allowance and are true upper bounds
    rhs1_b = K.grad_l1 / h * (w1 + a1) if a1 else rhs1
    rhs2_b = (C1 + C2 / h) * (wq + aq) if aq else rhs2
    return {"lhs1": lhs1, "rhs1": rhs1, "lhs2": lhs2, "rhs2": rhs2, "rhs1_budget": rhs1_b, "rhs2_budget": rhs2_b, "W1": w1, "W1_allowance": a1,
            "Wq": wq, "Wq_allowance": aq, "C1": C1, "C2": C2, "h": h, "p": p, "q": q,
            "lip_used": K.grad_l1, "lip_pointwise": K.lip}


def smoothing_constants(f: GridDensity, g: GridDensity, K: KernelSpec, p: float, q: float) -> tuple[float, float]:
    e = (q - 1) / q
    r1 = q * (p - 1) / (q - 1)
    r2 = q * p / (q - 1)
    C1 = K.l1 * p * (_moment_pow(f, r1, e) + _moment_pow(g, r1, e))
    C2 = K.grad_l1 * (1 + p * _moment_pow(f, r2, e) + (p + 1) * _moment_pow(g, r2, e))
    return C1, C2


@dataclass
class SobolevBoundReport:
    AW_pp: float
    rhs: float
    rhs_compact: float
    h_star: float
    C0: float
    C1: float
    C2: float
    Ckk: float
    lip: float
    norm_fp: float
    norm_gp: float
    norm_f: float
    norm_g: float
    Wq: float
    W1: float
    diam_pp: float
    k: int
    p: float
    q: float
    tol: float = 1e-6

    @property
    def slack(self) -> float:
        return self.rhs - self.AW_pp

    @property
    def slack_compact(self) -> float:
        return self.rhs_compact - self.AW_pp

    @property
    def ok(self) -> bool:
        return self.slack >= -self.tol and self.slack_compact >= -self.tol

    def to_dict(self) -> dict:
        from dataclasses import asdict
        d = asdict(self)
        d.update(slack=self.slack, slack_compact=self.slack_compact, ok=self.ok)
        return d


def theorem29_bound(f: GridDensity, g: GridDensity, k: int, K: KernelSpec, p: float = 1.0, q: float = 2.0,
                    aw_max_cells: int = 4096) -> SobolevBoundReport:
    """AW_p^p of the quantized pair against the Sobolev/W_q bound and its compact variant."""
    _check_pair(f, g)
    fq, gq = coarsen_to(f, aw_max_cells), coarsen_to(g, aw_max_cells)
    mu, nu = quantize(fq), quantize(gq)
    aw = adapted_wasserstein_pp(mu, nu, p)
    lam = lambda_constant(compute_ct(nu, WeightSpec.ppower(p)))
    C0 = 2**p * lam
    C1, C2 = smoothing_constants(f, g, K, p, q)
    ck = ckk_constant(K, k)
    nfp, ngp = sobolev_norm(f.weighted(p), k), sobolev_norm(g.weighted(p), k)
    nf, ng = sobolev_norm(f, k), sobolev_norm(g, k)
    wq, aq = wq_grid(f, g, q)
    wq += aq
    w1, a1 = w1_grid(f, g)
    w1 += a1
    e = k / (k + 1)
    rhs = C0 * C1 * wq + 2 * C0 * (ck ** (1 / k) * C2) ** e * (nfp + ngp) ** (1 / (k + 1)) * wq**e
    diam_pp = float(sum((h - l) ** p for l, h in zip(f.lo, f.hi)))
    T = f.T
    rhs_c = 2 * (2 * T - 1) * diam_pp * (ck ** (1 / k) * K.grad_l1) ** e * (nf + ng) ** (1 / (k + 1)) * w1**e
    denom = ck * (nf + ng)
    h_star = (C2 * wq / denom) ** (1 / (k + 1)) if denom > 0 else math.inf
    return SobolevBoundReport(aw, rhs, rhs_c, h_star, C0, C1, C2, ck, K.grad_l1, nfp, ngp, nf, ng, wq, w1,
                           diam_pp, k, p, q)


def polynomial_case_bound(f: GridDensity, g: GridDensity, K: KernelSpec, p: float = 1.0) -> dict:
    """AW_p^p against (2T-1) diam^p grad_l1(K) W_1 for low-degree polynomial densities."""
    _check_pair(f, g)
    aw = adapted_wasserstein_pp(quantize(coarsen_to(f, 4096)), quantize(coarsen_to(g, 4096)), p)
    w1, a1 = w1_grid(f, g)
    diam_pp = float(sum((h - l) ** p for l, h in zip(f.lo, f.hi)))
    rhs = (2 * f.T - 1) * diam_pp * K.grad_l1 * (w1 + a1)
    return {"AW_pp": aw, "rhs": rhs, "W1": w1, "ok": bool(aw <= rhs + 1e-6)}
