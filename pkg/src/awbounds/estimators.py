"""Density estimators on [0,1]^{dT} or a box, the positivity-fallback
estimator, and Monte-Carlo convergence experiments for E[AW_1(mu, estimate)].
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .adapted import adapted_wasserstein_pp
from .errors import BandwidthTooSmall, InvalidParams, SampleOutOfBox
from .measures import PathMeasure
from .smoothing import GridDensity, quantize

SQRT2 = math.sqrt(2.0)


def empirical_measure(samples) -> PathMeasure:
    """(1/n) sum delta_{X_i}; duplicate paths are merged."""
    x = np.asarray(samples, dtype=float)
    if x.shape[0] < 1:
        raise InvalidParams("need at least one sample")
    return PathMeasure.from_paths(x)


def _as_flat(samples, T: int, d: int) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x.reshape(x.shape[0], T * d)


def _axis_masses(x: np.ndarray, edges: np.ndarray, h: float) -> np.ndarray:
    """Per-sample Gaussian mass of each cell along one axis, shape (n, cells)."""
    return np.diff(ndtr((edges[None, :] - x[:, None]) / h), axis=1)


def _product_sum(factors: list) -> np.ndarray:
    letters = "abcdefghij"[: len(factors)]
    spec = ",".join("n" + c for c in letters) + "->" + letters
    return np.einsum(spec, *factors, optimize=True)


def gaussian_on_grid(centers: np.ndarray, h: float, lo, hi, shape, T: int, d: int = 1,
                     weights=None) -> GridDensity:
    """Cell-averaged mixture of product Gaussians N(c, h^2 I), restricted to the
    box and renormalized; the mass lost outside the box is kept in ``meta``."""
    proto = GridDensity(lo, hi, np.zeros(shape), T, d)
    c = _as_flat(centers, T, d)
    w = np.full(c.shape[0], 1.0 / c.shape[0]) if weights is None else np.asarray(weights, float)
    edges = [proto.lo[a] + np.arange(shape[a] + 1) * proto.spacing[a] for a in range(len(shape))]
    factors = [_axis_masses(c[:, a], edges[a], h) for a in range(len(shape))]
    factors[0] = factors[0] * w[:, None]
    mass = _product_sum(factors)
    inside = float(mass.sum())
    if not inside > 0:
        raise InvalidParams("no kernel mass inside the box")
    g = proto.with_values(mass / inside / proto.cell_volume, normalized=True,
                          clipped_mass=1.0 - inside, bandwidth=h)
    return g


def kde(samples, h: float, lo=(0.0, 0.0), hi=(1.0, 1.0), shape=(32, 32), T: int = 2, d: int = 1) -> GridDensity:
    """Gaussian kernel density estimate, cell-averaged on a grid."""
    if h <= 0:
        raise BandwidthTooSmall("bandwidth must be positive")
    proto = GridDensity(lo, hi, np.zeros(shape), T, d)
    if h < proto.mesh:
        raise BandwidthTooSmall(f"h={h} below the cell size {proto.mesh}")
    return gaussian_on_grid(samples, h, lo, hi, shape, T, d)


def kde_bandwidth(n: int, dim: int, const: float = 1.0) -> float:
    """h = const * n^{-1/(dim + 2)}."""
    return const * n ** (-1.0 / (dim + 2))


# ----------------------------------------------------------------- wavelets
@dataclass(frozen=True)
class WaveletEstimatorConfig:
    """Tensor Haar estimator on [0,1]^dim.

    Detail levels j0 .. J_n - 1 are kept, so the reconstruction is piecewise
    constant on the dyadic grid of level J_n.  J_n = round(log2 n^{1/(2s+dim)})
    clamped to [j0, 12 // dim] unless ``J_override`` is set.
    """

    dim: int = 2
    T: int = 2
    d: int = 1
    j0: int = 0
    s: float = 1.0
    basis: str = "haar"
    J_override: int | None = None

    def __post_init__(self):
        if self.basis != "haar":
            raise InvalidParams("only the Haar basis is available")
        if self.dim != self.T * self.d:
            raise InvalidParams("dim must equal T*d")
        if self.j0 < 0 or self.s <= 0:
            raise InvalidParams("need j0 >= 0 and s > 0")

    @property
    def j_max(self) -> int:
        return 12 // self.dim

    def level(self, n: int) -> int:
        if self.J_override is not None:
            J = int(self.J_override)
        else:
            J = int(round(math.log2(n ** (1.0 / (2 * self.s + self.dim)))))
        return min(max(J, self.j0), max(self.j_max, self.j0))


@dataclass
class HaarCoefficients:
    """Orthonormal Haar coefficients: ``scaling`` at level j0 and, for each
    level j in j0..J-1, an array of shape (2^dim - 1, 2^j, ..., 2^j) whose first
    index enumerates the non-zero types e in {0,1}^dim (binary order)."""

    dim: int
    j0: int
    J: int
    scaling: np.ndarray
    details: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return int(self.scaling.size + sum(a.size for a in self.details))


def _types(dim: int) -> list:
    return [e for e in np.ndindex(*(2,) * dim) if any(e)]


def _check_box(x: np.ndarray):
    if np.any(x < 0) or np.any(x > 1):
        raise SampleOutOfBox("wavelet estimator needs samples in [0,1]^dim")


def _level_coeffs(x: np.ndarray, J: int) -> np.ndarray:
    """Scaling coefficients at level J: 2^{J dim/2} mu_n(cell)."""
    n, dim = x.shape
    idx = np.minimum((x * 2**J).astype(int), 2**J - 1)
    hist = np.zeros((2**J,) * dim)
    np.add.at(hist, tuple(idx.T), 1.0)
    return hist / n * 2 ** (J * dim / 2)


def _analysis_step(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    blocks = {(): c}
    for ax in range(c.ndim):
        nxt = {}
        for key, b in blocks.items():
            ev = np.take(b, np.arange(0, b.shape[ax], 2), axis=ax)
            od = np.take(b, np.arange(1, b.shape[ax], 2), axis=ax)
            nxt[key + (0,)] = (ev + od) / SQRT2
            nxt[key + (1,)] = (ev - od) / SQRT2
        blocks = nxt
    scaling = blocks[(0,) * c.ndim]
    return scaling, np.stack([blocks[e] for e in _types(c.ndim)])


def _synthesis_step(scaling: np.ndarray, det: np.ndarray) -> np.ndarray:
    dim = scaling.ndim
    blocks = {(0,) * dim: scaling}
    for e, arr in zip(_types(dim), det):
        blocks[e] = arr
    for ax in reversed(range(dim)):
        nxt = {}
        for key in {k[:ax] for k in blocks}:
            a, b = blocks[key + (0,)], blocks[key + (1,)]
            shape = list(a.shape)
            shape[ax] *= 2
            out = np.empty(shape)
            sl_e = [slice(None)] * dim
            sl_o = [slice(None)] * dim
            sl_e[ax], sl_o[ax] = slice(0, None, 2), slice(1, None, 2)
            out[tuple(sl_e)] = (a + b) / SQRT2
            out[tuple(sl_o)] = (a - b) / SQRT2
            nxt[key] = out
        blocks = nxt
    return blocks[()]


def haar_coefficients(samples, j0: int, J: int) -> HaarCoefficients:
    """Empirical coefficients beta_xi = (1/n) sum xi(X_i) for the Haar system
    truncated at level J (details j0..J-1)."""
    x = np.asarray(samples, dtype=float)
    x = x.reshape(x.shape[0], -1)
    _check_box(x)
    if J < j0:
        raise InvalidParams("need J >= j0")
    c = _level_coeffs(x, J)
    details = []
    for _ in range(J - j0):
        c, det = _analysis_step(c)
        details.append(det)
    return HaarCoefficients(x.shape[1], j0, J, c, details[::-1])


def haar_basis(x, j: int, k, e) -> np.ndarray:
    """Evaluate the tensor Haar function of level j, translation k, type e
    (e_a = 0: scaling factor, 1: wavelet factor) at points x (n, dim)."""
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape[0])
    for a in range(x.shape[1]):
        y = 2.0**j * x[:, a] - k[a]
        inside = (y >= 0) & (y < 1) | ((x[:, a] == 1.0) & (k[a] == 2**j - 1))
        val = np.where(inside, 1.0, 0.0)
        if e[a]:
            val = val * np.where(y < 0.5, 1.0, -1.0)
        out *= 2.0 ** (j / 2) * val
    return out


def haar_reconstruct(coef: HaarCoefficients, T: int, d: int = 1) -> GridDensity:
    c = coef.scaling
    for det in coef.details:
        c = _synthesis_step(c, det)
    vals = c * 2 ** (coef.J * coef.dim / 2)
    return GridDensity((0.0,) * coef.dim, (1.0,) * coef.dim, vals, T, d, normalized=False,
                       meta={"level": coef.J})


def wavelet_estimator(samples, config: WaveletEstimatorConfig) -> tuple[GridDensity, HaarCoefficients]:
    x = _as_flat(samples, config.T, config.d)
    J = config.level(x.shape[0])
    coef = haar_coefficients(x, config.j0, J)
    return haar_reconstruct(coef, config.T, config.d), coef


def fallback_density(first_sample, like: GridDensity) -> GridDensity:
    """Standard Gaussian bump at the first sample, restricted to the grid."""
    g = gaussian_on_grid(np.asarray(first_sample, float)[None, ...], 1.0, like.lo, like.hi, like.shape,
                         like.T, like.d)
    return g.with_values(g.values, normalized=True, fallback=True)


def mu_hat_from(estimate: GridDensity, first_sample) -> GridDensity:
    if estimate.values.min() >= 0:
        out = estimate.with_values(estimate.values, normalized=False, fallback=False)
        m = out.total_mass()
        return out.with_values(out.values / m, normalized=True, mass_deviation=1.0 - m)
    return fallback_density(first_sample, estimate)


def mu_hat(samples, config: WaveletEstimatorConfig) -> GridDensity:
    """The wavelet estimate when it is non-negative everywhere, else the
    Gaussian bump centered at the first sample."""
    x = _as_flat(samples, config.T, config.d)
    est, _ = wavelet_estimator(x, config)
    return mu_hat_from(est, x[0])


# ------------------------------------------------------------- experiments
TARGETS = ("uniform2d",)
ESTIMATORS = ("kde", "wavelet")


@dataclass(frozen=True)
class RateExperimentConfig:
    ns: tuple = (250, 500, 1000, 2000, 4000)
    reps: int = 10
    seed: int = 0
    estimator: str = "kde"
    target: str = "uniform2d"
    resolution: int = 32
    h_const: float = 0.5
    wavelet: WaveletEstimatorConfig = field(default_factory=WaveletEstimatorConfig)
    threads: int | None = None

    def __post_init__(self):
        ns = tuple(int(n) for n in self.ns)
        object.__setattr__(self, "ns", ns)
        if any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
            raise InvalidParams("sample sizes must be positive and strictly increasing")
        if self.reps < 3:
            raise InvalidParams("need at least 3 replications")
        if self.estimator not in ESTIMATORS:
            raise InvalidParams(f"estimator must be one of {ESTIMATORS}")
        if not (self.target in TARGETS or isinstance(self.target, GridDensity)):
            raise InvalidParams(f"target must be one of {TARGETS} or a GridDensity")
        if self.resolution < 2:
            raise InvalidParams("resolution must be >= 2")

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("target", "threads", "wavelet")}
        d["target"] = self.target if isinstance(self.target, str) else "grid"
        d["wavelet"] = asdict(self.wavelet)
        return d


def target_grid(cfg: RateExperimentConfig) -> GridDensity:
    if isinstance(cfg.target, GridDensity):
        return cfg.target
    r = cfg.resolution
    return GridDensity((0.0, 0.0), (1.0, 1.0), np.ones((r, r)), T=2, d=1)


def sample_grid(g: GridDensity, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n points: a cell by mass, then uniformly inside the cell."""
    m = np.clip(g.masses().ravel(), 0, None)
    cells = rng.choice(m.size, size=n, p=m / m.sum())
    idx = np.stack(np.unravel_index(cells, g.shape), axis=1)
    u = rng.random(idx.shape)
    return np.asarray(g.lo) + (idx + u) * g.spacing


def _estimate(cfg: RateExperimentConfig, target: GridDensity, x: np.ndarray) -> GridDensity:
    n, dim = x.shape
    if cfg.estimator == "kde":
        return kde(x, kde_bandwidth(n, dim, cfg.h_const), target.lo, target.hi, target.shape, target.T, target.d)
    est = mu_hat(x, cfg.wavelet)
    return _regrid(est, target)


def _regrid(est: GridDensity, target: GridDensity) -> GridDensity:
    """Piecewise-constant transfer of a dyadic estimate onto the target grid."""
    if est.shape == target.shape:
        return est
    centers = target.mesh_grid()
    idx = tuple(np.minimum(((c - lo) / (hi - lo) * s).astype(int), s - 1)
                for c, lo, hi, s in zip(centers, est.lo, est.hi, est.shape))
    return target.with_values(est.values[idx], normalized=False).normalize()


def aw1_to_target(target: GridDensity, estimate: GridDensity) -> float:
    return adapted_wasserstein_pp(quantize(target), quantize(estimate), 1.0)


def _one_run(args):
    cfg, target, n, seq = args
    rng = np.random.default_rng(seq)
    x = sample_grid(target, n, rng)
    return aw1_to_target(target, _estimate(cfg, target, x))


def fit_slope(ns, means) -> tuple[float, float]:
    res = stats.linregress(np.log(ns), np.log(means))
    return float(res.slope), float(res.stderr)


def rate_experiment(cfg: RateExperimentConfig) -> list[dict]:
    """Rows (n, mean, sd, slope, slope_se); slope of log mean on log n."""
    target = target_grid(cfg)
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(len(cfg.ns) * cfg.reps)
    jobs = [(cfg, target, n, children[i * cfg.reps + r]) for i, n in enumerate(cfg.ns) for r in range(cfg.reps)]
    workers = cfg.threads or os.cpu_count() or 1
    if workers == 1:
        vals = [_one_run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(_one_run, jobs))
    vals = np.array(vals).reshape(len(cfg.ns), cfg.reps)
    means = vals.mean(axis=1)
    sds = vals.std(axis=1, ddof=1)
    slope, se = fit_slope(cfg.ns, means) if len(cfg.ns) > 2 and np.all(means > 0) else (math.nan, math.nan)
    return [{"n": n, "mean": float(m), "sd": float(s), "slope": slope, "slope_se": se}
            for n, m, s in zip(cfg.ns, means, sds)]
