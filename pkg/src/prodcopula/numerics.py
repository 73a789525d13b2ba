"""Shared numerical kernels: special functions, bounded Nelder-Mead,
tensor Gauss-Legendre quadrature and the random-number contract."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special, stats
from scipy.optimize import minimize


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 4000
    tolerance_f: float = 1e-10
    tolerance_x: float = 1e-8
    initial_simplex_scale: float = 0.25
    restarts: int = 2

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance_f <= 0 or self.tolerance_x <= 0:
            raise ValueError("tolerances must be positive")
        if self.initial_simplex_scale <= 0:
            raise ValueError("initial_simplex_scale must be positive")


@dataclass(frozen=True)
class QuadratureConfig:
    """Gauss-Legendre settings on the clipped square [edge_clip, 1 - edge_clip]^2.

    ``panels`` splits each axis into that many sub-intervals, graded
    geometrically toward both edges so that corner-peaked copula integrands
    are resolved; ``panels=1`` is the plain tensor rule.
    """

    order: int = 64
    edge_clip: float = 1e-9
    panels: int = 1

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("order must be >= 2")
        if not 0 < self.edge_clip < 0.5:
            raise ValueError("edge_clip must lie in (0, 0.5)")
        if self.panels < 1:
            raise ValueError("panels must be >= 1")


# ---------------------------------------------------------------- special functions


def ln_beta(r, s):
    """Natural log of the complete beta function B(r, s)."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(r <= 0) or np.any(s <= 0):
        raise ValueError("ln_beta requires r > 0 and s > 0")
    out = special.betaln(r, s)
    return float(out) if out.ndim == 0 else out


def _check_beta_args(z, r, s, name):
    if r <= 0 or s <= 0:
        raise ValueError(f"{name} requires r > 0 and s > 0")
    z = np.asarray(z, dtype=float)
    if np.any(~((z >= 0) & (z <= 1))):
        raise ValueError(f"{name} argument must lie in [0, 1]")
    return z


def reg_inc_beta(z, r: float, s: float):
    """Regularized incomplete beta I_z(r, s) = B(z; r, s) / B(r, s)."""
    z = _check_beta_args(z, r, s, "reg_inc_beta")
    out = special.betainc(r, s, z)
    return float(out) if out.ndim == 0 else out


def reg_inc_beta_inverse(p, r: float, s: float):
    """Inverse of :func:`reg_inc_beta` in its first argument.

    Starts from scipy's inverse and polishes with safeguarded Newton steps
    on I_z(r, s) - p, keeping each iterate inside a shrinking bracket.
    """
    p = _check_beta_args(p, r, s, "reg_inc_beta_inverse")
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    z = special.betaincinv(r, s, p)
    lo = np.zeros_like(p)
    hi = np.ones_like(p)
    inner = (p > 0) & (p < 1)
    lnb = special.betaln(r, s)
    for _ in range(8):
        f = special.betainc(r, s, z) - p
        lo = np.where(f < 0, z, lo)
        hi = np.where(f > 0, z, hi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            logd = (r - 1) * np.log(z) + (s - 1) * np.log1p(-z) - lnb
            step = f / np.exp(logd)
        znew = z - step
        # a step that rounds onto the bracket end is converged, not out of bounds
        bad = ~np.isfinite(znew) | (znew < lo) | (znew > hi)
        znew = np.where(bad, 0.5 * (lo + hi), znew)
        z = np.where(inner & (f != 0), znew, z)
    z = np.where(p == 0, 0.0, np.where(p == 1, 1.0, z))
    return float(z[0]) if scalar else z


_BERNOULLI = special.bernoulli(60)


def _debye1_positive(x: float) -> float:
    if x < 2.0:
        # Taylor series; radius of convergence 2*pi
        total = 1.0 - x / 4.0
        x2 = x * x
        power = 1.0
        for k in range(1, 30):
            power *= x2
            term = _BERNOULLI[2 * k] * power / ((2 * k + 1) * math.factorial(2 * k))
            total += term
            if abs(term) < 1e-18:
                break
        return total
    # int_0^x t/(e^t-1) dt = pi^2/6 - sum_k e^{-kx} (x/k + 1/k^2)
    tail = 0.0
    for k in range(1, 200):
        term = math.exp(-k * x) * (x / k + 1.0 / (k * k))
        tail += term
        if term < 1e-18 * (1.0 + tail):
            break
    return (math.pi ** 2 / 6.0 - tail) / x


def debye1(x):
    """First Debye function D1(x) = (1/x) * int_0^x t / (e^t - 1) dt.

    Negative arguments use D1(-x) = D1(x) + x/2.  x = 0 is a domain error.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr == 0) or np.any(~np.isfinite(arr)):
        raise ValueError("debye1 is undefined at x = 0")

    def one(v):
        return _debye1_positive(v) if v > 0 else _debye1_positive(-v) - v / 2.0

    if arr.ndim == 0:
        return one(float(arr))
    return np.array([one(float(v)) for v in arr.ravel()]).reshape(arr.shape)


def std_normal_ppf(u):
    return stats.norm.ppf(u)


def std_normal_logpdf(x):
    return stats.norm.logpdf(x)


def student_t_ppf(u, df: float):
    return stats.t.ppf(u, df)


def student_t_logpdf(x, df: float):
    return stats.t.logpdf(x, df)


# ---------------------------------------------------------------- optimization


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    converged: bool
    iterations: int
    evaluations: int


def _box_maps(bounds):
    """Build z -> x and x -> z maps that send R^n into the box."""
    lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds], dtype=float)
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds], dtype=float)
    both = np.isfinite(lo) & np.isfinite(hi)
    lower = np.isfinite(lo) & ~np.isfinite(hi)
    upper = ~np.isfinite(lo) & np.isfinite(hi)

    def to_x(z):
        x = np.array(z, dtype=float)
        x[lower] = lo[lower] + np.exp(z[lower])
        x[upper] = hi[upper] - np.exp(z[upper])
        x[both] = lo[both] + (hi[both] - lo[both]) * special.expit(z[both])
        return x

    def to_z(x):
        x = np.asarray(x, dtype=float)
        z = np.array(x, dtype=float)
        with np.errstate(divide="ignore"):
            z[lower] = np.log(np.maximum(x[lower] - lo[lower], 1e-300))
            z[upper] = np.log(np.maximum(hi[upper] - x[upper], 1e-300))
            frac = (x[both] - lo[both]) / (hi[both] - lo[both])
            z[both] = special.logit(np.clip(frac, 1e-12, 1 - 1e-12))
        return z

    return to_x, to_z


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    start: Sequence[float],
    bounds: Optional[Sequence[tuple]] = None,
    config: OptimizerConfig = OptimizerConfig(),
) -> MinimizeResult:
    """Minimize ``objective`` with Nelder-Mead inside a box.

    Box constraints are enforced by an invertible reparameterization: log for
    one-sided bounds, logit for two-sided ones.  Non-finite objective values
    count as +inf.  The search restarts from its own optimum up to
    ``config.restarts`` times, which guards against simplex collapse.
    """
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if bounds is None:
        bounds = [(None, None)] * start.size
    if len(bounds) != start.size:
        raise ValueError("bounds length does not match start")
    to_x, to_z = _box_maps(bounds)

    f_start = float(objective(start))
    if not np.isfinite(f_start):
        raise ValueError("objective is not finite at the starting point")

    def wrapped(z):
        val = objective(to_x(z))
        val = float(val)
        return val if np.isfinite(val) else np.inf

    z = to_z(start)
    best_f = wrapped(z)
    total_it = total_ev = 0
    converged = False
    for _ in range(config.restarts + 1):
        simplex = np.vstack([z, z + config.initial_simplex_scale * np.eye(z.size)])
        res = minimize(
            wrapped,
            z,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": config.tolerance_x,
                "fatol": config.tolerance_f,
                "maxiter": config.max_iterations,
                "maxfev": 4 * config.max_iterations,
            },
        )
        total_it += res.nit
        total_ev += res.nfev
        improved = res.fun < best_f - config.tolerance_f
        if res.fun <= best_f:
            z, best_f = res.x, float(res.fun)
        converged = bool(res.success)
        if not improved and converged:
            break

    x = to_x(z)
    if not best_f <= f_start:
        x, best_f = start.copy(), f_start
    return MinimizeResult(x=x, fun=best_f, converged=converged, iterations=total_it, evaluations=total_ev)


# ---------------------------------------------------------------- quadrature


def _axis_rule(config: QuadratureConfig):
    nodes, weights = np.polynomial.legendre.leggauss(config.order)
    eps = config.edge_clip
    if config.panels == 1:
        edges = np.array([eps, 1.0 - eps])
    else:
        # geometric grading toward 0 and 1, uniform in the middle
        half = max(1, (config.panels + 1) // 2)
        left = np.geomspace(eps, 0.5, half + 1)
        edges = np.concatenate([left, 1.0 - left[-2::-1]])
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (b - a) * nodes + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * weights)
    return np.concatenate(xs), np.concatenate(ws)


def gauss_legendre_nodes(config: QuadratureConfig = QuadratureConfig()):
    """Per-axis nodes and weights on [edge_clip, 1 - edge_clip]."""
    return _axis_rule(config)


def gauss_legendre_2d(f: Callable, config: QuadratureConfig = QuadratureConfig()) -> float:
    """Tensor-product Gauss-Legendre estimate of the integral of f(u, v).

    ``f`` is called once with two broadcastable arrays (a meshgrid).
    """
    x, w = _axis_rule(config)
    U, V = np.meshgrid(x, x, indexing="ij")
    vals = np.asarray(f(U, V), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("integrand is not finite on the quadrature grid")
    return float(w @ vals @ w)


# ---------------------------------------------------------------- random numbers


class RandomStream:
    """Reproducible stream of uniform(0, 1) variates.

    Backed by numpy's PCG64 bit generator seeded through ``SeedSequence``; a
    given seed reproduces the same variates bit-for-bit on one numpy version.
    Uniforms are drawn on the open interval (0, 1).
    """

    def __init__(self, seed: int | np.random.SeedSequence):
        self.seed_sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
        self.generator = np.random.Generator(np.random.PCG64(self.seed_sequence))

    def uniform(self, size=None):
        # 53-bit integers shifted by one half never hit 0 or 1
        k = self.generator.integers(0, 2 ** 53, size=size, dtype=np.int64)
        return (k + 0.5) / 2.0 ** 53

    def exponential(self, size=None):
        return -np.log(self.uniform(size))

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def child(self, i: int) -> "RandomStream":
        """Sub-stream i; depends only on (seed, i), never on how many
        other children exist or in which order they are used."""
        ss = self.seed_sequence
        return RandomStream(np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(i),)))

    def spawn(self, n: int) -> list["RandomStream"]:
        return [self.child(i) for i in range(n)]


def rng_stream(seed: int) -> RandomStream:
    return RandomStream(seed)
