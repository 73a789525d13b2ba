"""Deterministic production functions and the distribution of Y / F(L, K).

The ratio xi = Y / F(L, K) under a copula model has exceedance function::

    f(xi) = P(Y > xi F) = 1 - int_0^1 int_0^1 d2C(u_L, u_K, u_Y(xi)) / du_L du_K
    u_Y(xi) = P_<(xi F(Q_L(u_L), Q_K(u_K)))

where Q are the GB2 quantiles.  The upper-side CCDF is f(xi) / f(1) for
xi >= 1.  The lower side is the CCDF of xi given xi <= 1, 1 - g(xi) / g(1)
with g = 1 - f.  The random (independent) model replaces the mixed partial
by u_Y itself.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np

from . import copulas
from .copulas import CopulaModel
from .marginals import MarginalTriple, gb2_cdf, gb2_pdf, gb2_quantile
from .numerics import OptimizerConfig, QuadratureConfig, gauss_legendre_nodes, nelder_mead

RATIO_QUADRATURE = QuadratureConfig(order=32, edge_clip=1e-9, panels=12)


class ProductionFitError(ValueError):
    pass


@dataclass(frozen=True)
class CDParams:
    A: float
    alpha: float  # capital elasticity
    beta: float  # labor elasticity

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("A must be positive")

    def to_dict(self) -> dict:
        return {"form": "cd", **asdict(self), "returns_to_scale": self.alpha + self.beta}


@dataclass(frozen=True)
class CESParams:
    A: float
    gamma: float
    p: float
    c: float

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("A must be positive")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if self.p == 0:
            raise ValueError("p must be nonzero (p -> 0 is the Cobb-Douglas limit)")

    def to_dict(self) -> dict:
        return {"form": "ces", **asdict(self)}


ProductionFunction = Union[CDParams, CESParams]


def _positive(*arrays):
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if np.any(~(a > 0)):
            raise ValueError("production inputs must be positive")
        out.append(a)
    return out


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def cd_eval(L, K, p: CDParams):
    L, K = _positive(L, K)
    return _scalar(p.A * K ** p.alpha * L ** p.beta)


def _ces_log(lnL, lnK, lnA, gamma, p, c):
    # log of A (g L^{cp} + (1-g) K^{cp})^{1/p}, written so that p -> 0 is stable
    d = c * p * (lnL - lnK)
    with np.errstate(over="ignore", invalid="ignore"):
        inner = np.where(
            d > 0,
            # factor out the larger term to avoid overflow
            d + np.log1p((1.0 - gamma) * np.expm1(-d)),
            np.log1p(gamma * np.expm1(d)),
        )
    if p == 0:
        return lnA + c * (gamma * lnL + (1.0 - gamma) * lnK)
    return lnA + c * lnK + inner / p


def ces_eval(L, K, p: CESParams):
    L, K = _positive(L, K)
    return _scalar(np.exp(_ces_log(np.log(L), np.log(K), math.log(p.A), p.gamma, p.p, p.c)))


def production(L, K, fn: ProductionFunction):
    if isinstance(fn, CDParams):
        return cd_eval(L, K, fn)
    return ces_eval(L, K, fn)


def production_from_dict(d: dict) -> ProductionFunction:
    if d.get("form") == "ces":
        return CESParams(float(d["A"]), float(d["gamma"]), float(d["p"]), float(d["c"]))
    return CDParams(float(d["A"]), float(d["alpha"]), float(d["beta"]))


# ---------------------------------------------------------------- least-squares fits


def _lky(sample):
    x = sample.matrix if hasattr(sample, "matrix") else np.asarray(sample, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError("expected an n x 3 (L, K, Y) sample")
    if x.shape[0] < 10:
        raise ValueError("production fits need at least 10 firms")
    if np.any(~(x > 0)):
        raise ValueError("production fits need positive data")
    return x[:, 0], x[:, 1], x[:, 2]


def fit_cd(sample) -> CDParams:
    """OLS of ln Y on (1, ln K, ln L)."""
    L, K, Y = _lky(sample)
    X = np.column_stack([np.ones_like(L), np.log(K), np.log(L)])
    if np.linalg.matrix_rank(X) < 3:
        raise ProductionFitError("singular design: ln K and ln L are collinear")
    coef, *_ = np.linalg.lstsq(X, np.log(Y), rcond=None)
    return CDParams(float(np.exp(coef[0])), float(coef[1]), float(coef[2]))


def fit_ces(sample, config: OptimizerConfig = OptimizerConfig()) -> CESParams:
    """Least squares in ln Y over (ln A, gamma, p, c), started from the CD fit."""
    L, K, Y = _lky(sample)
    lnL, lnK, lnY = np.log(L), np.log(K), np.log(Y)
    cd = fit_cd(sample)
    c0 = cd.alpha + cd.beta
    g0 = min(max(cd.beta / c0, 0.05), 0.95) if c0 > 0 else 0.5

    def objective(v):
        lnA, gamma, p, c = v
        r = lnY - _ces_log(lnL, lnK, lnA, gamma, p, c)
        return float(np.mean(r * r))

    bounds = [(None, None), (0.0, 1.0), (None, None), (None, None)]
    best = None
    for p0 in (0.1, -0.1, 0.5, -0.5):
        res = nelder_mead(objective, [math.log(cd.A), g0, p0, c0], bounds, config)
        if best is None or res.fun < best.fun:
            best = res
    lnA, gamma, p, c = best.x
    if p == 0:
        p = np.finfo(float).tiny
    return CESParams(float(math.exp(lnA)), float(gamma), float(p), float(c))


# ---------------------------------------------------------------- conditional density


def conditional_value_added_pdf(L, K, Y, marginals: MarginalTriple, copula: CopulaModel):
    """p(Y | L, K) = p_Y(Y) c(u_L, u_K, u_Y) / c_LK(u_L, u_K)."""
    L, K, Y = _positive(L, K, Y)
    L, K, Y = np.broadcast_arrays(L, K, Y)
    u = np.stack([gb2_cdf(L, marginals.labor), gb2_cdf(K, marginals.capital), gb2_cdf(Y, marginals.value_added)], -1)
    # far tails round to 0 or 1 in double precision; keep the point inside the cube
    u = np.clip(np.atleast_2d(u), np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    if copula.family == "independence":
        ratio = np.ones(u.shape[0])
    else:
        lk = copulas.margin(copula, ("L", "K"))
        ratio = np.exp(copulas.copula_logpdf(copula, u) - copulas.copula_logpdf(lk, u[:, :2]))
    out = gb2_pdf(np.atleast_1d(Y).ravel(), marginals.value_added) * np.atleast_1d(ratio)
    return _scalar(out.reshape(np.shape(Y)))


# ---------------------------------------------------------------- ratio distribution


def _ratio_nodes(marginals, fn, quad):
    x, w = gauss_legendre_nodes(quad)
    UL, UK = np.meshgrid(x, x, indexing="ij")
    F = production(gb2_quantile(UL, marginals.labor), gb2_quantile(UK, marginals.capital), fn)
    return UL, UK, F, np.outer(w, w)


def _uy(xi, F, marginals):
    return np.clip(gb2_cdf(xi * F, marginals.value_added), 1e-300, 1.0)


def _prob_below(xi_values, marginals, fn, copula, quad):
    """g(xi) = P(Y <= xi F(L, K)) for each xi."""
    UL, UK, F, W = _ratio_nodes(marginals, fn, quad)
    out = []
    for xi in xi_values:
        uy = _uy(xi, F, marginals)
        if copula is None:
            integrand = uy
        else:
            integrand = copulas.copula_cond_12(copula, np.stack([UL, UK, uy], axis=-1))
        if not np.all(np.isfinite(integrand)):
            raise FloatingPointError("ratio integrand is not finite on the quadrature grid")
        out.append(float(np.sum(W * integrand)))
    return np.array(out)


def _ratio_ccdf(xi, side, marginals, fn, copula, quad):
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if side == "upper":
        if np.any(xi_arr < 1):
            raise ValueError("upper side needs xi >= 1")
    elif side == "lower":
        if np.any(~((xi_arr > 0) & (xi_arr <= 1))):
            raise ValueError("lower side needs 0 < xi <= 1")
    else:
        raise ValueError("side must be 'upper' or 'lower'")
    g = _prob_below(np.concatenate([[1.0], xi_arr]), marginals, fn, copula, quad)
    g1, g = g[0], g[1:]
    if side == "upper":
        f1 = 1.0 - g1
        res = np.where(xi_arr == 1.0, 1.0, (1.0 - g) / f1)
    else:
        res = np.where(xi_arr == 1.0, 0.0, 1.0 - g / g1)
    res = np.clip(res, 0.0, 1.0)
    return float(res[0]) if np.ndim(xi) == 0 else res


def ratio_ccdf_copula(xi, side, marginals: MarginalTriple, copula: CopulaModel, fn: ProductionFunction, quad: QuadratureConfig = RATIO_QUADRATURE):
    if copula.dim != 3:
        raise ValueError("ratio CCDF needs a trivariate copula")
    return _ratio_ccdf(xi, side, marginals, fn, copula, quad)


def ratio_ccdf_random(xi, side, marginals: MarginalTriple, fn: ProductionFunction, quad: QuadratureConfig = RATIO_QUADRATURE):
    return _ratio_ccdf(xi, side, marginals, fn, None, quad)


def empirical_ratio_ccdf(ratios, xi, side):
    """Monte Carlo counterpart of the ratio CCDF on one side."""
    r = np.asarray(ratios, dtype=float)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if side == "upper":
        part = r[r > 1.0]
        return np.array([np.mean(part > x) if x > 1 else 1.0 for x in xi])
    part = r[r <= 1.0]
    return np.array([np.mean(part > x) for x in xi])


# ---------------------------------------------------------------- histogram


@dataclass
class RatioHistogram:
    edges: np.ndarray
    counts: np.ndarray
    upper_count: int
    lower_count: int
    exceedance: dict

    def summary_lines(self) -> list[str]:
        lines = []
        for key, (k, tot) in self.exceedance.items():
            side, pct = key.split(":")
            word = "larger" if side == "upper" else "smaller"
            frac = 100.0 * k / tot if tot else float("nan")
            lines.append(f"{frac:.0f}% of {tot} {side}-side firms have Y more than {pct}% {word} than F(L,K) ({k})")
        return lines


def ratio_histogram(sample, fn: ProductionFunction, width: float = 0.1, thresholds=(30, 50)) -> RatioHistogram:
    """Counts of Y / F(L, K) in bins of ``width`` starting at 0, plus the
    share of upper-side (lower-side) firms at least t% above (below) F."""
    x = sample.matrix if hasattr(sample, "matrix") else np.asarray(sample, dtype=float)
    r = x[:, 2] / production(x[:, 0], x[:, 1], fn)
    return histogram_of_ratios(r, width, thresholds)


def histogram_of_ratios(r, width: float = 0.1, thresholds=(30, 50)) -> RatioHistogram:
    r = np.asarray(r, dtype=float)
    # rounding keeps exact ratios such as 1.0 from slipping into the bin below
    idx = np.floor(np.round(r / width, 9)).astype(int)
    top = int(idx.max()) + 1
    counts = np.bincount(idx, minlength=top)
    edges = width * np.arange(top + 1)
    upper = r[r > 1.0]
    lower = r[r < 1.0]
    tol = 1e-12
    exc = {}
    for t in thresholds:
        exc[f"upper:{t}"] = (int(np.sum(upper >= 1.0 + t / 100.0 - tol)), int(upper.size))
        exc[f"lower:{t}"] = (int(np.sum(lower <= 1.0 - t / 100.0 + tol)), int(lower.size))
    return RatioHistogram(edges, counts, int(upper.size), int(lower.size), exc)


def write_curve_csv(path, xs, ys, header=("xi", "value")):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for a, b in zip(xs, ys):
            w.writerow([repr(float(a)), repr(float(b))])
