"""Pseudo-observations, maximum-likelihood fits and AIC model selection."""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import copulas
from .copulas import CopulaModel
from .marginals import GB2Params, MarginalTriple, gb2_cdf, gb2_loglik
from .numerics import OptimizerConfig, nelder_mead

logger = logging.getLogger(__name__)

VARIABLES = ("L", "K", "Y")


class FitError(RuntimeError):
    pass


class NonConvergenceError(FitError):
    pass


# ---------------------------------------------------------------- pseudo-observations


@dataclass(frozen=True)
class PseudoSample:
    points: np.ndarray
    method: str
    variable_names: tuple = VARIABLES

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != len(self.variable_names):
            raise ValueError("points must be an n x dim matrix matching variable_names")
        if np.any(~((pts > 0) & (pts < 1))):
            raise ValueError("pseudo-observations must lie strictly inside (0, 1)")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "variable_names", tuple(self.variable_names))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def pair(self, pair: Sequence[str]) -> "PseudoSample":
        idx = [self.variable_names.index(v) for v in pair]
        return PseudoSample(self.points[:, idx], self.method, tuple(pair))

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256(np.ascontiguousarray(self.points).tobytes())
        h.update(",".join(self.variable_names).encode())
        return h.hexdigest()[:16]


def _as_matrix(sample) -> np.ndarray:
    if hasattr(sample, "matrix"):
        return sample.matrix
    return np.asarray(sample, dtype=float)


def make_pseudo(sample, method: str = "rank", marginals: Optional[MarginalTriple] = None, variable_names=VARIABLES) -> PseudoSample:
    """Map data to the unit cube.

    ``rank``: u = rank / (n + 1) with average ranks for ties.
    ``parametric``: u = fitted GB2 CDF of each column.
    """
    x = _as_matrix(sample)
    if x.ndim != 2:
        raise ValueError("sample must be two-dimensional")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    for j in range(x.shape[1]):
        if np.all(x[:, j] == x[0, j]):
            raise ValueError(f"column {variable_names[j]} is constant")
    if method == "rank":
        u = np.column_stack([stats.rankdata(x[:, j], method="average") for j in range(x.shape[1])]) / (n + 1.0)
    elif method == "parametric":
        if marginals is None:
            raise ValueError("parametric pseudo-observations need fitted marginals")
        margs = list(marginals)
        if len(margs) != x.shape[1]:
            raise ValueError("number of marginals does not match the data")
        u = np.column_stack([gb2_cdf(x[:, j], margs[j]) for j in range(x.shape[1])])
        tiny = np.finfo(float).eps
        u = np.clip(u, tiny, 1.0 - tiny)
    else:
        raise ValueError(f"unknown pseudo-observation method {method!r}")
    return PseudoSample(u, method, tuple(variable_names))


# ---------------------------------------------------------------- marginal MLE


def trim_top(sample, pct: float) -> np.ndarray:
    """Drop the ceil(pct% * n) largest values."""
    x = np.sort(np.asarray(sample, dtype=float))
    if pct <= 0:
        return x
    drop = math.ceil(pct / 100.0 * x.size)
    return x[: x.size - drop]


@dataclass
class MarginalFit:
    params: GB2Params
    loglik: float
    n: int
    converged: bool

    def to_dict(self) -> dict:
        return {**self.params.to_dict(), "loglik": self.loglik, "n": self.n, "converged": self.converged}


def fit_marginal_gb2(sample, config: OptimizerConfig = OptimizerConfig(), trim_top_pct: float = 0.0) -> MarginalFit:
    """GB2 maximum likelihood with five deterministic starts.

    Starts sit around (mu, nu, q, x0) = (1, 1, 1, median); the best
    converged optimum is returned.
    """
    x = np.asarray(sample, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("GB2 sample must be positive")
    x = trim_top(x, trim_top_pct)
    if x.size < 20:
        raise ValueError("GB2 fit needs at least 20 observations")
    if np.all(x == x[0]):
        raise ValueError("GB2 fit needs a non-constant sample")
    med = float(np.median(x))
    starts = [
        (1.0, 1.0, 1.0, med),
        (2.0, 2.0, 1.0, med),
        (0.5, 0.5, 1.0, med),
        (1.0, 1.0, 2.0, med),
        (1.0, 1.0, 0.5, med),
    ]
    n = x.size

    def objective(p):
        try:
            ll = gb2_loglik(x, GB2Params(*p))
        except ValueError:
            return np.inf
        return -ll / n

    bounds = [(0.0, None)] * 4
    best = None
    for start in starts:
        res = nelder_mead(objective, start, bounds, config)
        if best is None or res.fun < best.fun:
            best = res
    params = GB2Params(*best.x)
    return MarginalFit(params, gb2_loglik(x, params), n, best.converged)


def fit_marginals(data, config: OptimizerConfig = OptimizerConfig(), trim_top_pct: float = 0.0) -> dict:
    x = _as_matrix(data)
    fits = {name: fit_marginal_gb2(x[:, j], config, trim_top_pct) for j, name in enumerate(("labor", "capital", "value_added"))}
    return fits


# ---------------------------------------------------------------- copula MLE


def aic_value(loglik: float, k: int) -> float:
    return -2.0 * loglik + 2.0 * k


@dataclass
class FitReport:
    model: CopulaModel
    loglik: float
    n: int
    k: int
    converged: bool
    tau_by_pair: dict = field(default_factory=dict)
    sample_id: str = ""
    variable_names: tuple = VARIABLES
    metadata: dict = field(default_factory=dict)

    @property
    def aic(self) -> float:
        return aic_value(self.loglik, self.k)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "loglik": self.loglik,
            "aic": self.aic,
            "n": self.n,
            "k": self.k,
            "converged": self.converged,
            "tau_by_pair": self.tau_by_pair,
            "sample_id": self.sample_id,
            "variable_names": list(self.variable_names),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitReport":
        return cls(
            model=CopulaModel.from_dict(d["model"]),
            loglik=float(d["loglik"]),
            n=int(d["n"]),
            k=int(d["k"]),
            converged=bool(d["converged"]),
            tau_by_pair=dict(d.get("tau_by_pair", {})),
            sample_id=d.get("sample_id", ""),
            variable_names=tuple(d.get("variable_names", VARIABLES)),
            metadata=dict(d.get("metadata", {})),
        )


def copula_loglik(model: CopulaModel, points: np.ndarray) -> float:
    """Sum of log densities in row order."""
    logs = np.atleast_1d(copulas.copula_logpdf(model, points))
    if not np.all(np.isfinite(logs)):
        return -np.inf
    return float(np.cumsum(logs)[-1])


def _empirical_tau(points, i, j):
    return stats.kendalltau(points[:, i], points[:, j]).statistic


def _clip_tau(tau, lo=0.02, hi=0.95):
    return float(min(max(tau, lo), hi))


def _search_space(family: str, dim: int, points: np.ndarray):
    """Starting vectors, bounds and a vector -> model map for one family."""
    d = points.shape[1]
    taus = [_empirical_tau(points, i, j) for i in range(d) for j in range(i + 1, d)]
    tau = float(np.mean(taus))

    if family == "gumbel":
        t = copulas.theta_for_tau("gumbel", _clip_tau(tau))
        starts = [[t], [1.0 + 0.6 * (t - 1.0) + 0.05], [1.0 + 1.5 * (t - 1.0)]]
        return starts, [(1.0, None)], lambda p: CopulaModel("gumbel", dim, (p[0],))
    if family == "frank":
        if dim == 3:
            t = copulas.theta_for_tau("frank", _clip_tau(tau))
            return [[t], [0.6 * t], [1.5 * t]], [(0.0, None)], lambda p: CopulaModel("frank", 3, (p[0],))
        sign = -1.0 if tau < 0 else 1.0
        t = sign * copulas.theta_for_tau("frank", _clip_tau(abs(tau)))
        return [[t], [0.6 * t], [1.5 * t]], [(None, None)], lambda p: CopulaModel("frank", 2, (p[0],))
    if family in ("clayton", "sclayton"):
        t = copulas.theta_for_tau(family, _clip_tau(tau))
        lo = 0.0 if dim == 3 or tau > 0 else -1.0
        return [[t], [0.6 * t], [1.5 * t]], [(lo, None)], lambda p: CopulaModel(family, dim, (p[0],))
    if family == "nested_gumbel":
        if dim != 3:
            raise copulas.CopulaDomainError("nested Gumbel is trivariate")
        # columns are (L, K, Y): inner pair (L, Y), outer pairs involve K
        tau_inner = _empirical_tau(points, 0, 2)
        tau_outer = 0.5 * (_empirical_tau(points, 0, 1) + _empirical_tau(points, 1, 2))
        t1 = copulas.theta_for_tau("gumbel", _clip_tau(tau_outer))
        t2 = max(copulas.theta_for_tau("gumbel", _clip_tau(tau_inner)), t1 + 1e-3)
        starts = [[t1, t2 - t1], [t1, 0.5 * (t2 - t1) + 0.05], [0.8 * t1 + 0.2, 1.5 * (t2 - t1) + 0.1]]

        def build(p):
            return CopulaModel("nested_gumbel", 3, (p[0], p[0] + p[1]))

        return starts, [(1.0, None), (0.0, None)], build
    if family == "asym_gumbel":
        if dim != 2:
            raise copulas.CopulaDomainError("asymmetric Gumbel is bivariate")
        t = copulas.theta_for_tau("gumbel", _clip_tau(tau))
        starts = [[t, 0.9, 0.9], [t * 1.2, 0.97, 0.8], [t * 1.2, 0.8, 0.97]]
        return starts, [(1.0, None), (0.0, 1.0), (0.0, 1.0)], lambda p: CopulaModel("asym_gumbel", 2, tuple(p))
    if family in ("gaussian", "t3"):
        if dim != 2:
            raise copulas.CopulaDomainError(f"{family} copula is bivariate")
        z = copulas.theta_for_tau(family, float(np.clip(tau, -0.95, 0.95)))
        return [[z], [0.8 * z], [0.5 * (z + np.sign(z or 1.0))]], [(-1.0, 1.0)], lambda p: CopulaModel(family, 2, (p[0],))
    raise copulas.CopulaDomainError(f"cannot fit family {family!r} in dimension {dim}")


def fit_copula(pseudo: PseudoSample, family: str, config: OptimizerConfig = OptimizerConfig()) -> FitReport:
    """Maximum-likelihood copula fit; AIC uses the copula parameter count only."""
    pts = pseudo.points
    dim = pseudo.dim
    starts, bounds, build = _search_space(family, dim, pts)
    n = pseudo.n

    def objective(p):
        try:
            model = build(p)
        except copulas.CopulaDomainError:
            return np.inf
        with np.errstate(all="ignore"):
            logs = copulas.copula_logpdf(model, pts)
        total = float(np.sum(logs))
        return -total / n if np.isfinite(total) else np.inf

    best = None
    for s in starts:
        try:
            res = nelder_mead(objective, s, bounds, config)
        except ValueError:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise FitError(f"{family}: likelihood is not finite at any starting point")
    model = build(best.x)
    with np.errstate(all="ignore"):
        logs = np.atleast_1d(copulas.copula_logpdf(model, pts))
    bad = np.flatnonzero(~np.isfinite(logs))
    if bad.size:
        raise FitError(f"{family}: density underflow at data point index {int(bad[0])}")
    loglik = float(np.cumsum(logs)[-1])
    taus = copulas.tau_by_pair(model)
    if dim == 2:
        taus = {f"{pseudo.variable_names[0]}-{pseudo.variable_names[1]}": next(iter(taus.values()))}
    report = FitReport(
        model=model,
        loglik=loglik,
        n=n,
        k=model.k,
        converged=best.converged,
        tau_by_pair=taus,
        sample_id=pseudo.fingerprint,
        variable_names=pseudo.variable_names,
        metadata={
            "pseudo_method": pseudo.method,
            "optimizer_iterations": best.iterations,
            "marginal_parameters": 4 * dim,
            "total_parameters": 4 * dim + model.k,
        },
    )
    if not report.converged:
        logger.warning("%s fit did not converge", family)
    return report


def fit_asym_gumbel(pseudo: PseudoSample, config: OptimizerConfig = OptimizerConfig()) -> FitReport:
    if pseudo.dim != 2:
        raise ValueError("asymmetric Gumbel needs a bivariate pseudo-sample")
    return fit_copula(pseudo, "asym_gumbel", config)


def select_model(reports: Sequence[FitReport]) -> FitReport:
    """Smallest AIC; ties go to fewer parameters, then to family order in
    ``copulas.FAMILIES``."""
    reports = list(reports)
    if not reports:
        raise ValueError("no fit reports to select from")
    samples = {(r.sample_id, r.n) for r in reports}
    if len(samples) > 1:
        raise ValueError("fit reports come from different samples")
    return min(reports, key=lambda r: (r.aic, r.k, copulas.FAMILIES.index(r.model.family)))
