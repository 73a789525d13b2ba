"""Copula and firm-ensemble simulation.

Two samplers are provided:

* ``rejection`` (default): uniform proposals on boxes of the clipped cube
  [eps, 1 - eps]^d, accepted with probability c(u) / M_box.  Each axis is cut
  into cells graded geometrically toward 0 and 1, and every box gets its own
  bound M_box = 1.5 * (largest density on a 4-per-axis sub-grid of the box).
  A single global bound (``envelope="constant"``) is also available but is
  only usable for weakly dependent models: copula densities diverge in the
  corners, so one constant makes the acceptance rate collapse.
* ``exact``: Marshall-Olkin construction for Gumbel and nested Gumbel with
  positive-stable frailties.  Used as a correctness oracle.

Proposals are generated in fixed-size chunks; chunk i draws from sub-stream
``RandomStream(seed).child(i)``, and accepted points are concatenated in
chunk order.  The output therefore depends only on the seed, never on the
thread count.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import copulas
from .copulas import CopulaModel
from .marginals import MarginalTriple, gb2_quantile
from .numerics import RandomStream

logger = logging.getLogger(__name__)

SAMPLERS = ("rejection", "exact")
ENVELOPES = ("piecewise", "constant")
MIN_ACCEPTANCE = 1e-4
INFLATION = 1.5


class SamplingError(RuntimeError):
    pass


class EnvelopeViolation(SamplingError):
    pass


@dataclass(frozen=True)
class SimulationSpec:
    n: int
    copula: CopulaModel
    marginals: Optional[MarginalTriple] = None
    seed: int = 0
    sampler: str = "rejection"
    edge_clip: float = 1e-9
    envelope: str = "piecewise"
    threads: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        if self.envelope not in ENVELOPES:
            raise ValueError(f"envelope must be one of {ENVELOPES}")
        if self.sampler == "exact" and self.copula.family not in ("gumbel", "nested_gumbel", "independence"):
            raise ValueError("the exact sampler supports Gumbel and nested Gumbel only")
        if not 0 < self.edge_clip < 0.5:
            raise ValueError("edge_clip must lie in (0, 0.5)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class RejectionStats:
    proposals: int
    accepted: int
    boxes: int
    envelope_mass: float
    max_ratio: float

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else 0.0

    def to_dict(self) -> dict:
        return {
            "proposals": self.proposals,
            "accepted": self.accepted,
            "acceptance_rate": self.acceptance_rate,
            "expected_acceptance_rate": 1.0 / self.envelope_mass,
            "boxes": self.boxes,
            "max_density_to_bound": self.max_ratio,
        }


# ---------------------------------------------------------------- envelopes


@dataclass(frozen=True)
class Envelope:
    lower: np.ndarray  # (boxes, d)
    width: np.ndarray  # (boxes, d)
    bound: np.ndarray  # (boxes,)
    cumulative: np.ndarray  # normalized cumulative box weights

    @property
    def mass(self) -> float:
        return float(np.sum(self.bound * np.prod(self.width, axis=1)))


def _axis_edges(eps: float, ratio: float = 3.0, middle: int = 16) -> np.ndarray:
    steps = max(1, math.ceil(math.log(0.5 / eps) / math.log(ratio)))
    left = np.geomspace(eps, 0.5, steps + 1)
    mid = np.linspace(0.0, 1.0, middle + 1)[1:-1]
    edges = np.unique(np.concatenate([left, mid, 1.0 - left]))
    return edges


def _density_on_grid(model, axes):
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    with np.errstate(all="ignore"):
        vals = np.atleast_1d(copulas.copula_density(model, pts))
    if not np.all(np.isfinite(vals)):
        raise SamplingError("copula density is not finite on the envelope grid")
    return vals.reshape(grids[0].shape)


@lru_cache(maxsize=32)
def build_envelope(model: CopulaModel, eps: float = 1e-9, kind: str = "piecewise") -> Envelope:
    d = model.dim
    if kind == "constant":
        nodes = np.linspace(eps, 1.0 - eps, 64)
        top = INFLATION * float(np.max(_density_on_grid(model, [nodes] * d)))
        lower = np.full((1, d), eps)
        width = np.full((1, d), 1.0 - 2.0 * eps)
        return Envelope(lower, width, np.array([top]), np.array([1.0]))

    edges = _axis_edges(eps)
    cells = edges.size - 1
    sub = 3  # sub-intervals per cell, i.e. 4 sample points per box edge
    fine = np.concatenate(
        [np.linspace(a, b, sub + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])] + [edges[-1:]]
    )
    vals = _density_on_grid(model, [fine] * d)
    # per-box maximum over the (sub + 1)^d points that belong to the box
    for axis in range(d):
        vals = np.moveaxis(vals, axis, 0)
        vals = np.max(np.stack([vals[j: j + sub * cells: sub] for j in range(sub + 1)]), axis=0)
        vals = np.moveaxis(vals, 0, axis)
    bound = INFLATION * vals.ravel()
    idx = np.stack([g.ravel() for g in np.meshgrid(*[np.arange(cells)] * d, indexing="ij")], axis=-1)
    lower = edges[idx]
    width = edges[idx + 1] - edges[idx]
    weight = bound * np.prod(width, axis=1)
    cum = np.cumsum(weight)
    return Envelope(lower, width, bound, cum / cum[-1])


# ---------------------------------------------------------------- rejection sampler


def _rejection_chunk(model, env: Envelope, stream: RandomStream, size: int):
    d = model.dim
    box = np.searchsorted(env.cumulative, stream.uniform(size), side="right")
    box = np.minimum(box, env.cumulative.size - 1)
    pts = env.lower[box] + env.width[box] * stream.uniform((size, d))
    gate = stream.uniform(size) * env.bound[box]
    with np.errstate(all="ignore"):
        dens = np.atleast_1d(copulas.copula_density(model, pts))
    ratio = dens / env.bound[box]
    worst = int(np.argmax(ratio))
    if ratio[worst] > 1.0:
        raise EnvelopeViolation(
            f"density {dens[worst]:.6g} exceeds envelope bound {env.bound[box[worst]]:.6g} "
            f"at u={pts[worst].tolist()}; raise the edge clip or refine the envelope"
        )
    return pts[gate < dens], float(ratio[worst])


def rejection_sample(
    model: CopulaModel,
    n: int,
    seed: int,
    edge_clip: float = 1e-9,
    envelope: str = "piecewise",
    threads: int = 1,
    chunk: int = 1 << 15,
):
    """Rejection sampling on the clipped cube; returns (points, RejectionStats)."""
    env = build_envelope(model, edge_clip, envelope)
    expected = 1.0 / env.mass
    if expected < MIN_ACCEPTANCE:
        raise SamplingError(
            f"expected acceptance rate {expected:.2e} is below {MIN_ACCEPTANCE:g}; "
            "raise the edge clip or use the piecewise envelope"
        )
    root = RandomStream(seed)
    parts, got, proposals, worst = [], 0, 0, 0.0
    next_chunk = 0
    with ThreadPoolExecutor(max_workers=threads) as pool:
        while got < n:
            ids = range(next_chunk, next_chunk + threads)
            next_chunk += threads
            results = list(pool.map(lambda i: _rejection_chunk(model, env, root.child(i), chunk), ids))
            for pts, ratio in results:
                if got >= n:
                    break
                parts.append(pts)
                got += pts.shape[0]
                proposals += chunk
                worst = max(worst, ratio)
            if proposals >= 20 * chunk and got / proposals < MIN_ACCEPTANCE:
                raise SamplingError(f"observed acceptance rate {got / proposals:.2e} is below {MIN_ACCEPTANCE:g}")
    points = np.concatenate(parts)[:n]
    stats = RejectionStats(proposals, got, env.bound.size, env.mass, worst)
    return points, stats


# ---------------------------------------------------------------- exact Gumbel sampler


def positive_stable(alpha: float, stream: RandomStream, size: int) -> np.ndarray:
    """Variates with Laplace transform exp(-t^alpha), 0 < alpha <= 1 (Kanter)."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1.0:
        return np.ones(size)
    angle = math.pi * stream.uniform(size)
    w = stream.exponential(size)
    return (
        np.sin(alpha * angle) / np.sin(angle) ** (1.0 / alpha)
        * (np.sin((1.0 - alpha) * angle) / w) ** ((1.0 - alpha) / alpha)
    )


def _gumbel_psi(t, theta):
    return np.exp(-t ** (1.0 / theta))


def exact_gumbel_sample(model: CopulaModel, n: int, seed: int, edge_clip: float = 1e-9) -> np.ndarray:
    """Marshall-Olkin sampling; columns in canonical (L, K, Y) order."""
    stream = RandomStream(seed)
    d = model.dim
    if model.family == "independence":
        u = stream.uniform((n, d))
    elif model.family == "gumbel":
        th = model.params[0]
        v = positive_stable(1.0 / th, stream, n)
        e = stream.exponential((n, d))
        u = _gumbel_psi(e / v[:, None], th)
    elif model.family == "nested_gumbel":
        th1, th2 = model.params
        v0 = positive_stable(1.0 / th1, stream, n)
        # inner frailty with conditional Laplace transform exp(-v0 t^(th1/th2))
        v1 = v0 ** (th2 / th1) * positive_stable(th1 / th2, stream, n)
        e = stream.exponential((n, 3))
        u = np.empty((n, 3))
        u[:, 0] = _gumbel_psi(e[:, 0] / v1, th2)
        u[:, 2] = _gumbel_psi(e[:, 2] / v1, th2)
        u[:, 1] = _gumbel_psi(e[:, 1] / v0, th1)
    else:
        raise ValueError(f"no exact sampler for {model.family}")
    return np.clip(u, edge_clip, 1.0 - edge_clip)


# ---------------------------------------------------------------- public entry points


def sample_copula(spec: SimulationSpec, return_stats: bool = False):
    """n x dim matrix of copula variates inside the clipped cube."""
    model = spec.copula
    if spec.sampler == "exact":
        pts = exact_gumbel_sample(model, spec.n, spec.seed, spec.edge_clip)
        return (pts, None) if return_stats else pts
    pts, stats = rejection_sample(model, spec.n, spec.seed, spec.edge_clip, spec.envelope, spec.threads)
    logger.info("rejection sampling: %s", stats.to_dict())
    return (pts, stats) if return_stats else pts


def simulate_firms(spec: SimulationSpec):
    """Firm ensemble: copula variates mapped through the GB2 quantiles."""
    from .ingest import FirmData

    if spec.marginals is None:
        raise ValueError("simulate_firms needs marginals")
    if spec.copula.dim != 3:
        raise ValueError("firm simulation needs a trivariate copula")
    u = sample_copula(spec)
    lky = np.column_stack([gb2_quantile(u[:, j], p) for j, p in enumerate(spec.marginals)])
    return FirmData.from_matrix(lky, synthetic=True)
