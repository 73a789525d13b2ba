"""Dependence diagnostics: empirical copulas, rank correlations and the
trivariate copula cumulant

    Omega(u_L, u_K, u_Y) = C(u_L, u_K, u_Y) - u_K C(u_L, u_Y) - u_L C(u_K, u_Y)
                           - u_Y C(u_L, u_K) + 2 u_L u_K u_Y

which vanishes whenever one coordinate is 0 or 1 and for any copula of the
form u_Y C(u_L, u_K).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import copulas
from .copulas import CopulaModel
from .fitting import PseudoSample


@dataclass
class GridField:
    axes: list
    values: np.ndarray
    label: str = ""
    axis_names: tuple = ()

    def __post_init__(self):
        self.axes = [np.asarray(a, dtype=float) for a in self.axes]
        self.values = np.asarray(self.values, dtype=float)
        for a in self.axes:
            if a.ndim != 1 or np.any(np.diff(a) <= 0):
                raise ValueError("grid axes must be strictly increasing")
        if self.values.shape != tuple(a.size for a in self.axes):
            raise ValueError("values shape does not match the axes")
        if not self.axis_names:
            self.axis_names = tuple(f"x{i}" for i in range(len(self.axes)))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "axis_names": list(self.axis_names),
            "axes": [a.tolist() for a in self.axes],
            "values": self.values.tolist(),
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    def long_rows(self):
        grids = np.meshgrid(*self.axes, indexing="ij")
        for idx in np.ndindex(self.values.shape):
            yield [float(g[idx]) for g in grids] + [float(self.values[idx])]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(list(self.axis_names) + ["value"])
            for row in self.long_rows():
                w.writerow([repr(v) for v in row])


# ---------------------------------------------------------------- empirical copula


def _grid_axes(grid, dim):
    if isinstance(grid, (list, tuple)) and len(grid) == dim and np.ndim(grid[0]) == 1:
        return [np.asarray(g, dtype=float) for g in grid]
    g = np.asarray(grid, dtype=float)
    return [g] * dim


def empirical_cdf_at(points: np.ndarray, u) -> np.ndarray:
    """C_n(u) = (1/n) #{i : point_i <= u componentwise} at each row of u."""
    points = np.asarray(points, dtype=float)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    out = np.empty(u.shape[0])
    step = max(1, 2_000_000 // max(points.shape[0], 1))
    for s in range(0, u.shape[0], step):
        block = u[s: s + step]
        below = np.all(points[None, :, :] <= block[:, None, :], axis=-1)
        out[s: s + step] = below.mean(axis=1)
    return out


def empirical_copula(pseudo: PseudoSample, grid) -> GridField:
    pts = pseudo.points
    if pseudo.n < 2:
        raise ValueError("empirical copula needs at least two points")
    axes = _grid_axes(grid, pseudo.dim)
    below = [(pts[:, j][:, None] <= axes[j][None, :]).astype(float) for j in range(pseudo.dim)]
    if pseudo.dim == 2:
        vals = below[0].T @ below[1]
    else:
        vals = np.stack([(below[0][:, i: i + 1] * below[1]).T @ below[2] for i in range(axes[0].size)])
    return GridField(axes, vals / pseudo.n, "empirical copula", pseudo.variable_names)


# ---------------------------------------------------------------- rank correlations


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("need two equal-length samples of size >= 2")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("rank correlation is undefined for constant input")
    return x, y


def spearman_rho(x, y) -> float:
    """Pearson correlation of average ranks."""
    x, y = _check_pair(x, y)
    rx = stats.rankdata(x) - (x.size + 1) / 2.0
    ry = stats.rankdata(y) - (y.size + 1) / 2.0
    return float(np.sum(rx * ry) / np.sqrt(np.sum(rx * rx) * np.sum(ry * ry)))


def kendall_tau_sample(x, y) -> float:
    """Tie-adjusted Kendall tau-b, O(n log n)."""
    x, y = _check_pair(x, y)
    return float(stats.kendalltau(x, y, variant="b").statistic)


def kendall_tau_se(n: int) -> float:
    """Null standard error of the sample Kendall tau."""
    return float(np.sqrt(2.0 * (2 * n + 5) / (9.0 * n * (n - 1))))


# ---------------------------------------------------------------- copula cumulant

PAIRS = {"LY": ("L", "Y"), "KY": ("K", "Y"), "LK": ("L", "K")}


def cumulant_from_cdfs(c3: Callable, c_ly: Callable, c_ky: Callable, c_lk: Callable, u) -> np.ndarray:
    """Omega from a trivariate CDF and its three bivariate margins.

    Each callable takes an (m, 3) or (m, 2) array of points."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    uL, uK, uY = u[:, 0], u[:, 1], u[:, 2]
    return (
        c3(u)
        - uK * c_ly(u[:, [0, 2]])
        - uL * c_ky(u[:, [1, 2]])
        - uY * c_lk(u[:, [0, 1]])
        + 2.0 * uL * uK * uY
    )


def copula_cumulant(source, u):
    """Omega at one point or at each row of ``u``; ``source`` is a trivariate
    CopulaModel or PseudoSample (empirical copulas for every term)."""
    scalar = np.ndim(u) == 1
    if isinstance(source, CopulaModel):
        if source.dim != 3:
            raise ValueError("the cumulant needs a trivariate source")
        margins = {k: copulas.margin(source, p) for k, p in PAIRS.items()}
        out = cumulant_from_cdfs(
            lambda v: np.atleast_1d(copulas.copula_cdf(source, v)),
            *(lambda v, m=margins[k]: np.atleast_1d(copulas.copula_cdf(m, v)) for k in ("LY", "KY", "LK")),
            u,
        )
    elif isinstance(source, PseudoSample):
        if source.dim != 3:
            raise ValueError("the cumulant needs a trivariate source")
        pts = source.points
        out = cumulant_from_cdfs(
            lambda v: empirical_cdf_at(pts, v),
            lambda v: empirical_cdf_at(pts[:, [0, 2]], v),
            lambda v: empirical_cdf_at(pts[:, [1, 2]], v),
            lambda v: empirical_cdf_at(pts[:, [0, 1]], v),
            u,
        )
    else:
        raise TypeError("source must be a CopulaModel or a PseudoSample")
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class Section:
    """Cross section of the cube.

    ``fixed`` maps a variable to a constant value; ``tied`` lists variables
    that share the first free coordinate (u_L = u_K = s, say)."""

    name: str
    free: tuple
    fixed: dict = field(default_factory=dict)
    tied: tuple = ()


DEFAULT_SECTIONS = (
    Section("A", ("L", "K"), {"Y": 0.5}),
    Section("B", ("L", "Y"), {"K": 0.5}),
    Section("C", ("K", "Y"), {"L": 0.5}),
    Section("D", ("L", "Y"), {}, ("L", "K")),
)


def _section_points(section: Section, axes):
    order = ("L", "K", "Y")
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.empty(grids[0].shape + (3,))
    for var, val in section.fixed.items():
        pts[..., order.index(var)] = val
    for var, g in zip(section.free, grids):
        pts[..., order.index(var)] = g
    if section.tied:
        lead = section.tied[0]
        for var in section.tied[1:]:
            pts[..., order.index(var)] = pts[..., order.index(lead)]
    covered = set(section.fixed) | set(section.free) | set(section.tied)
    if covered != set(order):
        raise ValueError(f"section {section.name} does not pin down every coordinate")
    return pts


def cumulant_sections(source, sections: Sequence[Section] = DEFAULT_SECTIONS, grid=None) -> dict:
    """Omega on planar cross sections plus the diagonal u_L = u_K = u_Y."""
    g = np.linspace(0.0, 1.0, 21) if grid is None else np.asarray(grid, dtype=float)
    out = {}
    for sec in sections:
        pts = _section_points(sec, [g, g])
        vals = copula_cumulant(source, pts.reshape(-1, 3)).reshape(pts.shape[:-1])
        names = tuple(f"u_{v}" for v in sec.free)
        out[sec.name] = GridField([g, g], vals, f"cumulant section {sec.name}", names)
    out["diagonal"] = cumulant_diagonal(source, g)
    return out


def cumulant_diagonal(source, grid=None) -> GridField:
    g = np.linspace(0.0, 1.0, 21) if grid is None else np.asarray(grid, dtype=float)
    vals = copula_cumulant(source, np.column_stack([g, g, g]))
    return GridField([g], vals, "cumulant diagonal", ("x",))
