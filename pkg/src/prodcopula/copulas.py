"""Copula families used for production copulas.

Points are arrays whose last axis holds the coordinates.  Trivariate points
are always ordered (u_L, u_K, u_Y); the nested Gumbel model couples (L, Y)
in its inner copula and attaches K through the outer one.

Density derivations (all kept in log space):

* Archimedean, C = psi(sum phi(u_i)):
  c = (-1)^d psi^(d)(T) * prod |phi'(u_i)|.
* Gumbel, psi(t) = exp(-s), s = t^(1/theta), a = 1/theta:
  (-1)^k psi^(k)(t) = e^{-s} t^{-k} P_k(s) with
  P_1 = a s, P_2 = a^2 s^2 + a(1-a) s,
  P_3 = a^3 s^3 + 3a^2(1-a) s^2 + a(1-a)(2-a) s.
* Frank, psi(t) = -log(1 - w)/theta with w = (1 - e^{-theta}) e^{-t}:
  (-1)^k psi^(k)(t) = Li_{1-k}(w)/theta; Li_0 = w/(1-w),
  Li_{-1} = w/(1-w)^2, Li_{-2} = w(1+w)/(1-w)^3.
* Clayton, psi(t) = (1 + theta t)^(-1/theta):
  (-1)^k psi^(k)(t) = prod_{j<k}(1 + j theta) (1 + theta t)^(-1/theta - k).
* Nested, C = psi1(phi1(v) + phi1(u_K)), v = psi2(phi2(u_L) + phi2(u_Y)):
  c = |phi1'(u_K) phi2'(u_L) phi2'(u_Y)| * (P1 - P2 + P3) with
  P1 = |psi1'''(T)| phi1'(v)^2 psi2'(S)^2,
  P2 = psi1''(T) phi1''(v) psi2'(S)^2,
  P3 = psi1''(T) |phi1'(v)| psi2''(S).
* Asymmetric (Khoudraji) Gumbel, C = u1^(1-al) u2^(1-be) G(a, b), a = u1^al,
  b = u2^be:
  c = (1-al)(1-be) u1^-al u2^-be G + al(1-be) u2^-be G_a
      + be(1-al) u1^-al G_b + al be G_ab.
* Trivariate survival Clayton is the copula of (1 - U) for U ~ Clayton:
  C^(u) = sum u_i - 2 + sum_{i<j} C(1-u_i, 1-u_j) - C(1-u), density c(1-u).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from . import numerics

FAMILIES = (
    "independence",
    "frank",
    "gumbel",
    "clayton",
    "sclayton",
    "asym_gumbel",
    "nested_gumbel",
    "gaussian",
    "t3",
)

PARAM_NAMES = {
    "independence": (),
    "frank": ("theta",),
    "gumbel": ("theta",),
    "clayton": ("theta",),
    "sclayton": ("theta",),
    "asym_gumbel": ("theta", "alpha", "beta"),
    "nested_gumbel": ("theta1", "theta2"),
    "gaussian": ("zeta",),
    "t3": ("zeta",),
}

VARIABLES = ("L", "K", "Y")
T_DF = 3.0


class CopulaDomainError(ValueError):
    pass


# ---------------------------------------------------------------- generators


@dataclass(frozen=True)
class Generator:
    family: str
    theta: float

    def __post_init__(self):
        f, t = self.family, self.theta
        if f == "frank" and t == 0:
            raise CopulaDomainError("Frank generator needs theta != 0")
        if f == "gumbel" and t < 1:
            raise CopulaDomainError("Gumbel generator needs theta >= 1")
        if f == "clayton" and (t < -1 or t == 0):
            raise CopulaDomainError("Clayton generator needs theta >= -1, theta != 0")
        if f not in ("frank", "gumbel", "clayton"):
            raise CopulaDomainError(f"no generator for family {f!r}")


def _log1mexp(x):
    """log(1 - exp(-x)) for x > 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x < math.log(2.0), np.log(-np.expm1(-x)), np.log1p(-np.exp(-np.maximum(x, 0.0))))


def generator(g: Generator, u):
    """Generator eta(u) on (0, 1]; eta(1) = 0."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u <= 1))):
        raise CopulaDomainError("generator argument must lie in (0, 1]")
    th = g.theta
    with np.errstate(divide="ignore"):
        if g.family == "gumbel":
            out = (-np.log(u)) ** th
        elif g.family == "clayton":
            out = np.expm1(-th * np.log(u)) / th
        else:
            out = -np.log(np.expm1(-th * u) / np.expm1(-th))
    return float(out) if out.ndim == 0 else out


def generator_inverse(g: Generator, t):
    """Inverse generator; for Clayton with theta < 0 the pseudo-inverse
    (zero beyond eta(0) = -1/theta)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise CopulaDomainError("generator inverse needs t >= 0")
    th = g.theta
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if g.family == "gumbel":
            out = np.exp(-(t ** (1.0 / th)))
        elif g.family == "clayton":
            base = 1.0 + th * t
            out = np.where(base > 0, np.maximum(base, 0.0) ** (-1.0 / th), 0.0)
        else:
            out = -np.log1p(np.expm1(-th) * np.exp(-t)) / th
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- model type


@dataclass(frozen=True)
class CopulaModel:
    family: str
    dim: int
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        _validate(self)

    @classmethod
    def make(cls, family: str, dim: int, **params) -> "CopulaModel":
        names = PARAM_NAMES[family]
        missing = set(names) - set(params)
        if missing or set(params) - set(names):
            raise CopulaDomainError(f"{family} expects parameters {names}")
        return cls(family, dim, tuple(params[n] for n in names))

    @property
    def param_dict(self) -> dict:
        return dict(zip(PARAM_NAMES[self.family], self.params))

    @property
    def k(self) -> int:
        return len(self.params)

    def __getattr__(self, name):
        names = PARAM_NAMES.get(object.__getattribute__(self, "family"), ())
        if name in names:
            return self.params[names.index(name)]
        raise AttributeError(name)

    @property
    def variable_order(self) -> list:
        if self.dim == 2:
            return ["u1", "u2"]
        if self.family == "nested_gumbel":
            return ["L", "Y", "K"]
        return list(VARIABLES)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "dim": self.dim,
            "params": self.param_dict,
            "variable_order": self.variable_order,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CopulaModel":
        return cls.make(d["family"], int(d["dim"]), **{k: float(v) for k, v in d["params"].items()})


def independence(dim: int = 3) -> CopulaModel:
    return CopulaModel("independence", dim)


def _validate(m: CopulaModel):
    if m.family not in FAMILIES:
        raise CopulaDomainError(f"unknown copula family {m.family!r}")
    if m.dim not in (2, 3):
        raise CopulaDomainError("only dimensions 2 and 3 are supported")
    if len(m.params) != len(PARAM_NAMES[m.family]):
        raise CopulaDomainError(f"{m.family} expects parameters {PARAM_NAMES[m.family]}")
    if not all(np.isfinite(m.params)):
        raise CopulaDomainError("parameters must be finite")
    f, d, p = m.family, m.dim, m.params
    if f == "frank":
        if p[0] == 0 or (d == 3 and p[0] <= 0):
            raise CopulaDomainError("Frank needs theta != 0 (theta > 0 in three dimensions)")
    elif f == "gumbel":
        if p[0] < 1:
            raise CopulaDomainError("Gumbel needs theta >= 1")
    elif f in ("clayton", "sclayton"):
        if d == 2 and (p[0] < -1 or p[0] == 0):
            raise CopulaDomainError("Clayton needs theta >= -1, theta != 0")
        if d == 3 and p[0] <= 0:
            raise CopulaDomainError("trivariate Clayton needs theta > 0")
    elif f == "asym_gumbel":
        if d != 2:
            raise CopulaDomainError("asymmetric Gumbel is bivariate only")
        if p[0] < 1 or not (0 <= p[1] <= 1 and 0 <= p[2] <= 1):
            raise CopulaDomainError("asymmetric Gumbel needs theta >= 1 and 0 <= alpha, beta <= 1")
    elif f == "nested_gumbel":
        if d != 3:
            raise CopulaDomainError("nested Gumbel is trivariate only")
        if not 1 <= p[0] <= p[1]:
            raise CopulaDomainError("nested Gumbel needs 1 <= theta1 <= theta2")
    elif f in ("gaussian", "t3"):
        if d != 2:
            raise CopulaDomainError(f"{f} copula is bivariate only")
        if not -1 < p[0] < 1:
            raise CopulaDomainError("correlation zeta must lie in (-1, 1)")


def _points(m: CopulaModel, u, open_cube: bool):
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != m.dim:
        raise CopulaDomainError(f"expected points with {m.dim} coordinates, got shape {u.shape}")
    if open_cube:
        if np.any(~((u > 0) & (u < 1))):
            raise CopulaDomainError("density evaluation needs points strictly inside the unit cube")
    elif np.any(~((u >= 0) & (u <= 1))):
        raise CopulaDomainError("points must lie in the closed unit cube")
    return u


def _scalar(out, u):
    return float(out) if np.ndim(u) == 1 else out


# ---------------------------------------------------------------- Gumbel pieces


def _gumbel_log_psi_k(logt, th, k):
    """log((-1)^k psi^(k)(t)) for the Gumbel generator, from log t."""
    a = 1.0 / th
    s = np.exp(a * logt)
    if k == 1:
        poly = a * s
    elif k == 2:
        poly = a * a * s * s + a * (1 - a) * s
    else:
        poly = a ** 3 * s ** 3 + 3 * a * a * (1 - a) * s * s + a * (1 - a) * (2 - a) * s
    with np.errstate(divide="ignore"):
        return -s - k * logt + np.log(poly)


def _gumbel_log_dphi(l, th):
    """log|phi'(u)| with l = -log u."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return math.log(th) + np.where(th == 1.0, 0.0, (th - 1.0) * np.log(l)) + l


def _gumbel_log_d2phi(l, th):
    with np.errstate(divide="ignore", invalid="ignore"):
        return math.log(th) + (th - 2.0) * np.log(l) + np.log(th - 1.0 + l) + 2.0 * l


def _neglog(u):
    with np.errstate(divide="ignore"):
        return -np.log(u)


def _gumbel_logT(ls, th):
    with np.errstate(divide="ignore"):
        terms = [th * np.log(l) for l in ls]
    out = terms[0]
    for t in terms[1:]:
        out = np.logaddexp(out, t)
    return out


def _gumbel_cdf(cols, th):
    ls = [_neglog(c) for c in cols]
    logT = _gumbel_logT(ls, th)
    with np.errstate(over="ignore"):
        return np.exp(-np.exp(logT / th))


def _gumbel_logpdf(cols, th):
    ls = [_neglog(c) for c in cols]
    logT = _gumbel_logT(ls, th)
    out = _gumbel_log_psi_k(logT, th, len(cols))
    for l in ls:
        out = out + _gumbel_log_dphi(l, th)
    return out


def _gumbel_log_cond12(cols, th):
    ls = [_neglog(c) for c in cols]
    logT = _gumbel_logT(ls, th)
    return _gumbel_log_psi_k(logT, th, 2) + _gumbel_log_dphi(ls[0], th) + _gumbel_log_dphi(ls[1], th)


# ---------------------------------------------------------------- Frank pieces


def _frank_w(cols, th):
    """Return (log w, log(1 - w)) for theta > 0, or (w, 1 - w) arrays for theta < 0."""
    d = len(cols)
    if th > 0:
        logw = sum(_log1mexp(th * c) for c in cols) - (d - 1) * _log1mexp(th)
        with np.errstate(divide="ignore", invalid="ignore"):
            log1mw = np.where(logw < 0, _log1mexp(-np.minimum(logw, -1e-300)), -np.inf)
        return logw, log1mw
    w = np.prod([-np.expm1(-th * c) for c in cols], axis=0) / (-np.expm1(-th)) ** (d - 1)
    return w, 1.0 - w


def _frank_cdf(cols, th):
    if th > 0:
        _, log1mw = _frank_w(cols, th)
        return -log1mw / th
    _, one_minus_w = _frank_w(cols, th)
    return -np.log(one_minus_w) / th


def _frank_log_abs_dphi(c, th):
    # |phi'(u)| = theta / expm1(theta u), any sign of theta
    return np.log(th / np.expm1(th * c))


def _frank_log_psi_k(cols, th, k):
    if th > 0:
        logw, log1mw = _frank_w(cols, th)
        if k == 2:
            val = logw - 2 * log1mw
        else:
            val = logw + np.log1p(np.exp(logw)) - 3 * log1mw
        return val - math.log(th)
    w, omw = _frank_w(cols, th)
    lik = w / omw ** 2 if k == 2 else w * (1 + w) / omw ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(lik / th)


def _frank_logpdf(cols, th):
    out = _frank_log_psi_k(cols, th, len(cols))
    for c in cols:
        out = out + _frank_log_abs_dphi(c, th)
    return out


def _frank_log_cond12(cols, th):
    return _frank_log_psi_k(cols, th, 2) + _frank_log_abs_dphi(cols[0], th) + _frank_log_abs_dphi(cols[1], th)


# ---------------------------------------------------------------- Clayton pieces


def _clayton_base(cols, th):
    """1 + theta * sum phi(u_i) = 1 + sum (u_i^-theta - 1)."""
    with np.errstate(divide="ignore", over="ignore"):
        terms = [np.expm1(-th * np.log(c)) for c in cols]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return 1.0 + total


def _clayton_cdf(cols, th):
    base = _clayton_base(cols, th)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.where(base > 0, np.abs(base) ** (-1.0 / th), 0.0)
        if th > 0:
            out = np.where(np.isinf(base), 0.0, out)
    return out


def _clayton_log_psi_k(base, th, k):
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = sum(math.log1p(j * th) if 1 + j * th > 0 else -np.inf for j in range(1, k))
        return np.where(base > 0, coef + (-1.0 / th - k) * np.log(np.abs(base)), -np.inf)


def _clayton_logpdf(cols, th):
    base = _clayton_base(cols, th)
    out = _clayton_log_psi_k(base, th, len(cols))
    for c in cols:
        out = out - (th + 1.0) * np.log(c)
    return out


def _clayton_cond12(cols, th):
    base = _clayton_base(cols, th)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.exp(_clayton_log_psi_k(base, th, 2) - (th + 1.0) * (np.log(cols[0]) + np.log(cols[1])))
    return np.where(np.isinf(base), 0.0, val)


# ---------------------------------------------------------------- survival Clayton


def _sclayton_cdf(cols, th):
    bars = [1.0 - c for c in cols]
    if len(cols) == 2:
        return cols[0] + cols[1] - 1.0 + _clayton_cdf(bars, th)
    pairs = _clayton_cdf([bars[0], bars[1]], th) + _clayton_cdf([bars[0], bars[2]], th) + _clayton_cdf([bars[1], bars[2]], th)
    return cols[0] + cols[1] + cols[2] - 2.0 + pairs - _clayton_cdf(bars, th)


def _sclayton_logpdf(cols, th):
    return _clayton_logpdf([1.0 - c for c in cols], th)


def _sclayton_cond12(cols, th):
    bars = [1.0 - c for c in cols]
    pair = np.exp(_clayton_logpdf(bars[:2], th))
    return pair - _clayton_cond12(bars, th)


# ---------------------------------------------------------------- nested Gumbel


def _nested_cdf(cols, th1, th2):
    uL, uK, uY = cols
    lL, lK, lY = _neglog(uL), _neglog(uK), _neglog(uY)
    logS = _gumbel_logT([lL, lY], th2)
    with np.errstate(over="ignore"):
        m = np.exp(logS / th2)
    logT = _gumbel_logT([m, lK], th1)
    with np.errstate(over="ignore"):
        return np.exp(-np.exp(logT / th1))


def _nested_logpdf(cols, th1, th2):
    uL, uK, uY = cols
    lL, lK, lY = _neglog(uL), _neglog(uK), _neglog(uY)
    logS = _gumbel_logT([lL, lY], th2)
    m = np.exp(logS / th2)
    logT = _gumbel_logT([m, lK], th1)
    a2 = 1.0 / th2
    log_dpsi2 = -m - logS + np.log(a2 * m)
    log_d2psi2 = -m - 2 * logS + np.log(a2 * a2 * m * m + a2 * (1 - a2) * m)
    log_dphi1_v = _gumbel_log_dphi(m, th1)
    log_d2phi1_v = _gumbel_log_d2phi(m, th1)
    log_psi1_2 = _gumbel_log_psi_k(logT, th1, 2)
    log_psi1_3 = _gumbel_log_psi_k(logT, th1, 3)
    p1 = log_psi1_3 + 2 * log_dphi1_v + 2 * log_dpsi2
    p2 = log_psi1_2 + log_d2phi1_v + 2 * log_dpsi2
    p3 = log_psi1_2 + log_dphi1_v + log_d2psi2
    top = np.maximum(np.maximum(p1, p2), p3)
    with np.errstate(invalid="ignore", divide="ignore"):
        bracket = top + np.log(np.exp(p1 - top) - np.exp(p2 - top) + np.exp(p3 - top))
    return bracket + _gumbel_log_dphi(lK, th1) + _gumbel_log_dphi(lL, th2) + _gumbel_log_dphi(lY, th2)


def _nested_log_cond12(cols, th1, th2):
    uL, uK, uY = cols
    lL, lK, lY = _neglog(uL), _neglog(uK), _neglog(uY)
    logS = _gumbel_logT([lL, lY], th2)
    m = np.exp(logS / th2)
    logT = _gumbel_logT([m, lK], th1)
    with np.errstate(divide="ignore"):
        log_dpsi2 = -m - logS + np.log(m / th2)
    return (
        _gumbel_log_psi_k(logT, th1, 2)
        + _gumbel_log_dphi(m, th1)
        + log_dpsi2
        + _gumbel_log_dphi(lL, th2)
        + _gumbel_log_dphi(lK, th1)
    )


# ---------------------------------------------------------------- asymmetric Gumbel


def _gumbel_partials(a, b, th):
    """G, dG/da, dG/db, d2G/dadb for the bivariate Gumbel copula."""
    la, lb = _neglog(a), _neglog(b)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        T = la ** th + lb ** th
        s = T ** (1.0 / th)
        G = np.exp(-s)
        ga = np.where(T > 0, G * la ** (th - 1) / a * T ** (1.0 / th - 1.0), 0.0)
        gb = np.where(T > 0, G * lb ** (th - 1) / b * T ** (1.0 / th - 1.0), 0.0)
        gab = np.where(
            T > 0,
            G * (la * lb) ** (th - 1) / (a * b) * T ** (1.0 / th - 2.0) * (s + th - 1.0),
            0.0,
        )
    return G, ga, gb, gab


def _asym_cdf(cols, th, al, be):
    u1, u2 = cols
    with np.errstate(divide="ignore", invalid="ignore"):
        G = _gumbel_partials(u1 ** al, u2 ** be, th)[0]
        return u1 ** (1 - al) * u2 ** (1 - be) * G


def _asym_pdf(cols, th, al, be):
    u1, u2 = cols
    G, ga, gb, gab = _gumbel_partials(u1 ** al, u2 ** be, th)
    return (
        (1 - al) * (1 - be) * u1 ** (-al) * u2 ** (-be) * G
        + al * (1 - be) * u2 ** (-be) * ga
        + be * (1 - al) * u1 ** (-al) * gb
        + al * be * gab
    )


def _asym_partial1(cols, th, al, be):
    """dC/du1 for the asymmetric Gumbel copula."""
    u1, u2 = cols
    G, ga, _, _ = _gumbel_partials(u1 ** al, u2 ** be, th)
    return u2 ** (1 - be) * ((1 - al) * u1 ** (-al) * G + al * ga)


def _asym_partial2(cols, th, al, be):
    u1, u2 = cols
    G, _, gb, _ = _gumbel_partials(u1 ** al, u2 ** be, th)
    return u1 ** (1 - al) * ((1 - be) * u2 ** (-be) * G + be * gb)


# ---------------------------------------------------------------- elliptical


def gaussian_copula_logpdf(zeta, u1, u2):
    if not -1 < zeta < 1:
        raise CopulaDomainError("zeta must lie in (-1, 1)")
    x = numerics.std_normal_ppf(u1)
    y = numerics.std_normal_ppf(u2)
    r2 = 1.0 - zeta * zeta
    return -0.5 * np.log(r2) - (zeta * zeta * (x * x + y * y) - 2.0 * zeta * x * y) / (2.0 * r2)


def student_t3_copula_logpdf(zeta, u1, u2):
    if not -1 < zeta < 1:
        raise CopulaDomainError("zeta must lie in (-1, 1)")
    nu = T_DF
    x = numerics.student_t_ppf(u1, nu)
    y = numerics.student_t_ppf(u2, nu)
    r2 = 1.0 - zeta * zeta
    quad = (x * x - 2.0 * zeta * x * y + y * y) / (nu * r2)
    log_joint = (
        special.gammaln((nu + 2) / 2)
        - special.gammaln(nu / 2)
        - math.log(nu * math.pi)
        - 0.5 * math.log(r2)
        - (nu + 2) / 2 * np.log1p(quad)
    )
    return log_joint - numerics.student_t_logpdf(x, nu) - numerics.student_t_logpdf(y, nu)


def gaussian_copula_density(zeta, u1, u2):
    return np.exp(gaussian_copula_logpdf(zeta, np.asarray(u1, float), np.asarray(u2, float)))


def student_t3_copula_density(zeta, u1, u2):
    return np.exp(student_t3_copula_logpdf(zeta, np.asarray(u1, float), np.asarray(u2, float)))


def _elliptical_cdf(cols, zeta, family):
    """C(u1, u2) = int_0^u1 P(X2 <= x2 | X1 = F^-1(s)) ds, by adaptive quadrature."""
    u1, u2 = np.broadcast_arrays(*cols)
    shape = u1.shape
    u1 = u1.ravel()
    u2 = u2.ravel()
    r2 = 1.0 - zeta * zeta
    if family == "gaussian":
        x2 = stats.norm.ppf(u2)

        def cond(x1):
            return stats.norm.cdf((x2 - zeta * x1) / math.sqrt(r2))

        ppf = stats.norm.ppf
    else:
        nu = T_DF
        x2 = stats.t.ppf(u2, nu)

        def cond(x1):
            scale = np.sqrt(r2 * (nu + x1 * x1) / (nu + 1.0))
            return stats.t.cdf((x2 - zeta * x1) / scale, nu + 1.0)

        def ppf(s):
            return stats.t.ppf(s, nu)

    inner = (u1 > 0) & (u1 < 1) & (u2 > 0) & (u2 < 1)
    out = np.where(u1 == 0, 0.0, np.where(u2 == 0, 0.0, np.minimum(u1, u2)))
    if np.any(inner):
        a = u1[inner]
        x2_saved = x2
        x2 = x2_saved[inner]

        def integrand(r):
            return a * cond(ppf(a * r))

        val, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=400)
        out = out.astype(float)
        out[inner] = val
    out = np.where((u1 == 1), u2, np.where(u2 == 1, u1, out))
    return out.reshape(shape)


# ---------------------------------------------------------------- public evaluation


def copula_cdf(m: CopulaModel, u):
    """Copula CDF at one point (1-d array) or many (rows of a 2-d array)."""
    u = _points(m, u, open_cube=False)
    cols = [u[..., i] for i in range(m.dim)]
    f, p = m.family, m.params
    if f == "independence":
        out = np.prod(u, axis=-1)
    elif f == "gumbel":
        out = _gumbel_cdf(cols, p[0])
    elif f == "frank":
        out = _frank_cdf(cols, p[0])
    elif f == "clayton":
        out = _clayton_cdf(cols, p[0])
    elif f == "sclayton":
        out = _sclayton_cdf(cols, p[0])
    elif f == "nested_gumbel":
        out = _nested_cdf(cols, *p)
    elif f == "asym_gumbel":
        out = _asym_cdf(cols, *p)
    else:
        out = _elliptical_cdf(cols, p[0], f)
    # exact boundary handling: zero coordinate -> 0
    out = np.where(np.any(u == 0, axis=-1), 0.0, out)
    out = np.clip(out, 0.0, 1.0)
    return _scalar(out, u)


def copula_logpdf(m: CopulaModel, u):
    u = _points(m, u, open_cube=True)
    cols = [u[..., i] for i in range(m.dim)]
    f, p = m.family, m.params
    if f == "independence":
        out = np.zeros(u.shape[:-1])
    elif f == "gumbel":
        out = _gumbel_logpdf(cols, p[0])
    elif f == "frank":
        out = _frank_logpdf(cols, p[0])
    elif f == "clayton":
        out = _clayton_logpdf(cols, p[0])
    elif f == "sclayton":
        out = _sclayton_logpdf(cols, p[0])
    elif f == "nested_gumbel":
        out = _nested_logpdf(cols, *p)
    elif f == "asym_gumbel":
        with np.errstate(divide="ignore"):
            out = np.log(_asym_pdf(cols, *p))
    elif f == "gaussian":
        out = gaussian_copula_logpdf(p[0], *cols)
    else:
        out = student_t3_copula_logpdf(p[0], *cols)
    return _scalar(out, u)


def copula_density(m: CopulaModel, u):
    return np.exp(copula_logpdf(m, u))


def copula_cond_12(m: CopulaModel, u):
    """Mixed partial d^2 C / du_1 du_2 of a trivariate copula, u_3 held fixed.

    Coordinates are (u_L, u_K, u_Y), so this is d^2 C / du_L du_K.  The third
    coordinate may equal 1, which gives the (L, K) margin density.
    """
    if m.dim != 3:
        raise CopulaDomainError("copula_cond_12 needs a trivariate model")
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != 3:
        raise CopulaDomainError("expected trivariate points")
    if np.any(~((u[..., :2] > 0) & (u[..., :2] < 1))) or np.any(~((u[..., 2] > 0) & (u[..., 2] <= 1))):
        raise CopulaDomainError("copula_cond_12 needs u_1, u_2 in (0, 1) and u_3 in (0, 1]")
    cols = [u[..., i] for i in range(3)]
    f, p = m.family, m.params
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if f == "independence":
            out = cols[2] * np.ones_like(cols[0])
        elif f == "gumbel":
            out = np.exp(_gumbel_log_cond12(cols, p[0]))
        elif f == "frank":
            out = np.exp(_frank_log_cond12(cols, p[0]))
        elif f == "clayton":
            out = _clayton_cond12(cols, p[0])
        elif f == "sclayton":
            out = _sclayton_cond12(cols, p[0])
        elif f == "nested_gumbel":
            out = np.exp(_nested_log_cond12(cols, *p))
        else:
            raise CopulaDomainError(f"copula_cond_12 unsupported for {f}")
    out = np.where(np.isfinite(out), out, 0.0)
    return _scalar(np.maximum(out, 0.0), u)


# ---------------------------------------------------------------- margins and tau


def _pair_key(pair) -> tuple:
    pair = tuple(pair)
    if len(pair) != 2 or any(v not in VARIABLES for v in pair) or pair[0] == pair[1]:
        raise CopulaDomainError(f"pair must name two of {VARIABLES}, got {pair}")
    return tuple(sorted(pair, key=VARIABLES.index))


def margin(m: CopulaModel, pair) -> CopulaModel:
    """Bivariate margin of a trivariate model for a pair of variables."""
    if m.dim != 3:
        raise CopulaDomainError("margins are extracted from trivariate models")
    pair = _pair_key(pair)
    f = m.family
    if f == "independence":
        return independence(2)
    if f in ("frank", "gumbel", "clayton", "sclayton"):
        return CopulaModel(f, 2, m.params)
    if f == "nested_gumbel":
        th1, th2 = m.params
        return CopulaModel("gumbel", 2, (th2 if pair == ("L", "Y") else th1,))
    raise CopulaDomainError(f"no closed-form margin for {f}")


def _tau_asym(m: CopulaModel) -> float:
    # tau = 1 - 4 * int int C_1 C_2 du1 du2
    cfg = numerics.QuadratureConfig(order=48, edge_clip=1e-12, panels=12)
    th, al, be = m.params

    def integrand(u1, u2):
        return _asym_partial1([u1, u2], th, al, be) * _asym_partial2([u1, u2], th, al, be)

    return 1.0 - 4.0 * numerics.gauss_legendre_2d(integrand, cfg)


def kendall_tau(m: CopulaModel, pair=None) -> float:
    """Kendall's tau of a bivariate model or of a named pair of a trivariate model."""
    if m.dim == 3:
        if pair is None:
            if m.family in ("nested_gumbel",):
                raise CopulaDomainError("name a pair for the nested model")
            pair = ("L", "K")
        return kendall_tau(margin(m, pair))
    f, p = m.family, m.params
    if f == "independence":
        return 0.0
    if f == "gumbel":
        return 1.0 - 1.0 / p[0]
    if f in ("clayton", "sclayton"):
        return p[0] / (p[0] + 2.0)
    if f == "frank":
        return 1.0 - 4.0 / p[0] * (1.0 - numerics.debye1(p[0]))
    if f in ("gaussian", "t3"):
        return 2.0 / math.pi * math.asin(p[0])
    return _tau_asym(m)


def tau_by_pair(m: CopulaModel) -> dict:
    if m.dim == 2:
        return {"u1-u2": kendall_tau(m)}
    return {f"{a}-{b}": kendall_tau(m, (a, b)) for a, b in (("L", "K"), ("L", "Y"), ("K", "Y"))}


def theta_for_tau(family: str, tau: float) -> float:
    """Invert the tau mapping of a one-parameter Archimedean family."""
    if family == "gumbel":
        return 1.0 / (1.0 - tau)
    if family in ("clayton", "sclayton"):
        return 2.0 * tau / (1.0 - tau)
    if family == "frank":
        from scipy.optimize import brentq

        return brentq(lambda t: kendall_tau(CopulaModel("frank", 2, (t,))) - tau, 1e-6, 500.0)
    if family in ("gaussian", "t3"):
        return math.sin(math.pi * tau / 2.0)
    raise CopulaDomainError(f"no tau inversion for {family}")
