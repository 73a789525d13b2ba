import math

import mpmath as mp
import numpy as np
import pytest

from prodcopula import copulas as C
from prodcopula.copulas import CopulaModel
from prodcopula.numerics import QuadratureConfig, gauss_legendre_2d

from oracles import cdf, interior_grid, mixed_difference, mp_cdf, mp_density_fd

BIVARIATE = [
    CopulaModel("frank", 2, (6.0,)),
    CopulaModel("frank", 2, (-4.0,)),
    CopulaModel("gumbel", 2, (2.5,)),
    CopulaModel("clayton", 2, (3.0,)),
    CopulaModel("clayton", 2, (-0.4,)),
    CopulaModel("sclayton", 2, (2.0,)),
    CopulaModel("asym_gumbel", 2, (3.0, 0.6, 0.9)),
    CopulaModel("gaussian", 2, (0.6,)),
    CopulaModel("t3", 2, (0.6,)),
]
TRIVARIATE = [
    CopulaModel("frank", 3, (8.0,)),
    CopulaModel("gumbel", 3, (2.2,)),
    CopulaModel("clayton", 3, (2.0,)),
    CopulaModel("sclayton", 3, (2.0,)),
    CopulaModel("nested_gumbel", 3, (2.89, 5.26)),
]
ids = lambda m: f"{m.family}-{m.dim}-{m.params}"


@pytest.mark.parametrize("m", BIVARIATE, ids=ids)
def test_bivariate_density_matches_cdf(m):
    pts = interior_grid(2)
    fd = mixed_difference(m, pts, 1e-3)
    dens = C.copula_density(m, pts)
    pos = dens > 0
    assert np.max(np.abs(fd[pos] / dens[pos] - 1)) < 1e-3
    # outside the support (Clayton with theta < 0) both vanish
    assert np.all(np.abs(fd[~pos]) < 1e-12)


@pytest.mark.parametrize("m", TRIVARIATE, ids=ids)
def test_trivariate_density_matches_cdf(m):
    pts = interior_grid(3)
    dens = C.copula_density(m, pts)
    with mp.workdps(40):
        fd = np.array([float(mp_density_fd(m, p)) for p in pts])
    assert np.max(np.abs(fd / dens - 1)) < 1e-3


@pytest.mark.parametrize("m", TRIVARIATE, ids=ids)
def test_trivariate_cdf_matches_oracle(m):
    pts = np.random.default_rng(8).uniform(0.01, 0.99, (200, 3))
    with mp.workdps(30):
        oracle = np.array([float(mp_cdf(m, p)) for p in pts])
    assert np.allclose(cdf(m, pts), oracle, atol=1e-13)


@pytest.mark.parametrize("m", BIVARIATE, ids=ids)
def test_bivariate_density_integrates_to_one(m):
    f = lambda u, v: C.copula_density(m, np.stack([u, v], -1))
    assert gauss_legendre_2d(f, QuadratureConfig(order=64, panels=16)) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("m", TRIVARIATE, ids=ids)
def test_cond12_matches_cdf(m):
    pts = interior_grid(3, 5)
    h = 1e-4
    fd = 0
    for s1 in (1, -1):
        for s2 in (1, -1):
            q = pts.copy()
            q[:, 0] += s1 * h
            q[:, 1] += s2 * h
            fd = fd + s1 * s2 * cdf(m, q)
    fd = fd / (4 * h * h)
    assert np.allclose(C.copula_cond_12(m, pts), fd, rtol=1e-5, atol=1e-8)
    # u_Y = 1 gives the (L, K) margin density
    top = pts.copy()
    top[:, 2] = 1.0
    lk = C.margin(m, ("L", "K"))
    assert np.allclose(C.copula_cond_12(m, top), C.copula_density(lk, top[:, :2]), rtol=1e-10)


@pytest.mark.parametrize("m", BIVARIATE + TRIVARIATE, ids=ids)
def test_boundary_conditions(m):
    rng = np.random.default_rng(0)
    u = rng.uniform(0, 1, (10_000, m.dim))
    for j in range(m.dim):
        z = u.copy()
        z[:, j] = 0.0
        assert np.max(np.abs(cdf(m, z))) <= 1e-12
    if m.dim == 2:
        one = u.copy()
        one[:, 1] = 1.0
        assert np.max(np.abs(cdf(m, one) - u[:, 0])) <= 1e-12
        one = u.copy()
        one[:, 0] = 1.0
        assert np.max(np.abs(cdf(m, one) - u[:, 1])) <= 1e-12
    else:
        for pair, drop in ((("K", "Y"), 0), (("L", "Y"), 1), (("L", "K"), 2)):
            one = u.copy()
            one[:, drop] = 1.0
            keep = [i for i in range(3) if i != drop]
            assert np.max(np.abs(cdf(m, one) - cdf(C.margin(m, pair), u[:, keep]))) <= 1e-12


def test_gumbel_known_value():
    assert C.copula_cdf(CopulaModel("gumbel", 2, (2.0,)), [0.5, 0.5]) == pytest.approx(2 ** -math.sqrt(2), abs=1e-15)


@pytest.mark.parametrize("family,theta", [("gumbel", 2.5), ("clayton", 1.5), ("clayton", -0.5), ("frank", 5.0), ("frank", -3.0)])
def test_cdf_equals_generator_form(family, theta):
    g = C.Generator(family, theta)
    rng = np.random.default_rng(2)
    u = rng.uniform(0.01, 0.99, (500, 2))
    oracle = C.generator_inverse(g, C.generator(g, u[:, 0]) + C.generator(g, u[:, 1]))
    assert np.allclose(cdf(CopulaModel(family, 2, (theta,)), u), oracle, atol=1e-13)


def test_generator_properties():
    for g in (C.Generator("gumbel", 2.0), C.Generator("clayton", 2.0), C.Generator("frank", 3.0), C.Generator("clayton", -0.5)):
        assert C.generator(g, 1.0) == pytest.approx(0.0, abs=1e-15)
        u = np.linspace(0.05, 0.95, 19)
        assert np.allclose(C.generator_inverse(g, C.generator(g, u)), u, atol=1e-13)
    # pseudo-inverse: zero once t passes eta(0) = -1/theta
    g = C.Generator("clayton", -0.5)
    assert C.generator_inverse(g, 2.5) == 0.0
    with pytest.raises(C.CopulaDomainError):
        C.Generator("gumbel", 0.5)


def test_survival_clayton_relation():
    rng = np.random.default_rng(3)
    u = rng.uniform(0, 1, (10_000, 2))
    th = 3.43
    s = cdf(CopulaModel("sclayton", 2, (th,)), u)
    c = cdf(CopulaModel("clayton", 2, (th,)), 1 - u)
    assert np.max(np.abs(s - (u[:, 0] + u[:, 1] - 1 + c))) <= 1e-12


def test_asym_gumbel_reductions():
    rng = np.random.default_rng(4)
    u = rng.uniform(0, 1, (10_000, 2))
    g = cdf(CopulaModel("gumbel", 2, (3.0,)), u)
    a = cdf(CopulaModel("asym_gumbel", 2, (3.0, 1.0, 1.0)), u)
    assert np.max(np.abs(a - g)) <= 1e-12
    ind = cdf(CopulaModel("asym_gumbel", 2, (3.0, 0.0, 0.0)), u)
    assert np.max(np.abs(ind - u[:, 0] * u[:, 1])) <= 1e-12


def test_nested_equal_thetas_is_trivariate_gumbel():
    rng = np.random.default_rng(5)
    u = rng.uniform(0, 1, (10_000, 3))
    a = cdf(CopulaModel("nested_gumbel", 3, (2.5, 2.5)), u)
    b = cdf(CopulaModel("gumbel", 3, (2.5,)), u)
    assert np.max(np.abs(a - b)) <= 1e-12
    v = rng.uniform(0.01, 0.99, (1000, 3))
    da = C.copula_logpdf(CopulaModel("nested_gumbel", 3, (2.5, 2.5)), v)
    db = C.copula_logpdf(CopulaModel("gumbel", 3, (2.5,)), v)
    assert np.allclose(da, db, atol=1e-10)


def test_nested_margins():
    m = CopulaModel("nested_gumbel", 3, (2.89, 5.26))
    assert C.margin(m, ("L", "Y")) == CopulaModel("gumbel", 2, (5.26,))
    assert C.margin(m, ("Y", "L")) == CopulaModel("gumbel", 2, (5.26,))
    assert C.margin(m, ("L", "K")) == CopulaModel("gumbel", 2, (2.89,))
    assert C.margin(m, ("K", "Y")) == CopulaModel("gumbel", 2, (2.89,))
    with pytest.raises(C.CopulaDomainError):
        C.margin(m, ("L", "L"))


@pytest.mark.parametrize(
    "family,theta,tau,tol",
    [
        ("gumbel", 3.21, 0.688, 5e-4),
        ("gumbel", 5.30, 0.811, 5e-4),
        ("gumbel", 2.73, 0.634, 5e-4),
        ("sclayton", 3.43, 0.632, 5e-4),
        ("sclayton", 6.11, 0.753, 5e-4),
        ("sclayton", 2.59, 0.564, 5e-4),
        ("frank", 11.0, 0.691, 5e-4),
        ("frank", 21.2, 0.826, 5e-4),
        ("frank", 9.23, 0.644, 5e-4),
        ("frank", 14.14, 0.75, 1e-3),
        ("gumbel", 4.0, 0.75, 1e-3),
        ("clayton", 6.0, 0.75, 1e-3),
    ],
)
def test_kendall_tau_values(family, theta, tau, tol):
    assert C.kendall_tau(CopulaModel(family, 2, (theta,))) == pytest.approx(tau, abs=tol)


def test_tau_inversion_and_elliptical():
    for fam in ("gumbel", "clayton", "frank", "gaussian"):
        th = C.theta_for_tau(fam, 0.4)
        m = CopulaModel(fam, 2, (th,))
        assert C.kendall_tau(m) == pytest.approx(0.4, abs=1e-10)
    assert C.kendall_tau(CopulaModel("t3", 2, (math.sin(math.pi / 4),))) == pytest.approx(0.5, abs=1e-14)
    assert C.kendall_tau(CopulaModel("frank", 2, (-5.0,))) == pytest.approx(-C.kendall_tau(CopulaModel("frank", 2, (5.0,))), abs=1e-14)


def test_asym_tau_reduces_and_orders():
    assert C.kendall_tau(CopulaModel("asym_gumbel", 2, (3.0, 1.0, 1.0))) == pytest.approx(2 / 3, abs=1e-6)
    full = C.kendall_tau(CopulaModel("asym_gumbel", 2, (3.0, 0.9, 0.9)))
    weak = C.kendall_tau(CopulaModel("asym_gumbel", 2, (3.0, 0.5, 0.5)))
    assert 0 < weak < full < 2 / 3


def test_tau_by_pair_nested():
    taus = C.tau_by_pair(CopulaModel("nested_gumbel", 3, (2.89, 5.26)))
    assert taus["L-Y"] == pytest.approx(1 - 1 / 5.26)
    assert taus["L-K"] == pytest.approx(1 - 1 / 2.89)
    assert taus["K-Y"] == pytest.approx(1 - 1 / 2.89)


@pytest.mark.parametrize(
    "family,dim,params",
    [
        ("gumbel", 2, (0.9,)),
        ("frank", 2, (0.0,)),
        ("frank", 3, (-1.0,)),
        ("clayton", 2, (-1.5,)),
        ("clayton", 3, (-0.5,)),
        ("nested_gumbel", 3, (3.0, 2.0)),
        ("nested_gumbel", 2, (2.0, 3.0)),
        ("asym_gumbel", 2, (2.0, 1.2, 0.5)),
        ("gaussian", 2, (1.0,)),
        ("t3", 3, (0.5,)),
        ("bogus", 2, (1.0,)),
        ("gumbel", 4, (2.0,)),
    ],
)
def test_invalid_models(family, dim, params):
    with pytest.raises(C.CopulaDomainError):
        CopulaModel(family, dim, params)


def test_density_domain():
    m = CopulaModel("gumbel", 2, (2.0,))
    with pytest.raises(C.CopulaDomainError):
        C.copula_density(m, [0.0, 0.5])
    with pytest.raises(C.CopulaDomainError):
        C.copula_cdf(m, [0.5, 0.5, 0.5])


def test_model_serialization():
    m = CopulaModel.make("nested_gumbel", 3, theta1=2.89, theta2=5.26)
    d = m.to_dict()
    assert d["variable_order"] == ["L", "Y", "K"]
    assert d["params"] == {"theta1": 2.89, "theta2": 5.26}
    assert CopulaModel.from_dict(d) == m
    assert m.theta2 == 5.26 and m.k == 2
    assert C.independence(3).k == 0
