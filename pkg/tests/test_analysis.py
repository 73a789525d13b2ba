import itertools
import json

import numpy as np
import pytest

from prodcopula import analysis, copulas, fitting, sampling
from prodcopula.copulas import CopulaModel

from oracles import tau_b

NESTED = CopulaModel("nested_gumbel", 3, (2.89, 5.26))


def _spearman_oracle(x, y):
    def ranks(v):
        return np.array([np.sum(v < a) + (np.sum(v == a) + 1) / 2 for a in v])

    rx, ry = ranks(np.asarray(x)), ranks(np.asarray(y))
    rx, ry = rx - rx.mean(), ry - ry.mean()
    return float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))


def test_empirical_copula_hand_count():
    pts = np.array([[0.2, 0.6], [0.4, 0.2], [0.6, 0.8], [0.8, 0.4]])
    ps = fitting.PseudoSample(pts, "rank", ("a", "b"))
    g = [0.0, 0.5, 1.0]
    field = analysis.empirical_copula(ps, g)
    want = np.array([[0, 0, 0], [0, 1, 2], [0, 2, 4]]) / 4
    assert np.array_equal(field.values, want)
    assert field.values[-1, -1] == 1.0


def test_empirical_copula_trivariate_matches_pointwise():
    ps = fitting.make_pseudo(np.random.default_rng(0).normal(size=(50, 3)))
    g = np.linspace(0, 1, 6)
    field = analysis.empirical_copula(ps, g)
    pts = np.array(list(itertools.product(g, g, g)))
    assert np.allclose(field.values.ravel(), analysis.empirical_cdf_at(ps.points, pts))
    assert field.values[-1, -1, -1] == 1.0
    assert np.all(field.values[0] == 0)


def test_empirical_copula_converges_to_model():
    n = 20_000
    u = sampling.sample_copula(sampling.SimulationSpec(n, CopulaModel("gumbel", 2, (3.0,)), seed=1))
    ps = fitting.PseudoSample(u, "rank", ("K", "Y"))
    g = np.linspace(0.05, 0.95, 21)
    emp = analysis.empirical_copula(ps, g).values
    U, V = np.meshgrid(g, g, indexing="ij")
    model = copulas.copula_cdf(CopulaModel("gumbel", 2, (3.0,)), np.stack([U, V], -1))
    assert np.max(np.abs(emp - model)) < 2 / np.sqrt(n)


def test_spearman_examples():
    x = np.arange(10.0)
    assert analysis.spearman_rho(x, x) == pytest.approx(1.0)
    assert analysis.spearman_rho(x, -x**3) == pytest.approx(-1.0)
    a, b = [1.0, 2.0, 3.0, 4.0, 5.0], [2.0, 1.0, 4.0, 3.0, 5.0]
    assert analysis.spearman_rho(a, b) == pytest.approx(_spearman_oracle(a, b), abs=1e-15)
    assert analysis.spearman_rho(a, b) == pytest.approx(1 - 6 * 4 / (5 * 24), abs=1e-15)
    with pytest.raises(ValueError):
        analysis.spearman_rho([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        analysis.spearman_rho([1.0], [1.0])


def test_kendall_tau_examples():
    x = np.arange(8.0)
    assert analysis.kendall_tau_sample(x, x) == pytest.approx(1.0, abs=1e-15)
    a = [1.0, 2.0, 2.0, 3.0, 4.0, 5.0]
    b = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0]
    assert analysis.kendall_tau_sample(a, b) == pytest.approx(tau_b(a, b), abs=1e-15)
    with pytest.raises(ValueError):
        analysis.kendall_tau_sample([2.0, 2.0], [1.0, 2.0])


def test_kendall_tau_matches_quadratic_oracle():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(3, 25))
        x = rng.integers(0, 6, n).astype(float)
        y = x + rng.integers(-3, 4, n)
        if np.all(x == x[0]) or np.all(y == y[0]):
            continue
        assert analysis.kendall_tau_sample(x, y) == pytest.approx(tau_b(x, y), abs=1e-14)


def test_kendall_tau_null():
    rng = np.random.default_rng(4)
    n = 10_000
    assert abs(analysis.kendall_tau_sample(rng.uniform(size=n), rng.uniform(size=n))) < 3 * analysis.kendall_tau_se(n)


def test_cumulant_independence_and_boundaries():
    rng = np.random.default_rng(5)
    u = rng.uniform(size=(1000, 3))
    assert np.max(np.abs(analysis.copula_cumulant(copulas.independence(3), u))) < 1e-15
    for model in (NESTED, CopulaModel("frank", 3, (6.0,)), CopulaModel("sclayton", 3, (2.0,))):
        for j in range(3):
            for edge in (0.0, 1.0):
                v = u.copy()
                v[:, j] = edge
                assert np.max(np.abs(analysis.copula_cumulant(model, v))) < 1e-12


def test_cumulant_one_dependent_pair():
    lk = CopulaModel("gumbel", 2, (3.0,))

    def c3(v):
        return v[:, 2] * copulas.copula_cdf(lk, v[:, :2])

    u = np.random.default_rng(6).uniform(size=(1000, 3))
    omega = analysis.cumulant_from_cdfs(c3, lambda v: v[:, 0] * v[:, 1], lambda v: v[:, 0] * v[:, 1], lambda v: copulas.copula_cdf(lk, v), u)
    assert np.max(np.abs(omega)) < 1e-15


def test_cumulant_nested_equal_params_matches_gumbel():
    u = np.random.default_rng(7).uniform(0.01, 0.99, (1000, 3))
    a = analysis.copula_cumulant(CopulaModel("nested_gumbel", 3, (3.0, 3.0)), u)
    b = analysis.copula_cumulant(CopulaModel("gumbel", 3, (3.0,)), u)
    assert np.max(np.abs(a - b)) < 1e-12
    assert np.max(np.abs(a)) > 1e-3


def test_cumulant_empirical_boundary_and_errors():
    ps = fitting.make_pseudo(np.random.default_rng(8).normal(size=(200, 3)))
    assert analysis.copula_cumulant(ps, [1.0, 1.0, 1.0]) == pytest.approx(0.0, abs=1e-12)
    assert analysis.copula_cumulant(ps, [0.0, 0.3, 0.7]) == 0.0
    with pytest.raises(TypeError):
        analysis.copula_cumulant(np.zeros((3, 3)), [0.5, 0.5, 0.5])
    with pytest.raises(ValueError):
        analysis.copula_cumulant(CopulaModel("gumbel", 2, (2.0,)), [0.5, 0.5, 0.5])


def test_cumulant_diagonal_model_vs_simulation():
    u = sampling.sample_copula(sampling.SimulationSpec(100_000, NESTED, seed=0))
    emp = analysis.cumulant_diagonal(fitting.PseudoSample(u, "rank", ("L", "K", "Y")))
    mod = analysis.cumulant_diagonal(NESTED)
    assert mod.values[0] == 0.0 and abs(mod.values[-1]) < 1e-12
    assert np.max(np.abs(emp.values - mod.values)) < 0.005


def test_cumulant_sections(tmp_path):
    out = analysis.cumulant_sections(copulas.independence(3))
    assert set(out) == {"A", "B", "C", "D", "diagonal"}
    for f in out.values():
        assert np.max(np.abs(f.values)) < 1e-15
    secs = analysis.cumulant_sections(NESTED, grid=np.linspace(0, 1, 5))
    assert secs["A"].values.shape == (5, 5)
    # section D ties u_L = u_K, so its diagonal equals the cube diagonal
    assert np.allclose(np.diag(secs["D"].values), secs["diagonal"].values, atol=1e-15)
    with pytest.raises(ValueError):
        analysis.cumulant_sections(NESTED, [analysis.Section("bad", ("L", "K"))])
    path = tmp_path / "a.csv"
    secs["A"].to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "u_L,u_K,value" and len(lines) == 26
    secs["A"].to_json(tmp_path / "a.json")
    assert json.loads((tmp_path / "a.json").read_text())["label"] == "cumulant section A"


def test_grid_field_validation():
    with pytest.raises(ValueError):
        analysis.GridField([[0.0, 0.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        analysis.GridField([[0.0, 1.0]], [1.0, 2.0, 3.0])
