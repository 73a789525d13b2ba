import csv
import math

import numpy as np
import pytest
from scipy import integrate

from prodcopula import copulas, ingest, prodfn, sampling
from prodcopula.copulas import CopulaModel
from prodcopula.marginals import gb2_quantile
from prodcopula.numerics import QuadratureConfig

CD = prodfn.CDParams(2.160, 0.183, 0.788)
MARGINS = ingest.default_marginals()
NESTED = CopulaModel("nested_gumbel", 3, (2.89, 5.26))


def test_cd_eval_example():
    assert prodfn.cd_eval(100.0, 100.0, CD) == pytest.approx(2.160 * 100 ** 0.971, rel=1e-14)
    assert prodfn.cd_eval(100.0, 100.0, CD) == pytest.approx(188.996, abs=1e-3)
    with pytest.raises(ValueError):
        prodfn.cd_eval(-1.0, 2.0, CD)


def test_ces_eval_formula_and_limit():
    p = prodfn.CESParams(1.7, 0.3, 0.6, 0.9)
    L, K = 40.0, 250.0
    direct = 1.7 * (0.3 * L ** (0.9 * 0.6) + 0.7 * K ** (0.9 * 0.6)) ** (1 / 0.6)
    assert prodfn.ces_eval(L, K, p) == pytest.approx(direct, rel=1e-13)
    rng = np.random.default_rng(0)
    L = np.exp(rng.uniform(0, 12, 100))
    K = np.exp(rng.uniform(0, 12, 100))
    for gamma, c in ((0.3, 0.95), (0.8, 1.1)):
        ces = prodfn.ces_eval(L, K, prodfn.CESParams(2.0, gamma, 1e-8, c))
        cd = prodfn.cd_eval(L, K, prodfn.CDParams(2.0, c * (1 - gamma), c * gamma))
        assert np.max(np.abs(ces / cd - 1)) < 1e-5
    with pytest.raises(ValueError):
        prodfn.CESParams(1.0, 0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        prodfn.CESParams(1.0, 1.5, 0.5, 1.0)


def test_production_dict_round_trip():
    for fn in (CD, prodfn.CESParams(1.2, 0.4, -0.3, 1.0)):
        assert prodfn.production_from_dict(fn.to_dict()) == fn
    assert CD.to_dict()["returns_to_scale"] == pytest.approx(0.971)


def _cd_data(n=300, seed=0):
    rng = np.random.default_rng(seed)
    L = np.exp(rng.uniform(1, 10, n))
    K = np.exp(rng.uniform(1, 10, n))
    return np.column_stack([L, K, prodfn.cd_eval(L, K, CD)])


def test_fit_cd_exact_and_orthogonal():
    x = _cd_data()
    fit = prodfn.fit_cd(x)
    assert fit.A == pytest.approx(CD.A, abs=1e-10)
    assert fit.alpha == pytest.approx(CD.alpha, abs=1e-10)
    assert fit.beta == pytest.approx(CD.beta, abs=1e-10)
    rng = np.random.default_rng(1)
    x[:, 2] *= np.exp(rng.normal(0, 0.3, x.shape[0]))
    fit = prodfn.fit_cd(x)
    X = np.column_stack([np.ones(len(x)), np.log(x[:, 1]), np.log(x[:, 0])])
    resid = np.log(x[:, 2]) - np.log(prodfn.cd_eval(x[:, 0], x[:, 1], fit))
    assert np.max(np.abs(X.T @ resid)) < 1e-10 * len(x) * 10


def test_fit_cd_errors():
    x = _cd_data(50)
    x[:, 1] = x[:, 0] ** 2
    with pytest.raises(prodfn.ProductionFitError):
        prodfn.fit_cd(x)
    with pytest.raises(ValueError):
        prodfn.fit_cd(_cd_data(5))
    bad = _cd_data(20)
    bad[3, 2] = -1.0
    with pytest.raises(ValueError):
        prodfn.fit_cd(bad)


def test_fit_ces_recovers_noiseless_parameters():
    true = prodfn.CESParams(1.8, 0.35, 0.4, 0.97)
    rng = np.random.default_rng(2)
    L = np.exp(rng.uniform(1, 9, 400))
    K = np.exp(rng.uniform(1, 9, 400))
    x = np.column_stack([L, K, prodfn.ces_eval(L, K, true)])
    fit = prodfn.fit_ces(x)
    for a, b in ((fit.A, true.A), (fit.gamma, true.gamma), (fit.p, true.p), (fit.c, true.c)):
        assert a == pytest.approx(b, abs=1e-4)
    resid = np.log(x[:, 2]) - np.log(prodfn.ces_eval(L, K, fit))
    assert np.max(np.abs(resid)) < 1e-6


def test_conditional_pdf_independence_is_marginal():
    from prodcopula.marginals import gb2_pdf

    Y = np.geomspace(100, 1e5, 7)
    got = prodfn.conditional_value_added_pdf(3000.0, 8000.0, Y, MARGINS, copulas.independence(3))
    assert np.allclose(got, gb2_pdf(Y, MARGINS.value_added), rtol=1e-14)


@pytest.mark.parametrize("uL", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("uK", [0.1, 0.5, 0.9])
def test_conditional_pdf_normalized(uL, uK):
    L = gb2_quantile(uL, MARGINS.labor)
    K = gb2_quantile(uK, MARGINS.capital)
    x0 = MARGINS.value_added.x0

    def f(t):
        y = x0 * math.exp(t)
        return prodfn.conditional_value_added_pdf(L, K, y, MARGINS, NESTED) * y

    total = integrate.quad(f, -60, 60, limit=400, epsabs=1e-10, epsrel=1e-10, points=[-5, 0, 5])[0]
    assert total == pytest.approx(1.0, abs=1e-4)


def test_conditional_mean_increases_with_labor():
    K = gb2_quantile(0.5, MARGINS.capital)
    x0 = MARGINS.value_added.x0

    def mean_log(L):
        f = lambda t: t * prodfn.conditional_value_added_pdf(L, K, x0 * math.exp(t), MARGINS, NESTED) * x0 * math.exp(t)
        return integrate.quad(f, -60, 60, limit=400, points=[-5, 0, 5])[0]

    ls = [gb2_quantile(u, MARGINS.labor) for u in (0.2, 0.5, 0.8)]
    m = [mean_log(L) for L in ls]
    assert m[0] < m[1] < m[2]


def test_ratio_ccdf_basic_properties():
    xi = np.linspace(1.0, 4.0, 20)
    up = prodfn.ratio_ccdf_copula(xi, "upper", MARGINS, NESTED, CD)
    assert up[0] == 1.0
    assert np.all(np.diff(up) <= 1e-12)
    assert prodfn.ratio_ccdf_random(1.0, "upper", MARGINS, CD) == 1.0
    lo = prodfn.ratio_ccdf_copula(np.linspace(0.05, 1.0, 20), "lower", MARGINS, NESTED, CD)
    assert lo[-1] == 0.0
    assert np.all(np.diff(lo) <= 1e-12)
    with pytest.raises(ValueError):
        prodfn.ratio_ccdf_copula(0.5, "upper", MARGINS, NESTED, CD)
    with pytest.raises(ValueError):
        prodfn.ratio_ccdf_copula(1.5, "lower", MARGINS, NESTED, CD)
    with pytest.raises(ValueError):
        prodfn.ratio_ccdf_copula(1.5, "middle", MARGINS, NESTED, CD)


def test_ratio_ccdf_independence_equals_random():
    xi = np.linspace(1.0, 5.0, 10)
    a = prodfn.ratio_ccdf_copula(xi, "upper", MARGINS, copulas.independence(3), CD)
    b = prodfn.ratio_ccdf_random(xi, "upper", MARGINS, CD)
    assert np.max(np.abs(a - b)) < 1e-6


def test_ratio_ccdf_quadrature_converged():
    xi = np.array([1.3, 1.5, 2.0, 3.0])
    q = prodfn.RATIO_QUADRATURE
    a = prodfn.ratio_ccdf_copula(xi, "upper", MARGINS, NESTED, CD, q)
    b = prodfn.ratio_ccdf_copula(xi, "upper", MARGINS, NESTED, CD, QuadratureConfig(2 * q.order, q.edge_clip, q.panels))
    assert np.max(np.abs(a - b)) < 1e-4


def test_ratio_ccdf_matches_simulation_and_random_dominates():
    data = sampling.simulate_firms(sampling.SimulationSpec(100_000, NESTED, MARGINS, seed=3))
    x = data.matrix
    r = x[:, 2] / prodfn.cd_eval(x[:, 0], x[:, 1], CD)
    xi = np.array([1.0, 1.3, 1.5, 2.0, 3.0])
    model = prodfn.ratio_ccdf_copula(xi, "upper", MARGINS, NESTED, CD)
    assert np.max(np.abs(model - prodfn.empirical_ratio_ccdf(r, xi, "upper"))) < 0.01
    xl = np.array([0.2, 0.5, 0.8])
    lo = prodfn.ratio_ccdf_copula(xl, "lower", MARGINS, NESTED, CD)
    assert np.max(np.abs(lo - prodfn.empirical_ratio_ccdf(r, xl, "lower"))) < 0.01
    big = np.array([3.0, 5.0, 10.0])
    assert np.all(prodfn.ratio_ccdf_random(big, "upper", MARGINS, CD) > prodfn.ratio_ccdf_copula(big, "upper", MARGINS, NESTED, CD))


def test_histogram_examples(tmp_path):
    x = _cd_data(100)
    h = prodfn.ratio_histogram(x, CD)
    assert h.counts.sum() == 100 and h.counts[10] == 100
    assert h.edges[10] == pytest.approx(1.0)
    h = prodfn.histogram_of_ratios([0.5, 1.5])
    assert h.exceedance["upper:50"] == (1, 1)
    assert h.exceedance["lower:50"] == (1, 1)
    assert h.exceedance["upper:30"] == (1, 1)
    assert len(h.summary_lines()) == 4
    assert h.summary_lines()[0].startswith("100% of 1 upper-side firms")


def test_histogram_matches_recount():
    data = ingest.synth_dataset(1360, seed=5)
    fn = prodfn.fit_cd(data)
    h = prodfn.ratio_histogram(data, fn)
    x = data.matrix
    r = x[:, 2] / prodfn.cd_eval(x[:, 0], x[:, 1], fn)
    assert h.counts.sum() == 1360
    for t in (30, 50):
        up = [v for v in r if v > 1]
        lo = [v for v in r if v < 1]
        assert h.exceedance[f"upper:{t}"] == (sum(v >= 1 + t / 100 for v in up), len(up))
        assert h.exceedance[f"lower:{t}"] == (sum(v <= 1 - t / 100 for v in lo), len(lo))


def test_write_curve_csv(tmp_path):
    path = tmp_path / "c.csv"
    prodfn.write_curve_csv(path, [1.0, 2.0], [1.0, 0.25])
    rows = list(csv.reader(open(path)))
    assert rows == [["xi", "value"], ["1.0", "1.0"], ["2.0", "0.25"]]
