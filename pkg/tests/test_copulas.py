import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from reldep import copulas as cop
from reldep.errors import DomainError, UnsupportedFamilyError
from reldep.numerics import RngStream

MODELS = [
    ("independence", None),
    ("frank", 3.0),
    ("frank", -5.0),
    ("clayton", 2.0),
    ("clayton", 0.5),
    ("gumbel", 2.0),
    ("amh", 0.7),
    ("fgm", 1.0),
    ("fgm", -0.6),
    ("gaussian", 0.5),
    ("mics", 2.0),
]


def build(fam, theta):
    return cop.make_copula(fam, theta=theta)


@pytest.fixture(scope="module", params=MODELS, ids=lambda p: f"{p[0]}-{p[1]}")
def model(request):
    return build(*request.param)


unit = st.floats(0.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(u=unit, v=unit)
@pytest.mark.parametrize("fam,theta", MODELS)
def test_frechet_bounds(fam, theta, u, v):
    m = build(fam, theta)
    c = m.cdf(u, v)
    assert max(0.0, u + v - 1) - 1e-12 <= c <= min(u, v) + 1e-12


@settings(max_examples=30, deadline=None)
@given(a=st.tuples(unit, unit), b=st.tuples(unit, unit))
@pytest.mark.parametrize("fam,theta", MODELS)
def test_two_increasing(fam, theta, a, b):
    m = build(fam, theta)
    u1, u2 = sorted((a[0], b[0]))
    v1, v2 = sorted((a[1], b[1]))
    mass = m.cdf(u2, v2) - m.cdf(u1, v2) - m.cdf(u2, v1) + m.cdf(u1, v1)
    assert mass >= -1e-12


def test_uniform_margins(model):
    g = np.linspace(0, 1, 11)
    assert_allclose(model.cdf(g, 1.0), g, atol=1e-10)
    assert_allclose(model.cdf(1.0, g), g, atol=1e-10)
    assert_allclose(model.cdf(g, 0.0), 0.0, atol=1e-15)


def test_pdf_matches_cdf_difference(model):
    g = np.linspace(0.1, 0.9, 9)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    h = 1e-4
    fd = (model.cdf(uu + h, vv + h) - model.cdf(uu + h, vv - h)
          - model.cdf(uu - h, vv + h) + model.cdf(uu - h, vv - h)) / (4 * h * h)
    assert_allclose(fd, model.pdf(uu, vv), rtol=1e-4)


def test_conditional_cdf_is_derivative_of_cdf(model):
    u, v, h = 0.35, np.linspace(0.05, 0.95, 7), 1e-6
    fd = (model.cdf(u + h, v) - model.cdf(u - h, v)) / (2 * h)
    assert_allclose(model.conditional_cdf(v, u), fd, atol=1e-6)


def test_conditional_ppf_inverts_conditional_cdf(model):
    p = np.array([0.05, 0.3, 0.5, 0.8, 0.97])
    v = model.conditional_ppf(p, 0.6)
    assert_allclose(model.conditional_cdf(v, 0.6), p, atol=1e-9)


@pytest.mark.parametrize("fam,theta,u,v,expected", [
    ("frank", 3.0, 0.4, 1.0, 0.4),
    ("clayton", 2.0, 0.5, 0.5, 7**-0.5),
    ("fgm", 1.0, 0.5, 0.5, 0.3125),
    ("independence", None, 0.3, 0.6, 0.18),
])
def test_cdf_examples(fam, theta, u, v, expected):
    assert_allclose(build(fam, theta).cdf(u, v), expected, rtol=1e-12)


def test_pdf_examples():
    assert build("independence", None).pdf(0.2, 0.7) == 1.0
    assert_allclose(build("fgm", 1.0).pdf(0.5, 0.5), 1.0)
    assert_allclose(cop.make_copula("gaussian", rho=0.5).pdf(0.5, 0.5), 2 / math.sqrt(3),
                    rtol=1e-14)


def test_conditional_examples():
    assert_allclose(build("independence", None).conditional_cdf(0.3, 0.8), 0.3)
    assert_allclose(build("fgm", 1.0).conditional_cdf(0.5, 0.5), 0.5)


def test_out_of_square_is_rejected():
    m = build("frank", 3.0)
    with pytest.raises(DomainError):
        m.cdf(1.2, 0.5)
    with pytest.raises(DomainError):
        build("clayton", 2.0).pdf(0.0, 0.5)


@pytest.mark.parametrize("fam,theta", [("clayton", 0.0), ("fgm", 1.5), ("amh", 1.0),
                                       ("gumbel", 0.9), ("frank", 0.0)])
def test_parameter_domains(fam, theta):
    with pytest.raises(DomainError):
        build(fam, theta)


def test_unknown_family():
    with pytest.raises(UnsupportedFamilyError):
        cop.make_copula("student", theta=1)


def test_generator_examples():
    assert_allclose(cop.generator(build("frank", 3.0)).psi(0.0), 1.0)
    clayton = cop.generator(build("clayton", 2.0))
    assert_allclose(clayton.psi_inverse(0.5), 3.0)
    with pytest.raises(UnsupportedFamilyError):
        cop.generator(build("fgm", 0.5))


@pytest.mark.parametrize("fam,theta", [("frank", 3.0), ("clayton", 2.0), ("gumbel", 2.0),
                                       ("amh", 0.7)])
def test_generator_derivatives_match_finite_differences(fam, theta):
    g = cop.generator(build(fam, theta))
    t, h = np.array([0.3, 1.0, 2.5]), 1e-5
    for k in range(1, 5):
        fd = (g.d(k - 1, t + h) - g.d(k - 1, t - h)) / (2 * h) if k > 1 else \
            (g.psi(t + h) - g.psi(t - h)) / (2 * h)
        assert_allclose(g.d(k, t), fd, rtol=1e-5)


@pytest.mark.parametrize("fam,theta", [("frank", 3.0), ("clayton", 2.0), ("gumbel", 2.0),
                                       ("amh", 0.7)])
def test_exponent_form_consistent_with_generator(fam, theta):
    g = cop.generator(build(fam, theta))
    t = np.array([0.2, 0.9, 3.0])
    A1 = g.A(1, t)
    A2 = g.A(2, t)
    assert_allclose(A1, g.d(1, t) / g.psi(t), rtol=1e-12)
    assert_allclose(A2 + A1**2, g.d(2, t) / g.psi(t), rtol=1e-12)


def test_sample_is_reproducible_and_uniform(model):
    a = model.sample(2000, RngStream(5, 0))
    b = model.sample(2000, RngStream(5, 0))
    assert_allclose(a.points, b.points, rtol=0)
    assert np.all((a.points > 0) & (a.points < 1))
    assert a.margin_check()["uniform"]


def test_sample_recovers_kendall_tau():
    from scipy import stats

    s = build("clayton", 2.0).sample(4000, RngStream(3, 0))
    tau = stats.kendalltau(s.u, s.v).statistic
    assert abs(tau - 0.5) < 0.03


def test_sample_csv_round_trip(tmp_path):
    s = build("frank", 3.0).sample(50, RngStream(5, 2))
    path = tmp_path / "s.csv"
    s.to_csv(path)
    back = cop.SampleSet.from_csv(path)
    assert_allclose(back.points, s.points, rtol=0)
    assert (tmp_path / "s.csv.json").exists()
    assert path.read_bytes().count(b"\r") == 0


@pytest.mark.parametrize("content,line", [("", 1), ("a,b\n1,2\n", 1), ("u,v\n0.1,0.2\n0.3\n", 3),
                                          ("u,v\n0.1,zz\n", 2)])
def test_sample_parse_errors(tmp_path, content, line):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(cop.SampleParseError) as exc:
        cop.SampleSet.from_csv(path)
    assert exc.value.line == line


def test_mics_density_uniform_at_zero():
    g = cop.mics_density(0.0, 8)
    assert_allclose(g.density.values, 1.0, rtol=1e-12)


@pytest.mark.parametrize("theta", [-3.0, 2.0, 6.0])
def test_mics_density_margins_and_log_odds(theta):
    n = 12
    m = cop.mics_density(theta, n).masses
    assert_allclose(m.sum(axis=0), 1 / n, atol=1e-10)
    assert_allclose(m.sum(axis=1), 1 / n, atol=1e-10)
    lo = np.log(m[:-1, :-1] * m[1:, 1:] / (m[1:, :-1] * m[:-1, 1:]))
    assert_allclose(lo, theta / n**2, rtol=1e-10)


def test_sinkhorn_reports_non_convergence():
    from reldep.errors import ConvergenceError

    K = np.exp(40 * np.outer(np.linspace(0, 1, 6), np.linspace(0, 1, 6)))
    w = np.full(6, 1 / 6)
    with pytest.raises(ConvergenceError) as exc:
        cop.sinkhorn(K, w, w, tol=1e-14, max_iter=3)
    assert exc.value.residual > 0


def test_mics_model_has_uniform_margins_and_constant_i():
    m = cop.make_copula("mics", theta=2.5)
    g = np.linspace(0.1, 0.9, 5)
    assert_allclose(m.cdf(g, 1.0), g, atol=1e-10)
    uu, vv = np.meshgrid(g, g)
    ratio = m.pdf(uu, vv) / (m.a(uu) * m.b(vv) * np.exp(2.5 * uu * vv))
    assert_allclose(ratio, 1.0, rtol=1e-12)


def test_model_dict_round_trip():
    m = build("gumbel", 2.0)
    assert cop.model_from_dict(m.to_dict()) == m
