import math

import numpy as np
import pytest
from scipy import stats
from numpy.testing import assert_allclose

from reldep import copulas as cop
from reldep import local_dep as ld
from reldep.errors import DomainError, UndefinedValueError, UnsupportedFamilyError

GRID = np.linspace(0.1, 0.9, 9)
UU, VV = np.meshgrid(GRID, GRID, indexing="ij")


def build(fam, theta=None):
    return cop.make_copula(fam, theta=theta)


def test_independence_is_zero():
    m = build("independence")
    assert_allclose(ld.local_dependence(m, UU, VV), 0.0)
    assert_allclose(ld.relative_local_dependence(m, UU, VV, "numeric"), 0.0, atol=1e-8)


def test_mics_local_dependence_constant():
    assert_allclose(ld.local_dependence(build("mics", 2.5), UU, VV), 2.5)
    assert_allclose(ld.local_dependence(build("mics", 2.5), UU, VV, "numeric"), 2.5, rtol=1e-5)


def test_gaussian_center_value():
    m = cop.make_copula("gaussian", rho=0.5)
    assert_allclose(ld.local_dependence(m, 0.5, 0.5), 4 * math.pi / 3, rtol=1e-14)
    assert_allclose(ld.local_dependence(m, 0.5, 0.5, "numeric"), 4 * math.pi / 3, rtol=1e-6)


@pytest.mark.parametrize("theta", [-5, -1, 1, 3, 8])
def test_frank_constancy(theta):
    g = np.arange(1, 51) / 51
    uu, vv = np.meshgrid(g, g)
    m = build("frank", theta)
    for method in ("closed", "generator", "exponent"):
        r = ld.relative_local_dependence(m, uu, vv, method)
        assert np.ptp(r) < 1e-8
        assert_allclose(r, 2 * theta, atol=1e-8)


def test_clayton_examples():
    m = build("clayton", 2.0)
    expected = 10 / 3 * math.sqrt(7)
    for method in ("closed", "generator", "exponent"):
        assert_allclose(ld.relative_local_dependence(m, 0.5, 0.5, method), expected, rtol=1e-12)
    # r = 1.5 / C for theta = 1, which tends to 1.5 at the upper corner
    c1 = build("clayton", 1.0)
    assert_allclose(ld.relative_local_dependence(c1, 1 - 1e-9, 1 - 1e-9), 1.5, rtol=1e-8)


def test_fgm_diagonal_examples():
    m = build("fgm", 1.0)
    assert_allclose(ld.relative_local_dependence(m, 0.5, 0.5), 4.0)
    corner = ld.relative_local_dependence(m, 1e-7, 1e-7)
    assert_allclose(corner, 0.5, rtol=1e-5)
    prof = ld.diagonal_profile(build("fgm", 0.5), grid=[0.25, 0.5, 0.75])
    assert_allclose(prof.values[1], 2.0)


def test_gumbel_theta_one_is_independence():
    bundle = cop.generator(build("gumbel", 1.0))
    assert_allclose(ld.archimedean_r_from_generator(bundle, UU, VV), 0.0, atol=1e-12)


@pytest.mark.parametrize("fam,theta", [("frank", 3.0), ("frank", -2.0), ("clayton", 0.5),
                                       ("clayton", 4.0), ("gumbel", 2.0), ("gumbel", 1.5),
                                       ("amh", 0.7), ("amh", 0.3)])
def test_route_equivalence(fam, theta):
    m = build(fam, theta)
    gen = ld.relative_local_dependence(m, UU, VV, "generator")
    exp = ld.relative_local_dependence(m, UU, VV, "exponent")
    num = ld.relative_local_dependence(m, UU, VV, "numeric")
    assert_allclose(exp, gen, rtol=1e-10)
    assert_allclose(num, gen, rtol=1e-3, atol=1e-6)
    if ld.has_closed_form(m):
        assert_allclose(ld.relative_local_dependence(m, UU, VV, "closed"), gen, rtol=1e-10)


def test_gumbel_exponent_vs_numeric_example():
    m = build("gumbel", 2.0)
    r_a = ld.appendix_a_r(cop.generator(m), 0.5, 0.5)
    num = ld.numeric_local_dependence(m, 0.5, 0.5) / m.pdf(0.5, 0.5)
    assert_allclose(r_a, num, rtol=1e-3)


@pytest.mark.parametrize("fam,theta,relation", [
    ("mics", 2.0, lambda m, r: r * m.pdf(UU, VV) - 2.0),
    ("clayton", 3.0, lambda m, r: r * m.cdf(UU, VV) - 3 * 7 / 4),
    ("fgm", 0.7, lambda m, r: r * m.pdf(UU, VV) ** 3 - 2.8),
])
def test_table_relations(fam, theta, relation):
    m = build(fam, theta)
    assert np.max(np.abs(relation(m, ld.relative_local_dependence(m, UU, VV)))) < 1e-6


@pytest.mark.parametrize("fam,theta", [("frank", 2.0), ("clayton", 1.0), ("fgm", 0.4),
                                       ("mics", 1.5)])
def test_positive_parameter_gives_positive_r(fam, theta):
    assert np.all(ld.relative_local_dependence(build(fam, theta), UU, VV) > 0)


def test_boundary_is_rejected():
    with pytest.raises(DomainError):
        ld.local_dependence(build("frank", 3.0), 0.0, 0.5)
    with pytest.raises(DomainError):
        ld.relative_local_dependence(build("frank", 3.0), 0.5, 1.0)


class _Degenerate(cop.Copula):
    family = "degenerate"

    def _cdf(self, u, v):
        return np.minimum(u, v)

    def _pdf(self, u, v):
        return np.zeros(np.broadcast(u, v).shape)


def test_zero_density_is_undefined():
    with pytest.raises(UndefinedValueError):
        ld.relative_local_dependence(_Degenerate(), 0.3, 0.6, "numeric")


def test_closed_form_missing():
    with pytest.raises(UnsupportedFamilyError):
        ld.relative_local_dependence(build("gumbel", 2.0), 0.5, 0.5, "closed")


def test_generator_route_needs_archimedean():
    with pytest.raises(UnsupportedFamilyError):
        ld.relative_local_dependence(cop.make_copula("gaussian", rho=0.3), 0.5, 0.5, "generator")


def test_diagonal_profile_csv(tmp_path):
    prof = ld.diagonal_profile(build("frank", 3.0), grid=np.linspace(0.1, 0.9, 5))
    prof.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "u,value"
    assert len(lines) == 6
    with pytest.raises(DomainError):
        ld.diagonal_profile(build("frank", 3.0), grid=[0.5, 0.4])


@pytest.mark.parametrize("theta", [1.0, 2.0])
def test_clayton_tail_rate(theta):
    rate = ld.tail_rate(build("clayton", theta))
    const = theta * (1 + 2 * theta) / (1 + theta) * 2 ** (1 / theta)
    assert abs(rate.slope + 1) < 0.05
    assert_allclose(rate.constant, const, rtol=0.02)
    assert not rate.truncated


def test_frank_tail_rate_flat():
    assert abs(ld.tail_rate(build("frank", 3.0)).slope) < 1e-6


@pytest.mark.parametrize("fam,theta,expected,tol", [
    ("clayton", 1.0, 0.5, 0.005),
    ("clayton", 2.0, 2 ** -0.5, 0.007),
    ("fgm", 1.0, 0.0, 1e-3),
    ("independence", None, 0.0, 1e-3),
    ("frank", 3.0, 0.0, 1e-3),
])
def test_lower_tail_dependence(fam, theta, expected, tol):
    assert abs(ld.lower_tail_dependence(build(fam, theta)).value - expected) < tol


def test_invariance_identity_margins():
    rep = ld.invariance_check(build("clayton", 2.0), stats.uniform(), stats.uniform(),
                              np.linspace(0.2, 0.8, 4))
    assert rep.max_discrepancy < 1e-6


def test_invariance_normal_margins():
    rep = ld.invariance_check(build("frank", 3.0), stats.norm(), stats.norm())
    assert rep.max_discrepancy < 1e-2
    assert_allclose(rep.r_joint, 6.0, rtol=1e-2)
    # i itself is not invariant but rescales by the marginal densities
    assert rep.i_relation_discrepancy < 1e-3
    assert not np.allclose(rep.i_joint, rep.i_copula, rtol=0.1)
