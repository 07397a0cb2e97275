import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phiflow import expfamily as E
from phiflow.space import Density, WeightedSpace

from conftest import calc_for

SP = WeightedSpace.segment(-10, 10, 1024)


def gauss_family():
    return E.PhiExpFamily(SP, calc_for(1.0), ["x", "x2"], [-3, 0.05], [3, 3])


def bimodal():
    return Density.from_function(SP, lambda x: np.exp(-(x - 1.5) ** 2 / 0.5)
                                 + np.exp(-(x + 1) ** 2 / 0.8))


def kl(p, q, omega):
    """Plain relative entropy of two grid densities."""
    pos = p > 0
    return float(np.sum(p[pos] * np.log(p[pos] / q[pos]) * omega[pos]))


def pme_family():
    sp = WeightedSpace.segment(-1, 1, 512)
    return E.PhiExpFamily(sp, calc_for(1.5), ["x2"], [-1.0], [1.8])


def test_standard_normal_normalizer():
    assert E.partition_lambda(gauss_family(), [0.0, 0.5]) == pytest.approx(
        -math.log(math.sqrt(2 * math.pi)), abs=1e-10)


def test_zero_parameter_on_unit_interval():
    fam = E.PhiExpFamily(WeightedSpace.segment(0, 1, 64), calc_for(1.2), ["x"], [-1], [1])
    assert E.partition_lambda(fam, [0.0]) == pytest.approx(0.0, abs=1e-10)


@given(xi1=st.floats(-2, 2), xi2=st.floats(0.1, 2.5))
@settings(max_examples=30)
def test_members_have_unit_mass(xi1, xi2):
    fam = gauss_family()
    rho = fam.density_values([xi1, xi2])
    assert float(rho @ SP.omega) == pytest.approx(1.0, abs=1e-9)


def test_outside_family():
    fam = E.PhiExpFamily(WeightedSpace.segment(0, 1, 64), calc_for(0.9), ["x"], [-1], [1])
    # phi_0.9 has a finite blow-up level: exp_phi cannot reach mass one for large xi
    with pytest.raises(E.OutsideFamilyError):
        E.partition_lambda(fam, [-1e6])


def test_bad_box():
    with pytest.raises(ValueError):
        E.PhiExpFamily(SP, calc_for(1.0), ["x"], [1.0], [0.0])
    with pytest.raises(ValueError):
        E.PhiExpFamily(SP, calc_for(1.0), ["x", "x2", "x3", "x4"], [0] * 4, [1] * 4)


def test_gaussian_projection_matches_moments():
    fam = gauss_family()
    mu = bimodal()
    proj = E.bregman_project(fam, mu)
    m = mu.mean()
    v = mu.moment(lambda x: x * x) - m * m
    assert proj.xi == pytest.approx([-m / v, 1 / (2 * v)], abs=1e-9)
    assert proj.moment_residual <= 1e-12
    assert not proj.on_boundary and proj.full_support


def test_member_projects_to_itself():
    fam = gauss_family()
    proj = E.bregman_project(fam, fam.member([0.3, 0.7]))
    assert proj.xi == pytest.approx([0.3, 0.7], abs=1e-9)
    assert proj.divergence == pytest.approx(0.0, abs=1e-12)


def test_divergence_matches_plain_kl():
    fam = gauss_family()
    mu = bimodal()
    q = fam.density_values([0.2, 0.4])
    assert E.bregman_divergence(fam.calc, mu.rho, q, SP.omega) == pytest.approx(
        kl(mu.rho, q, SP.omega), abs=1e-12)


def test_pythagoras_two_routes():
    """The identity residual equals the defect of plain KL values."""
    fam = gauss_family()
    mu = bimodal()
    proj = E.bregman_project(fam, mu)
    om = SP.omega
    star = fam.density_values(proj.xi)
    for xi in fam.lattice(3):
        q = fam.density_values(xi)
        direct = abs(kl(mu.rho, q, om) - kl(mu.rho, star, om) - kl(star, q, om))
        assert direct <= 1e-10
        assert E.pythagoras_residual(fam, mu, xi, proj.xi) <= 1e-10


def test_sweep_gaussian():
    out = E.pythagoras_sweep(gauss_family(), bimodal(), 5)
    assert len(out["residuals"]) == 25
    assert out["max_residual"] <= 1e-10 and out["full_support"]


def test_sweep_porous_medium_family():
    fam = pme_family()
    mu = Density.from_function(fam.space, lambda x: np.maximum(1.5 - np.abs(x), 0))
    out = E.pythagoras_sweep(fam, mu, 9)
    assert not out["on_boundary"]
    assert out["moment_residual"] <= 1e-10
    assert out["max_residual"] <= 1e-10
    assert out["full_support"]


def test_compact_support_members_detected():
    fam = E.PhiExpFamily(WeightedSpace.segment(-1, 1, 512), calc_for(1.5), ["x2"], [-1.0], [2.0])
    assert fam.full_support([1.0])
    assert not fam.full_support([2.0])


def test_boundary_projection_warns_and_skips():
    fam = pme_family()
    mu = Density.from_function(fam.space, lambda x: np.maximum(0.8 - np.abs(x), 0))
    with pytest.warns(E.BoundaryWarning):
        out = E.pythagoras_sweep(fam, mu, 5)
    assert out["on_boundary"] and out["skipped"] and math.isnan(out["max_residual"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", E.BoundaryWarning)
        with pytest.raises(ValueError):
            E.pythagoras_residual(fam, mu, [0.5])


def test_lattice_shape_and_interior():
    fam = gauss_family()
    pts = fam.lattice(4)
    assert pts.shape == (16, 2)
    assert np.all(pts > fam.lower) and np.all(pts < fam.upper)


def test_custom_statistic():
    fam = E.PhiExpFamily(SP, calc_for(1.0), [lambda x: x ** 2], [0.1], [3.0])
    assert fam.names == ["<lambda>"]
    assert E.partition_lambda(fam, [0.5]) == pytest.approx(-math.log(math.sqrt(2 * math.pi)), abs=1e-10)
