import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from phiflow.phi_calculus import (INF, PhiCalculus, PhiFunction, dc_membership, exp_phi, h_phi,
                                  ln_phi, order_indices, psi_N, u_phi, verify_comparison_bounds)

from conftest import POWERS, calc_for


def closed_ln(m, t):
    return math.log(t) if m == 1 else (t ** (m - 1) - 1) / (m - 1)


def closed_u(m, r):
    return r * math.log(r) - r if m == 1 else (r ** m - m * r) / (m * (m - 1))


def hybrid_phi():
    s = np.logspace(-5, 5, 401)
    return PhiFunction.tabulated(s, np.where(s < 1, np.sqrt(s), s))


# -- point values -----------------------------------------------------------

def test_ln_of_e_is_one_for_phi1():
    assert ln_phi(calc_for(1.0), math.e) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("m", POWERS)
def test_ln_at_one_is_zero(m):
    assert ln_phi(calc_for(m), 1.0) == 0.0
    assert ln_phi(calc_for(m, "quadrature"), 1.0) == 0.0


def test_ln_phi_half_at_four():
    assert ln_phi(calc_for(0.5), 4.0) == pytest.approx(1.0, rel=1e-14)
    assert ln_phi(calc_for(0.5, "quadrature"), 4.0) == pytest.approx(1.0, rel=1e-10)


def test_exp_special_values():
    assert exp_phi(calc_for(1.0), 0.0) == 1.0
    assert exp_phi(calc_for(2.0), -2.0) == 0.0
    # inverse of ell_{1.5}: [1 + 0.5 * 3]^2
    assert exp_phi(calc_for(1.5), 3.0) == pytest.approx(6.25, rel=1e-14)
    assert exp_phi(calc_for(1.5, "quadrature"), 3.0) == pytest.approx(6.25, rel=1e-9)
    # L_{0.5} = 2, so 3 lies beyond the range of ln
    assert exp_phi(calc_for(0.5), 3.0) == INF
    assert exp_phi(calc_for(0.5, "quadrature"), 3.0) == INF


def test_u_values():
    assert u_phi(calc_for(1.0), 1.0) == pytest.approx(-1.0, rel=1e-15)
    for m in POWERS:
        assert u_phi(calc_for(m), 0.0) == 0.0
    expected = (2 ** 0.5 - 0.5 * 2) / (0.5 * (0.5 - 1))
    assert expected == pytest.approx(-1.656854, abs=1e-6)
    assert u_phi(calc_for(0.5), 2.0) == pytest.approx(expected, rel=1e-14)
    assert u_phi(calc_for(0.5, "quadrature"), 2.0) == pytest.approx(expected, rel=1e-10)


def test_h_shifts_by_sup_when_finite():
    c = calc_for(0.5)
    assert c.L_phi == pytest.approx(2.0)
    assert h_phi(c, 3.0) == pytest.approx(u_phi(c, 3.0) - 3.0 * 2.0)
    c1 = calc_for(1.0)
    assert h_phi(c1, 3.0) == u_phi(c1, 3.0)


def test_domain_error_for_nonpositive_t():
    with pytest.raises(ValueError):
        ln_phi(calc_for(1.0), 0.0)
    with pytest.raises(ValueError):
        ln_phi(calc_for(1.2), -1.0)


# -- indices ----------------------------------------------------------------

def test_order_indices_powers():
    assert order_indices(PhiFunction.power(1.0)) == (1.0, 1.0, INF)
    th, de, N = order_indices(PhiFunction.power(0.75))
    assert (th, de, N) == pytest.approx((1.25, 1.25, 4.0))


def test_order_indices_tabulated_hybrid():
    th, de, N = order_indices(hybrid_phi())
    assert th == pytest.approx(1.0, abs=0.02)
    assert de == pytest.approx(0.5, abs=0.02)
    assert N == INF


@pytest.mark.parametrize("m", POWERS)
def test_calculus_invariants(m):
    c = calc_for(m)
    assert c.l_phi < 0 < c.L_phi
    assert c.delta_phi <= c.theta_phi
    if c.theta_phi < 1:
        assert c.l_phi > -INF
    if c.theta_phi <= 1:
        assert c.L_phi == INF
    if c.delta_phi > 1:
        assert c.L_phi < INF
    if c.delta_phi >= 1:
        assert c.l_phi == -INF
    expected_N = INF if c.theta_phi == 1 else 1 / (c.theta_phi - 1)
    assert c.N_phi == pytest.approx(expected_N)


def test_lower_limit_for_m_above_one():
    assert calc_for(1.5).l_phi == pytest.approx(-2.0)
    assert calc_for(2.0).l_phi == pytest.approx(-1.0)


def test_normalize_sets_value_at_one():
    p = PhiFunction.power(1.2, scale=3.7).normalize()
    assert float(p(1.0)) == pytest.approx(1.0, abs=1e-12)


# -- closed form vs quadrature ----------------------------------------------

@pytest.mark.parametrize("m", POWERS)
def test_quadrature_matches_closed_forms(m):
    cq = calc_for(m, "quadrature")
    for t in np.logspace(-3, 3, 41):
        ref = closed_ln(m, t)
        assert float(cq.ln(t)) == pytest.approx(ref, rel=1e-9, abs=1e-12)
        assert float(cq.u(t)) == pytest.approx(closed_u(m, t), rel=1e-9, abs=1e-12)


def test_tabulated_ln_matches_scipy_quad():
    c = PhiCalculus(hybrid_phi())
    for t in (1e-3, 0.25, 0.9, 3.0, 250.0):
        ref = quad(lambda s: 1.0 / (math.sqrt(s) if s < 1 else s), 1.0, t,
                   points=[1.0] if t > 1 else None, limit=200, epsabs=1e-13, epsrel=1e-13)[0]
        assert float(c.ln(t)) == pytest.approx(ref, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("m", POWERS)
@given(t=st.floats(min_value=1e-3, max_value=1e3))
def test_round_trip_property(m, t):
    for c in (calc_for(m), calc_for(m, "quadrature")):
        back = float(c.exp(c.ln(t)))
        assert abs(back - t) / t <= 1e-9


@given(a=st.sampled_from([0.5, 2.0, 10.0]), m=st.sampled_from(POWERS),
       t=st.floats(min_value=1e-2, max_value=1e2))
def test_scale_covariance(a, m, t):
    base = calc_for(m)
    scaled = PhiCalculus(PhiFunction.power(m, scale=a))
    assert float(scaled.ln(t)) == pytest.approx(float(base.ln(t)) / a, rel=1e-12, abs=1e-15)
    assert scaled.theta_phi == base.theta_phi
    assert scaled.delta_phi == base.delta_phi


@pytest.mark.parametrize("phi", [PhiFunction.power(0.7), hybrid_phi(), PhiFunction.power(1.4)])
def test_elasticity_monotonicity(phi):
    c = PhiCalculus(phi)
    s = np.logspace(-3, 3, 400)
    f = np.asarray(c.phi(s))
    lower = s ** c.delta_phi / f
    assert np.all(np.diff(lower) <= 1e-9 * lower[:-1])
    upper = s ** c.theta_phi / f
    assert np.all(np.diff(upper) >= -1e-9 * upper[:-1])


# -- DC_N ---------------------------------------------------------------------

def test_dc_examples():
    assert dc_membership(calc_for(0.8, "quadrature"), 5)[0]
    assert dc_membership(PhiCalculus(PhiFunction.power(0.8)), 5)[0]
    assert not dc_membership(calc_for(0.75), 5)[0]
    assert dc_membership(calc_for(1.0), INF)[0]


def test_dc_rejects_unsupported_dimension():
    with pytest.raises(ValueError):
        dc_membership(calc_for(1.0), 0.5)


@given(m=st.floats(min_value=0.3, max_value=2.0),
       N=st.sampled_from([-8.0, -2.0, -1.0, 1.5, 2.0, 3.0, 10.0, 50.0, INF]))
def test_dc_matches_power_threshold(m, N):
    threshold = 1.0 if math.isinf(N) else (N - 1) / N
    if abs(m - threshold) < 1e-6:
        return
    ok, slack = dc_membership(PhiCalculus(PhiFunction.power(m)), N)
    assert ok == (m >= threshold)
    assert abs(slack) >= 1e-9


@given(m=st.sampled_from(POWERS), N1=st.sampled_from([-4.0, -1.0, 2.0, 5.0, 20.0, INF]),
       N2=st.sampled_from([-4.0, -1.0, 2.0, 5.0, 20.0, INF]))
def test_dc_monotone_in_dimension_parameter(m, N1, N2):
    def level(N):
        return 1.0 if math.isinf(N) else (N - 1) / N
    c = calc_for(m)
    if level(N1) < level(N2) and dc_membership(c, N2)[0]:
        assert dc_membership(c, N1)[0]


@pytest.mark.parametrize("m,N", [(1.0, 2.0), (1.0, INF), (1.2, 5.0), (1.5, -4.0), (0.9, 5.0)])
def test_psi_N_direction(m, N):
    c = calc_for(m)
    assert dc_membership(c, N)[0]
    r = np.linspace(0.05, 6.0, 300)
    v = np.asarray(psi_N(c, N, r))
    d = np.diff(v)
    scale = np.maximum(1.0, np.abs(v[:-1]))
    if N >= 1:
        assert np.all(d <= 1e-10 * scale)
    else:
        assert np.all(d >= -1e-10 * scale)


# -- comparison bounds ------------------------------------------------------

def test_comparison_phi1_is_tight():
    rep = verify_comparison_bounds(calc_for(1.0), np.linspace(0.1, 10, 50))
    assert rep.max_violation == 0.0
    assert rep.min_gap == pytest.approx(0.0, abs=1e-14)


def test_comparison_phi_half_at_four():
    c = calc_for(0.5)
    t = 4.0
    m = 2.0 - c.theta_phi
    ell = (t ** (m - 1) - 1) / (m - 1)
    lower, upper = ell, t ** c.theta_phi / t ** 1.5 * ell
    assert lower <= 1.0 <= upper
    assert verify_comparison_bounds(c, [t]).max_violation <= 1e-9


def test_comparison_hybrid_has_positive_gap():
    c = PhiCalculus(hybrid_phi())
    rep = verify_comparison_bounds(c, [0.25])
    assert rep.max_violation <= 1e-9
    assert rep.min_gap > 0


@pytest.mark.parametrize("m", POWERS)
def test_comparison_power(m):
    assert verify_comparison_bounds(calc_for(m)).max_violation <= 1e-9


def test_tabulated_csv_round_trip(tmp_path):
    p = hybrid_phi()
    path = tmp_path / "phi.csv"
    p.to_csv(path)
    q = PhiFunction.from_csv(path)
    s = np.logspace(-4, 4, 33)
    assert np.allclose(np.asarray(q(s)), np.asarray(p(s)), rtol=1e-12)


def test_tabulated_rejects_decreasing_values():
    with pytest.raises(ValueError):
        PhiFunction.tabulated([0.5, 1.0, 2.0], [1.0, 0.5, 2.0])
