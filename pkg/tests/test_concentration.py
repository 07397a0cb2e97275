import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import ndtr

from phiflow import concentration as C
from phiflow.phi_calculus import PhiCalculus, PhiFunction
from phiflow.space import Density, Potential, WeightedSpace, build_reference, entropy_H, normalized_reference

from conftest import calc_for, gaussian_ref

RADII = (0.5, 1.0, 2.0, 4.0)


def xi0_for(ref):
    return max(1.0, ref.sigma_max)


# -- alpha ----------------------------------------------------------------------

def test_gaussian_alpha_matches_normal_tail():
    ref = gaussian_ref(1.0)
    a = C.concentration_alpha(ref, 1.0)
    assert a == pytest.approx(1 - ndtr(1.0), abs=2e-5)
    b = C.concentration_alpha(ref, 1.0, "bruteforce")
    assert abs(a - b) <= 0.01


@pytest.mark.parametrize("m", [1.0, 0.9, 1.2, 1.5])
def test_halfline_below_bruteforce(m):
    ref = gaussian_ref(m)
    for r in RADII:
        h = C.concentration_alpha(ref, r)
        b = C.concentration_alpha(ref, r, "bruteforce")
        assert h <= b + 1e-12
        assert b - h <= 0.02


def test_alpha_vanishes_beyond_diameter():
    ref = gaussian_ref(1.5)
    lo, hi = ref.space.cell_centers[ref.support_mask][[0, -1]]
    r = hi - lo + ref.space.cell_len
    assert C.concentration_alpha(ref, r) == 0.0
    assert C.concentration_alpha(ref, r, "bruteforce") == 0.0


def test_two_atoms():
    assert C.alpha_atoms([0.0, 1.0], [0.5, 0.5], 0.9) == 0.5
    assert C.alpha_atoms([0.0, 1.0], [0.5, 0.5], 1.1) == 0.0


def test_uniform_circle_arc_formula():
    sp = WeightedSpace.circle(1.0, 256)
    ref = normalized_reference(sp, calc_for(1.0), Potential.named("zero"))
    for r in (0.05, 0.1, 0.2):
        assert C.concentration_alpha(ref, r) == pytest.approx(0.5 - 2 * r, abs=1e-9)


def test_circle_halfline_vs_bruteforce():
    sp = WeightedSpace.circle(1.0, 256)
    ref = normalized_reference(sp, calc_for(1.0), 2 * np.cos(2 * np.pi * sp.cell_centers))
    for r in (0.05, 0.1, 0.3):
        h = C.concentration_alpha(ref, r)
        b = C.concentration_alpha(ref, r, "bruteforce")
        assert h <= b + 1e-12 and b - h <= 0.02


def test_alpha_errors():
    ref = gaussian_ref(1.0)
    with pytest.raises(ValueError):
        C.concentration_alpha(ref, 0.0)
    with pytest.raises(ValueError):
        C.concentration_alpha(ref, 1.0, "other")
    raw = build_reference(ref.space, ref.calc, Potential.named("quadratic"))
    with pytest.raises(ValueError):
        C.concentration_alpha(raw, 1.0)


@given(r1=st.floats(0.05, 3.0), dr=st.floats(0.0, 3.0))
def test_alpha_monotone(r1, dr):
    ref = gaussian_ref(1.2)
    assert C.concentration_alpha(ref, r1 + dr) <= C.concentration_alpha(ref, r1) + 1e-15


def test_profile(tmp_path):
    prof = C.concentration_profile(gaussian_ref(1.0), RADII)
    assert prof.monotone
    assert all(0 <= a <= 0.5 for a in prof.alpha)
    prof.to_csv(tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0].startswith("r,alpha")


# -- restricted entropies --------------------------------------------------------

def test_restriction_to_full_support_is_entropy():
    ref = gaussian_ref(1.0)
    assert C.restricted_entropy(ref, ref.support_mask) == pytest.approx(entropy_H(ref, ref.nu), abs=1e-12)


def test_half_mass_restrictions_nonpositive(rng):
    ref = gaussian_ref(1.0)
    m = ref.sigma * ref.space.omega
    done = 0
    while done < 200:
        mask = rng.random(m.size) < rng.uniform(0.3, 0.9)
        if m[mask].sum() < 0.5:
            continue
        assert C.restricted_entropy(ref, mask) <= 1e-9
        done += 1


def test_restricted_entropy_two_routes():
    """Uniform reference on [0, 1], half-line A = [0, 1/2): the restriction is
    the density 2 on A, and its entropy computed on the grid agrees."""
    sp = WeightedSpace.segment(0, 1, 64)
    ref = build_reference(sp, calc_for(1.0), Potential.named("zero"))
    low, _ = C.half_mass_sets(ref)
    A = sp.cell_centers < 0.5
    direct = entropy_H(ref, Density.from_values(sp, np.where(A, 1.0, 0.0)))
    assert C.restricted_entropy(ref, A) == pytest.approx(direct, abs=1e-10)
    assert direct == pytest.approx(math.log(2) - 1, abs=1e-12)


def test_U_vanishes_at_zero():
    c = calc_for(1.2)
    vals = C.U_function(c, np.array([1e-12, 1e-9, 1e-6]), 0.7)
    assert np.all(np.abs(vals) < 1e-3)
    assert C.U_function(c, 0.0, 0.7) == 0.0


@pytest.mark.parametrize("m", [0.9, 1.0, 1.2, 1.5])
def test_index_ratio_increasing(m):
    s = np.linspace(1e-4, 0.999, 500)
    v = C.index_monotone_ratio(calc_for(m), s)
    assert np.all(np.diff(v) > 0)


@pytest.mark.parametrize("m", [0.9, 1.0, 1.2])
def test_fitting_bounds(m):
    ref = gaussian_ref(m)
    out = C.fitting_bounds(ref, xi0_for(ref))
    assert out["holds"]


# -- general estimate ---------------------------------------------------------------

@pytest.mark.parametrize("m", [1.0, 0.9, 1.2])
def test_general_estimate(m):
    ref = gaussian_ref(m)
    xi0 = max(0.5, ref.sigma_max)
    for r in RADII:
        assert C.general_estimate_slack(ref, 1.0, xi0, r) >= -1e-3
    assert C.general_estimate_slack(ref, 1.0, xi0, 2.0, "bruteforce") >= 0


def test_general_estimate_small_radius_sign():
    """For ``r**2 <= -8 H / K`` the left side is nonpositive and the right side
    nonnegative, so the slack is at least the right side."""
    ref = gaussian_ref(1.0)
    H = entropy_H(ref, ref.nu)
    r = 0.5 * math.sqrt(-8 * H)
    rhs = -(math.sqrt(0.5) * r - math.sqrt(-H)) ** 2 - H
    assert rhs >= 0
    assert C.general_estimate_slack(ref, 1.0, max(0.5, ref.sigma_max), r) >= rhs - 1e-12


def test_general_estimate_vacuous_when_alpha_zero():
    ref = gaussian_ref(1.5)
    assert C.general_estimate_slack(ref, 1.0, max(0.5, ref.sigma_max), 50.0) == math.inf


def test_general_estimate_rejects_small_xi0():
    ref = gaussian_ref(1.0)
    with pytest.raises(ValueError):
        C.general_estimate_slack(ref, 1.0, 0.1, 1.0)


# -- deformed-normal bounds -----------------------------------------------------------

def test_case_i_closed_form():
    theta = delta = 0.8
    K, xi0, r = 1.0, 1.0, 2.0
    const = (delta * (1 - theta) / ((1 - delta) * (2 - delta))) ** (1 / (1 - delta))
    # e_{1.2}(x) = (1 + 0.2 x)^5
    expected = const * (1 + 0.2 * K * r * r / 4) ** 5
    case, bound, upper = C.normal_bound_value(theta, delta, K, xi0, r)
    assert case == "i"
    assert bound == pytest.approx(expected, rel=1e-12)
    assert upper == pytest.approx(1 / expected, rel=1e-12)


@given(theta=st.floats(1.01, 1.45), frac=st.floats(0.05, 0.95), K=st.floats(0.1, 3.0),
       xi0=st.floats(1.0, 3.0), r=st.floats(0.1, 5.0), wm=st.floats(1.0, 20.0))
def test_case_ii_statement_equals_proof_form(theta, frac, K, xi0, r, wm):
    lo = 3 * (theta - 1)
    delta = lo + frac * (theta - lo)
    a = C.normal_bound_value(theta, delta, K, xi0, r, wm, "statement")
    b = C.normal_bound_value(theta, delta, K, xi0, r, wm, "proof")
    assert a[0] == b[0] == "ii"
    assert a[1] == pytest.approx(b[1], rel=1e-9, abs=1e-300)


def test_case_iii_approaches_normal_limit():
    """As delta -> 1 the case-iii bound tends to ``alpha <= e**2 exp(-K r**2/4)``."""
    K, r = 1.0, 1.5
    _, _, upper = C.normal_bound_value(1.0, 1.0 - 1e-7, K, 1.0, r)
    assert upper == pytest.approx(math.e ** 2 * math.exp(-K * r * r / 4), rel=1e-5)


def test_no_case_marker():
    case, bound, upper = C.normal_bound_value(1.6, 1.6, 1.0, 1.0, 1.0)
    assert case is None and math.isnan(bound)


@pytest.mark.parametrize("m,case", [(1.0, "iii"), (0.9, "ii"), (1.2, "i"), (1.5, "i")])
def test_m_normal_bounds_hold(m, case):
    ref = gaussian_ref(m)
    for r in RADII:
        nb = C.m_normal_bounds(ref, 1.0, xi0_for(ref), r)
        assert nb.case == case and nb.holds


def test_deformed_exp_inequality_i_random():
    rng = np.random.default_rng(77)
    n = 0
    while n < 1000:
        m, mp = np.sort(rng.uniform(0.01, 0.99, 2))
        if m + mp <= 1:
            continue
        a, r = rng.uniform(0.01, 5), rng.uniform(0.01, 5)
        lhs, rhs, bmp = C.deformed_exp_inequality_i(m, mp, a, r)
        assert bmp > 1
        assert lhs <= rhs * (1 + 1e-10) + 1e-300
        n += 1


def test_deformed_exp_inequality_ii_random():
    rng = np.random.default_rng(78)
    for _ in range(1000):
        m, a, r = rng.uniform(1, 2 - 1e-9), rng.uniform(0.01, 5), rng.uniform(0.01, 5)
        lhs, rhs = C.deformed_exp_inequality_ii(m, a, r)
        assert lhs >= rhs * (1 - 1e-10)


# -- sequences --------------------------------------------------------------------

def test_sequence_gaussian_family():
    sp = WeightedSpace.segment(-8, 8, 1024)
    fam = [normalized_reference(sp, calc_for(1.0), Potential.named("quadratic", k=float(i)))
           for i in (1, 4, 16, 64)]
    rep = C.sequence_concentration(fam, 1.0, Ks=[1, 4, 16, 64])
    assert rep.decreasing
    for a, i in zip(rep.alphas, (1, 4, 16, 64)):
        assert a == pytest.approx(1 - ndtr(math.sqrt(i)), abs=2e-3)


def test_sequence_single_member():
    ref = gaussian_ref(1.0)
    rep = C.sequence_concentration([ref], 1.0)
    assert rep.alphas[0] == C.concentration_alpha(ref, 1.0)


def test_sequence_fast_diffusion_threshold():
    sp = WeightedSpace.segment(-8, 8, 1024)
    Ks = [1.0, 4.0, 16.0, 64.0]
    fam = [normalized_reference(sp, calc_for(0.9), Potential.named("quadratic", k=k)) for k in Ks]
    rep = C.sequence_concentration(fam, 1.0, Ks=Ks)
    assert rep.decreasing
    assert math.isfinite(rep.threshold)
    assert rep.alphas[-1] < 1e-3


# -- Herbst ---------------------------------------------------------------------------

def test_herbst_gaussian_r2():
    ref = gaussian_ref(1.0)
    rep = C.herbst_phi(ref, 1.0, 2.0)
    assert rep.applicable and rep.entropy_slack >= -1e-9
    assert rep.bound == pytest.approx(math.exp(-0.5), rel=1e-12)
    assert rep.alpha == pytest.approx(1 - ndtr(2.0), abs=1e-4)
    assert rep.bound_holds


def test_herbst_constant_function_zero():
    ref = gaussian_ref(1.2)
    one = lambda x: np.ones_like(x)
    zero = lambda x: np.zeros_like(x)
    assert C.u_entropy_slack(ref, 1.0, one, zero) == pytest.approx(0.0, abs=1e-14)


def test_herbst_not_applicable_for_convex_phi():
    assert not C.herbst_phi(gaussian_ref(0.9), 1.0, 1.0).applicable


@pytest.mark.parametrize("m", [1.0, 1.2, 1.5])
def test_auxiliary_gap(m):
    c = calc_for(m)
    assert C.herbst_auxiliary_gap(c, 1.0) == pytest.approx(0.0, abs=1e-14)
    s = np.logspace(-4, 4, 400)
    assert np.all(C.herbst_auxiliary_gap(c, s) >= -1e-10)


def test_auxiliary_gap_tabulated_concave():
    s = np.logspace(-4, 4, 200)
    phi = PhiFunction.tabulated(s, np.sqrt(s) + 0.5 * s ** 0.8).normalize()
    c = PhiCalculus(phi)
    assert phi.is_concave()
    assert np.all(C.herbst_auxiliary_gap(c, np.logspace(-3, 3, 200)) >= -1e-8)


def test_chebyshev_random():
    rng = np.random.default_rng(3)
    for _ in range(200):
        w = rng.exponential(size=50)
        p = rng.random(50)
        p /= p.sum()
        t = rng.uniform(0.1, 3)
        k = rng.uniform(0.5, 3)
        lhs, rhs = C.chebyshev_check(w, p, t, lambda v: v ** k)
        assert lhs <= rhs + 1e-12
