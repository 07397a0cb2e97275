import json
import math

import numpy as np
import pytest

from phiflow.flow import (CFLError, JKOStepError, circle_test_bank, contraction_report,
                          heat_circle_exact, jko_step, l1_relative, pde_oracle_solve, run_jko,
                          slope_vs_fisher, weak_residual)
from phiflow.space import Density, Potential, WeightedSpace, normalized_reference
from phiflow.transport import w2

from conftest import calc_for, gaussian_ref


def flat_circle(n=256, m=1.0):
    sp = WeightedSpace.circle(1.0, n)
    return normalized_reference(sp, calc_for(m), Potential.named("zero"))


def cosine(sp, amp=0.5):
    return Density.from_function(sp, lambda x: 1 + amp * np.cos(2 * np.pi * x))


def bump(x):
    return np.maximum(0.0, 1 - ((x - 0.5) / 0.2) ** 2)


def pme_ref(n=256):
    sp = WeightedSpace.segment(0, 1, n)
    return normalized_reference(sp, calc_for(1.5), Potential.named("zero"))


def gauss_at(sp, b):
    return Density.from_function(sp, lambda x: np.exp(-(x - b) ** 2 / 2))


def test_reference_is_fixed_point_up_to_quadrature():
    """The segment energy integrates the potential over each segment, so the
    cell-centre reference is a fixed point up to ``O(h**2)``."""
    err = [l1_relative(jko_step(r, r.nu, 0.1), r.nu) for r in (gaussian_ref(1.0, n=256),
                                                              gaussian_ref(1.0, n=512))]
    assert err[1] <= 2e-5
    assert err[0] / err[1] == pytest.approx(4.0, rel=0.05)


def test_uniform_is_fixed_point_on_circle():
    ref = flat_circle()
    assert l1_relative(jko_step(ref, ref.nu, 0.05), ref.nu) <= 1e-12


def test_one_step_damps_mode_like_implicit_euler():
    """A single step multiplies the first Fourier mode by about ``1/(1 + 4 pi**2 delta)``."""
    ref = flat_circle(512)
    sp = ref.space
    mu0 = cosine(sp)
    delta = 1e-2
    mu1 = jko_step(ref, mu0, delta)
    x = sp.cell_centers
    amp = lambda d: 2 * np.sum((d.rho - 1) * np.cos(2 * np.pi * x)) * sp.cell_len
    assert amp(mu1) / amp(mu0) == pytest.approx(1 / (1 + delta * 4 * np.pi ** 2), abs=5e-3)


def test_heat_on_circle_matches_exact_solution():
    ref = flat_circle(512)
    st = run_jko(ref, cosine(ref.space), 1e-3, 0.1)
    exact = heat_circle_exact(ref.space, 0.5, 1, 0.1)
    assert l1_relative(st.steps[-1], exact) <= 1e-3
    assert min(st.dissipation_gaps()) >= 0


@pytest.mark.parametrize("m", [0.9, 1.0, 1.2])
def test_energy_dissipation_inequality(m):
    ref = gaussian_ref(m)
    mu0 = Density.from_function(ref.space, lambda x: np.exp(-(x - 1.5) ** 2 / 2)
                                + 0.5 * np.exp(-(x + 2) ** 2 / 0.5))
    st = run_jko(ref, mu0, 0.02, 0.2)
    E = np.asarray(st.energies)
    assert np.all(np.diff(E) <= 1e-12)
    assert np.all(st.dissipation_gaps() >= -1e-12)
    assert all(i.residual <= 1e-7 for i in st.info)


def test_step_count_and_times():
    ref = flat_circle(64)
    st = run_jko(ref, cosine(ref.space), 0.03, 0.1)
    assert len(st.steps) == 5 and len(st.info) == 4
    assert st.times[-1] == pytest.approx(0.12)
    assert st.at(0.065) is st.steps[2]


def test_zero_horizon_and_bad_arguments():
    ref = flat_circle(64)
    mu = cosine(ref.space)
    assert len(run_jko(ref, mu, 0.1, 0.0).steps) == 1
    with pytest.raises(ValueError):
        run_jko(ref, mu, 0.0, 1.0)
    with pytest.raises(ValueError):
        run_jko(ref, mu, 0.1, -1.0)


def test_step_error_carries_residual():
    """Tails of mass ``1e-57`` under a large step cannot be resolved."""
    sp = WeightedSpace.segment(-8, 8, 512)
    ref = normalized_reference(sp, calc_for(1.0), Potential.named("zero"))
    g = Density.from_function(sp, lambda x: np.exp(-x ** 2 / 0.5))
    with pytest.raises(JKOStepError) as err:
        jko_step(ref, g, 0.1)
    assert err.value.residual > 1e-7


def test_certified_run(tmp_path):
    ref = flat_circle(128)
    st = run_jko(ref, cosine(ref.space), 0.01, 0.05, certify_every=1)
    assert all(i.certified for i in st.info)
    st.to_csv(tmp_path / "f.csv", stride=2)
    st.to_json(tmp_path / "f.json")
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert rows[0] == "t,x,rho" and len(rows) == 1 + 3 * 128
    assert json.loads((tmp_path / "f.json").read_text())["steps"] == 5


# -- finite-volume oracle --------------------------------------------------------

def test_oracle_heat_variance_grows_by_2t():
    sp = WeightedSpace.segment(-8, 8, 512)
    ref = normalized_reference(sp, calc_for(1.0), Potential.named("zero"))
    g = Density.from_function(sp, lambda x: np.exp(-x ** 2 / 0.5))
    var = lambda d: d.moment(lambda x: x * x) - d.mean() ** 2
    out = pde_oracle_solve(ref, g, 0.5)
    assert var(out) - var(g) == pytest.approx(1.0, abs=1e-6)


def test_oracle_keeps_reference_stationary():
    # upwinded drift: first order in h
    err = [l1_relative(pde_oracle_solve(r, r.nu, 0.2), r.nu) for r in (gaussian_ref(1.0, n=256),
                                                                      gaussian_ref(1.0, n=512))]
    assert err[1] <= 5e-3
    assert err[0] / err[1] == pytest.approx(2.0, rel=0.05)


def test_oracle_heat_on_circle():
    ref = flat_circle(256)
    out = pde_oracle_solve(ref, cosine(ref.space), 0.05)
    assert l1_relative(out, heat_circle_exact(ref.space, 0.5, 1, 0.05)) <= 1e-3


def test_oracle_rejects_unstable_step():
    ref = flat_circle(256)
    with pytest.raises(CFLError):
        pde_oracle_solve(ref, cosine(ref.space), 0.01, dt=1e-2)


def test_oracle_history_conserves_mass():
    ref = pme_ref(128)
    _, hist = pde_oracle_solve(ref, Density.from_function(ref.space, bump), 1e-3,
                               return_history=True)
    assert hist[-1][0] == pytest.approx(1e-3)
    assert all(abs(d.mass - 1) <= 1e-12 for _, d in hist)


@pytest.mark.parametrize("T", [1e-3, 4e-3])
def test_porous_medium_finite_speed(T):
    ref = pme_ref(256)
    sp = ref.space
    st = run_jko(ref, Density.from_function(sp, bump), T / 10, T)
    x = sp.cell_centers[st.steps[-1].rho > 0]
    assert x.min() > 0.1 and x.max() < 0.9
    pde = pde_oracle_solve(ref, Density.from_function(sp, bump), T)
    assert l1_relative(st.steps[-1], pde) <= 0.01


def test_porous_medium_agrees_with_oracle():
    ref = pme_ref(256)
    mu0 = Density.from_function(ref.space, bump)
    st = run_jko(ref, mu0, 2e-3, 0.05)
    assert l1_relative(st.steps[-1], pde_oracle_solve(ref, mu0, 0.05)) <= 0.02


# -- weak form, slope, contraction ----------------------------------------------

def test_weak_residual_small_and_shrinking():
    res = []
    for n, d in ((128, 4e-3), (256, 2e-3)):
        ref = flat_circle(n)
        mu0 = Density.from_function(ref.space, lambda x: 1 + 0.5 * np.cos(2 * np.pi * x)
                                    + 0.3 * np.sin(6 * np.pi * x))
        res.append(weak_residual(run_jko(ref, mu0, d, 0.1), circle_test_bank(1.0)))
    assert res[1] < res[0] and res[1] <= 0.02


def test_weak_residual_zero_at_equilibrium():
    ref = flat_circle(64)
    st = run_jko(ref, ref.nu, 0.01, 0.05)
    assert weak_residual(st, circle_test_bank(1.0)) <= 1e-12


def test_test_bank_derivatives():
    bank = circle_test_bank(2.0, 3)
    assert len(bank) == 6
    x = np.linspace(0, 2, 7)
    for w, dw in bank:
        num = (w(x + 1e-6) - w(x - 1e-6)) / 2e-6
        assert np.allclose(num, dw(x), atol=1e-6)


@pytest.mark.parametrize("b", [0.25, 0.5, 1.0])
def test_slope_equals_root_fisher(b):
    ref = gaussian_ref(1.0)
    slope, root_I, gap = slope_vs_fisher(ref, gauss_at(ref.space, b))
    assert root_I == pytest.approx(b, abs=1e-4)
    assert abs(gap) <= 1e-9


def test_contraction_with_positive_curvature():
    ref = gaussian_ref(1.0)
    sp = ref.space
    ratio = contraction_report(ref, gauss_at(sp, 0.5), gauss_at(sp, -0.5), 0.01, 1.0, 1.0)
    assert ratio <= 1.01


def test_contraction_flat_curvature_is_isometric():
    sp = WeightedSpace.segment(-8, 8, 512)
    ref = normalized_reference(sp, calc_for(1.0), Potential.named("linear", slope=0.5))
    ratio = contraction_report(ref, gauss_at(sp, 0.5), gauss_at(sp, -0.5), 0.01, 1.0, 0.0)
    assert ratio <= 1.0 + 1e-9


def test_distance_to_reference_decays():
    ref = gaussian_ref(1.0)
    mu0 = gauss_at(ref.space, 1.0)
    st = run_jko(ref, mu0, 0.05, 1.0)
    d = [w2(s, ref.nu) for s in st.steps]
    assert np.all(np.diff(d) <= 1e-12)
    # exp(-t) contraction with a small discretization allowance
    assert d[-1] <= math.exp(-1.0) * d[0] * 1.05
