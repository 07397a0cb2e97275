"""Minimizing-movement gradient flow of the relative entropy, an independent
finite-volume solver of the drift-diffusion equation, and flow diagnostics.

The proximal step ``argmin H(.) + W_2(., mu)**2 / (2 delta)`` is solved in
mass coordinates: the nodes of ``mu``'s positive cells are moved with their
masses held fixed, which keeps the iterate a monotone rearrangement of ``mu``
and turns ``W_2`` into an exact quadratic form. A projected Newton method with
backtracking (monotonicity restored by isotonic regression) drives the
first-order residual below tolerance.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .lagrangian import LagrangianEnergy, LagrangianMeasure
from .space import Density, ReferenceSystem, fisher_I
from .transport import w2

__all__ = [
    "JKOStepError",
    "StepInfo",
    "FlowState",
    "jko_solve",
    "jko_step",
    "run_jko",
    "pde_oracle_solve",
    "CFLError",
    "heat_circle_exact",
    "l1_relative",
    "weak_residual",
    "circle_test_bank",
    "slope_vs_fisher",
    "contraction_report",
]


class JKOStepError(RuntimeError):
    """The inner solver did not reach the first-order tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass
class StepInfo:
    energy: float
    move_cost: float
    iterations: int
    residual: float
    slope: float
    certified: bool


def _reduction(lag: LagrangianMeasure, D, G):
    """Free-variable map for the projected Newton step.

    Nodes held at a bound with the gradient pointing outward are frozen; the
    two ends of a closed zero-mass segment whose gradient pushes them together
    move as one node. Returns a sparse ``(n_nodes, n_free)`` 0/1 matrix.
    """
    n = D.size
    frozen = np.zeros(n, dtype=bool)
    scale = abs(lag.upper - lag.lower) if not lag.periodic else lag.period
    if not lag.periodic:
        tol = 1e-13 * max(1.0, scale)
        frozen[0] = lag.nodes[0] + D[0] <= lag.lower + tol and G[0] > 0
        frozen[-1] = lag.nodes[-1] + D[-1] >= lag.upper - tol and G[-1] < 0
    label = np.arange(n)
    da, db = lag.ends(D, lift=False)
    ln = lag.lengths + (db - da)
    ia = np.arange(lag.mass.size)
    ib = (ia + 1) % n if lag.periodic else ia + 1
    closed = (lag.mass == 0) & (ln <= 1e-12 * max(1.0, scale)) & (G[ib] - G[ia] > 0)
    for a, b in zip(ia[closed], ib[closed]):
        label[label == label[b]] = label[a]
        if frozen[a] or frozen[b]:
            frozen[a] = frozen[b] = True
    keep = ~frozen
    uniq, col = np.unique(label[keep], return_inverse=True)
    rows = np.flatnonzero(keep)
    return sps.csr_matrix((np.ones(rows.size), (rows, col)), shape=(n, uniq.size))


def _residual(lag: LagrangianMeasure, D, G, P=None) -> float:
    """Projected first-order residual ``sqrt(sum g**2 / w)`` over free variables."""
    if P is None:
        P = _reduction(lag, D, G)
    g = P.T @ G
    w = P.T @ lag.node_weights
    ok = w > 0
    return float(math.sqrt(np.sum(g[ok] ** 2 / w[ok])))


def _certify(energy: LagrangianEnergy, D, F, rng, n_probe: int = 50, size: float = 1e-3) -> bool:
    """No random projected perturbation of ``W_2``-size ``size`` lowers ``F``."""
    lag = energy.lag
    w = lag.node_weights
    slack = 1e-12 * max(1.0, abs(F))
    for _ in range(n_probe):
        d = rng.standard_normal(D.size)
        d *= size / math.sqrt(float(np.sum(w * d * d)))
        if energy(lag.project(D + d)) < F - slack:
            return False
    return True


def _max_step(lag: LagrangianMeasure, D, step, keep: float = 0.1) -> float:
    """Largest ``s <= 1`` leaving every occupied segment at least ``keep`` of
    its current length (fraction-to-boundary rule)."""
    da, db = lag.ends(D, lift=False)
    sa, sb = lag.ends(step, lift=False)
    ln = lag.lengths + (db - da)
    dl = sb - sa
    shrink = (lag.mass > 0) & (dl < 0)
    if not shrink.any():
        return 1.0
    return float(min(1.0, np.min((1.0 - keep) * ln[shrink] / -dl[shrink])))


def jko_solve(ref: ReferenceSystem, lag: LagrangianMeasure, delta: float, *,
              tol: float = 1e-9, accept: float = 1e-7, max_iter: int = 200,
              certify: bool = False, rng=None) -> tuple[LagrangianMeasure, StepInfo]:
    """One proximal step in mass coordinates starting from ``lag``.

    Returns the new configuration and step diagnostics. Raises
    :class:`JKOStepError` if the projected residual stays above ``accept``.
    This happens when the minimizer needs occupied segments shorter than the
    rounding error of node displacements, e.g. tails of mass ``1e-50`` under a
    large ``delta``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    energy = LagrangianEnergy(ref, lag, delta)
    D = energy.zero()
    F = energy(D)
    if not math.isfinite(F):
        raise ValueError("starting measure has infinite entropy")
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        G = energy.gradient(D)
        P = _reduction(lag, D, G)
        res = _residual(lag, D, G, P)
        if res <= tol:
            break
        H = (P.T @ energy.hessian(D) @ P).tocsc()
        g = P.T @ G
        step = P @ spla.spsolve(H, -g)
        if not np.all(np.isfinite(step)) or G @ step >= 0:
            step = P @ (-g / np.maximum(H.diagonal(), 1e-300))
        s = s0 = _max_step(lag, D, step)
        accepted = False
        while s > 1e-16:
            Y = lag.project(D + s * step)
            FY = energy(Y)
            if FY <= F + 1e-4 * float(G @ (Y - D)):
                accepted = True
                break
            if s == s0 and FY <= F + 1e-14 * max(1.0, abs(F)):
                # decrease below rounding of F: accept a first trial step that reduces the residual
                if _residual(lag, Y, energy.gradient(Y)) < res:
                    accepted = True
                    break
            s *= 0.5
        if not accepted:
            break
        D, F = Y, FY
    else:
        res = _residual(lag, D, energy.gradient(D))
    if res > accept:
        raise JKOStepError("proximal step did not converge", res)
    move = lag.w2_squared(D)
    certified = _certify(energy, D, F, rng if rng is not None else np.random.default_rng(0)) if certify else False
    info = StepInfo(energy=energy.entropy(D), move_cost=move, iterations=it,
                    residual=res, slope=math.sqrt(move) / delta, certified=certified)
    return lag.moved(D), info


def jko_step(ref: ReferenceSystem, mu: Density, delta: float, *, certify: bool = True,
             rng=None) -> Density:
    """Proximal step ``argmin H(.) + W_2(., mu)**2 / (2 delta)`` on the grid of ``mu``."""
    lag = LagrangianMeasure.from_density(mu)
    new, info = jko_solve(ref, lag, delta, certify=certify, rng=rng)
    if certify and not info.certified:
        raise JKOStepError("a random feasible perturbation improved the objective", info.residual)
    return new.rebin(mu.space)


@dataclass
class FlowState:
    """Trajectory of the minimizing-movement scheme.

    ``steps[k]`` is the grid density at time ``k * delta``; ``info[k - 1]``
    holds the diagnostics of the step producing it; ``energies[k]`` is the
    entropy of the mass-coordinate state at step ``k``.
    """

    ref: ReferenceSystem
    delta: float
    steps: list = field(default_factory=list)
    info: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    states: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(len(self.steps))

    def at(self, t: float) -> Density:
        """Piecewise-constant interpolation (right-continuous in ``k``)."""
        k = min(int(math.floor(t / self.delta + 1e-9)), len(self.steps) - 1)
        return self.steps[max(k, 0)]

    def dissipation_gaps(self) -> np.ndarray:
        """``H_k - H_{k+1} - W_2**2 / (2 delta)`` per step (nonnegative)."""
        E = np.asarray(self.energies)
        move = np.array([i.move_cost for i in self.info])
        return E[:-1] - E[1:] - move / (2.0 * self.delta)

    def diagnostics(self) -> dict:
        return {
            "delta": self.delta,
            "steps": len(self.info),
            "energy": [float(e) for e in self.energies],
            "move_cost": [i.move_cost for i in self.info],
            "iterations": [i.iterations for i in self.info],
            "residual": [i.residual for i in self.info],
            "slope": [i.slope for i in self.info],
        }

    def to_csv(self, path: str | Path, stride: int = 1) -> None:
        x = self.ref.space.cell_centers
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "rho"])
            for k in range(0, len(self.steps), max(1, stride)):
                t = k * self.delta
                for xi, r in zip(x, self.steps[k].rho):
                    w.writerow([repr(float(t)), repr(float(xi)), repr(float(r))])

    def to_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.diagnostics(), fh, indent=2, sort_keys=True)


def run_jko(ref: ReferenceSystem, mu0: Density, delta: float, T: float, *,
            certify_every: int = 0, rng=None, keep_states: bool = False) -> FlowState:
    """Iterate ``ceil(T / delta)`` proximal steps from ``mu0``.

    The mass-coordinate state is carried from step to step (densities are only
    re-binned for output), so each step starts from a feasible point of its own
    subproblem and the energy-dissipation inequality holds exactly.
    """
    if T < 0 or delta <= 0:
        raise ValueError("need T >= 0 and delta > 0")
    if rng is None:
        rng = np.random.default_rng(0)
    n_steps = int(math.ceil(T / delta - 1e-9))
    lag = LagrangianMeasure.from_density(mu0)
    state = FlowState(ref, delta)
    state.steps.append(mu0)
    state.energies.append(LagrangianEnergy(ref, lag).entropy(np.zeros_like(lag.nodes)))
    if keep_states:
        state.states.append(lag)
    for k in range(n_steps):
        cert = certify_every > 0 and k % certify_every == 0
        lag, info = jko_solve(ref, lag, delta, certify=cert, rng=rng)
        state.info.append(info)
        state.energies.append(info.energy)
        state.steps.append(lag.rebin(mu0.space))
        if keep_states:
            state.states.append(lag)
    state.lagrangian = lag
    return state


# ---------------------------------------------------------------------------
# finite-volume oracle
# ---------------------------------------------------------------------------

class CFLError(ValueError):
    """Requested time step exceeds the explicit stability bound."""

    def __init__(self, dt: float, dt_max: float):
        super().__init__(f"time step {dt:.3e} exceeds stability bound; use dt <= {dt_max:.3e}")
        self.suggested = dt_max


class _FiniteVolume:
    """Static data of the conservative scheme on a fixed grid."""

    def __init__(self, ref: ReferenceSystem, floor: float):
        sp = ref.space
        self.ref, self.floor = ref, floor
        self.periodic = sp.periodic
        self.n = sp.n_cells
        self.h = sp.cell_len
        psi = np.asarray(ref.potential.value(sp.cell_centers), dtype=float)
        faces = sp.edges[1:] if sp.periodic else sp.edges[1:-1]
        dpsi = (np.roll(psi, -1) - psi) if sp.periodic else np.diff(psi)
        self.dpsi = dpsi / self.h
        # velocity -dpsi: upwind cell is the left one when dpsi < 0
        self.left_up = self.dpsi < 0
        self.ef = np.exp(-np.asarray(sp.weight.value(faces), dtype=float))
        f = np.asarray(sp.weight.value(sp.cell_centers), dtype=float)
        self.spread = float(np.exp(f.max() - f.min()))
        self.vmax = float(np.max(np.abs(self.dpsi))) if self.dpsi.size else 0.0

    def rate(self, rho: np.ndarray) -> np.ndarray:
        """``dM/dt`` for cell masses ``M = rho * omega``."""
        G = np.asarray(self.ref.calc.pressure(np.maximum(rho, 0.0)), dtype=float)
        if self.periodic:
            rr, Gr = np.roll(rho, -1), np.roll(G, -1)
            rl, Gl = rho, G
        else:
            rr, Gr, rl, Gl = rho[1:], G[1:], rho[:-1], G[:-1]
        up = np.where(self.left_up, rl, rr)
        J = self.ef * ((Gr - Gl) / self.h + up * self.dpsi)
        if self.periodic:
            return J - np.roll(J, 1)
        out = np.zeros(self.n)
        out[:-1] += J
        out[1:] -= J
        return out

    def stable_dt(self, rho: np.ndarray) -> float:
        r = np.maximum(rho, self.floor)
        coef = float(np.max(r / np.asarray(self.ref.calc.phi_at(r))))
        dt = 0.4 * self.h * self.h / (coef * self.spread)
        if self.vmax > 0:
            dt = min(dt, 0.4 * self.h / (self.vmax * self.spread))
        return dt


def pde_oracle_solve(ref: ReferenceSystem, mu0: Density, T: float, dt: float | None = None,
                     floor: float = 1e-8, return_history: bool = False):
    """Explicit conservative finite-volume solution of
    ``d rho/dt = div_w(rho grad(rho)/phi(rho) + rho grad psi)``.

    Diffusive fluxes use pressure differences across faces, the drift is
    upwinded, boundaries are no-flux (segment) or periodic (circle); forward
    Euler in time. The step is re-chosen each iteration from the current
    density (diffusion coefficient ``rho/phi(rho)`` clamped below at
    ``floor``); a user ``dt`` above the stability bound raises
    :class:`CFLError`.
    """
    sp = ref.space
    omega = sp.omega
    fv = _FiniteVolume(ref, floor)
    M = mu0.masses.copy()
    rho = M / omega
    t = 0.0
    hist = [(0.0, mu0)]
    while t < T - 1e-15:
        dt_max = fv.stable_dt(rho)
        if dt is not None and dt > dt_max * (1 + 1e-12):
            raise CFLError(dt, dt_max)
        step = min(dt if dt is not None else dt_max, T - t)
        M = M + step * fv.rate(rho)
        neg = M < 0
        if neg.any():
            M[neg] = 0.0
            M /= M.sum()
        rho = M / omega
        t += step
        if return_history:
            hist.append((t, Density.from_masses(sp, M)))
    out = Density.from_masses(sp, M)
    return (out, hist) if return_history else out


# ---------------------------------------------------------------------------
# comparisons and diagnostics
# ---------------------------------------------------------------------------

def heat_circle_exact(space, amplitude: float, mode: int, t: float) -> Density:
    """Cell averages of ``1 + amplitude exp(-(2 pi k / L)**2 t) cos(2 pi k x / L)``
    on a flat circle of length ``L`` with total mass normalized by ``L``."""
    L = space.length
    kk = 2.0 * math.pi * mode / L
    e = space.edges
    avg = 1.0 + amplitude * math.exp(-kk * kk * t) * np.diff(np.sin(kk * e)) / (kk * space.cell_len)
    return Density.from_masses(space, avg * space.cell_len / L)


def l1_relative(mu: Density, nu: Density, mask=None) -> float:
    """``sum |rho - rho'| omega / sum |rho'| omega`` (optionally on a mask)."""
    om = mu.space.omega
    a, b = mu.rho, nu.rho
    if mask is not None:
        a, b, om = a[mask], b[mask], om[mask]
    return float(np.sum(np.abs(a - b) * om) / np.sum(np.abs(b) * om))


def _flux_pairing(ref: ReferenceSystem, mu: Density, dw) -> float:
    """``int <grad(rho)/phi(rho) + grad psi, grad w> d mu`` on grid faces."""
    sp = ref.space
    h = sp.cell_len
    rho = mu.rho
    G = np.asarray(ref.calc.pressure(rho), dtype=float)
    psi = ref.psi
    if sp.periodic:
        faces = sp.edges[1:]
        dG = (np.roll(G, -1) - G) / h
        dpsi = (np.roll(psi, -1) - psi) / h
        rf = 0.5 * (rho + np.roll(rho, -1))
    else:
        faces = sp.edges[1:-1]
        dG = np.diff(G) / h
        dpsi = np.diff(psi) / h
        rf = 0.5 * (rho[1:] + rho[:-1])
    ef = np.exp(-np.asarray(sp.weight.value(faces), dtype=float))
    return float(np.sum((dG + rf * dpsi) * dw(faces) * ef * h))


def weak_residual(state: FlowState, tests) -> float:
    """Largest weak-form defect over test functions on the whole trajectory.

    ``tests`` is a sequence of ``(w, dw)`` pairs of time-independent
    functions; the time integral uses the right-endpoint rule matching the
    implicit step.
    """
    ref = state.ref
    x = ref.space.cell_centers
    T_idx = len(state.steps) - 1
    worst = 0.0
    for w, dw in tests:
        lhs = float(state.steps[T_idx].masses @ w(x)) - float(state.steps[0].masses @ w(x))
        integ = sum(_flux_pairing(ref, state.steps[k], dw) for k in range(1, T_idx + 1)) * state.delta
        worst = max(worst, abs(lhs + integ))
    return worst


def circle_test_bank(length: float, n_modes: int = 6):
    """``cos`` and ``sin`` of ``2 pi k x / L`` for ``k = 1..n_modes`` (12 functions by default)."""
    bank = []
    for k in range(1, n_modes + 1):
        c = 2.0 * math.pi * k / length
        bank.append((lambda x, c=c: np.cos(c * x), lambda x, c=c: -c * np.sin(c * x)))
        bank.append((lambda x, c=c: np.sin(c * x), lambda x, c=c: c * np.cos(c * x)))
    return bank


def _steepest_field(ref: ReferenceSystem, mu: Density):
    """Nodewise ``-(grad ln_phi(rho) + grad psi)`` interpolated from cell values."""
    sp = ref.space
    rho = mu.rho
    pos = rho > 0
    g = np.zeros_like(rho)
    g[pos] = np.asarray(ref.calc.ln(rho[pos])) + ref.psi[pos]
    grad = sp.diff1(g)
    xs = sp.cell_centers

    def field(x):
        if sp.periodic:
            return -np.interp(np.mod(x, sp.length), xs, grad, period=sp.length)
        return -np.interp(x, xs, grad)
    return field


def slope_vs_fisher(ref: ReferenceSystem, mu: Density, n_random: int = 13, rng=None,
                    t: float = 1e-3) -> tuple[float, float, float]:
    """Largest entropy decrease rate per unit distance over a bank of transport
    fields, compared with ``sqrt(I(mu))``.

    The bank holds the steepest-descent field, two constant fields and
    ``n_random`` random smooth fields; each rate is extrapolated to ``t -> 0``
    by Richardson's rule from ``t`` and ``t / 2``. Returns
    ``(slope, sqrt_fisher, slope - sqrt_fisher)``.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    I = fisher_I(ref, mu)
    sq = math.sqrt(I) if math.isfinite(I) else math.inf
    lag = LagrangianMeasure.from_density(mu)
    E = LagrangianEnergy(ref, lag)
    X0 = lag.nodes
    H0 = E.entropy(E.zero())
    sp = ref.space
    L = sp.length
    lo = sp.a
    bank = [_steepest_field(ref, mu), lambda x: np.ones_like(x), lambda x: -np.ones_like(x)]
    for _ in range(n_random):
        k = rng.integers(1, 5, size=3)
        c = rng.standard_normal(3)
        ph = rng.uniform(0, 2 * math.pi, size=3)
        bank.append(lambda x, k=k, c=c, ph=ph: sum(
            ci * np.sin(2 * math.pi * ki * (x - lo) / L + p) for ci, ki, p in zip(c, k, ph)))

    def rate(field, s):
        D = s * field(X0)
        if not lag.periodic:
            D = np.clip(X0 + D, lag.lower, lag.upper) - X0
        d = math.sqrt(lag.w2_squared(D))
        if d == 0:
            return 0.0
        Hs = E.entropy(D)
        return (H0 - Hs) / d if math.isfinite(Hs) else -math.inf

    best = 0.0
    for fld in bank:
        r1, r2 = rate(fld, t), rate(fld, 0.5 * t)
        if math.isfinite(r1) and math.isfinite(r2):
            best = max(best, 2.0 * r2 - r1)
    return best, sq, best - sq


def contraction_report(ref: ReferenceSystem, mu_a: Density, mu_b: Density, delta: float,
                       T: float, K: float, n_samples: int = 10) -> float:
    """Worst ratio ``W_2(mu_a(t), mu_b(t)) / (exp(-K t) W_2(mu_a(0), mu_b(0)))``
    over ``n_samples`` equally spaced step times. Identical starts give 0."""
    fa = run_jko(ref, mu_a, delta, T, keep_states=True)
    fb = run_jko(ref, mu_b, delta, T, keep_states=True)
    d0 = w2(fa.states[0].to_segments(), fb.states[0].to_segments())
    if d0 == 0.0:
        return 0.0
    n = len(fa.states) - 1
    ks = np.unique(np.linspace(1, n, min(n_samples, n)).round().astype(int))
    worst = 0.0
    for k in ks:
        dk = w2(fa.states[k].to_segments(), fb.states[k].to_segments())
        worst = max(worst, dk / (math.exp(-K * k * delta) * d0))
    return worst
