"""Deformed exponential families and Bregman projection onto them.

A family is ``rho_xi = exp_phi(Lambda(xi) - <xi, X>)`` with statistics ``X``
evaluated at cell centres and ``Lambda`` fixing unit mass. When every member
has full support the gradient of ``xi -> D(mu | nu_xi)`` is the moment
mismatch ``eta(mu) - eta(nu_xi)``, and the Jacobian of the member moments is
minus the escort covariance of ``X`` (weights ``phi(rho_xi) omega``). The
projection therefore runs a bounded quasi-Newton search from several starts and
finishes with Newton steps on the moment equations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize

from .phi_calculus import INF, PhiCalculus
from .space import Density, WeightedSpace

__all__ = [
    "OutsideFamilyError",
    "BoundaryWarning",
    "PhiExpFamily",
    "Projection",
    "STATISTICS",
    "partition_lambda",
    "bregman_divergence",
    "bregman_project",
    "pythagoras_residual",
    "pythagoras_sweep",
]

STATISTICS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "x": lambda x: x,
    "x2": lambda x: x * x,
    "x3": lambda x: x ** 3,
    "abs": np.abs,
}


class OutsideFamilyError(ValueError):
    """No normalizing constant exists for the requested parameter."""


class BoundaryWarning(UserWarning):
    """The projection landed on the boundary of the parameter box."""


@dataclass
class PhiExpFamily:
    """Family ``exp_phi(Lambda(xi) - <xi, X>)`` on a weighted grid.

    Parameters
    ----------
    space, calc
    statistics : sequence of str or callable
        Names from :data:`STATISTICS` or functions of position; at most 3.
    lower, upper : sequence of float
        Parameter box.
    """

    space: WeightedSpace
    calc: PhiCalculus
    statistics: Sequence
    lower: Sequence[float]
    upper: Sequence[float]

    def __post_init__(self):
        if not 1 <= len(self.statistics) <= 3:
            raise ValueError("between one and three statistics are supported")
        cols = []
        names = []
        for s in self.statistics:
            fn = STATISTICS[s] if isinstance(s, str) else s
            names.append(s if isinstance(s, str) else getattr(s, "__name__", "custom"))
            cols.append(np.asarray(fn(self.space.cell_centers), dtype=float))
        self.X = np.column_stack(cols)
        self.names = names
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != (self.k,) or self.upper.shape != (self.k,) \
                or np.any(self.lower >= self.upper):
            raise ValueError("parameter box must have lower < upper in every coordinate")

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def moments(self, mu: Density | np.ndarray) -> np.ndarray:
        """``eta(mu) = sum X rho omega``."""
        rho = mu.rho if isinstance(mu, Density) else np.asarray(mu, dtype=float)
        return self.X.T @ (rho * self.space.omega)

    def density_values(self, xi) -> np.ndarray:
        lam = partition_lambda(self, xi)
        return np.asarray(self.calc.exp(lam - self.X @ np.asarray(xi, dtype=float)), dtype=float)

    def member(self, xi) -> Density:
        return Density.from_values(self.space, self.density_values(xi))

    def full_support(self, xi) -> bool:
        """Whether ``nu_xi`` charges every cell (a standing hypothesis of the identity)."""
        return bool(np.all(self.density_values(xi) > 0))

    def lattice(self, n: int, shrink: float = 0.1) -> np.ndarray:
        """``n**k`` points of the box, shrunk by ``shrink`` of the width at each end."""
        w = self.upper - self.lower
        axes = [np.linspace(lo + shrink * wi, hi - shrink * wi, n)
                for lo, hi, wi in zip(self.lower, self.upper, w)]
        return np.array(np.meshgrid(*axes, indexing="ij")).reshape(self.k, -1).T


def partition_lambda(fam: PhiExpFamily, xi, tol: float = 1e-10) -> float:
    """Normalizer ``Lambda(xi)``: the root of ``sum exp_phi(lam - <xi, X>) omega = 1``.

    Raises
    ------
    OutsideFamilyError
        When the mass stays below one up to the largest finite ``lam``.
    """
    calc = fam.calc
    t = fam.X @ np.asarray(xi, dtype=float)
    omega = fam.space.omega

    def excess(lam: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.asarray(calc.exp(lam - t)) @ omega) - 1.0

    if math.isfinite(calc.L_phi):
        hi = calc.L_phi + float(t.min())
        top = hi - 1e-14 * max(1.0, abs(hi))
        if not excess(top) > 0:
            raise OutsideFamilyError(f"no normalizer for xi={np.asarray(xi).tolist()}")
        hi = top
    else:
        hi = float(t.min()) + 1.0
        step = 1.0
        while not excess(hi) > 0:
            hi += step
            step *= 2.0
            if step > 1e12:
                raise OutsideFamilyError(f"no normalizer for xi={np.asarray(xi).tolist()}")
    lo = hi - 1.0
    step = 1.0
    while excess(lo) > 0:
        lo -= step
        step *= 2.0
        if step > 1e12:
            raise OutsideFamilyError("normalizer search diverged")
    lam = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(excess(lam)) > tol:
        raise OutsideFamilyError(f"normalizer residual {excess(lam)!r} exceeds {tol}")
    return float(lam)


def bregman_divergence(calc: PhiCalculus, rho, sigma, omega) -> float:
    """``sum {u(rho) - u(sigma) - u'(sigma)(rho - sigma)} omega`` with
    ``u'(0) = l_phi``; infinite when ``rho`` charges a cell where that is ``-inf``."""
    rho = np.asarray(rho, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    pos = sigma > 0
    du = np.full(sigma.shape, calc.l_phi)
    du[pos] = np.asarray(calc.ln(sigma[pos]))
    if np.any(~np.isfinite(du) & (rho > sigma)):
        return INF
    du = np.where(np.isfinite(du), du, 0.0)
    val = np.asarray(calc.u(rho)) - np.asarray(calc.u(sigma)) - du * (rho - sigma)
    return float(val @ np.asarray(omega, dtype=float))


@dataclass
class Projection:
    xi: np.ndarray
    divergence: float
    moment_residual: float
    on_boundary: bool
    full_support: bool
    iterations: int


def _moment_gap(fam: PhiExpFamily, xi, eta_mu) -> tuple[np.ndarray, np.ndarray]:
    rho = fam.density_values(xi)
    return fam.X.T @ (rho * fam.space.omega) - eta_mu, rho


def _moment_jacobian(fam: PhiExpFamily, rho: np.ndarray) -> np.ndarray:
    """``d eta(nu_xi) / d xi`` on the positive set (minus the escort covariance)."""
    w = np.where(rho > 0, np.asarray(fam.calc.phi_at(np.where(rho > 0, rho, 1.0))), 0.0) * fam.space.omega
    X = fam.X
    z = w.sum()
    mean = X.T @ w / z
    Xc = X - mean
    return -(Xc.T * w) @ Xc


def bregman_project(fam: PhiExpFamily, mu: Density, n_polish: int = 30,
                    tol: float = 1e-12) -> Projection:
    """Minimize ``xi -> D(mu | nu_xi)`` over the parameter box.

    Quasi-Newton (L-BFGS-B, analytic gradient) from the box centre and four
    corners, then Newton steps on the moment equations while they stay inside
    the box. A minimizer within ``1e-8`` of the boundary raises
    :class:`BoundaryWarning`.
    """
    calc = fam.calc
    rho_mu = mu.rho
    omega = fam.space.omega
    eta_mu = fam.moments(mu)
    lo, hi = fam.lower, fam.upper

    def objective(xi):
        try:
            rho = fam.density_values(xi)
        except OutsideFamilyError:
            return 1e300, np.zeros(fam.k)
        D = bregman_divergence(calc, rho_mu, rho, omega)
        if not math.isfinite(D):
            return 1e300, np.zeros(fam.k)
        grad = eta_mu - fam.X.T @ (rho * omega)
        return D, grad

    centre = 0.5 * (lo + hi)
    corners = [lo + f * (hi - lo) for f in
               (np.array([0.25, 0.25, 0.25])[:fam.k], np.array([0.75, 0.75, 0.75])[:fam.k],
                np.array([0.25, 0.75, 0.25])[:fam.k], np.array([0.75, 0.25, 0.75])[:fam.k])]
    best = None
    for x0 in [centre] + corners:
        res = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500})
        if best is None or res.fun < best.fun:
            best = res
    xi = np.asarray(best.x, dtype=float)
    its = int(best.nit)
    for _ in range(n_polish):
        gap, rho = _moment_gap(fam, xi, eta_mu)
        if np.max(np.abs(gap)) <= tol:
            break
        J = _moment_jacobian(fam, rho)
        try:
            step = np.linalg.solve(J, gap)
        except np.linalg.LinAlgError:
            break
        cand = xi - step
        if np.any(cand < lo) or np.any(cand > hi):
            break
        new_gap, _ = _moment_gap(fam, cand, eta_mu)
        if np.max(np.abs(new_gap)) >= np.max(np.abs(gap)):
            break
        xi = cand
        its += 1
    gap, rho = _moment_gap(fam, xi, eta_mu)
    width = hi - lo
    boundary = bool(np.any(np.minimum(xi - lo, hi - xi) <= 1e-8 * np.maximum(width, 1.0)))
    if boundary:
        warnings.warn("projection reached the parameter box boundary", BoundaryWarning, stacklevel=2)
    D = bregman_divergence(calc, rho_mu, rho, omega)
    return Projection(xi, D, float(np.max(np.abs(gap))), boundary, bool(np.all(rho > 0)), its)


def pythagoras_residual(fam: PhiExpFamily, mu: Density, xi, xi_star=None) -> float:
    """``|D(mu|nu_xi) - D(mu|nu_*) - D(nu_*|nu_xi)|`` at the projection ``nu_*``."""
    if xi_star is None:
        proj = bregman_project(fam, mu)
        if proj.on_boundary:
            raise ValueError("projection on the boundary; identity not applicable")
        xi_star = proj.xi
    calc, omega = fam.calc, fam.space.omega
    r_xi = fam.density_values(xi)
    r_st = fam.density_values(xi_star)
    lhs = bregman_divergence(calc, mu.rho, r_xi, omega)
    rhs = bregman_divergence(calc, mu.rho, r_st, omega) + bregman_divergence(calc, r_st, r_xi, omega)
    return abs(lhs - rhs)


def pythagoras_sweep(fam: PhiExpFamily, mu: Density, n: int = 5) -> dict:
    """Projection plus the identity residual over an ``n**k`` lattice."""
    proj = bregman_project(fam, mu)
    out = {"xi_star": proj.xi.tolist(), "moment_residual": proj.moment_residual,
           "divergence": proj.divergence, "on_boundary": proj.on_boundary,
           "full_support_star": proj.full_support}
    if proj.on_boundary:
        out.update(max_residual=math.nan, skipped=True)
        return out
    pts = fam.lattice(n)
    res = [pythagoras_residual(fam, mu, p, proj.xi) for p in pts]
    support = [fam.full_support(p) for p in pts]
    out.update(max_residual=float(max(res)), residuals=[float(r) for r in res],
               full_support=all(support), skipped=False)
    return out
