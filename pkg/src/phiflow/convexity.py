"""Displacement convexity of the relative entropy and the functional
inequalities (transport-entropy, HWI, log-Sobolev, Poincaré type) it implies.

Entropies along geodesics are evaluated on the exact piecewise-uniform
interpolants (:func:`~phiflow.space.segment_entropy`), so the convexity slack
carries no re-binning error; the functional inequalities use the grid
functionals.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .phi_calculus import INF
from .space import (Density, ReferenceSystem, entropy_H, fisher_I, hess_psi,
                    ricci_N, segment_entropy)
from .transport import Geodesic, as_segments, w2

__all__ = [
    "chebyshev_t_grid",
    "ConvexityReport",
    "geodesic_slacks",
    "convexity_deficit",
    "convexity_sweep",
    "estimate_K",
    "curvature_condition",
    "directional_derivative_check",
    "functional_inequality_report",
    "poincare_check",
    "PairSampler",
]


def chebyshev_t_grid(n: int = 33) -> np.ndarray:
    """Chebyshev–Lobatto points mapped to ``[0, 1]`` (endpoints included)."""
    k = np.arange(n)
    t = 0.5 * (1.0 - np.cos(math.pi * k / (n - 1)))
    t[0], t[-1] = 0.0, 1.0
    return t


def _seg_H(ref: ReferenceSystem, seg) -> float:
    return segment_entropy(ref, seg.left, seg.right, seg.mass)


@dataclass
class ConvexityReport:
    K_target: float
    min_slack: float
    argmin: tuple = (None, None, None)
    samples: int = 0
    vacuous: int = 0
    rows: list = field(default_factory=list)

    def as_dict(self) -> dict:
        i, j, t = self.argmin
        slacks = np.array([r["min_slack"] for r in self.rows if math.isfinite(r["min_slack"])])
        return {
            "K_target": self.K_target,
            "min_slack": self.min_slack,
            "argmin": {"pair": i, "t": t},
            "samples": self.samples,
            "vacuous": self.vacuous,
            "mean_slack": float(slacks.mean()) if slacks.size else None,
        }

    def to_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pair", "w2", "min_slack", "t_min"])
            for r in self.rows:
                w.writerow([r["pair"], repr(r["w2"]), repr(r["min_slack"]), repr(r["t_min"])])


def geodesic_slacks(ref: ReferenceSystem, mu0, mu1, t_grid=None):
    """Convexity gap and curvature weight along the displacement geodesic.

    Returns ``(t, gap, weight, W2)`` with
    ``gap = (1-t) H(mu0) + t H(mu1) - H(mu_t)`` and
    ``weight = t (1-t) W2**2 / 2``, so that the slack for a given ``K`` is
    ``gap - K * weight``. ``gap`` is ``inf`` when an endpoint has infinite
    entropy.
    """
    t = chebyshev_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    geo = Geodesic(mu0, mu1)
    H0 = _seg_H(ref, as_segments(mu0))
    H1 = _seg_H(ref, as_segments(mu1))
    W = geo.distance
    weight = 0.5 * t * (1.0 - t) * W * W
    if not (math.isfinite(H0) and math.isfinite(H1)):
        return t, np.full(t.size, INF), weight, W
    Ht = np.array([H0 if ti == 0.0 else H1 if ti == 1.0 else _seg_H(ref, geo.at(ti)) for ti in t])
    gap = (1.0 - t) * H0 + t * H1 - Ht
    return t, gap, weight, W


def convexity_deficit(ref: ReferenceSystem, mu0, mu1, K: float, t_grid=None) -> float:
    """Minimum over ``t_grid`` of
    ``(1-t) H(mu0) + t H(mu1) - K/2 t (1-t) W2**2 - H(mu_t)``.

    Infinite endpoint entropy makes the inequality vacuous; ``inf`` is returned.
    """
    _, gap, weight, _ = geodesic_slacks(ref, mu0, mu1, t_grid)
    if not np.all(np.isfinite(gap)):
        return INF
    return float(np.min(gap - K * weight))


def convexity_sweep(ref: ReferenceSystem, pairs, K: float, t_grid=None) -> ConvexityReport:
    """Evaluate :func:`convexity_deficit` over ``pairs`` and collect a report."""
    rep = ConvexityReport(K_target=K, min_slack=INF)
    for i, (a, b) in enumerate(pairs):
        t, gap, weight, W = geodesic_slacks(ref, a, b, t_grid)
        rep.samples += 1
        if not np.all(np.isfinite(gap)):
            rep.vacuous += 1
            rep.rows.append({"pair": i, "w2": W, "min_slack": INF, "t_min": math.nan})
            continue
        s = gap - K * weight
        j = int(np.argmin(s))
        rep.rows.append({"pair": i, "w2": W, "min_slack": float(s[j]), "t_min": float(t[j])})
        if s[j] < rep.min_slack:
            rep.min_slack = float(s[j])
            rep.argmin = (i, None, float(t[j]))
    return rep


def estimate_K(ref: ReferenceSystem, pairs, tol: float = 1e-9, t_grid=None,
               bracket: tuple[float, float] = (-1e3, 1e3), iters: int = 200) -> float:
    """Largest ``K`` for which every sampled slack is at least ``-tol``.

    The slack is affine and decreasing in ``K`` for each ``(pair, t)``, so the
    feasible set is an interval ``(-inf, K*]`` located by bisection.
    """
    gaps, weights = [], []
    for a, b in pairs:
        _, gap, weight, _ = geodesic_slacks(ref, a, b, t_grid)
        inner = (weight > 0) & np.isfinite(gap)
        gaps.append(gap[inner])
        weights.append(weight[inner])
    gap = np.concatenate(gaps) if gaps else np.zeros(0)
    weight = np.concatenate(weights) if weights else np.zeros(0)
    if gap.size == 0:
        return INF

    def ok(K):
        return bool(np.all(gap - K * weight >= -tol))

    lo, hi = bracket
    if not ok(lo):
        return -INF
    if ok(hi):
        return INF
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, abs(lo)):
            break
    return lo


def curvature_condition(ref: ReferenceSystem, K: float, tol: float = 1e-6) -> bool:
    """Discrete sufficient condition: weighted Ricci curvature (dimension
    ``N_phi``) nonnegative and ``Hess psi >= K`` on the support."""
    N = ref.calc.N_phi
    ric = ricci_N(ref.space, N)
    hp = hess_psi(ref)
    sup = ref.support_mask
    return bool(np.all(ric >= -tol) and np.all(hp[sup] >= K - tol))


# ---------------------------------------------------------------------------
# directional derivative
# ---------------------------------------------------------------------------

def _gradient_on_positive_set(ref: ReferenceSystem, g: np.ndarray, pos: np.ndarray):
    """Centered differences of ``g`` on the (contiguous) positive set; ``None``
    if the set has interior holes."""
    sp = ref.space
    if sp.periodic and pos.all():
        return sp.diff1(g)
    idx = np.flatnonzero(pos)
    if sp.periodic:
        shift = int(np.flatnonzero(~pos)[-1]) + 1
        order = np.roll(np.arange(g.size), -shift)
    else:
        order = np.arange(g.size)
    p = pos[order]
    first, last = np.flatnonzero(p)[[0, -1]]
    if not p[first:last + 1].all() or idx.size < 3:
        return None
    sl = order[first:last + 1]
    v = g[sl]
    h = sp.cell_len
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    d[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    d[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    out = np.zeros_like(g)
    out[sl] = d
    return out


def directional_derivative_check(ref: ReferenceSystem, mu: Density, target: Density,
                                 ts=(1e-2, 1e-3, 1e-4)):
    """Compare the one-sided derivative of ``H`` along the geodesic toward
    ``target`` with ``sum <grad ln_phi(rho) + grad psi, T - id> dmu``.

    The left side is the difference quotient at the smallest two ``ts``,
    Richardson-extrapolated. Returns ``(lhs, rhs, lhs - rhs)``; ``(nan, nan,
    nan)`` with a warning when ``rho`` vanishes inside its support.
    """
    rho = mu.rho
    pos = rho > 0
    g = np.zeros_like(rho)
    g[pos] = np.asarray(ref.calc.ln(rho[pos])) + ref.psi[pos]
    grad = _gradient_on_positive_set(ref, g, pos)
    if grad is None:
        warnings.warn("density vanishes inside its support; directional derivative skipped")
        return math.nan, math.nan, math.nan
    geo = Geodesic(mu, target)
    disp = geo.displacement()
    rhs = float(np.sum(grad[pos] * disp[pos] * mu.masses[pos]))
    H0 = _seg_H(ref, geo.s0)
    ts = sorted(ts, reverse=True)
    q = [(_seg_H(ref, geo.at(t)) - H0) / t for t in ts]
    r = ts[-2] / ts[-1]
    lhs = (r * q[-1] - q[-2]) / (r - 1.0)
    return float(lhs), rhs, float(lhs - rhs)


# ---------------------------------------------------------------------------
# functional inequalities
# ---------------------------------------------------------------------------

def functional_inequality_report(ref: ReferenceSystem, mu: Density, K: float) -> dict:
    """Slacks of the transport-entropy, HWI and log-Sobolev inequalities.

    ``talagrand = sqrt(2 (H - H_nu) / K) - W2``,
    ``hwi = sqrt(I) W2 - K/2 W2**2 - (H - H_nu)``,
    ``lsi = I / (2K) - (H - H_nu)``. Infinite entropy makes the first
    vacuous (``inf``) and the others ``nan``.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    if abs(ref.nu_mass - 1.0) > 1e-8:
        raise ValueError("reference measure must be normalized")
    nu = ref.nu
    Hrel = entropy_H(ref, mu) - entropy_H(ref, nu)
    if not math.isfinite(Hrel):
        return {"talagrand": INF, "hwi": math.nan, "lsi": math.nan,
                "entropy_gap": INF, "w2": w2(mu, nu), "fisher": math.nan}
    W = w2(mu, nu)
    I = fisher_I(ref, mu)
    tal = math.sqrt(2.0 * max(Hrel, 0.0) / K) - W
    hwi = math.sqrt(I) * W - 0.5 * K * W * W - Hrel
    lsi = I / (2.0 * K) - Hrel
    return {"talagrand": tal, "hwi": hwi, "lsi": lsi, "entropy_gap": Hrel, "w2": W, "fisher": I}


def poincare_check(ref: ReferenceSystem, w, K: float) -> tuple[float, bool]:
    """Slack of the global Poincaré-type inequality for a test function ``w``.

    ``slack = (1/K) sum |grad(w sigma / phi(sigma))|**2 dnu
    - sum w**2 sigma / phi(sigma) dnu`` over the support. ``w`` is centered
    (``sum w sigma omega = 0``) first if needed; the second return value says
    whether centering happened.
    """
    sup = ref.support_mask
    sigma = ref.sigma
    omega = ref.space.omega
    w = np.asarray(w, dtype=float).copy()
    if w.shape != sigma.shape:
        raise ValueError("w must have one value per cell")
    nu_w = sigma * omega
    mean = float(np.sum(w[sup] * nu_w[sup]))
    centered = abs(mean) > 1e-12
    if centered:
        w = w - mean / float(np.sum(nu_w[sup]))
    ratio = np.zeros_like(sigma)
    ratio[sup] = sigma[sup] / np.asarray(ref.calc.phi_at(sigma[sup]))
    v = w * ratio
    grad = _gradient_on_positive_set(ref, v, sup)
    if grad is None:
        raise ValueError("support has interior holes")
    lhs = float(np.sum(grad[sup] ** 2 * nu_w[sup])) / K
    rhs = float(np.sum(w[sup] ** 2 * ratio[sup] * nu_w[sup]))
    return lhs - rhs, centered


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

class PairSampler:
    """Random probability densities supported in the effective support.

    Kinds: Gaussian mixtures, smooth bumps, boundary-concentrated densities
    and exact translates (pairs only). All randomness comes from ``rng``.
    """

    kinds = ("mixture", "bump", "boundary")

    def __init__(self, ref: ReferenceSystem, rng: np.random.Generator, margin: float = 0.0):
        self.ref = ref
        self.rng = rng
        sp = ref.space
        idx = np.flatnonzero(ref.support_mask)
        e = sp.edges
        self.lo = float(e[idx[0]]) + margin
        self.hi = float(e[idx[-1] + 1]) - margin
        self.width = self.hi - self.lo
        self.mask = ref.support_mask.copy()

    def _finish(self, vals) -> Density:
        vals = np.where(self.mask, vals, 0.0)
        sp = self.ref.space
        return Density.from_masses(sp, vals * sp.omega)

    def density(self, kind: str | None = None) -> Density:
        rng = self.rng
        kind = kind or self.kinds[int(rng.integers(len(self.kinds)))]
        x = self.ref.space.cell_centers
        lo, hi, W = self.lo, self.hi, self.width
        if kind == "mixture":
            k = int(rng.integers(1, 4))
            c = rng.uniform(lo + 0.2 * W, hi - 0.2 * W, size=k)
            s = rng.uniform(0.04, 0.15, size=k) * W
            a = rng.uniform(0.2, 1.0, size=k)
            vals = sum(ai * np.exp(-0.5 * ((x - ci) / si) ** 2) for ai, ci, si in zip(a, c, s))
        elif kind == "bump":
            c = rng.uniform(lo + 0.3 * W, hi - 0.3 * W)
            r = rng.uniform(0.1, 0.25) * W
            u = np.clip((x - c) / r, -1.0, 1.0)
            vals = np.cos(0.5 * math.pi * u) ** 2 + 1e-3
        elif kind == "boundary":
            side = lo if rng.random() < 0.5 else hi
            s = rng.uniform(0.03, 0.08) * W
            vals = np.exp(-0.5 * ((x - side) / s) ** 2) + 1e-4
        else:
            raise ValueError(f"unknown kind {kind!r}")
        return self._finish(vals)

    def translate_pair(self) -> tuple[Density, Density]:
        """A bump and its translate (both well inside the support)."""
        rng = self.rng
        x = self.ref.space.cell_centers
        s = rng.uniform(0.04, 0.1) * self.width
        shift = rng.uniform(0.05, 0.25) * self.width
        c0 = rng.uniform(self.lo + 0.25 * self.width, self.hi - 0.25 * self.width - shift)

        def g(c):
            return self._finish(np.exp(-0.5 * ((x - c) / s) ** 2))
        return g(c0), g(c0 + shift)

    def pairs(self, n: int, translations: int | None = None) -> list:
        """``n`` pairs; by default one in five is an exact translate pair."""
        if translations is None:
            translations = max(1, n // 5)
        out = [self.translate_pair() for _ in range(min(translations, n))]
        while len(out) < n:
            out.append((self.density(), self.density()))
        return out
