"""Concentration of the reference measure.

The concentration function of a probability ``nu`` is

    alpha(r) = sup { 1 - nu[B(A, r)] : nu[A] >= 1/2 },

``B(A, r)`` being the open ``r``-neighbourhood of ``A``. On a line the
candidate extremal sets are half-lines (arcs of half mass on a circle). An
exhaustive oracle enumerates every union of at most 20 coarse cells; one coarse
edge sits at the median (or at the end of the best half-mass arc), so each
half-line candidate belongs to the enumerated family and ``halfline <=
bruteforce`` holds by construction. Neighbourhood masses are measured with the
continuous CDF of the fine grid.

Besides ``alpha`` the module evaluates the entropy-based estimate relating
``alpha`` to the convexity constant ``K``, the closed-form deformed-normal
bounds, the sequence criterion and the Herbst-type bound obtained from the
``u_phi``-entropy inequality.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .phi_calculus import INF, PhiCalculus, power_exp
from .space import ReferenceSystem, entropy_H

__all__ = [
    "ConcentrationProfile",
    "NormalBound",
    "HerbstReport",
    "SequenceReport",
    "concentration_alpha",
    "concentration_profile",
    "alpha_atoms",
    "half_mass_sets",
    "restricted_entropy",
    "restricted_entropy_bound",
    "U_function",
    "general_estimate_slack",
    "normal_bound_value",
    "m_normal_bounds",
    "deformed_exp_inequality_i",
    "deformed_exp_inequality_ii",
    "fitting_bounds",
    "sequence_concentration",
    "hypothesis_quantity",
    "log_concavity_K",
    "u_entropy_slack",
    "default_entropy_bank",
    "herbst_bound",
    "herbst_phi",
    "herbst_auxiliary_gap",
    "chebyshev_check",
    "index_monotone_ratio",
]

_MASS_TOL = 1e-12


# ---------------------------------------------------------------------------
# distribution functions
# ---------------------------------------------------------------------------

class _CDF:
    """Piecewise-linear distribution function of cell masses, extended
    periodically on a circle (``F(x + L) = F(x) + total``)."""

    def __init__(self, edges: np.ndarray, masses: np.ndarray, period: float | None):
        self.edges = np.asarray(edges, dtype=float)
        masses = np.asarray(masses, dtype=float)
        self.cum = np.concatenate([[0.0], np.cumsum(masses)])
        # mass to the right of each edge, summed from the right so that it is
        # exactly zero beyond the support
        self.rcum = np.concatenate([np.cumsum(masses[::-1])[::-1], [0.0]])
        self.total = float(self.cum[-1])
        self.period = period

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.period is None:
            return np.interp(x, self.edges, self.cum)
        a = self.edges[0]
        k = np.floor((x - a) / self.period)
        return np.interp(x - k * self.period, self.edges, self.cum) + k * self.total

    def tail(self, x):
        """Mass to the right of ``x`` (segment only)."""
        return np.interp(np.asarray(x, dtype=float), self.edges, self.rcum)

    def inverse_right(self, u: float) -> float:
        """Largest ``x`` with ``F(x) <= u`` inside the grid (segment only)."""
        F, e = self.cum, self.edges
        k = int(np.searchsorted(F, u, side="right"))
        if k >= F.size:
            return float(e[-1])
        if k == 0:
            return float(e[0])
        return float(e[k - 1] + (u - F[k - 1]) / (F[k] - F[k - 1]) * (e[k] - e[k - 1]))

    def inverse_left(self, u: float) -> float:
        """Smallest ``x`` with ``F(x) >= u`` (periodic ``u`` allowed on a circle)."""
        F, e = self.cum, self.edges
        shift = 0.0
        if self.period is not None:
            k = math.floor(u / self.total)
            u = u - k * self.total
            shift = k * self.period
        k = int(np.searchsorted(F, u, side="left"))
        if k == 0:
            return float(e[0]) + shift
        if k >= F.size:
            return float(e[-1]) + shift
        return float(e[k - 1] + (u - F[k - 1]) / (F[k] - F[k - 1]) * (e[k] - e[k - 1])) + shift


def _nu_cdf(ref: ReferenceSystem) -> _CDF:
    sp = ref.space
    m = ref.sigma * sp.omega
    return _CDF(sp.edges, m / m.sum(), sp.length if sp.periodic else None)


def _weight_cdf(ref: ReferenceSystem, exponent: float) -> _CDF:
    """CDF of ``sigma**exponent omega`` (unnormalized)."""
    sp = ref.space
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(ref.sigma > 0, ref.sigma ** exponent, 0.0)
    return _CDF(sp.edges, g * sp.omega, sp.length if sp.periodic else None)


def _check_probability(ref: ReferenceSystem) -> None:
    if abs(ref.nu_mass - 1.0) > 1e-9:
        raise ValueError(f"reference mass {ref.nu_mass!r} is not 1; normalize first")


# ---------------------------------------------------------------------------
# half-line (arc) candidates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Anchor:
    """Half-mass split used for half-line candidates and the coarse grid."""
    start: float   # left end of the half-mass set {x >= start} / arc [start, end]
    end: float     # right end of the half-mass set {x <= end} / arc end


def _support_hull(ref: ReferenceSystem) -> tuple[float, float]:
    e = ref.space.edges
    idx = np.flatnonzero(ref.sigma > 0)
    return float(e[idx[0]]), float(e[idx[-1] + 1])


def _arc_complement(F: _CDF, start: float, r: float, G: _CDF | None = None):
    """For the half-mass arc beginning at ``start``, the mass of the set left
    uncovered by its ``r``-neighbourhood (and the same set measured by ``G``)."""
    L = F.period
    end = F.inverse_left(float(F(start)) + 0.5)
    lo, hi = end + r, start + L - r
    if hi <= lo:
        return 0.0, 0.0
    out = float(F(hi) - F(lo))
    g = float(G(hi) - G(lo)) if G is not None else 0.0
    return out, g


def _best_arc(F: _CDF, r: float, edges: np.ndarray) -> tuple[float, float]:
    starts = edges[:-1]
    vals = np.array([_arc_complement(F, s, r)[0] for s in starts])
    k = int(np.argmax(vals))
    h = edges[1] - edges[0]
    res = minimize_scalar(lambda s: -_arc_complement(F, s, r)[0],
                          bounds=(starts[k] - h, starts[k] + h), method="bounded",
                          options={"xatol": 1e-12})
    if -res.fun > vals[k]:
        return float(res.x), float(-res.fun)
    return float(starts[k]), float(vals[k])


def _halfline(ref: ReferenceSystem, r: float, G: _CDF | None = None):
    """Half-line value of ``alpha`` and the anchor; with ``G`` also the largest
    ``G``-mass of the uncovered set over the same candidates."""
    F = _nu_cdf(ref)
    if F.period is not None:
        start, val = _best_arc(F, r, ref.space.edges)
        end = F.inverse_left(float(F(start)) + 0.5)
        g = _arc_complement(F, start, r, G)[1] if G is not None else 0.0
        if G is not None:
            # the G-supremum may prefer another arc
            g = max(g, max(_arc_complement(F, s, r, G)[1] for s in ref.space.edges[:-1]))
        return val, g, _Anchor(start, end)
    q_lo = F.inverse_left(0.5)    # {x >= q_lo} has mass 1/2
    q_hi = F.inverse_right(0.5)   # {x <= q_hi} has mass 1/2
    left = float(F(q_lo - r))
    right = float(F.tail(q_hi + r))
    g = 0.0
    if G is not None:
        g = max(float(G(q_lo - r)), float(G.tail(q_hi + r)))
    return max(left, right), g, _Anchor(q_lo, q_hi)


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------

def _coarse_edges(ref: ReferenceSystem, anchor: _Anchor, n_coarse: int) -> np.ndarray:
    n_left = n_coarse // 2
    n_right = n_coarse - n_left
    if ref.space.periodic:
        L = ref.space.length
        a = np.linspace(anchor.start, anchor.end, n_left + 1)
        b = np.linspace(anchor.end, anchor.start + L, n_right + 1)
        return np.concatenate([a, b[1:]])
    s0, s1 = _support_hull(ref)
    mid = min(max(anchor.start, s0), s1)
    a = np.linspace(s0, mid, n_left + 1)
    b = np.linspace(mid, s1, n_right + 1)
    return np.concatenate([a, b[1:]])


def _enumerate(lo: np.ndarray, hi: np.ndarray, cell_mass: np.ndarray, r: float,
               cdfs: Sequence[_CDF], period: float | None) -> list[float]:
    """Max over admissible unions of coarse cells of the uncovered mass for
    each distribution function in ``cdfs``."""
    n = lo.size
    if n > 20:
        raise ValueError("exhaustive enumeration is limited to 20 cells")
    codes = np.arange(1, 1 << n, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    ok = bits.astype(float) @ cell_mass >= 0.5 - _MASS_TOL
    bits = bits[ok]
    if bits.shape[0] == 0:
        return [0.0 for _ in cdfs]
    out = []
    for F in cdfs:
        left_tail = F(lo - r)
        right_tail = F.tail(hi + r) if period is None else None
        # gap[i, j]: uncovered mass strictly between cell i and a later cell j
        gap = np.maximum(F(lo[None, :] - r) - F(hi[:, None] + r), 0.0)
        gap = np.triu(gap, 1)
        total = np.zeros(bits.shape[0])
        last = np.full(bits.shape[0], -1)
        first = np.full(bits.shape[0], -1)
        for c in range(n):
            sel = bits[:, c]
            has = sel & (last >= 0)
            total[has] += gap[last[has], c]
            new = sel & (last < 0)
            first[new] = c
            last = np.where(sel, c, last)
        if period is None:
            total += left_tail[first] + right_tail[last]
        else:
            wrap = np.maximum(F(lo[first] + period - r) - F(hi[last] + r), 0.0)
            total += wrap
        out.append(float(total.max()))
    return out


def _bruteforce(ref: ReferenceSystem, r: float, n_coarse: int, G: _CDF | None = None):
    F = _nu_cdf(ref)
    _, _, anchor = _halfline(ref, r)
    edges = _coarse_edges(ref, anchor, n_coarse)
    lo, hi = edges[:-1], edges[1:]
    cell_mass = F(hi) - F(lo)
    cdfs = [F] if G is None else [F, G]
    vals = _enumerate(lo, hi, cell_mass, r, cdfs, F.period)
    return vals[0], (vals[1] if G is not None else 0.0)


def concentration_alpha(ref: ReferenceSystem, r: float, method: str = "halfline",
                        n_coarse: int = 20) -> float:
    """Concentration function of the reference measure at radius ``r``.

    Parameters
    ----------
    method : {"halfline", "bruteforce"}
        ``halfline`` maximizes over half-lines (half-mass arcs on a circle);
        ``bruteforce`` enumerates all unions of ``n_coarse <= 20`` coarse cells.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    _check_probability(ref)
    if method == "halfline":
        return _halfline(ref, r)[0]
    if method == "bruteforce":
        return _bruteforce(ref, r, n_coarse)[0]
    raise ValueError(f"unknown method {method!r}")


def alpha_atoms(positions, masses, r: float, period: float | None = None) -> float:
    """Exhaustive concentration function of a purely atomic measure (<= 20 atoms)."""
    x = np.asarray(positions, dtype=float)
    w = np.asarray(masses, dtype=float)
    w = w / w.sum()
    if x.size > 20:
        raise ValueError("at most 20 atoms")
    if not r > 0:
        raise ValueError("radius must be positive")
    d = np.abs(x[:, None] - x[None, :])
    if period is not None:
        d = np.minimum(d, period - d)
    best = 0.0
    for k in range(1, x.size + 1):
        for A in itertools.combinations(range(x.size), k):
            A = list(A)
            if w[A].sum() < 0.5 - _MASS_TOL:
                continue
            covered = (d[A] < r).any(axis=0)
            best = max(best, float(w[~covered].sum()))
    return best


def half_mass_sets(ref: ReferenceSystem) -> tuple[np.ndarray, np.ndarray]:
    """Cell masks of the two half-line sets ``{x <= median}`` and ``{x >= median}``
    (whole cells, so their masses are at least one half)."""
    c = np.cumsum(ref.sigma * ref.space.omega)
    c = c / c[-1]
    k = int(np.searchsorted(c, 0.5))
    low = np.arange(c.size) <= k
    high = np.arange(c.size) >= k
    return low, high


@dataclass
class ConcentrationProfile:
    """``alpha`` sampled on increasing radii, with optional bound columns."""

    radii: np.ndarray
    alpha: np.ndarray
    method: str
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must increase")

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.alpha) <= 1e-12))

    def to_csv(self, path: str | Path) -> None:
        names = sorted(self.bounds)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "alpha"] + names)
            for i, r in enumerate(self.radii):
                w.writerow([repr(float(r)), repr(float(self.alpha[i]))]
                           + [repr(float(self.bounds[n][i])) for n in names])

    def as_dict(self) -> dict:
        return {"method": self.method, "radii": self.radii.tolist(),
                "alpha": self.alpha.tolist(),
                "bounds": {k: np.asarray(v, dtype=float).tolist() for k, v in self.bounds.items()}}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True))


def concentration_profile(ref: ReferenceSystem, radii, method: str = "halfline",
                          n_coarse: int = 20) -> ConcentrationProfile:
    radii = np.asarray(radii, dtype=float)
    alpha = [concentration_alpha(ref, float(r), method, n_coarse) for r in radii]
    return ConcentrationProfile(radii, np.array(alpha), method)


# ---------------------------------------------------------------------------
# entropy of restrictions
# ---------------------------------------------------------------------------

def U_function(calc: PhiCalculus, xi, t):
    """``u(xi/t) - (xi/t) ln(xi)``, extended by 0 at ``xi = 0``."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    pos = xi > 0
    z = xi[pos] / t
    out[pos] = np.asarray(calc.u(z)) - z * np.asarray(calc.ln(xi[pos]))
    return out if out.ndim else float(out)


def restricted_entropy(ref: ReferenceSystem, A) -> float:
    """Relative entropy of the normalized restriction of ``nu`` to the cells in ``A``."""
    A = np.asarray(A, dtype=bool)
    m = ref.sigma * ref.space.omega
    t = float(m[A].sum())
    if not A.any() or t <= 0:
        raise ValueError("restriction set must carry positive mass")
    vals = U_function(ref.calc, ref.sigma[A], t)
    return float(np.sum(vals * ref.space.omega[A]))


def restricted_entropy_bound(ref: ReferenceSystem, B, xi0: float) -> float:
    """Upper bound ``-t**(delta-2) ln(t) xi0**(theta-delta) int_B sigma**(2-theta)``
    for the entropy of the restriction to ``B`` (``t = nu[B]``)."""
    c = ref.calc
    B = np.asarray(B, dtype=bool)
    t = float((ref.sigma * ref.space.omega)[B].sum())
    if xi0 < max(t, ref.sigma_max):
        raise ValueError("xi0 must dominate nu[B] and sup sigma")
    integral = float(np.sum(ref.sigma[B] ** (2.0 - c.theta_phi) * ref.space.omega[B]))
    return -t ** (c.delta_phi - 2.0) * float(c.ln(t)) * xi0 ** (c.theta_phi - c.delta_phi) * integral


def index_monotone_ratio(calc: PhiCalculus, s) -> np.ndarray:
    """``s**(delta-2) ln(s)``, increasing on ``(0, 1)`` when ``delta <= 2``."""
    s = np.asarray(s, dtype=float)
    return s ** (calc.delta_phi - 2.0) * np.asarray(calc.ln(s))


# ---------------------------------------------------------------------------
# general estimate
# ---------------------------------------------------------------------------

def general_estimate_slack(ref: ReferenceSystem, K: float, xi0: float, r: float,
                           method: str = "halfline", n_coarse: int = 20) -> float:
    """Right minus left side of the estimate

        alpha**(delta-2) ln(alpha) xi0**(theta-delta) sup_A int_B sigma**(2-theta)
            <= -(sqrt(K/2) r - sqrt(-H))**2 - H,

    ``H`` being the entropy of ``nu`` and ``B`` the uncovered set. The supremum
    runs over the same candidate family as ``alpha``. Returns ``inf`` when
    ``alpha(r) = 0`` (the estimate is then vacuous).
    """
    _check_probability(ref)
    if not K > 0:
        raise ValueError("K must be positive")
    if xi0 < max(0.5, ref.sigma_max):
        raise ValueError("xi0 must be at least max(1/2, sup sigma)")
    c = ref.calc
    G = _weight_cdf(ref, 2.0 - c.theta_phi)
    if method == "halfline":
        alpha, sup_int, _ = _halfline(ref, r, G)
    elif method == "bruteforce":
        alpha, sup_int = _bruteforce(ref, r, n_coarse, G)
    else:
        raise ValueError(f"unknown method {method!r}")
    if alpha <= 0:
        return INF
    H = min(entropy_H(ref, ref.nu), 0.0)
    rhs = -(math.sqrt(K / 2.0) * r - math.sqrt(-H)) ** 2 - H
    lhs = alpha ** (c.delta_phi - 2.0) * float(c.ln(alpha)) \
        * xi0 ** (c.theta_phi - c.delta_phi) * sup_int
    return rhs - lhs


# ---------------------------------------------------------------------------
# deformed-normal bounds
# ---------------------------------------------------------------------------

@dataclass
class NormalBound:
    """Outcome of the deformed-normal bound at one radius.

    ``bound`` is the closed-form value in the form of the statement (a lower
    bound on ``1/alpha`` in cases i and iii, an upper bound on ``alpha`` in
    case ii); ``alpha_upper`` is the implied upper bound on ``alpha``.
    """

    case: str | None
    bound: float
    alpha_upper: float
    alpha: float
    holds: bool

    @property
    def applicable(self) -> bool:
        return self.case is not None


def _case(theta: float, delta: float, omega_M: float) -> str | None:
    if theta < 1.0 and delta > 0.0:
        return "i"
    if 1.0 < theta < 1.5 and delta > 3.0 * (theta - 1.0) and math.isfinite(omega_M):
        return "ii"
    if theta == 1.0 and delta > 0.5:
        return "iii"
    return None


def normal_bound_value(theta: float, delta: float, K: float, xi0: float, r: float,
                       omega_M: float = INF, form: str = "statement") -> tuple[str | None, float, float]:
    """Closed-form deformed-normal bound for indices ``(theta, delta)``.

    Returns ``(case, bound, alpha_upper)``. For case ii ``form="proof"``
    assembles the bound from the intermediate constants ``c``, ``beta`` and
    ``e_m(beta)``; the statement form is the simplified closed expression.
    """
    case = _case(theta, delta, omega_M)
    if case is None:
        return None, math.nan, math.nan
    if case == "i":
        const = (delta * (1.0 - theta) / ((1.0 - delta) * (2.0 - delta))) ** (1.0 / (1.0 - delta))
        inv = const * float(power_exp(2.0 - delta, K / 4.0 * xi0 ** (delta - 1.0) * r * r))
        return case, inv, 1.0 / inv
    if case == "iii":
        m = 3.0 - 2.0 * delta
        inv = float(power_exp(m, -2.0 / m)) * float(power_exp(m, K / 4.0 * xi0 ** (delta - 1.0) * r * r))
        return case, inv, 1.0 / inv
    m = 2.0 * (1.0 - theta) + delta
    scale = K * xi0 ** (delta - theta) * omega_M ** (1.0 - theta)
    if form == "proof":
        mp = 2.0 - theta
        c = ((1.0 - m) / (1.0 - mp)) ** (1.0 / (m - 1.0))
        beta = (2.0 - m - mp) / (1.0 - m)
        arg = -(1.0 - 1.0 / (beta * mp)) * scale / (2.0 * (m + mp - 1.0)) * r * r
        val = float(power_exp(m, beta)) * float(power_exp(m, arg)) / c
    else:
        const = ((theta - 1.0) * (3.0 - 3.0 * theta + delta) / (2.0 * theta - delta - 1.0)) \
            ** (1.0 / (1.0 - 2.0 * theta + delta))
        arg = -K / 2.0 * (theta - 1.0) / ((2.0 - theta) * (3.0 * theta - delta - 2.0)) \
            * xi0 ** (delta - theta) * omega_M ** (1.0 - theta) * r * r
        val = const * float(power_exp(m, arg))
    return case, val, val


def m_normal_bounds(ref: ReferenceSystem, K: float, xi0: float, r: float,
                    alpha: float | None = None, method: str = "halfline",
                    tol: float = 1e-12) -> NormalBound:
    """Evaluate the deformed-normal bound of the matching case and compare it
    with the measured ``alpha(r)``."""
    c = ref.calc
    if xi0 < max(1.0, ref.sigma_max):
        raise ValueError("xi0 must be at least max(1, sup sigma)")
    case, bound, upper = normal_bound_value(c.theta_phi, c.delta_phi, K, xi0, r,
                                            ref.space.total_omega)
    if alpha is None:
        alpha = concentration_alpha(ref, r, method)
    if case is None:
        return NormalBound(None, math.nan, math.nan, alpha, False)
    return NormalBound(case, bound, upper, alpha, bool(alpha <= upper + tol))


def deformed_exp_inequality_i(m: float, mp: float, a: float, r: float) -> tuple[float, float, float]:
    """Both sides of the first deformed-exponential inequality and ``beta m'``.

    Requires ``0 < m <= mp < 1`` and ``m + mp > 1``; the left side should not
    exceed the right side and ``beta m' > 1``.
    """
    if not (0 < m <= mp < 1 and m + mp > 1):
        raise ValueError("need 0 < m <= m' < 1 and m + m' > 1")
    beta = 1.0 + (1.0 - mp) / (1.0 - m)
    lhs = float(power_exp(m, -(a * r - 1.0 / math.sqrt(mp)) ** 2 + 1.0 / mp))
    rhs = float(power_exp(m, beta)) * float(
        power_exp(m, -(1.0 - 1.0 / (beta * mp)) * a * a * r * r / (m + mp - 1.0)))
    return lhs, rhs, beta * mp


def deformed_exp_inequality_ii(m: float, a: float, r: float) -> tuple[float, float]:
    """Both sides of ``e_m((ar-1)**2 - 1) >= e_m(-2/m) e_m(a**2 r**2 / 2)`` for ``m`` in [1, 2)."""
    if not 1.0 <= m < 2.0:
        raise ValueError("need m in [1, 2)")
    lhs = float(power_exp(m, (a * r - 1.0) ** 2 - 1.0))
    rhs = float(power_exp(m, -2.0 / m)) * float(power_exp(m, a * a * r * r / 2.0))
    return lhs, rhs


def fitting_bounds(ref: ReferenceSystem, xi0: float | None = None) -> dict:
    """Integral and entropy lower bounds for the reference measure.

    For ``theta <= 1``: ``int sigma**(2-theta) <= xi0**(1-theta)`` and
    ``H >= -xi0/((2-theta) phi(xi0))``. For ``theta`` in ``(1, 3/2)``: the
    ``omega[M]**(theta-1)`` variants.
    """
    c = ref.calc
    th = c.theta_phi
    xi0 = ref.sigma_max if xi0 is None else xi0
    if xi0 < ref.sigma_max:
        raise ValueError("xi0 must dominate sup sigma")
    omega = ref.space.omega
    integral = float(np.sum(ref.sigma ** (2.0 - th) * omega))
    H = entropy_H(ref, ref.nu)
    phi0 = float(c.phi_at(xi0))
    if th <= 1.0:
        case = "i"
        ib = xi0 ** (1.0 - th)
        hb = -xi0 / ((2.0 - th) * phi0)
    elif th < 1.5:
        case = "ii"
        wm = ref.space.total_omega
        ib = wm ** (th - 1.0)
        hb = -xi0 ** th * wm ** (th - 1.0) / ((2.0 - th) * phi0)
    else:
        return {"case": None}
    return {"case": case, "integral": integral, "integral_bound": ib,
            "entropy": H, "entropy_bound": hb,
            "holds": bool(integral <= ib * (1 + 1e-12) and H >= hb - 1e-12)}


# ---------------------------------------------------------------------------
# sequences
# ---------------------------------------------------------------------------

def hypothesis_quantity(calc: PhiCalculus, K: float, xi: float) -> float:
    """``K xi**(delta-1)`` for ``theta <= 1``, ``K xi**(delta-theta)`` otherwise."""
    if calc.theta_phi <= 1.0:
        return K * xi ** (calc.delta_phi - 1.0)
    return K * xi ** (calc.delta_phi - calc.theta_phi)


@dataclass
class SequenceReport:
    alphas: np.ndarray
    quantities: np.ndarray
    decreasing: bool
    threshold: float   # smallest quantity beyond which every alpha is below ``level``
    level: float

    def as_dict(self) -> dict:
        return {"alphas": self.alphas.tolist(), "quantities": self.quantities.tolist(),
                "decreasing": self.decreasing, "threshold": self.threshold, "level": self.level}


def sequence_concentration(family: Sequence[ReferenceSystem], r: float,
                           Ks: Sequence[float] | None = None, method: str = "halfline",
                           level: float = 1e-3) -> SequenceReport:
    """``alpha_i(r)`` along a family of reference systems.

    ``Ks`` are the convexity constants of the members (needed for the
    hypothesis quantity; ``nan`` when omitted).
    """
    alphas = np.array([concentration_alpha(ref, r, method) for ref in family])
    if Ks is None:
        q = np.full(alphas.size, math.nan)
    else:
        q = np.array([hypothesis_quantity(ref.calc, K, max(1.0, ref.sigma_max))
                      for ref, K in zip(family, Ks)])
    dec = bool(np.all(np.diff(alphas) < 0)) if alphas.size > 1 else True
    below = alphas < level
    threshold = INF
    for i in range(alphas.size):
        if below[i:].all():
            threshold = float(q[i])
            break
    return SequenceReport(alphas, q, dec, threshold, level)


# ---------------------------------------------------------------------------
# Herbst-type bound from the u_phi-entropy inequality
# ---------------------------------------------------------------------------

def log_concavity_K(ref: ReferenceSystem) -> float:
    """Smallest second difference of ``-log sigma`` over interior support cells.

    A lower bound ``K`` on this curvature makes ``nu`` satisfy the
    ``u_phi``-entropy inequality with constant ``K`` for concave ``phi``.
    """
    sup = ref.support_mask
    s = np.where(sup, ref.sigma, 1.0)
    v = -np.log(s)
    h = ref.space.cell_len
    if ref.space.periodic:
        d2 = (np.roll(v, -1) - 2 * v + np.roll(v, 1)) / h ** 2
        inner = sup & np.roll(sup, 1) & np.roll(sup, -1)
    else:
        d2 = np.full(v.size, INF)
        d2[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h ** 2
        inner = sup.copy()
        inner[1:-1] &= sup[2:] & sup[:-2]
        inner[[0, -1]] = False
    return float(d2[inner].min())


def default_entropy_bank() -> list[tuple[str, Callable, Callable]]:
    """Nonnegative test functions ``(name, w, w')`` for the entropy inequality."""
    bank = [("constant", lambda x: np.ones_like(x), lambda x: np.zeros_like(x))]
    for c in (-1.0, -0.5, 0.5, 1.0):
        bank.append((f"exp{c:+g}", lambda x, c=c: np.exp(c * x), lambda x, c=c: c * np.exp(c * x)))
    for k in (0.5, 1.0, 2.0):
        bank.append((f"sin{k:g}", lambda x, k=k: 1.0 + 0.5 * np.sin(k * x),
                     lambda x, k=k: 0.5 * k * np.cos(k * x)))
    for b in (-1.0, 0.0, 1.0):
        bank.append((f"quad{b:+g}", lambda x, b=b: (x - b) ** 2 + 0.1, lambda x, b=b: 2.0 * (x - b)))
    bank.append(("logistic", lambda x: 1.0 / (1.0 + np.exp(-2.0 * x)),
                 lambda x: 2.0 * np.exp(-2.0 * x) / (1.0 + np.exp(-2.0 * x)) ** 2))
    return bank


def u_entropy_slack(ref: ReferenceSystem, K: float, w: Callable, dw: Callable) -> float:
    """``(1/2K) int |w'|**2/phi(w) dnu - (int u(w) dnu - u(int w dnu))`` by midpoint
    quadrature on the cells."""
    calc = ref.calc
    x = ref.space.cell_centers
    p = ref.sigma * ref.space.omega
    p = p / p.sum()
    wv = np.asarray(w(x), dtype=float)
    g = np.asarray(dw(x), dtype=float)
    mean = float(p @ wv)
    ent = float(p @ np.asarray(calc.u(wv))) - float(calc.u(mean))
    pos = wv > 0
    fisher = float(np.sum(p[pos] * g[pos] ** 2 / np.asarray(calc.phi_at(wv[pos]))))
    return fisher / (2.0 * K) - ent


def herbst_bound(calc: PhiCalculus, K: float, r: float) -> float:
    """``1 / exp_phi(a K r**2 / 8)`` with ``a = -u_phi(1)``."""
    return 1.0 / float(calc.exp(calc.a_phi * K * r * r / 8.0))


@dataclass
class HerbstReport:
    applicable: bool
    entropy_slack: float
    bound: float
    alpha: float
    bound_holds: bool
    worst_function: str = ""


def herbst_phi(ref: ReferenceSystem, K: float, r: float, bank=None, tol: float = 1e-9,
               method: str = "halfline") -> HerbstReport:
    """Check the ``u_phi``-entropy inequality on a test bank and, when it holds,
    the resulting bound ``alpha(r) <= 1/exp_phi(a K r**2/8)``."""
    calc = ref.calc
    if not calc.phi.is_concave() or abs(float(calc.phi_at(1.0)) - 1.0) > 1e-12:
        return HerbstReport(False, math.nan, math.nan, math.nan, False)
    bank = default_entropy_bank() if bank is None else bank
    slacks = [(u_entropy_slack(ref, K, w, dw), name) for name, w, dw in bank]
    worst, name = min(slacks)
    bound = herbst_bound(calc, K, r)
    alpha = concentration_alpha(ref, r, method)
    holds = bool(worst >= -tol and alpha <= bound + 1e-12)
    return HerbstReport(True, worst, bound, alpha, holds, name)


def herbst_auxiliary_gap(calc: PhiCalculus, s):
    """``u(s) + a s - a phi(s) ln(s)`` with ``a = -u_phi(1)``; nonnegative for concave ``phi``."""
    s = np.asarray(s, dtype=float)
    a = calc.a_phi
    return np.asarray(calc.u(s)) + a * s - a * np.asarray(calc.phi_at(s)) * np.asarray(calc.ln(s))


def chebyshev_check(values, weights, t: float, v: Callable) -> tuple[float, float]:
    """``(mu[{w >= t}], int v(w) dmu / v(t))`` for nonnegative non-decreasing ``v``."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    vt = float(v(t))
    if vt <= 0:
        raise ValueError("v(t) must be positive")
    lhs = float(weights[values >= t].sum())
    rhs = float(weights @ np.asarray(v(values))) / vt
    return lhs, rhs
