"""Deformed logarithms, exponentials and convex integrands generated by a
positive non-decreasing function ``phi``.

Two kinds of ``phi`` are supported: pure powers ``a * s**(2 - m)`` (closed
forms are available) and tabulated functions interpolated log-log linearly
between knots (so that each knot interval carries an exact power law, and the
extension beyond the outer knots continues the outer power laws).

The numerical route integrates ``1/phi`` and ``s/phi`` with composite
Gauss-Legendre quadrature in the variable ``log s`` and is used for tabulated
functions, or for power functions when ``method="quadrature"`` is requested
(the closed forms then serve as an independent check).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INF = math.inf

__all__ = [
    "PhiFunction",
    "PhiCalculus",
    "ComparisonReport",
    "power_log",
    "power_exp",
    "ln_phi",
    "exp_phi",
    "u_phi",
    "h_phi",
    "order_indices",
    "dc_membership",
    "psi_N",
    "verify_comparison_bounds",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_ONE_TOL = 1e-6  # grid estimates of an index within this of 1 are snapped to 1


def _ret(x):
    """Return a Python-friendly scalar for 0-d arrays."""
    x = np.asarray(x, dtype=float)
    return x[()] if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# power-law closed forms
# ---------------------------------------------------------------------------

def power_log(m: float, t):
    """Closed-form deformed logarithm ``(t**(m-1) - 1)/(m-1)`` (``log`` at m=1).

    Defined for ``t >= 0``; at ``t = 0`` returns the infimum
    (``-1/(m-1)`` for ``m > 1``, ``-inf`` otherwise), at ``t = inf`` the supremum.
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if m == 1.0:
            out = np.log(t)
        else:
            out = np.expm1((m - 1.0) * np.log(t)) / (m - 1.0)
    return _ret(out)


def power_exp(m: float, tau):
    """Closed-form deformed exponential ``[1 + (m-1) tau]_+ ** (1/(m-1))``.

    For ``m < 1`` the bracket hitting zero means the value is ``+inf``; for
    ``m > 1`` it means the value is ``0``.
    """
    tau = np.asarray(tau, dtype=float)
    if m == 1.0:
        with np.errstate(over="ignore"):
            return _ret(np.exp(tau))
    base = 1.0 + (m - 1.0) * tau
    out = np.empty_like(base)
    pos = base > 0
    with np.errstate(over="ignore", divide="ignore"):
        out[pos] = np.exp(np.log(base[pos]) / (m - 1.0))
    out[~pos] = INF if m < 1.0 else 0.0
    # tau = -inf / +inf limits
    out[np.isneginf(tau)] = 0.0
    out[np.isposinf(tau)] = INF
    return _ret(out)


def _power_bounds(m: float) -> tuple[float, float]:
    lo = -1.0 / (m - 1.0) if m > 1.0 else -INF
    hi = 1.0 / (1.0 - m) if m < 1.0 else INF
    return lo, hi


# ---------------------------------------------------------------------------
# the function phi itself
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhiFunction:
    """A positive non-decreasing function on ``(0, inf)``.

    Use :meth:`power` or :meth:`tabulated` to construct one.

    Attributes
    ----------
    kind : {"power", "tabulated"}
    m : float or None
        Exponent parameter of the power kind, ``phi(s) = scale * s**(2-m)``.
    knots, values : ndarray or None
        Tabulated samples (strictly increasing positive knots, positive
        non-decreasing values).
    scale : float
        Positive multiplier ``a`` so that the evaluated function is ``a * phi``.
    """

    kind: str
    m: float | None = None
    knots: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)
    scale: float = 1.0

    # -- constructors -------------------------------------------------------
    @classmethod
    def power(cls, m: float, scale: float = 1.0) -> "PhiFunction":
        m = float(m)
        if not 0.0 < m <= 2.0:
            raise ValueError(f"power exponent m must lie in (0, 2], got {m}")
        if not scale > 0:
            raise ValueError("scale must be positive")
        return cls(kind="power", m=m, scale=float(scale))

    @classmethod
    def tabulated(cls, knots, values, scale: float = 1.0) -> "PhiFunction":
        knots = np.asarray(knots, dtype=float).copy()
        values = np.asarray(values, dtype=float).copy()
        if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
            raise ValueError("knots and values must be 1-D arrays of equal length >= 2")
        if np.any(knots <= 0) or np.any(np.diff(knots) <= 0):
            raise ValueError("invalid phi: knots must be positive and strictly increasing")
        if np.any(values <= 0) or np.any(np.diff(values) < 0):
            raise ValueError("invalid phi: values must be positive and non-decreasing")
        if not scale > 0:
            raise ValueError("scale must be positive")
        knots.setflags(write=False)
        values.setflags(write=False)
        return cls(kind="tabulated", knots=knots, values=values, scale=float(scale))

    @classmethod
    def from_csv(cls, path: str | Path, scale: float = 1.0) -> "PhiFunction":
        """Read a two-column ``(s, phi(s))`` CSV file; a header row is optional."""
        rows = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or all(not c.strip() for c in row):
                    continue
                try:
                    s, v = float(row[0]), float(row[1])
                except (ValueError, IndexError):
                    if lineno == 1 and not rows:
                        continue  # header
                    raise ValueError(f"{path}:{lineno}: expected two numeric columns")
                rows.append((s, v))
        arr = np.array(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise ValueError(f"{path}: need at least two rows")
        return cls.tabulated(arr[:, 0], arr[:, 1], scale=scale)

    def to_csv(self, path: str | Path) -> None:
        if self.kind != "tabulated":
            raise ValueError("only tabulated phi can be written to CSV")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "phi"])
            for s, v in zip(self.knots, self.values * self.scale):
                w.writerow([repr(float(s)), repr(float(v))])

    # -- evaluation ---------------------------------------------------------
    @property
    def exponents(self) -> np.ndarray:
        """Log-log slopes of a tabulated phi on each knot interval."""
        return np.diff(np.log(self.values)) / np.diff(np.log(self.knots))

    def _base(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            return s ** (2.0 - self.m)
        ls = np.log(s)
        lk = np.log(self.knots)
        lv = np.log(self.values)
        p = self.exponents
        idx = np.clip(np.searchsorted(lk, ls, side="right") - 1, 0, lk.size - 2)
        return np.exp(lv[idx] + p[idx] * (ls - lk[idx]))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0):
            raise ValueError("phi is defined on (0, inf) only")
        return _ret(self.scale * self._base(s))

    def with_scale(self, scale: float) -> "PhiFunction":
        if self.kind == "power":
            return PhiFunction.power(self.m, scale)
        return PhiFunction.tabulated(self.knots, self.values, scale)

    def normalize(self) -> "PhiFunction":
        """Rescaled copy with ``phi(1) = 1``."""
        return self.with_scale(1.0 / float(self._base(1.0)))

    def is_concave(self, n_grid: int = 400) -> bool:
        """Secant test for concavity on a log grid of ``(1e-4, 1e4)``."""
        if self.kind == "power":
            return self.m >= 1.0
        s = np.logspace(-4, 4, n_grid)
        v = self(s)
        slopes = np.diff(v) / np.diff(s)
        return bool(np.all(np.diff(slopes) <= 1e-12 * np.maximum(1.0, np.abs(slopes[:-1]))))

    def order_indices(self) -> tuple[float, float, float]:
        """Upper index theta, lower index delta and dimension N = 1/(theta-1).

        Power functions give exact values. Tabulated functions use the sup/inf
        of the elasticity ``s phi'(s)/phi(s)``, estimated by forward differences
        of ``log phi`` against ``log s`` (step ``1e-6 s``, exact on power-law
        pieces) on 512 log-spaced points of ``[1e-4, 1e4]``; estimates within
        1e-6 of 1 are snapped to 1.
        """
        if self.kind == "power":
            theta = delta = 2.0 - self.m
        else:
            s = np.logspace(-4.0, 4.0, 512)
            step = 1e-6
            q = np.log(self._base(s * (1.0 + step)) / self._base(s)) / math.log1p(step)
            theta, delta = float(q.max()), float(q.min())
            if abs(theta - 1.0) <= _ONE_TOL:
                theta = 1.0
            if abs(delta - 1.0) <= _ONE_TOL:
                delta = 1.0
            if delta < 0:
                raise ValueError("invalid phi: decreasing somewhere on the index grid")
        N = INF if theta == 1.0 else 1.0 / (theta - 1.0)
        return theta, delta, N


# ---------------------------------------------------------------------------
# quadrature tables
# ---------------------------------------------------------------------------

def _gl_log(phi, a, b, power: int):
    """Integrate ``s**power / phi(s)`` over ``[a, b]`` (vectorized in a, b) via
    16-point Gauss-Legendre in ``x = log s``."""
    la, lb = np.log(a), np.log(b)
    half = 0.5 * (lb - la)
    mid = 0.5 * (lb + la)
    x = mid[..., None] + half[..., None] * _GL_NODES
    s = np.exp(x)
    f = s ** (power + 1) / phi(s)
    return half * (f @ _GL_WEIGHTS)


def _adaptive(phi, a: float, b: float, power: int, tol: float = 1e-11, depth: int = 0) -> float:
    whole = float(_gl_log(phi, np.array(a), np.array(b), power))
    c = math.sqrt(a * b)
    halves = _gl_log(phi, np.array([a, c]), np.array([c, b]), power)
    split = float(halves.sum())
    if abs(split - whole) <= max(tol, 1e-14 * abs(split)) or depth > 30:
        return split
    return (_adaptive(phi, a, c, power, tol / 2, depth + 1)
            + _adaptive(phi, c, b, power, tol / 2, depth + 1))


class _Table:
    """Cumulative integrals of ``1/phi`` (from 1) and ``s/phi`` (from 0) on a
    log-spaced breakpoint set, with exact power tails outside it."""

    def __init__(self, phi: PhiFunction, lo: float = 1e-10, hi: float = 1e10, per_decade: int = 8):
        pts = np.logspace(math.log10(lo), math.log10(hi),
                          int(round(per_decade * math.log10(hi / lo))) + 1)
        pts = np.union1d(pts, [1.0])
        if phi.kind == "tabulated":
            inner = phi.knots[(phi.knots > lo) & (phi.knots < hi)]
            pts = np.union1d(pts, inner)
        self.phi = phi
        self.b = pts
        self.fb = phi(pts)
        n = pts.size
        inv = np.array([_adaptive(phi, pts[k], pts[k + 1], 0) for k in range(n - 1)])
        sw = np.array([_adaptive(phi, pts[k], pts[k + 1], 1) for k in range(n - 1)])
        i1 = int(np.searchsorted(pts, 1.0))
        # accumulate outward from s = 1 to avoid cancellation against large tails
        F = np.zeros(n)
        F[i1 + 1:] = np.cumsum(inv[i1:])
        F[:i1] = -np.cumsum(inv[:i1][::-1])[::-1]
        self.F = F
        # tail exponents from the outermost intervals
        self.p_lo = math.log(self.fb[1] / self.fb[0]) / math.log(pts[1] / pts[0])
        self.p_hi = math.log(self.fb[-1] / self.fb[-2]) / math.log(pts[-1] / pts[-2])
        if self.p_lo < 2.0:
            g0 = pts[0] ** 2 / (self.fb[0] * (2.0 - self.p_lo))
        else:
            g0 = INF
        self.G = g0 + np.concatenate([[0.0], np.cumsum(sw)])
        b0, bn = pts[0], pts[-1]
        self.l = float(self.F[0] + (b0 / self.fb[0]) * power_log(2.0 - self.p_lo, 0.0))
        self.L = float(self.F[-1] + (bn / self.fb[-1]) * power_log(2.0 - self.p_hi, INF))

    def ln(self, t: np.ndarray) -> np.ndarray:
        b, F, fb = self.b, self.F, self.fb
        out = np.empty_like(t)
        lo = t < b[0]
        hi = t > b[-1]
        mid = ~(lo | hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[lo] = F[0] + (b[0] / fb[0]) * power_log(2.0 - self.p_lo, t[lo] / b[0])
            out[hi] = F[-1] + (b[-1] / fb[-1]) * power_log(2.0 - self.p_hi, t[hi] / b[-1])
        if np.any(mid):
            tm = t[mid]
            k = np.clip(np.searchsorted(b, tm, side="right") - 1, 0, b.size - 2)
            out[mid] = F[k] + _gl_log(self.phi, b[k], tm, 0)
        return out

    def pressure(self, t: np.ndarray) -> np.ndarray:
        b, G, fb = self.b, self.G, self.fb
        out = np.zeros_like(t)
        lo = (t > 0) & (t < b[0])
        hi = t > b[-1]
        mid = (t >= b[0]) & ~hi
        if np.any(lo):
            out[lo] = t[lo] ** 2 / (self.phi(t[lo]) * (2.0 - self.p_lo)) if self.p_lo < 2 else INF
        with np.errstate(over="ignore"):
            out[hi] = G[-1] + (b[-1] ** 2 / fb[-1]) * power_log(3.0 - self.p_hi, t[hi] / b[-1])
        if np.any(mid):
            tm = t[mid]
            k = np.clip(np.searchsorted(b, tm, side="right") - 1, 0, b.size - 2)
            out[mid] = G[k] + _gl_log(self.phi, b[k], tm, 1)
        return out

    def exp(self, tau: np.ndarray) -> np.ndarray:
        b, F, fb = self.b, self.F, self.fb
        out = np.empty_like(tau)
        lo = tau < F[0]
        hi = tau > F[-1]
        mid = ~(lo | hi)
        out[lo] = b[0] * power_exp(2.0 - self.p_lo, (tau[lo] - F[0]) * fb[0] / b[0])
        out[hi] = b[-1] * power_exp(2.0 - self.p_hi, (tau[hi] - F[-1]) * fb[-1] / b[-1])
        if np.any(mid):
            tm = tau[mid]
            k = np.clip(np.searchsorted(F, tm, side="right") - 1, 0, b.size - 2)
            xa, xb = np.log(b[k]), np.log(b[k + 1])
            for _ in range(48):  # bisection in log t inside the bracketing interval
                xc = 0.5 * (xa + xb)
                val = F[k] + _gl_log(self.phi, b[k], np.exp(xc), 0)
                below = val < tm
                xa = np.where(below, xc, xa)
                xb = np.where(below, xb, xc)
            t = np.exp(0.5 * (xa + xb))
            for _ in range(2):  # Newton polish: d ln/dt = 1/phi
                t = t - (F[k] + _gl_log(self.phi, b[k], t, 0) - tm) * self.phi(t)
            out[mid] = t
        return out


# ---------------------------------------------------------------------------
# the calculus
# ---------------------------------------------------------------------------

class PhiCalculus:
    """Scalar functions and indices derived from a :class:`PhiFunction`.

    Parameters
    ----------
    phi : PhiFunction
    method : {"auto", "closed", "quadrature"}
        ``auto`` uses closed forms for power functions and quadrature for
        tabulated ones; ``quadrature`` forces the numerical route.

    Attributes
    ----------
    l_phi, L_phi : float
        Infimum and supremum of ``ln_phi`` (possibly infinite).
    theta_phi, delta_phi, N_phi : float
        Order indices.
    u1 : float
        ``u_phi(1)``.
    """

    def __init__(self, phi: PhiFunction, method: str = "auto"):
        if method not in ("auto", "closed", "quadrature"):
            raise ValueError(f"unknown method {method!r}")
        if method == "closed" and phi.kind != "power":
            raise ValueError("closed forms exist for power phi only")
        self.phi = phi
        self.closed = phi.kind == "power" and method != "quadrature"
        self.theta_phi, self.delta_phi, self.N_phi = phi.order_indices()
        if self.closed:
            lo, hi = _power_bounds(phi.m)
            self.l_phi, self.L_phi = lo / phi.scale, hi / phi.scale
            self._table = None
        else:
            self._table = _Table(phi)
            self.l_phi, self.L_phi = self._table.l, self._table.L
        self.u1 = float(self.u(1.0))

    def __repr__(self) -> str:
        return (f"PhiCalculus({self.phi!r}, l={self.l_phi:.6g}, L={self.L_phi:.6g}, "
                f"theta={self.theta_phi:.6g}, delta={self.delta_phi:.6g}, N={self.N_phi:.6g})")

    # -- phi and ln ----------------------------------------------------------
    def phi_at(self, s):
        return self.phi(s)

    def ln(self, t):
        """``int_1^t ds / phi(s)``; ``t = 0`` gives ``l_phi``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(np.isnan(t)):
            raise ValueError("ln_phi is defined for t > 0")
        if self.closed:
            return _ret(power_log(self.phi.m, t) / self.phi.scale)
        out = np.empty_like(t)
        zero = t == 0
        out[zero] = self.l_phi
        out[np.isposinf(t)] = self.L_phi
        ok = ~zero & np.isfinite(t)
        out[ok] = self._table.ln(t[ok])
        return _ret(out)

    def exp(self, tau):
        """Inverse of :meth:`ln` extended by 0 below ``l_phi`` and inf above ``L_phi``."""
        tau = np.asarray(tau, dtype=float)
        if self.closed:
            return _ret(power_exp(self.phi.m, tau * self.phi.scale))
        out = np.empty_like(tau)
        low = tau <= self.l_phi
        high = tau >= self.L_phi
        out[low] = 0.0
        out[high] = INF
        ok = ~(low | high)
        out[ok] = self._table.exp(tau[ok])
        return _ret(out)

    # -- integrals -----------------------------------------------------------
    def pressure(self, r):
        """``int_0^r s/phi(s) ds``; equals ``r h'(r) - h(r)`` (the pressure)."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("pressure is defined for r >= 0")
        if self.closed:
            m = self.phi.m
            return _ret(r ** m / (m * self.phi.scale))
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = self._table.pressure(r[pos])
        return _ret(out)

    def u(self, r):
        """``u_phi(r) = int_0^r ln_phi``, computed as ``r ln_phi(r) - pressure(r)``."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("u_phi is defined for r >= 0")
        if self.closed:
            m, a = self.phi.m, self.phi.scale
            with np.errstate(divide="ignore", invalid="ignore"):
                if m == 1.0:
                    out = np.where(r > 0, r * np.log(np.where(r > 0, r, 1.0)) - r, 0.0)
                else:
                    out = (r ** m - m * r) / (m * (m - 1.0))
            return _ret(out / a)
        out = np.zeros_like(r)
        pos = r > 0
        if np.any(pos):
            rp = r[pos]
            g = self._table.pressure(rp)
            if np.any(np.isinf(g)):
                raise ValueError("ln_phi is not integrable near 0 (inadmissible phi)")
            out[pos] = rp * self._table.ln(rp) - g
        return _ret(out)

    def du(self, r):
        """``u_phi'(r) = ln_phi(r)`` with ``u'(0) = l_phi``."""
        return self.ln(r)

    def h(self, r):
        """``h_phi = u_phi - r L_phi`` when ``L_phi`` is finite, else ``u_phi``."""
        r = np.asarray(r, dtype=float)
        out = np.asarray(self.u(r), dtype=float)
        if math.isfinite(self.L_phi):
            out = out - r * self.L_phi
        return _ret(out)

    def dh(self, r):
        """Derivative of :meth:`h` (``ln_phi(r) - L_phi`` when ``L_phi`` finite)."""
        out = np.asarray(self.ln(r), dtype=float)
        if math.isfinite(self.L_phi):
            out = out - self.L_phi
        return _ret(out)

    @property
    def a_phi(self) -> float:
        """``-u_phi(1)``."""
        return -self.u1


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------

def ln_phi(calc: PhiCalculus, t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("ln_phi requires t > 0")
    return calc.ln(t)


def exp_phi(calc: PhiCalculus, tau):
    return calc.exp(tau)


def u_phi(calc: PhiCalculus, r):
    return calc.u(r)


def h_phi(calc: PhiCalculus, r):
    return calc.h(r)


def order_indices(phi: PhiFunction) -> tuple[float, float, float]:
    return phi.order_indices()


def _dc_coefficient(N: float) -> float:
    if math.isinf(N) and N > 0:
        return 1.0
    if 0.0 <= N <= 1.0:
        raise ValueError(f"dimension parameter N={N} unsupported (need N < 0 or N > 1)")
    return N / (N - 1.0)


def dc_membership(calc: PhiCalculus, N: float, grid=None, tol: float = 1e-9) -> tuple[bool, float]:
    """Integral test for membership of ``u_phi`` in the class DC_N.

    The class is characterized by ``pressure(t) <= N/(N-1) * t**2/phi(t)`` for
    all ``t > 0`` (``N/(N-1) = 1`` at ``N = inf``). The slack is measured
    relative to ``t**2/phi(t)``.

    Returns
    -------
    passed : bool
    worst_slack : float
        ``min_t [N/(N-1) - pressure(t) phi(t)/t**2]``; negative means violated.
    """
    c = _dc_coefficient(N)
    t = np.logspace(-6, 6, 241) if grid is None else np.asarray(grid, dtype=float)
    ratio = np.asarray(calc.pressure(t)) * np.asarray(calc.phi(t)) / t ** 2
    slack = float(np.min(c - ratio))
    return slack >= -tol, slack


def psi_N(calc: PhiCalculus, N: float, r):
    """``r**N u(r**-N)`` (``exp(r) u(exp(-r))`` at ``N = inf``)."""
    r = np.asarray(r, dtype=float)
    if math.isinf(N):
        return _ret(np.exp(r) * np.asarray(calc.u(np.exp(-r))))
    return _ret(r ** N * np.asarray(calc.u(r ** (-N))))


@dataclass
class ComparisonReport:
    """Pointwise violations of the power-comparison sandwich bounds.

    Each entry is the maximum over the grid of the normalized violation
    ``max(0, lhs - rhs) / max(1, |rhs|)``; ``nan`` marks a side that does not
    apply (index >= 2).
    """

    theta: float
    delta: float
    theta_log_lower: float
    theta_log_upper: float
    theta_exp: float
    delta_log_lower: float
    delta_log_upper: float
    delta_exp: float
    min_gap: float

    @property
    def max_violation(self) -> float:
        vals = [v for v in (self.theta_log_lower, self.theta_log_upper, self.theta_exp,
                            self.delta_log_lower, self.delta_log_upper, self.delta_exp)
                if not math.isnan(v)]
        return max(vals) if vals else 0.0


def _viol(lhs, rhs) -> float:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    ok = np.isfinite(lhs) & np.isfinite(rhs)
    if not np.any(ok):
        return 0.0
    v = np.maximum(0.0, lhs[ok] - rhs[ok]) / np.maximum(1.0, np.abs(rhs[ok]))
    return float(v.max())


def verify_comparison_bounds(calc: PhiCalculus, grid=None) -> ComparisonReport:
    """Check the power-comparison bounds of ``ln_phi`` and ``exp_phi``.

    With ``m = 2 - theta``::

        power_log(m, t)/phi(1) <= ln_phi(t) <= t**theta/phi(t) * power_log(m, t)
        exp_phi(r) <= power_exp(m, phi(1) r)

    and with ``m = 2 - delta`` the same inequalities reversed.
    """
    t = np.logspace(-3, 3, 512) if grid is None else np.asarray(grid, dtype=float)
    phi1 = float(calc.phi(1.0))
    ln = np.asarray(calc.ln(t))
    ph = np.asarray(calc.phi(t))
    r = ln
    ex = np.asarray(calc.exp(r))
    th, de = calc.theta_phi, calc.delta_phi
    nan = math.nan
    gaps = []
    if th < 2:
        m = 2.0 - th
        lm = np.asarray(power_log(m, t))
        lower, upper = lm / phi1, t ** th / ph * lm
        tl, tu = _viol(lower, ln), _viol(ln, upper)
        te = _viol(ex, power_exp(m, phi1 * r))
        gaps += [ln - lower, upper - ln]
    else:
        tl = tu = te = nan
    if de < 2:
        m = 2.0 - de
        lm = np.asarray(power_log(m, t))
        lower, upper = t ** de / ph * lm, lm / phi1
        dl, du = _viol(lower, ln), _viol(ln, upper)
        dexp = _viol(power_exp(m, phi1 * r), ex)
        gaps += [ln - lower, upper - ln]
    else:
        dl = du = dexp = nan
    min_gap = float(min(np.min(g) for g in gaps)) if gaps else nan
    return ComparisonReport(th, de, tl, tu, te, dl, du, dexp, min_gap)
