"""Weighted one-dimensional grids, reference measures and the entropy,
divergence and information functionals built on them."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .phi_calculus import INF, PhiCalculus, power_log

__all__ = [
    "Potential",
    "WeightedSpace",
    "AdmissibilityReport",
    "ReferenceSystem",
    "Density",
    "InadmissibleError",
    "build_reference",
    "normalize_potential",
    "normalized_reference",
    "rescale_base_measure",
    "entropy_H",
    "segment_entropy",
    "bregman",
    "fisher_I",
    "ricci_N",
    "hess_psi",
    "support_radius",
]


class InadmissibleError(ValueError):
    """Raised when a reference system violates a hard admissibility condition."""


# ---------------------------------------------------------------------------
# analytic functions of x (potentials and weights)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """A scalar function of position with first and second derivatives.

    Supported kinds (``params`` in brackets):

    * ``zero``
    * ``constant`` [value]
    * ``linear`` [slope, center]: ``slope * (x - center)``
    * ``quadratic`` [k, center]: ``k/2 (x - center)**2``
    * ``quartic`` [k, center]: ``k/4 (x - center)**4``
    * ``well`` [a, b]: ``a (x**2 - b**2)**2``
    * ``table``: piecewise-linear interpolation of values at given nodes

    ``offset`` is added to the value.
    """

    kind: str = "zero"
    params: tuple = ()
    offset: float = 0.0
    nodes: np.ndarray | None = field(default=None, repr=False, compare=False)
    table: np.ndarray | None = field(default=None, repr=False, compare=False)
    period: float | None = None

    @classmethod
    def named(cls, kind: str, **kw) -> "Potential":
        defaults = {
            "zero": (),
            "constant": (("value", 0.0),),
            "linear": (("slope", 1.0), ("center", 0.0)),
            "quadratic": (("k", 1.0), ("center", 0.0)),
            "quartic": (("k", 1.0), ("center", 0.0)),
            "well": (("a", 1.0), ("b", 1.0)),
        }
        if kind not in defaults:
            raise ValueError(f"unknown potential form {kind!r}")
        names = [n for n, _ in defaults[kind]]
        unknown = set(kw) - set(names) - {"offset"}
        if unknown:
            raise ValueError(f"unknown parameters for {kind}: {sorted(unknown)}")
        params = tuple(float(kw.get(n, d)) for n, d in defaults[kind])
        return cls(kind=kind, params=params, offset=float(kw.get("offset", 0.0)))

    @classmethod
    def from_values(cls, nodes, values, period: float | None = None) -> "Potential":
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.shape != values.shape or np.any(np.diff(nodes) <= 0):
            raise ValueError("table potential needs increasing nodes matching values")
        if not np.all(np.isfinite(values)):
            raise ValueError("potential values must be finite")
        return cls(kind="table", nodes=nodes, table=values, period=period)

    def shifted(self, c: float) -> "Potential":
        """Copy with ``c`` added to the value."""
        return Potential(self.kind, self.params, self.offset + c, self.nodes, self.table, self.period)

    def _table_eval(self, x, order):
        xs, vs = self.nodes, self.table
        if self.period is not None:
            L = self.period
            xs = np.concatenate([xs[-1:] - L, xs, xs[:1] + L])
            vs = np.concatenate([vs[-1:], vs, vs[:1]])
            x = xs[1] + np.mod(x - xs[1], L)
        if order == 0:
            return np.interp(x, xs, vs)
        slopes = np.diff(vs) / np.diff(xs)
        if order == 1:
            idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
            return slopes[idx]
        return np.zeros_like(x)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        k, p = self.kind, self.params
        if k == "zero":
            out = np.zeros_like(x)
        elif k == "constant":
            out = np.full_like(x, p[0])
        elif k == "linear":
            out = p[0] * (x - p[1])
        elif k == "quadratic":
            out = 0.5 * p[0] * (x - p[1]) ** 2
        elif k == "quartic":
            out = 0.25 * p[0] * (x - p[1]) ** 4
        elif k == "well":
            out = p[0] * (x ** 2 - p[1] ** 2) ** 2
        else:
            out = self._table_eval(x, 0)
        return out + self.offset

    def d1(self, x):
        x = np.asarray(x, dtype=float)
        k, p = self.kind, self.params
        if k in ("zero", "constant"):
            return np.zeros_like(x)
        if k == "linear":
            return np.full_like(x, p[0])
        if k == "quadratic":
            return p[0] * (x - p[1])
        if k == "quartic":
            return p[0] * (x - p[1]) ** 3
        if k == "well":
            return 4.0 * p[0] * x * (x ** 2 - p[1] ** 2)
        return self._table_eval(x, 1)

    def d2(self, x):
        x = np.asarray(x, dtype=float)
        k, p = self.kind, self.params
        if k in ("zero", "constant", "linear", "table"):
            return np.zeros_like(x)
        if k == "quadratic":
            return np.full_like(x, p[0])
        if k == "quartic":
            return 3.0 * p[0] * (x - p[1]) ** 2
        return 4.0 * p[0] * (3.0 * x ** 2 - p[1] ** 2)

    __call__ = value


# ---------------------------------------------------------------------------
# the grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightedSpace:
    """Uniform 1-D grid on a segment ``[a, b]`` or a circle ``[0, L)``.

    The base measure of cell ``i`` is ``omega_i = exp(-f(x_i)) * h`` where
    ``x_i`` is the cell center and ``h`` the cell length.
    """

    topology: str
    a: float
    b: float
    n_cells: int
    weight: Potential = field(default_factory=Potential)

    def __post_init__(self):
        if self.topology not in ("segment", "circle"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise ValueError("n_cells must be an integer >= 8")
        if not self.b > self.a:
            raise ValueError("need b > a")
        if self.topology == "circle" and self.a != 0.0:
            raise ValueError("circle is parametrized by [0, L)")

    @classmethod
    def segment(cls, a: float, b: float, n_cells: int = 512, weight: Potential | None = None):
        return cls("segment", float(a), float(b), int(n_cells), weight or Potential())

    @classmethod
    def circle(cls, length: float, n_cells: int = 512, weight: Potential | None = None):
        return cls("circle", 0.0, float(length), int(n_cells), weight or Potential())

    @property
    def periodic(self) -> bool:
        return self.topology == "circle"

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def cell_len(self) -> float:
        return self.length / self.n_cells

    h = cell_len

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n_cells + 1)

    @property
    def cell_centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    x = cell_centers

    @property
    def f_weight(self) -> np.ndarray:
        return np.asarray(self.weight.value(self.cell_centers), dtype=float)

    @property
    def omega(self) -> np.ndarray:
        return np.exp(-self.f_weight) * self.cell_len

    @property
    def total_omega(self) -> float:
        return float(self.omega.sum())

    def distance(self, x, y):
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        if self.periodic:
            d = np.mod(d, self.length)
            d = np.minimum(d, self.length - d)
        return d

    def refined(self, factor: int = 2) -> "WeightedSpace":
        return WeightedSpace(self.topology, self.a, self.b, self.n_cells * factor, self.weight)

    def with_weight(self, weight: Potential) -> "WeightedSpace":
        return WeightedSpace(self.topology, self.a, self.b, self.n_cells, weight)

    def diff1(self, v: np.ndarray) -> np.ndarray:
        """Second-order centered first differences (one-sided at segment ends)."""
        h = self.cell_len
        if self.periodic:
            return (np.roll(v, -1) - np.roll(v, 1)) / (2 * h)
        g = np.empty_like(v, dtype=float)
        g[1:-1] = (v[2:] - v[:-2]) / (2 * h)
        g[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
        g[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
        return g

    def diff2(self, v: np.ndarray) -> np.ndarray:
        """Second differences (one-sided second-order at segment ends)."""
        h2 = self.cell_len ** 2
        if self.periodic:
            return (np.roll(v, -1) - 2 * v + np.roll(v, 1)) / h2
        g = np.empty_like(v, dtype=float)
        g[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h2
        g[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h2
        g[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h2
        return g


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Density:
    """Probability density ``rho`` with respect to ``space.omega``.

    Inside each cell the mass ``rho_i * omega_i`` is spread uniformly in ``x``;
    the CDF is therefore piecewise linear and the quantile function is its
    continuous inverse.
    """

    space: WeightedSpace
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != (self.space.n_cells,):
            raise ValueError("rho must have one entry per cell")
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise ValueError("rho must be finite and nonnegative")
        mass = float(rho @ self.space.omega)
        if abs(mass - 1.0) > 1e-12:
            raise ValueError(f"density mass {mass!r} differs from 1")
        rho = rho.copy()
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_masses(cls, space: WeightedSpace, masses) -> "Density":
        masses = np.clip(np.asarray(masses, dtype=float), 0.0, None)
        tot = masses.sum()
        if not tot > 0:
            raise ValueError("masses must have positive total")
        rho = (masses / tot) / space.omega
        # one correction pass keeps sum(rho * omega) = 1 to rounding
        rho = rho / float(rho @ space.omega)
        return cls(space, rho)

    @classmethod
    def from_values(cls, space: WeightedSpace, values) -> "Density":
        """Normalize nonnegative cell values to a probability density."""
        values = np.clip(np.asarray(values, dtype=float), 0.0, None)
        return cls.from_masses(space, values * space.omega)

    @classmethod
    def from_function(cls, space: WeightedSpace, fn) -> "Density":
        return cls.from_values(space, fn(space.cell_centers))

    @property
    def masses(self) -> np.ndarray:
        return self.rho * self.space.omega

    @property
    def mass(self) -> float:
        return float(self.masses.sum())

    def cdf(self, x):
        """Continuous, piecewise-linear distribution function."""
        e = self.space.edges
        F = np.concatenate([[0.0], np.cumsum(self.masses)])
        F /= F[-1]
        return np.interp(x, e, F)

    def quantile(self, u):
        """Continuous inverse of :meth:`cdf` (left-most point on flat parts)."""
        u = np.asarray(u, dtype=float)
        e = self.space.edges
        mk = self.masses
        F = np.concatenate([[0.0], np.cumsum(mk)])
        F /= F[-1]
        k = np.clip(np.searchsorted(F, u, side="left") - 1, 0, mk.size - 1)
        # skip zero-mass cells so that flat parts map to their left end
        frac = np.where(mk[k] > 0, (u - F[k]) / np.where(mk[k] > 0, mk[k], 1.0), 0.0)
        return e[k] + np.clip(frac, 0.0, 1.0) * self.space.cell_len

    def mean(self) -> float:
        return float(self.masses @ self.space.cell_centers)

    def moment(self, g) -> float:
        return float(self.masses @ np.asarray(g(self.space.cell_centers)))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "rho"])
            for xi, ri in zip(self.space.cell_centers, self.rho):
                w.writerow([repr(float(xi)), repr(float(ri))])

    @classmethod
    def from_csv(cls, space: WeightedSpace, path: str | Path) -> "Density":
        rows = np.genfromtxt(path, delimiter=",", names=True)
        x, rho = np.asarray(rows["x"]), np.asarray(rows["rho"])
        if x.size != space.n_cells or not np.allclose(x, space.cell_centers):
            raise ValueError("CSV grid does not match the space")
        return cls.from_values(space, rho)


# ---------------------------------------------------------------------------
# reference systems
# ---------------------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    """Outcome of the four admissibility conditions.

    ``conditions`` maps a label to ``(passed, detail)``; the potential-range
    condition is split into the index-comparison form and the plain form.
    """

    conditions: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.conditions.values())

    def failing(self) -> list[str]:
        return [k for k, (ok, _) in self.conditions.items() if not ok]

    def as_dict(self) -> dict:
        return {k: {"passed": bool(ok), "detail": d} for k, (ok, d) in self.conditions.items()}


@dataclass(frozen=True)
class ReferenceSystem:
    """Potential, reference density ``sigma = exp_phi(-psi)`` and support.

    Attributes
    ----------
    space : WeightedSpace
    calc : PhiCalculus
    potential : Potential
        Analytic form of ``psi`` (cell values are ``potential(x_i)``).
    psi, sigma : ndarray
    support_mask : ndarray of bool
        Cells with ``-L_phi < psi < -l_phi``.
    admissibility : AdmissibilityReport
    nu_mass : float
    """

    space: WeightedSpace
    calc: PhiCalculus
    potential: Potential
    psi: np.ndarray
    sigma: np.ndarray
    support_mask: np.ndarray
    admissibility: AdmissibilityReport
    nu_mass: float

    @property
    def nu(self) -> Density:
        """The reference measure as a density (requires ``nu_mass = 1``)."""
        return Density.from_masses(self.space, self.sigma * self.space.omega)

    @property
    def sigma_max(self) -> float:
        return float(self.sigma[self.support_mask].max())

    def drift_value(self, x):
        """``-h_phi'(sigma(x))``: ``psi`` on the support, ``-l_phi`` beyond it,
        plus ``L_phi`` when that is finite."""
        c = self.calc
        v = np.asarray(self.potential.value(x), dtype=float)
        if math.isfinite(c.l_phi):
            v = np.minimum(v, -c.l_phi)
        if math.isfinite(c.L_phi):
            v = v + c.L_phi
        return v

    def drift_d1(self, x):
        v = np.asarray(self.potential.d1(x), dtype=float)
        if math.isfinite(self.calc.l_phi):
            v = np.where(np.asarray(self.potential.value(x)) < -self.calc.l_phi, v, 0.0)
        return v

    def drift_d2(self, x):
        v = np.asarray(self.potential.d2(x), dtype=float)
        if math.isfinite(self.calc.l_phi):
            v = np.where(np.asarray(self.potential.value(x)) < -self.calc.l_phi, v, 0.0)
        return v

    def h_prime_sigma(self) -> np.ndarray:
        """``h_phi'(sigma_i)`` per cell with the off-support convention."""
        c = self.calc
        Lf = c.L_phi if math.isfinite(c.L_phi) else 0.0
        out = np.where(self.support_mask, -self.psi - Lf, c.l_phi - Lf)
        return out


def _as_potential(space: WeightedSpace, psi) -> Potential:
    if isinstance(psi, Potential):
        return psi
    vals = np.asarray(psi, dtype=float)
    if vals.shape != (space.n_cells,):
        raise ValueError("psi must be a Potential or one value per cell")
    return Potential.from_values(space.cell_centers, vals,
                                 period=space.length if space.periodic else None)


def build_reference(space: WeightedSpace, calc: PhiCalculus, psi) -> ReferenceSystem:
    """Assemble ``sigma = exp_phi(-psi)``, its support and the admissibility report.

    Raises
    ------
    InadmissibleError
        If the support is empty or the integrability sums diverge.
    """
    pot = _as_potential(space, psi)
    x = space.cell_centers
    psi_v = np.asarray(pot.value(x), dtype=float)
    if not np.all(np.isfinite(psi_v)):
        raise ValueError("psi must be finite on every cell")
    omega = space.omega
    lo, hi = calc.l_phi, calc.L_phi
    support = (psi_v > -hi) & (psi_v < -lo)
    sigma = np.asarray(calc.exp(-psi_v), dtype=float)
    sigma = np.where(psi_v >= -lo, 0.0, sigma)

    rep = AdmissibilityReport()
    phi1 = float(calc.phi(1.0))
    rep.conditions["phi normalized"] = (abs(phi1 - 1.0) <= 1e-12, f"phi(1)={phi1!r}")
    th = calc.theta_phi
    n = 1  # dimension of the base space
    ok2 = 0.0 <= th <= (n + 1) / n and th < 1.5
    rep.conditions["index window"] = (ok2, f"theta={th!r}, window [0,{(n + 1) / n}] and < 3/2")
    # comparison form: psi > -L_{2-theta}
    if th < 2:
        L_cmp = power_log(2.0 - th, INF)
        ok3a = bool(np.all(psi_v > -L_cmp))
    else:
        L_cmp, ok3a = math.nan, False
    rep.conditions["potential above comparison log"] = (ok3a, f"-L_(2-theta)={float(-L_cmp)!r}, min psi={float(psi_v.min())!r}")
    ok3b = bool(np.all(psi_v > -hi)) and bool(support.any())
    rep.conditions["potential range, support nonempty"] = (
        ok3b, f"-L_phi={float(-hi)!r}, support cells={int(support.sum())}")
    if not support.any():
        raise InadmissibleError(
            f"effective support is empty (need {float(-hi)!r} < psi < {float(-lo)!r}); failing condition: potential range")
    s_pos = sigma[sigma > 0]
    with np.errstate(over="ignore", invalid="ignore"):
        s1 = float(np.sum(np.abs(np.asarray(calc.h(sigma))) * omega))
        s2 = float(np.sum(np.abs(s_pos * np.asarray(calc.ln(s_pos))) * omega[sigma > 0])) if s_pos.size else 0.0
    ok4 = math.isfinite(s1) and math.isfinite(s2)
    rep.conditions["integrability"] = (ok4, f"sum|h(sigma)|w={s1!r}, sum|sigma ln sigma|w={s2!r}")
    if not ok4:
        raise InadmissibleError("integrability sums diverge; failing condition: integrability")
    nu_mass = float(sigma @ omega)
    sigma.setflags(write=False)
    psi_v.setflags(write=False)
    support.setflags(write=False)
    return ReferenceSystem(space, calc, pot, psi_v, sigma, support, rep, nu_mass)


def normalize_potential(space: WeightedSpace, calc: PhiCalculus, psi, tol: float = 1e-10) -> float:
    """Shift ``lam`` such that ``sum exp_phi(lam - psi_i) omega_i = 1``.

    Raises
    ------
    InadmissibleError
        If no shift in ``(l_phi + min psi, L_phi + min psi)`` attains mass 1.
    """
    pot = _as_potential(space, psi)
    psi_v = np.asarray(pot.value(space.cell_centers), dtype=float)
    omega = space.omega
    pmin = float(psi_v.min())
    lo_w, hi_w = calc.l_phi + pmin, calc.L_phi + pmin

    def xi(lam):
        return float(np.asarray(calc.exp(lam - psi_v)) @ omega)

    lam0 = 0.0 if lo_w < 0.0 < hi_w else pmin
    if abs(xi(lam0) - 1.0) <= tol:
        return lam0
    # bracket
    step = 1.0
    lo, hi = lam0, lam0
    if xi(lam0) < 1.0:
        while True:
            cand = hi + step
            if cand >= hi_w:
                cand = 0.5 * (hi + hi_w)
            if not math.isfinite(xi(cand)) or xi(cand) >= 1.0:
                lo, hi = hi, cand
                break
            hi = cand
            step *= 2.0
            if step > 1e8 or hi_w - hi < 1e-14 * max(1.0, abs(hi)):
                raise InadmissibleError("no normalizing shift: total mass stays below 1")
    else:
        while True:
            cand = lo - step
            if cand <= lo_w:
                cand = 0.5 * (lo + lo_w)
            if xi(cand) <= 1.0:
                lo, hi = cand, lo
                break
            lo = cand
            step *= 2.0
            if step > 1e8 or lo - lo_w < 1e-14 * max(1.0, abs(lo)):
                raise InadmissibleError("no normalizing shift: total mass stays above 1")

    def g(lam):
        v = xi(lam)
        return (v if math.isfinite(v) else 1e300) - 1.0

    lam = brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=500)
    if abs(g(lam)) > tol:
        # polish with bisection on the monotone map
        a, b = lo, hi
        for _ in range(200):
            c = 0.5 * (a + b)
            if g(c) < 0:
                a = c
            else:
                b = c
        lam = 0.5 * (a + b)
        if abs(g(lam)) > tol:
            raise InadmissibleError(f"normalization residual {g(lam)!r} above tolerance")
    return float(lam)


def normalized_reference(space: WeightedSpace, calc: PhiCalculus, psi) -> ReferenceSystem:
    """Reference system with ``psi`` shifted so that ``nu_mass = 1``."""
    pot = _as_potential(space, psi)
    lam = normalize_potential(space, calc, pot)
    return build_reference(space, calc, pot.shifted(-lam))


def rescale_base_measure(ref: ReferenceSystem) -> ReferenceSystem:
    """Alternative normalization: divide ``omega`` by ``nu_mass``."""
    w = ref.space.weight.shifted(math.log(ref.nu_mass))
    return build_reference(ref.space.with_weight(w), ref.calc, ref.potential)


def support_radius(ref: ReferenceSystem, K: float) -> float:
    """Radius bound ``sqrt(-2 (l_phi + min psi)/K)`` of the support around the
    minimizer of ``psi`` (meaningful when ``l_phi`` is finite)."""
    l = ref.calc.l_phi
    if not math.isfinite(l):
        return INF
    return math.sqrt(max(0.0, -2.0 * (l + float(ref.psi.min())) / K))


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------

def entropy_H(ref: ReferenceSystem, mu: Density) -> float:
    """Relative entropy ``sum h(rho) omega - sum h'(sigma) rho omega``."""
    rho = mu.rho
    omega = ref.space.omega
    pos = rho > 0
    hp = ref.h_prime_sigma()
    if np.any(pos & ~np.isfinite(hp)):
        return INF
    with np.errstate(invalid="ignore", over="ignore"):
        internal = float(np.sum(np.asarray(ref.calc.h(rho[pos])) * omega[pos]))
        potential = float(np.sum(hp[pos] * rho[pos] * omega[pos]))
    val = internal - potential
    return val if math.isfinite(val) else INF


def segment_entropy(ref: ReferenceSystem, left, right, mass) -> float:
    """Relative entropy of a piecewise-uniform measure.

    Segment ``k`` carries ``mass[k]`` uniformly (in ``x``) on
    ``[left[k], right[k]]``. The weight ``exp(-f)`` is taken at the segment
    midpoint and the potential term is integrated by Simpson's rule (exact for
    quadratic potentials). Zero-length segments with positive mass give
    ``+inf`` unless ``h_phi(r)/r`` stays bounded.
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    mass = np.asarray(mass, dtype=float)
    keep = mass > 0
    left, right, mass = left[keep], right[keep], mass[keep]
    ln = right - left
    if np.any(ln < 0):
        return INF
    mid = 0.5 * (left + right)
    w = ln * np.exp(-np.asarray(ref.space.weight.value(mid)))
    if np.any(w <= 0):
        if math.isfinite(ref.calc.L_phi):
            # h(r)/r -> h'(inf) = 0 when L_phi is finite: atoms cost nothing internally
            pass
        else:
            return INF
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rho = np.where(w > 0, mass / np.where(w > 0, w, 1.0), 0.0)
        internal = np.where(w > 0, np.asarray(ref.calc.h(rho)) * w, 0.0)
    V = (ref.drift_value(left) + 4.0 * ref.drift_value(mid) + ref.drift_value(right)) / 6.0
    val = float(internal.sum() + mass @ V)
    return val if math.isfinite(val) else INF


def bregman(ref: ReferenceSystem, mu: Density) -> float:
    """Bregman divergence ``sum {u(rho) - u(sigma) - u'(sigma)(rho - sigma)} omega``."""
    c = ref.calc
    rho, sigma, omega = mu.rho, ref.sigma, ref.space.omega
    sup = ref.support_mask
    du = np.where(sup, -ref.psi, c.l_phi)
    bad = (~sup) & (rho > 0) & ~np.isfinite(du)
    if np.any(bad):
        return INF
    du = np.where(np.isfinite(du), du, 0.0)
    val = np.asarray(c.u(rho)) - np.asarray(c.u(sigma)) - du * (rho - sigma)
    out = float(val @ omega)
    return max(out, 0.0) if math.isfinite(out) else INF


def fisher_I(ref: ReferenceSystem, mu: Density) -> float:
    """Relative Fisher information ``sum |grad(ln_phi rho + psi)|**2 rho omega``.

    Centered differences inside the positive set of ``rho``, one-sided at its
    ends. Returns ``inf`` when ``rho`` vanishes strictly inside its support.
    """
    space = ref.space
    rho = mu.rho
    pos = rho > 0
    idx = np.flatnonzero(pos)
    if idx.size == 0:
        return INF
    h = space.cell_len
    g = np.zeros_like(rho)
    g[pos] = np.asarray(ref.calc.ln(rho[pos])) + ref.psi[pos]
    if space.periodic and pos.all():
        grad = space.diff1(g)
    else:
        if space.periodic:
            # rotate so that the positive set is contiguous from index 0
            shift = int(np.flatnonzero(~pos)[-1]) + 1
            order = np.roll(np.arange(rho.size), -shift)
        else:
            order = np.arange(rho.size)
        p = pos[order]
        first, last = np.flatnonzero(p)[[0, -1]]
        if not p[first:last + 1].all():
            return INF
        sl = order[first:last + 1]
        v = g[sl]
        grad_sl = np.zeros_like(v)
        if v.size >= 3:
            grad_sl[1:-1] = (v[2:] - v[:-2]) / (2 * h)
            grad_sl[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
            grad_sl[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
        elif v.size == 2:
            grad_sl[:] = (v[1] - v[0]) / h
        grad = np.zeros_like(rho)
        grad[sl] = grad_sl
    val = float(np.sum(grad[pos] ** 2 * rho[pos] * space.omega[pos]))
    return val if math.isfinite(val) else INF


def ricci_N(space: WeightedSpace, N: float) -> np.ndarray:
    """Weighted Ricci curvature ``f'' - f'**2/(N-1)`` per cell (1-D, Ric = 0)."""
    f = space.f_weight
    d1 = space.diff1(f)
    d2 = space.diff2(f)
    if math.isinf(N):
        return d2
    if N == 1.0:
        return np.where(np.abs(d1) > 1e-12, -INF, d2)
    return d2 - d1 ** 2 / (N - 1.0)


def hess_psi(ref: ReferenceSystem) -> np.ndarray:
    """Discrete second derivative of ``psi`` per cell."""
    return ref.space.diff2(ref.psi)
