"""Exact one-dimensional optimal transport.

Measures are handled as piecewise-uniform ``SegmentMeasure`` objects whose
quantile functions are piecewise linear in the mass coordinate ``u``; the
``L^p`` distance of two such quantile functions is integrated exactly. A grid
:class:`~phiflow.space.Density` converts to one either with its mass spread
over each cell (``model="cells"``, the default) or concentrated at cell centers
(``model="atoms"``, step quantile functions).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from .space import Density, WeightedSpace

__all__ = [
    "SegmentMeasure",
    "Coupling",
    "Geodesic",
    "as_segments",
    "w2_quantile",
    "wp",
    "w2_circle",
    "w2",
    "displacement_interpolate",
    "w2_lp_oracle",
    "coarsen_to_atoms",
]


@dataclass(frozen=True)
class SegmentMeasure:
    """Finite sum of uniform pieces: ``mass[k]`` spread on ``[left[k], right[k]]``.

    Pieces are sorted and non-overlapping; zero-length pieces are atoms.
    ``period`` is the circumference for measures on a circle (coordinates may
    then be lifted outside ``[0, period)``).
    """

    left: np.ndarray
    right: np.ndarray
    mass: np.ndarray
    period: float | None = None

    @classmethod
    def from_arrays(cls, left, right, mass, period=None) -> "SegmentMeasure":
        left = np.asarray(left, dtype=float)
        right = np.asarray(right, dtype=float)
        mass = np.asarray(mass, dtype=float)
        keep = mass > 0
        left, right, mass = left[keep], right[keep], mass[keep]
        if np.any(right < left):
            raise ValueError("segment with right < left")
        mass = mass / mass.sum()
        return cls(left, right, mass, period)

    @classmethod
    def atoms(cls, x, mass, period=None) -> "SegmentMeasure":
        x = np.asarray(x, dtype=float)
        order = np.argsort(x, kind="stable")
        return cls.from_arrays(x[order], x[order], np.asarray(mass, dtype=float)[order], period)

    @property
    def cum(self) -> np.ndarray:
        c = np.concatenate([[0.0], np.cumsum(self.mass)])
        c /= c[-1]
        return c

    def quantile(self, u):
        """Quantile function on ``[0, 1]`` (right-continuous at atoms)."""
        u = np.asarray(u, dtype=float)
        U = self.cum
        k = np.clip(np.searchsorted(U, u, side="right") - 1, 0, self.mass.size - 1)
        frac = np.clip((u - U[k]) / self.mass[k], 0.0, 1.0)
        return self.left[k] + frac * (self.right[k] - self.left[k])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        U = self.cum
        k = np.searchsorted(self.left, x, side="right") - 1
        kk = np.clip(k, 0, self.mass.size - 1)
        width = self.right[kk] - self.left[kk]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(width > 0, (x - self.left[kk]) / np.where(width > 0, width, 1.0), 1.0)
        val = U[kk] + self.mass[kk] * np.clip(frac, 0.0, 1.0)
        return np.where(k < 0, 0.0, val)

    def rebin(self, space: WeightedSpace) -> Density:
        """Cell masses by proportional overlap (mass-exact), as a grid density."""
        e = space.edges
        if space.periodic:
            L = space.length
            j0 = int(math.floor(self.left.min() / L)) - 1
            j1 = int(math.ceil(self.right.max() / L)) + 1
            masses = np.zeros(space.n_cells)
            for j in range(j0, j1 + 1):
                masses += np.diff(self.cdf(e + j * L))
        else:
            F = self.cdf(e)
            masses = np.diff(F)
            # mass outside the grid is folded onto the end cells; rounding
            # residue of the cumulative sums is not
            if self.left.min() < e[0]:
                masses[0] += F[0]
            if self.right.max() > e[-1]:
                masses[-1] += 1.0 - F[-1]
        return Density.from_masses(space, np.clip(masses, 0.0, None))

    def mean(self) -> float:
        return float(self.mass @ (0.5 * (self.left + self.right)))

    def second_moment(self) -> float:
        a, b = self.left, self.right
        return float(self.mass @ ((a * a + a * b + b * b) / 3.0))


def as_segments(mu, model: str = "cells") -> SegmentMeasure:
    """Convert a grid density (or pass through a SegmentMeasure)."""
    if isinstance(mu, SegmentMeasure):
        return mu
    sp = mu.space
    period = sp.length if sp.periodic else None
    if model == "cells":
        e = sp.edges
        return SegmentMeasure.from_arrays(e[:-1], e[1:], mu.masses, period)
    if model == "atoms":
        x = sp.cell_centers
        return SegmentMeasure.from_arrays(x, x, mu.masses, period)
    raise ValueError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# exact integration of piecewise-linear quantile differences
# ---------------------------------------------------------------------------

def _piece_values(seg: SegmentMeasure, a: np.ndarray, b: np.ndarray, shift: float = 0.0):
    """Values of ``Q(u + shift)`` at the right limit of ``a`` and the left limit
    of ``b`` for pieces ``[a, b]`` not containing a breakpoint inside.

    For periodic measures ``Q(u + 1) = Q(u) + period``.
    """
    U = seg.cum
    mid = 0.5 * (a + b) + shift
    n = np.floor(mid)
    frac = mid - n
    if seg.period is None:
        n = np.zeros_like(n)
        frac = np.clip(mid, 0.0, 1.0)
    k = np.clip(np.searchsorted(U, frac, side="right") - 1, 0, seg.mass.size - 1)
    lift = n * (seg.period or 0.0)
    dl = seg.right[k] - seg.left[k]
    ua = (a + shift - n - U[k]) / seg.mass[k]
    ub = (b + shift - n - U[k]) / seg.mass[k]
    qa = seg.left[k] + np.clip(ua, 0.0, 1.0) * dl + lift
    qb = seg.left[k] + np.clip(ub, 0.0, 1.0) * dl + lift
    return qa, qb


def _merged(seg0: SegmentMeasure, seg1: SegmentMeasure, theta: float = 0.0):
    u1 = seg1.cum - theta
    if seg1.period is not None:
        u1 = np.mod(u1, 1.0)
    br = np.union1d(seg0.cum, np.clip(u1, 0.0, 1.0))
    br = np.union1d(br, [0.0, 1.0])
    # breakpoints closer than the rounding of mass coordinates are merged, so
    # no interpolated piece is shorter than positions can resolve
    keep = np.concatenate([[True], np.diff(br) > 1e-14])
    br = br[keep]
    br[-1] = 1.0
    a, b = br[:-1], br[1:]
    q0a, q0b = _piece_values(seg0, a, b)
    q1a, q1b = _piece_values(seg1, a, b, theta)
    return a, b, q0a, q0b, q1a, q1b


def _lp_cost(w, da, db, p: int) -> float:
    if p == 2:
        return float(np.sum(w * (da * da + da * db + db * db) / 3.0))
    if p == 1:
        same = da * db >= 0
        s = np.abs(da) + np.abs(db)
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = np.where(s > 0, (da * da + db * db) / (2.0 * np.where(s > 0, s, 1.0)), 0.0)
        return float(np.sum(w * np.where(same, 0.5 * s, cross)))
    raise ValueError(f"unsupported p={p}; only p in {{1, 2}}")


def _cost(seg0, seg1, p: int, theta: float = 0.0) -> float:
    a, b, q0a, q0b, q1a, q1b = _merged(seg0, seg1, theta)
    return _lp_cost(b - a, q0a - q1a, q0b - q1b, p)


def _best_rotation(seg0, seg1, p: int = 2) -> float:
    """Cut parameter minimizing the lifted quantile cost on a circle."""
    thetas = np.linspace(-1.0, 1.0, 81)
    costs = np.array([_cost(seg0, seg1, p, t) for t in thetas])
    i = int(np.argmin(costs))
    lo, hi = thetas[max(i - 1, 0)], thetas[min(i + 1, thetas.size - 1)]
    res = minimize_scalar(lambda t: _cost(seg0, seg1, p, t), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-10})
    return float(res.x) if res.fun <= costs[i] else float(thetas[i])


def wp(mu0, mu1, p: int = 2, model: str = "cells") -> float:
    """``W_p`` distance (``p`` in {1, 2}) via quantile functions."""
    if p not in (1, 2):
        raise ValueError(f"unsupported p={p}; only p in {{1, 2}}")
    s0, s1 = as_segments(mu0, model), as_segments(mu1, model)
    if s0.period is not None:
        th = _best_rotation(s0, s1, p)
        return _cost(s0, s1, p, th) ** (1.0 / p)
    return max(_cost(s0, s1, p), 0.0) ** (1.0 / p)


def w2_quantile(mu0, mu1, model: str = "cells") -> float:
    """``W_2`` on a segment by exact integration of quantile differences."""
    s0, s1 = as_segments(mu0, model), as_segments(mu1, model)
    if s0.period is not None:
        raise ValueError("measures live on a circle; use w2_circle")
    return wp(s0, s1, 2)


def w2_circle(mu0, mu1, model: str = "cells") -> float:
    """``W_2`` on a circle, minimizing over the cut parameter (tolerance 1e-6)."""
    s0, s1 = as_segments(mu0, model), as_segments(mu1, model)
    if s0.period is None:
        raise ValueError("measures live on a segment; use w2_quantile")
    return wp(s0, s1, 2)


def w2(mu0, mu1, model: str = "cells") -> float:
    """Topology-dispatching ``W_2``."""
    return wp(mu0, mu1, 2, model)


# ---------------------------------------------------------------------------
# geodesics
# ---------------------------------------------------------------------------

class Geodesic:
    """Displacement interpolation between two measures by quantile pairing.

    ``at(t)`` returns the exact piecewise-uniform interpolant; ``density(t)``
    re-bins it onto the grid of ``mu0``.
    """

    def __init__(self, mu0, mu1, model: str = "cells"):
        self.mu0, self.mu1 = mu0, mu1
        self.s0, self.s1 = as_segments(mu0, model), as_segments(mu1, model)
        self.space = getattr(mu0, "space", None)
        self.theta = _best_rotation(self.s0, self.s1) if self.s0.period is not None else 0.0
        a, b, q0a, q0b, q1a, q1b = _merged(self.s0, self.s1, self.theta)
        self._w = b - a
        self._q0 = (q0a, q0b)
        self._q1 = (q1a, q1b)

    @property
    def distance(self) -> float:
        (q0a, q0b), (q1a, q1b) = self._q0, self._q1
        return math.sqrt(max(_lp_cost(self._w, q0a - q1a, q0b - q1b, 2), 0.0))

    def at(self, t: float) -> SegmentMeasure:
        if not 0.0 <= t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        (q0a, q0b), (q1a, q1b) = self._q0, self._q1
        left = (1.0 - t) * q0a + t * q1a
        right = (1.0 - t) * q0b + t * q1b
        return SegmentMeasure(left, np.maximum(right, left), self._w / self._w.sum(), self.s0.period)

    def displacement(self, x=None):
        """Displacement field ``T(x) - x`` of the monotone map at points ``x``
        (cell centers of ``mu0`` by default)."""
        if x is None:
            x = self.space.cell_centers
        x = np.asarray(x, dtype=float)
        u = self.s0.cdf(x) if self.s0.period is None else np.clip(self.s0.cdf(x), 0, 1)
        Tu = _piece_values(self.s1, u, u, self.theta)[0]
        return Tu - x

    def density(self, t: float, space: WeightedSpace | None = None) -> Density:
        return self.at(t).rebin(space or self.space)


def displacement_interpolate(geo: Geodesic, t: float) -> Density:
    """Grid density of the geodesic at time ``t``."""
    if t == 0.0 and isinstance(geo.mu0, Density):
        return geo.mu0
    if t == 1.0 and isinstance(geo.mu1, Density):
        return geo.mu1
    return geo.density(t)


# ---------------------------------------------------------------------------
# linear-programming oracle
# ---------------------------------------------------------------------------

@dataclass
class Coupling:
    """Sparse coupling: ``mass[k]`` moved from atom ``rows[k]`` to ``cols[k]``."""

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray

    def marginals(self, n0: int, n1: int) -> tuple[np.ndarray, np.ndarray]:
        r = np.bincount(self.rows, weights=self.mass, minlength=n0)
        c = np.bincount(self.cols, weights=self.mass, minlength=n1)
        return r, c

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "mass"])
            for i, j, m in zip(self.rows, self.cols, self.mass):
                w.writerow([int(i), int(j), repr(float(m))])


def coarsen_to_atoms(mu: Density, max_atoms: int) -> tuple[np.ndarray, np.ndarray]:
    """Group contiguous cells into at most ``max_atoms`` blocks; each block
    becomes an atom at its mass centroid."""
    n = mu.space.n_cells
    groups = np.array_split(np.arange(n), min(max_atoms, n))
    x = mu.space.cell_centers
    m = mu.masses
    ax, am = [], []
    for g in groups:
        mg = m[g].sum()
        if mg > 0:
            ax.append(float(m[g] @ x[g] / mg))
            am.append(float(mg))
    return np.array(ax), np.array(am)


def w2_lp_oracle(mu0, mu1, max_atoms: int = 64, period: float | None = None):
    """Exact transportation LP for ``W_2`` between small atomic measures.

    Parameters
    ----------
    mu0, mu1 : Density or tuple (x, mass)
        Densities are coarsened to at most ``max_atoms`` atoms.
    period : float, optional
        Circumference for arc-length costs.

    Returns
    -------
    distance : float
    coupling : Coupling
    """
    if max_atoms > 64:
        raise ValueError("the LP oracle is limited to 64 atoms per side")

    def atoms(mu):
        if isinstance(mu, Density):
            return coarsen_to_atoms(mu, max_atoms)
        x, m = (np.asarray(v, dtype=float) for v in mu)
        if x.size > max_atoms:
            raise ValueError(f"more than {max_atoms} atoms")
        return x, m

    x, a = atoms(mu0)
    y, b = atoms(mu1)
    if isinstance(mu0, Density) and mu0.space.periodic:
        period = mu0.space.length
    if abs(a.sum() - b.sum()) > 1e-12 or np.any(a < 0) or np.any(b < 0):
        raise ValueError("marginals must be nonnegative with equal total mass")
    d = np.abs(x[:, None] - y[None, :])
    if period is not None:
        d = np.mod(d, period)
        d = np.minimum(d, period - d)
    C = d ** 2
    n0, n1 = x.size, y.size
    A_rows = np.kron(np.eye(n0), np.ones((1, n1)))
    A_cols = np.kron(np.ones((1, n0)), np.eye(n1))
    res = linprog(C.ravel(), A_eq=np.vstack([A_rows, A_cols]), b_eq=np.concatenate([a, b]),
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise ValueError(f"transportation LP failed: {res.message}")
    P = res.x.reshape(n0, n1)
    P[P < 1e-15] = 0.0
    i, j = np.nonzero(P)
    cost = float(np.sum(C[i, j] * P[i, j]))
    return math.sqrt(max(cost, 0.0)), Coupling(i, j, P[i, j])
