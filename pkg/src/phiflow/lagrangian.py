"""Lagrangian (mass-coordinate) representation of piecewise-uniform measures.

A measure is stored as node positions with fixed masses between consecutive
nodes. This is the parametrization used by the minimizing-movement solver and
by the slope probes: moving nodes moves mass monotonically, the squared
Wasserstein distance between two node configurations with the same masses is
an exact quadratic form, and the entropy is the segment entropy of the
resulting piecewise-uniform measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.optimize import isotonic_regression

from .phi_calculus import INF
from .space import Density, ReferenceSystem
from .transport import SegmentMeasure

__all__ = ["LagrangianMeasure", "LagrangianEnergy"]


@dataclass
class LagrangianMeasure:
    """Nodes and segment masses.

    On a segment there are ``n + 1`` nodes for ``n`` masses; on a circle of
    circumference ``period`` there are ``n`` nodes and segment ``n - 1`` runs
    from ``nodes[-1]`` to ``nodes[0] + period``.
    """

    nodes: np.ndarray
    mass: np.ndarray
    period: float | None = None
    lower: float = -INF
    upper: float = INF
    lengths: np.ndarray | None = None

    def __post_init__(self):
        if self.lengths is None:
            a, b = self.ends()
            self.lengths = b - a

    @classmethod
    def from_density(cls, mu: Density) -> "LagrangianMeasure":
        sp = mu.space
        e = sp.edges
        m = mu.masses
        pos = m > 0
        if sp.periodic:
            if pos.all():
                return cls(e[:-1].copy(), m.copy(), sp.length)
            # start right after the last empty cell so every zero run is interior
            start = (int(np.flatnonzero(~pos)[-1]) + 1) % m.size
            order = np.roll(np.arange(m.size), -start)
            lifts = np.where(order < start, sp.length, 0.0)
            left = e[order] + lifts
            nodes, masses = _merge_zero_runs(left, m[order])
            return cls(nodes, masses, sp.length)
        idx = np.flatnonzero(pos)
        first, last = idx[0], idx[-1]
        nodes, masses = _merge_zero_runs(e[first:last + 1], m[first:last + 1])
        nodes = np.append(nodes, e[last + 1])
        return cls(nodes, masses, None, float(sp.a), float(sp.b))

    def copy(self) -> "LagrangianMeasure":
        return LagrangianMeasure(self.nodes.copy(), self.mass.copy(), self.period,
                                 self.lower, self.upper, self.lengths.copy())

    def moved(self, D) -> "LagrangianMeasure":
        """Configuration after displacing node ``j`` by ``D[j]``.

        Segment lengths are updated incrementally, so they keep full relative
        precision even where nodes crowd together far from the origin.
        """
        da, db = self.ends(D, lift=False)
        return LagrangianMeasure(self.nodes + D, self.mass.copy(), self.period,
                                 self.lower, self.upper, self.lengths + (db - da))

    @property
    def periodic(self) -> bool:
        return self.period is not None

    def ends(self, X=None, lift: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Left and right end values of each segment for a nodal array."""
        X = self.nodes if X is None else X
        if self.periodic:
            b = np.roll(X, -1)
            if lift:
                b[-1] += self.period
            return X, b
        return X[:-1], X[1:]

    def scatter(self, ga, gb) -> np.ndarray:
        """Accumulate per-segment end contributions onto nodes."""
        if self.periodic:
            return ga + np.roll(gb, 1)
        out = np.zeros(self.mass.size + 1)
        out[:-1] += ga
        out[1:] += gb
        return out

    @property
    def node_weights(self) -> np.ndarray:
        m = self.mass
        if self.periodic:
            return 0.5 * (m + np.roll(m, 1))
        return 0.5 * (np.concatenate([[0.0], m]) + np.concatenate([m, [0.0]]))

    def to_segments(self) -> SegmentMeasure:
        a = self.nodes if self.periodic else self.nodes[:-1]
        return SegmentMeasure(a.copy(), a + np.maximum(self.lengths, 0.0),
                              self.mass / self.mass.sum(), self.period)

    def rebin(self, space) -> Density:
        return self.to_segments().rebin(space)

    def w2_squared(self, D) -> float:
        """Squared distance to the configuration displaced by ``D``."""
        da, db = self.ends(D, lift=False)
        return float(np.sum(self.mass * (da * da + da * db + db * db)) / 3.0)

    def project(self, D) -> np.ndarray:
        """Displacement of the nearest ordered configuration inside the bounds.

        Ordered configurations are left untouched, so that lengths computed
        from displacements keep their precision.
        """
        D = np.asarray(D, dtype=float)
        ln = self.lengths + np.subtract(*self.ends(D, lift=False)[::-1])
        if np.any(ln < 0):
            w = np.maximum(self.node_weights, 1e-300)
            X = self.nodes + D
            D = isotonic_regression(X, weights=w).x - self.nodes
        if not self.periodic:
            D = np.maximum(D, self.lower - self.nodes)
            D = np.minimum(D, self.upper - self.nodes)
        return D


def _merge_zero_runs(left, m):
    """Collapse consecutive zero-mass cells; returns left nodes and masses."""
    nodes, masses = [], []
    prev_zero = False
    for x, mi in zip(left, m):
        if mi > 0:
            nodes.append(x)
            masses.append(mi)
            prev_zero = False
        elif not prev_zero:
            nodes.append(x)
            masses.append(0.0)
            prev_zero = True
    return np.array(nodes, dtype=float), np.array(masses, dtype=float)


class LagrangianEnergy:
    """Relative entropy of a displaced configuration, optionally plus the
    proximal term ``W_2(., lag)**2 / (2 delta)``.

    All methods take the nodal displacement ``D`` from ``lag``. Internal energy
    uses the exact uniform density on each segment with the weight evaluated at
    the midpoint; the potential term is Simpson's rule on each segment.
    Gradients are exact; the Hessian drops second derivatives of the weight and
    clips negative potential curvature so it stays positive semidefinite.
    """

    def __init__(self, ref: ReferenceSystem, lag: LagrangianMeasure, delta: float | None = None):
        self.ref = ref
        self.lag = lag
        self.delta = delta
        self.calc = ref.calc
        self.h0 = float(self.calc.h(0.0))
        self.pos = lag.mass > 0
        self._a0, self._b0 = lag.ends()

    def zero(self) -> np.ndarray:
        return np.zeros_like(self.lag.nodes)

    def _geometry(self, D):
        da, db = self.lag.ends(D, lift=False)
        a, b = self._a0 + da, self._b0 + db
        ln = self.lag.lengths + (db - da)
        mid = a + 0.5 * ln
        weight = self.ref.space.weight
        ef = np.exp(-np.asarray(weight.value(mid), dtype=float))
        fp = np.asarray(weight.d1(mid), dtype=float)
        return a, b, ln, mid, ef, fp, da, db

    def entropy(self, D) -> float:
        a, b, ln, mid, ef, fp, _, _ = self._geometry(D)
        if np.any(ln[self.pos] <= 0) or np.any(ln < 0):
            return INF
        m = self.lag.mass
        w = ln * ef
        rho = m[self.pos] / w[self.pos]
        with np.errstate(over="ignore", invalid="ignore"):
            internal = float(np.sum(w[self.pos] * np.asarray(self.calc.h(rho))))
            internal += self.h0 * float(w[~self.pos].sum())
        V = self.ref.drift_value
        pot = float(m @ ((V(a) + 4.0 * V(mid) + V(b)) / 6.0))
        val = internal + pot
        return val if math.isfinite(val) else INF

    def proximal(self, D) -> float:
        if self.delta is None:
            return 0.0
        return self.lag.w2_squared(D) / (2.0 * self.delta)

    def __call__(self, D) -> float:
        H = self.entropy(D)
        return H + self.proximal(D) if math.isfinite(H) else INF

    def gradient(self, D) -> np.ndarray:
        a, b, ln, mid, ef, fp, da, db = self._geometry(D)
        m = self.lag.mass
        w = ln * ef
        gp = np.full(m.size, self.h0)
        rho = m[self.pos] / w[self.pos]
        gp[self.pos] = -np.asarray(self.calc.pressure(rho))
        dw_da = -ef * (1.0 + 0.5 * ln * fp)
        dw_db = ef * (1.0 - 0.5 * ln * fp)
        d1 = self.ref.drift_d1
        vm = d1(mid)
        ga = gp * dw_da + m * (d1(a) + 2.0 * vm) / 6.0
        gb = gp * dw_db + m * (d1(b) + 2.0 * vm) / 6.0
        if self.delta is not None:
            ga = ga + m * (2.0 * da + db) / (6.0 * self.delta)
            gb = gb + m * (da + 2.0 * db) / (6.0 * self.delta)
        return self.lag.scatter(ga, gb)

    def hessian(self, D) -> sps.csr_matrix:
        a, b, ln, mid, ef, fp, _, _ = self._geometry(D)
        m = self.lag.mass
        w = ln * ef
        gpp = np.zeros(m.size)
        rho = m[self.pos] / w[self.pos]
        gpp[self.pos] = rho ** 2 / (np.asarray(self.calc.phi_at(rho)) * w[self.pos])
        dw_da = -ef * (1.0 + 0.5 * ln * fp)
        dw_db = ef * (1.0 - 0.5 * ln * fp)
        d2 = self.ref.drift_d2
        va, vb, vm = (np.maximum(d2(z), 0.0) for z in (a, b, mid))
        haa = gpp * dw_da ** 2 + m * (va + vm) / 6.0
        hbb = gpp * dw_db ** 2 + m * (vb + vm) / 6.0
        hab = gpp * dw_da * dw_db + m * vm / 6.0
        if self.delta is not None:
            haa = haa + m / (3.0 * self.delta)
            hbb = hbb + m / (3.0 * self.delta)
            hab = hab + m / (6.0 * self.delta)
        n_seg = m.size
        i_a = np.arange(n_seg)
        if self.lag.periodic:
            n = n_seg
            i_b = (i_a + 1) % n
        else:
            n = n_seg + 1
            i_b = i_a + 1
        rows = np.concatenate([i_a, i_b, i_a, i_b])
        cols = np.concatenate([i_a, i_b, i_b, i_a])
        vals = np.concatenate([haa, hbb, hab, hab])
        return sps.csr_matrix((vals, (rows, cols)), shape=(n, n))
