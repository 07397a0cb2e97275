"""Named reference systems used by the command line and the experiment scripts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .phi_calculus import PhiCalculus, PhiFunction
from .space import Density, Potential, ReferenceSystem, WeightedSpace, normalized_reference

__all__ = ["Preset", "PRESETS", "get_preset", "initial_density", "INITIAL_KINDS"]


@dataclass(frozen=True)
class Preset:
    """Grid, ``phi``, potential, convexity constant and default initial datum."""

    name: str
    topology: str
    a: float
    b: float
    n_cells: int
    m: float
    potential: str = "quadratic"
    potential_params: dict = field(default_factory=dict)
    K: float = 1.0
    initial: str = "shift"
    description: str = ""

    def space(self, n_cells: int | None = None) -> WeightedSpace:
        n = self.n_cells if n_cells is None else n_cells
        if self.topology == "circle":
            return WeightedSpace.circle(self.b - self.a, n)
        return WeightedSpace.segment(self.a, self.b, n)

    def calc(self) -> PhiCalculus:
        return PhiCalculus(PhiFunction.power(self.m))

    def reference(self, n_cells: int | None = None) -> ReferenceSystem:
        sp = self.space(n_cells)
        return normalized_reference(sp, self.calc(), Potential.named(self.potential, **self.potential_params))


PRESETS: dict[str, Preset] = {p.name: p for p in [
    Preset("gaussian-phi1", "segment", -8.0, 8.0, 512, 1.0, "quadratic", {"k": 1.0}, 1.0,
           description="standard Gaussian reference"),
    Preset("gaussian-phi0.9", "segment", -8.0, 8.0, 512, 0.9, "quadratic", {"k": 1.0}, 1.0,
           description="heavy-tailed reference (fast-diffusion entropy)"),
    Preset("gaussian-phi1.2", "segment", -8.0, 8.0, 512, 1.2, "quadratic", {"k": 1.0}, 1.0,
           description="compactly supported reference"),
    Preset("gaussian-phi1.5", "segment", -8.0, 8.0, 512, 1.5, "quadratic", {"k": 1.0}, 1.0,
           description="compactly supported reference (porous-medium entropy)"),
    Preset("nonconvex", "segment", -3.0, 3.0, 512, 1.0, "quadratic", {"k": -1.0}, -1.0,
           description="concave potential, convexity constant -1"),
    Preset("linear", "segment", 0.0, 4.0, 512, 1.0, "linear", {"slope": 1.0}, 0.0,
           description="linear potential, convexity constant 0"),
    Preset("circle-heat", "circle", 0.0, 1.0, 512, 1.0, "zero", {}, 0.0, "cosine",
           description="flat circle, heat flow from a cosine perturbation"),
    Preset("pme-bump", "segment", 0.0, 1.0, 256, 1.5, "zero", {}, 0.0, "bump",
           description="porous-medium flow of a compact bump"),
]}

INITIAL_KINDS = ("shift", "cosine", "bump", "reference", "mixture")


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def initial_density(ref: ReferenceSystem, kind: str, shift: float = 1.0) -> Density:
    """Default initial data.

    ``shift``: the reference translated by ``shift`` (clipped to the support);
    ``cosine``: ``1 + 0.5 cos(2 pi x / L)`` on a circle;
    ``bump``: ``(1 - ((x - c)/(0.2 L))**2)_+`` centred in the segment;
    ``reference``: the reference measure itself;
    ``mixture``: two Gaussian bumps.
    """
    sp = ref.space
    x = sp.cell_centers
    if kind == "reference":
        return ref.nu
    if kind == "shift":
        vals = np.interp(x - shift, x, ref.sigma, left=0.0, right=0.0)
        vals = np.where(ref.support_mask, vals, 0.0)
        return Density.from_values(sp, vals)
    if kind == "cosine":
        return Density.from_function(sp, lambda y: 1.0 + 0.5 * np.cos(2 * math.pi * (y - sp.a) / sp.length))
    if kind == "bump":
        c = sp.a + 0.5 * sp.length
        return Density.from_function(sp, lambda y: np.maximum(1.0 - ((y - c) / (0.2 * sp.length)) ** 2, 0.0))
    if kind == "mixture":
        c = sp.a + 0.5 * sp.length
        s = 0.08 * sp.length
        return Density.from_function(sp, lambda y: np.exp(-0.5 * ((y - c + 2 * s) / s) ** 2)
                                     + 0.6 * np.exp(-0.5 * ((y - c - 2 * s) / s) ** 2))
    raise ValueError(f"unknown initial datum {kind!r}; choose from {INITIAL_KINDS}")
