"""Lattice fermion models and smooth time ramps.

The unperturbed Hamiltonian is

    H0 = sum_{x != y} a*_x T(x - y) a_y + sum_x phi(x) n_x
         + sum_{x != y} W(d(x, y)) n_x n_y - mu N,

assembled from pieces with scalar, possibly time-dependent, coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fock import FockSpace, annihilation, creation, number_operator
from .interactions import Interaction, local_space
from .lattice import DomainError, Lattice


# --------------------------------------------------------------------------- ramps

def _bump(tau):
    return math.exp(-1.0 / tau) if tau > 0 else 0.0


@dataclass(frozen=True)
class Ramp:
    """Time profile: constant 1, linear, or a smooth switch from 0 to 1.

    The switch is flat to all orders at both ends of [start, end].
    """

    kind: str = "constant"
    start: float = 0.0
    end: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "switch", "linear"):
            raise ValueError(f"unknown ramp kind {self.kind!r}")
        if self.kind != "constant" and not self.end > self.start:
            raise ValueError("ramp end must exceed start")

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return 1.0
        tau = (t - self.start) / (self.end - self.start)
        if self.kind == "linear":
            return tau
        if tau <= 0:
            return 0.0
        if tau >= 1:
            return 1.0
        a, b = _bump(tau), _bump(1 - tau)
        return a / (a + b)

    def derivative(self, t: float) -> float:
        if self.kind == "constant":
            return 0.0
        width = self.end - self.start
        tau = (t - self.start) / width
        if self.kind == "linear":
            return 1.0 / width
        if tau <= 0 or tau >= 1:
            return 0.0
        a, b = _bump(tau), _bump(1 - tau)
        da, db = a / tau ** 2, b / (1 - tau) ** 2
        return (da * b + a * db) / (a + b) ** 2 / width


@dataclass(frozen=True)
class Schedule:
    """Coefficient base + delta * ramp(t)."""

    base: float = 1.0
    delta: float = 0.0
    ramp: Ramp = Ramp()

    def __call__(self, t: float) -> float:
        return self.base + self.delta * self.ramp(t) if self.delta else self.base

    def derivative(self, t: float) -> float:
        return self.delta * self.ramp.derivative(t) if self.delta else 0.0

    @property
    def is_static(self) -> bool:
        return self.delta == 0 or self.ramp.kind == "constant"


# --------------------------------------------------------------------------- local terms

def _two_site_space(lat: Lattice, x, y):
    key = tuple(sorted((lat.site(x), lat.site(y))))
    return key, local_space(lat, key)


def hopping_term(lat: Lattice, x, y, amplitude) -> tuple:
    """amplitude * sum_i a*_{x,i} a_{y,i} + h.c. on the support {x, y}."""
    key, sp = _two_site_space(lat, x, y)
    M = np.zeros((sp.dim, sp.dim), dtype=complex)
    for i in range(lat.spin):
        h = (creation(sp, x, i) @ annihilation(sp, y, i)).matrix
        M += amplitude * h + np.conj(amplitude) * h.conj().T
    return key, M


def density_term(lat: Lattice, x, y, strength: float) -> tuple:
    key, sp = _two_site_space(lat, x, y)
    nx = number_operator(sp, [x]).matrix
    ny = number_operator(sp, [y]).matrix
    return key, strength * (nx @ ny)


def onsite_term(lat: Lattice, x, value: float) -> tuple:
    x = lat.site(x)
    sp = local_space(lat, (x,))
    return (x,), value * number_operator(sp, [x]).matrix


def bonds(lat: Lattice, displacement) -> list:
    """Unordered pairs (x, x + displacement), wrapping on the torus."""
    disp = (displacement,) if isinstance(displacement, int) else tuple(displacement)
    if len(disp) != lat.dim:
        raise DomainError("displacement dimension does not match the lattice")
    lo = -lat.radius
    seen, out = set(), []
    for x in lat.sites:
        y = tuple(a + b for a, b in zip(x, disp))
        if lat.geometry == "torus":
            y = tuple((c - lo) % lat.length + lo for c in y)
        elif y not in lat:
            continue
        if y == x:
            continue
        key = tuple(sorted((x, y)))
        if key not in seen:
            seen.add(key)
            out.append((x, y))
    return out


def _sublattice_parity(lat: Lattice, x) -> int:
    """Parity of the absolute coordinates, so patterns agree across box sizes."""
    return sum(x) % 2


# --------------------------------------------------------------------------- pieces

def hopping_piece(displacement=1, amplitude: complex = 1.0) -> Callable[[Lattice], Interaction]:
    def build(lat):
        phi = Interaction(lat)
        for x, y in bonds(lat, displacement):
            phi.add(*hopping_term(lat, x, y, amplitude))
        return phi
    return build


def dimer_piece(which: str) -> Callable[[Lattice], Interaction]:
    """Nearest-neighbour bonds whose left site has even (``intra``) or odd (``inter``) coordinate."""
    want = 0 if which == "intra" else 1

    def build(lat):
        if lat.dim != 1:
            raise DomainError("dimerized hopping is defined for chains")
        phi = Interaction(lat)
        for x, y in bonds(lat, 1):
            left = x if (y[0] - x[0]) % lat.length == 1 else y
            if _sublattice_parity(lat, left) == want:
                phi.add(*hopping_term(lat, x, y, 1.0))
        return phi
    return build


def onsite_piece(profile: Callable) -> Callable[[Lattice], Interaction]:
    def build(lat):
        phi = Interaction(lat)
        for x in lat.sites:
            v = profile(lat, x)
            if v:
                phi.add(*onsite_term(lat, x, v))
        return phi
    return build


def staggered_profile(lat, x):
    return 1.0 if _sublattice_parity(lat, x) == 0 else -1.0


def edge_profile(lat, x):
    """+1 on the first site, -1 on the last site of a chain."""
    if x[0] == lat.coords[0]:
        return 1.0
    if x[0] == lat.coords[-1]:
        return -1.0
    return 0.0


def uniform_profile(lat, x):
    return 1.0


def density_piece(distance: int) -> Callable[[Lattice], Interaction]:
    def build(lat):
        phi = Interaction(lat)
        for x, y in bonds(lat, (distance,) + (0,) * (lat.dim - 1)):
            phi.add(*density_term(lat, x, y, 1.0))
        if lat.dim > 1:
            for axis in range(1, lat.dim):
                disp = tuple(distance if a == axis else 0 for a in range(lat.dim))
                for x, y in bonds(lat, disp):
                    phi.add(*density_term(lat, x, y, 1.0))
        return phi
    return build


def bond_term_piece(terms: list) -> Callable[[Lattice], Interaction]:
    """Explicit local terms: {"sites": [x], "strength"} or {"sites": [x, y], "strength"}."""
    def build(lat):
        phi = Interaction(lat)
        for t in terms:
            sites = [lat.site(s) for s in t["sites"]]
            if len(sites) == 1:
                phi.add(*onsite_term(lat, sites[0], t["strength"]))
            else:
                phi.add(*hopping_term(lat, sites[0], sites[1], t["strength"]))
        return phi
    return build


@dataclass
class TimeDependentInteraction:
    """Sum of pieces with scalar schedules: Phi(t) = sum_p c_p(t) Phi_p."""

    parts: list = field(default_factory=list)

    def add(self, schedule: Schedule, build: Callable[[Lattice], Interaction], name: str = ""):
        self.parts.append((schedule, build, name))
        return self

    @property
    def is_static(self) -> bool:
        return all(s.is_static for s, _, _ in self.parts)

    def at(self, lat: Lattice, t: float) -> Interaction:
        out = Interaction(lat)
        for s, build, _ in self.parts:
            c = s(t)
            if c:
                out = out + build(lat).scaled(c)
        return out

    def derivative(self, lat: Lattice, t: float) -> Interaction:
        out = Interaction(lat)
        for s, build, _ in self.parts:
            c = s.derivative(t)
            if c:
                out = out + build(lat).scaled(c)
        return out

    def family(self, template: Lattice, t: float = 0.0):
        from .interactions import InteractionFamily
        return InteractionFamily(lambda lat: self.at(lat, t), template)

    def assembled(self, space: FockSpace) -> list:
        from .interactions import assemble
        return [(s, assemble(build(space.lattice), space).matrix, name) for s, build, name in self.parts]


def chain_model(hopping: float = 1.0, staggered: float = 0.0, intra: float | None = None,
                inter: float | None = None, edge_field: float = 0.0, density: float = 0.0,
                chemical_potential: float = 0.0, ramp: Ramp = Ramp(),
                deltas: dict | None = None) -> TimeDependentInteraction:
    """Staggered or dimerized nearest-neighbour chain with optional edge field.

    ``deltas`` maps a piece name to the change of its coefficient over ``ramp``.
    """
    deltas = dict(deltas or {})
    H = TimeDependentInteraction()

    def sched(name, base):
        return Schedule(base, deltas.pop(name, 0.0), ramp)

    if intra is not None or inter is not None:
        H.add(sched("intra", intra or 0.0), dimer_piece("intra"), "intra")
        H.add(sched("inter", inter or 0.0), dimer_piece("inter"), "inter")
    else:
        H.add(sched("hopping", hopping), hopping_piece(1, 1.0), "hopping")
    H.add(sched("staggered", staggered), onsite_piece(staggered_profile), "staggered")
    H.add(sched("edge_field", edge_field), onsite_piece(edge_profile), "edge_field")
    H.add(sched("density", density), density_piece(1), "density")
    H.add(sched("chemical_potential", chemical_potential),
          onsite_piece(lambda lat, x: -1.0), "chemical_potential")
    if deltas:
        raise ValueError(f"unknown ramp targets {sorted(deltas)}")
    H.parts = [p for p in H.parts if p[0].base or p[0].delta]
    return H


def one_body_matrix(lat: Lattice, H: TimeDependentInteraction, t: float = 0.0) -> np.ndarray:
    """Single-particle matrix of a quadratic model (spinless), read off from the terms."""
    if lat.spin != 1:
        raise DomainError("one-body read-off implemented for spinless chains")
    phi = H.at(lat, t)
    n = len(lat)
    h = np.zeros((n, n), dtype=complex)
    for key, op in phi.items():
        idx = [lat.index(x) for x in key]
        M = op.matrix
        if len(key) == 1:
            h[idx[0], idx[0]] += M[1, 1]
        else:
            # basis |01> = index 1 (second mode occupied), |10> = index 2
            h[idx[0], idx[1]] += M[2, 1]
            h[idx[1], idx[0]] += M[1, 2]
            if abs(M[3, 3] - M[1, 1] - M[2, 2]) > 1e-14:
                raise DomainError("model is not quadratic")
            h[idx[0], idx[0]] += M[2, 2]
            h[idx[1], idx[1]] += M[1, 1]
    return h
