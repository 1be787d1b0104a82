"""Finite boxes of Z^d with open or periodic metrics.

Sites are integer coordinate tuples. A box of radius ``k`` holds the sites
``{-k, ..., k}^d``; an even side length ``2k`` (sites ``-k .. k-1``) is also
accepted so that even chains, needed for dimerized and staggered models on a
ring, fit the same interface. Sites are always ordered lexicographically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

Site = tuple


class DomainError(ValueError):
    """A site or region does not belong to the lattice."""


GEOMETRIES = ("open", "torus")


@dataclass(frozen=True)
class Lattice:
    dim: int
    radius: int
    geometry: str = "open"
    spin: int = 1
    length: int | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("dim must be positive")
        if self.radius < 1:
            raise DomainError("radius must be positive")
        if self.spin < 1:
            raise DomainError("spin must be positive")
        if self.geometry not in GEOMETRIES:
            raise DomainError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        if self.length is None:
            object.__setattr__(self, "length", 2 * self.radius + 1)
        if self.length not in (2 * self.radius, 2 * self.radius + 1):
            raise DomainError("length must be 2*radius or 2*radius + 1")

    @classmethod
    def chain(cls, n_sites: int, geometry: str = "open", spin: int = 1) -> "Lattice":
        """One-dimensional lattice with ``n_sites`` sites."""
        if n_sites < 2:
            raise DomainError("a chain needs at least two sites")
        return cls(1, n_sites // 2, geometry, spin, n_sites)

    @cached_property
    def coords(self) -> range:
        return range(-self.radius, -self.radius + self.length)

    @cached_property
    def sites(self) -> tuple:
        return tuple(itertools.product(self.coords, repeat=self.dim))

    @cached_property
    def _index(self) -> dict:
        return {x: i for i, x in enumerate(self.sites)}

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def n_modes(self) -> int:
        return self.spin * len(self.sites)

    def site(self, x) -> Site:
        """Normalize ``x`` (int for d = 1, or a tuple) and check membership."""
        if isinstance(x, (int,)) or hasattr(x, "__index__"):
            x = (int(x),)
        x = tuple(int(c) for c in x)
        if x not in self._index:
            raise DomainError(f"site {x} is not in {self}")
        return x

    def index(self, x) -> int:
        return self._index[self.site(x)]

    def __contains__(self, x) -> bool:
        try:
            self.site(x)
        except DomainError:
            return False
        return True

    def box(self, M: int) -> "SiteSet":
        """Sites of the lattice inside the centred box of radius ``M``."""
        return SiteSet(self, (x for x in self.sites if max(abs(c) for c in x) <= M))

    def all_sites(self) -> "SiteSet":
        return SiteSet(self, self.sites)

    def with_radius(self, radius: int) -> "Lattice":
        parity = self.length - 2 * self.radius
        return Lattice(self.dim, radius, self.geometry, self.spin, 2 * radius + parity)


def l1(x: Site, y: Site) -> int:
    return sum(abs(a - b) for a, b in zip(x, y))


def metric(lat: Lattice, x, y) -> int:
    """Host distance: l1 for open boxes, per-axis wrap-around on the torus."""
    x, y = lat.site(x), lat.site(y)
    if lat.geometry == "open":
        return l1(x, y)
    L = lat.length
    return sum(min(abs(a - b), L - abs(a - b)) for a, b in zip(x, y))


class SiteSet:
    """Immutable ordered set of sites of a host lattice."""

    __slots__ = ("host", "sites", "_set")

    def __init__(self, host: Lattice, sites: Iterable = ()):
        norm = {host.site(x) for x in sites}
        self.host = host
        self.sites = tuple(sorted(norm))
        self._set = frozenset(norm)

    def __iter__(self):
        return iter(self.sites)

    def __len__(self):
        return len(self.sites)

    def __contains__(self, x):
        try:
            return self.host.site(x) in self._set
        except DomainError:
            return False

    def __eq__(self, other):
        return isinstance(other, SiteSet) and self._set == other._set

    def __hash__(self):
        return hash(self._set)

    def __repr__(self):
        pts = [x[0] if len(x) == 1 else x for x in self.sites]
        return f"SiteSet({pts})"

    def __or__(self, other: "SiteSet") -> "SiteSet":
        return SiteSet(self.host, self._set | other._set)

    def __and__(self, other: "SiteSet") -> "SiteSet":
        return SiteSet(self.host, self._set & other._set)

    def __le__(self, other: "SiteSet") -> bool:
        return self._set <= other._set

    def isdisjoint(self, other: "SiteSet") -> bool:
        return self._set.isdisjoint(other._set)

    def complement(self) -> "SiteSet":
        return SiteSet(self.host, (x for x in self.host.sites if x not in self._set))

    def _dist(self, kind: str):
        if kind == "host":
            return lambda x, y: metric(self.host, x, y)
        if kind == "l1":
            return l1
        raise ValueError(f"unknown metric {kind!r}")

    def diameter(self, kind: str = "host") -> int:
        d = self._dist(kind)
        return max((d(x, y) for x in self.sites for y in self.sites), default=0)

    def distance(self, other: "SiteSet", kind: str = "host") -> int:
        if not self.sites or not other.sites:
            raise DomainError("distance to an empty set")
        d = self._dist(kind)
        return min(d(x, y) for x in self.sites for y in other.sites)


def fatten(lat: Lattice, X: SiteSet, delta: float) -> SiteSet:
    """All sites within host distance ``delta`` of ``X``."""
    if not isinstance(X, SiteSet):
        X = SiteSet(lat, X)
    if delta < 0:
        raise DomainError("delta must be nonnegative")
    return SiteSet(lat, (z for z in lat.sites if any(metric(lat, z, x) <= delta for x in X)))


def boundary_distance(lat: Lattice, X, M: int) -> int:
    """l1 distance from ``X`` to the exterior of the box of radius ``M`` in Z^d."""
    if M > lat.radius:
        raise DomainError("M exceeds the lattice radius")
    pts = X.sites if isinstance(X, SiteSet) else [lat.site(x) for x in X]
    best = None
    for x in pts:
        r = max(abs(c) for c in x)
        if r > M:
            return 0
        gap = M + 1 - r
        best = gap if best is None else min(best, gap)
    if best is None:
        raise DomainError("empty set has no boundary distance")
    return best
