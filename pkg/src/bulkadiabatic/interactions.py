"""Interactions, their weighted norms, Lipschitz potentials and commutators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .fock import FockSpace, LocalOperator, ParityError, commutator, embed, op_norm, site_potential
from .lattice import DomainError, Lattice, SiteSet, l1, metric


# --------------------------------------------------------------------------- weights

@dataclass(frozen=True)
class WeightProfile:
    """Weight zeta(r) on integer distances: exponential, power or tabulated."""

    kind: str
    param: float = 1.0
    table: tuple = ()

    @classmethod
    def exponential(cls, a: float) -> "WeightProfile":
        return cls("exponential", float(a))

    @classmethod
    def power(cls, p: float) -> "WeightProfile":
        return cls("power", float(p))

    @classmethod
    def tabulated(cls, values: Sequence[float]) -> "WeightProfile":
        return cls("table", 0.0, tuple(float(v) for v in values))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "exponential":
            return np.exp(-self.param * r)
        if self.kind == "power":
            return (1.0 + r) ** (-self.param)
        if self.kind == "table":
            idx = r.astype(int)
            if np.any(idx != r) or np.any(idx < 0) or np.any(idx >= len(self.table)):
                raise DomainError("tabulated weight evaluated outside its integer table")
            return np.asarray(self.table)[idx]
        raise ValueError(f"unknown weight kind {self.kind!r}")

    def gamma_transform(self, gamma: float) -> Callable:
        """M -> zeta(M**gamma)."""
        return lambda M: self(np.asarray(M, dtype=float) ** gamma)

    def check(self, r_max: int = 40) -> dict:
        """Pointwise checks of positivity, monotonicity and log-superadditivity."""
        r = np.arange(r_max + 1)
        z = self(r)
        sup = all(self(a + b) >= z[a] * z[b] * (1 - 1e-12)
                  for a in range(r_max // 2 + 1) for b in range(r_max // 2 + 1))
        return {
            "positive": bool(np.all(z > 0)),
            "non_increasing": bool(np.all(np.diff(z) <= 0)),
            "bounded": bool(np.isfinite(z).all()),
            "log_superadditive": bool(sup),
        }


@dataclass(frozen=True)
class FFunction:
    """F_zeta(r) = zeta(r) / (1 + r)^(d + 1)."""

    weight: WeightProfile
    dim: int

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.weight(r) / (1.0 + r) ** (self.dim + 1)

    def convolution_constant(self, lattices: Iterable[Lattice]) -> dict:
        """sup_{x,y} sum_z F(d(x,z)) F(d(z,y)) / F(d(x,y)), with the running sup per lattice."""
        running, best = [], 0.0
        for lat in lattices:
            D = distance_matrix(lat)
            F = self(D)
            val = float(((F @ F) / F).max())
            best = max(best, val)
            running.append((lat.radius, val, best))
        return {"value": best, "per_lattice": running,
                "monotone": all(b2 >= b1 for (_, _, b1), (_, _, b2) in zip(running, running[1:]))}


def distance_matrix(lat: Lattice, kind: str = "host") -> np.ndarray:
    pts = np.array(lat.sites)
    diff = np.abs(pts[:, None, :] - pts[None, :, :])
    if kind == "host" and lat.geometry == "torus":
        diff = np.minimum(diff, lat.length - diff)
    return diff.sum(axis=2).astype(float)


# --------------------------------------------------------------------------- interactions

@lru_cache(maxsize=4096)
def local_space(lattice: Lattice, sites: tuple) -> FockSpace:
    return FockSpace(lattice, sites)


class Interaction:
    """Finite map from supports X to even operators on the Fock space of X.

    Terms are keyed by the sorted site tuple; adding to an existing support sums.
    """

    def __init__(self, lattice: Lattice, terms: dict | None = None):
        self.lattice = lattice
        self.terms: dict = {}
        for X, op in (terms or {}).items():
            self.add(X, op)

    def _key(self, X) -> tuple:
        if isinstance(X, SiteSet):
            return X.sites
        return SiteSet(self.lattice, X).sites

    def add(self, X, op) -> None:
        key = self._key(X)
        if not key:
            raise DomainError("interaction terms need a nonempty support")
        space = local_space(self.lattice, key)
        M = op.matrix if isinstance(op, LocalOperator) else np.asarray(op, dtype=complex)
        if isinstance(op, LocalOperator) and op.parity != "even":
            raise ParityError("interaction terms must be even")
        if M.shape != (space.dim, space.dim):
            raise DomainError(f"term on {key} has shape {M.shape}, expected {space.dim}")
        if key in self.terms:
            M = self.terms[key].matrix + M
        charge = op.charge if isinstance(op, LocalOperator) else 0
        self.terms[key] = LocalOperator(np.asarray(M, dtype=complex), space,
                                        SiteSet(self.lattice, key), "even", charge)

    def items(self):
        return self.terms.items()

    def __len__(self):
        return len(self.terms)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(np.abs(op.matrix).max(initial=0.0) <= tol for op in self.terms.values())

    def scaled(self, c: complex) -> "Interaction":
        out = Interaction(self.lattice)
        for key, op in self.terms.items():
            out.terms[key] = op * c
        return out

    def __add__(self, other: "Interaction") -> "Interaction":
        if other.lattice != self.lattice:
            raise DomainError("interactions on different lattices")
        out = Interaction(self.lattice, {k: v for k, v in self.terms.items()})
        for key, op in other.terms.items():
            out.add(key, op)
        return out

    def __sub__(self, other: "Interaction") -> "Interaction":
        return self + other.scaled(-1.0)

    def restricted(self, window: SiteSet) -> "Interaction":
        """Terms whose support lies inside ``window``."""
        keep = set(window.sites)
        return Interaction(self.lattice, {k: v for k, v in self.terms.items() if set(k) <= keep})

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(op.is_hermitian(tol) for op in self.terms.values())


def difference_on_window(phi_l: Interaction, phi_k: Interaction, window_radius: int) -> Interaction:
    """Phi_l - Phi_k on the supports inside the centred box of the given radius.

    The two interactions may live on different boxes; terms are matched by site tuple.
    """
    lat = phi_l.lattice
    window = lat.box(window_radius)
    if window_radius > phi_k.lattice.radius:
        raise DomainError("window exceeds the smaller volume")
    inside = set(window.sites)
    out = Interaction(lat)
    for key in set(phi_l.terms) | set(phi_k.terms):
        if not set(key) <= inside:
            continue
        a = phi_l.terms.get(key)
        b = phi_k.terms.get(key)
        M = (a.matrix if a is not None else 0) - (b.matrix if b is not None else 0)
        out.add(key, np.broadcast_to(M, (2 ** (lat.spin * len(key)),) * 2).copy())
    return out


@dataclass
class InteractionFamily:
    """Generator k -> Phi^{Lambda_k} built on ``template.with_radius(k)``."""

    generator: Callable[[Lattice], Interaction]
    template: Lattice
    name: str = "family"

    def lattice(self, k: int) -> Lattice:
        return self.template.with_radius(k)

    def __call__(self, k: int) -> Interaction:
        return self.generator(self.lattice(k))


def assemble(phi: Interaction, space) -> LocalOperator:
    """Sum of the embedded terms on a Fock space (or the full space of a lattice)."""
    if isinstance(space, Lattice):
        space = FockSpace(space)
    if phi.lattice != space.lattice:
        raise DomainError("interaction and Fock space use different lattices")
    M = np.zeros((space.dim, space.dim), dtype=complex)
    inside = set(space.sites.sites)
    charge = 0
    for key, op in phi.items():
        if not set(key) <= inside:
            raise DomainError(f"term support {key} exits the target space")
        if op.charge != 0:
            charge = None
        M += embed(op, space).matrix
    return LocalOperator(M, space, SiteSet(space.lattice, [x for k in phi.terms for x in k]),
                         "even", charge)


# --------------------------------------------------------------------------- norms

@dataclass
class NormReport:
    value: float
    per_k: list = field(default_factory=list)
    argmax: tuple | None = None

    def __float__(self):
        return self.value


def _term_weights(phi: Interaction, n: int, diam_kind: str, window=None):
    for key, op in phi.items():
        if window is not None and not set(key) <= window:
            continue
        X = SiteSet(phi.lattice, key)
        w = float(X.diameter(diam_kind)) ** n * op_norm(op)
        if w:
            yield key, w


def _norm_single(phi: Interaction, F: FFunction, n: int, kind: str, window=None):
    acc: dict = {}
    for key, w in _term_weights(phi, n, kind, window):
        for x in key:
            for y in key:
                acc[(x, y)] = acc.get((x, y), 0.0) + w
    best, arg = 0.0, None
    lat = phi.lattice
    for (x, y), s in acc.items():
        d = metric(lat, x, y) if kind == "host" else l1(x, y)
        val = s / float(F(d))
        if val > best:
            best, arg = val, (x, y)
    return best, arg


def interaction_norm(phi, zeta: WeightProfile, n: int, k_range: Sequence[int] | None = None) -> NormReport:
    """sup_k sup_{x,y} sum_{X containing x,y} diam(X)^n ||Phi(X)|| / F_zeta(d(x,y)).

    ``phi`` is a single Interaction or an InteractionFamily evaluated on ``k_range``.
    Distances and diameters use the host metric of each box.
    """
    if isinstance(phi, Interaction):
        items = [(phi.lattice.radius, phi)]
    else:
        if not k_range:
            raise ValueError("k_range must be nonempty")
        items = [(k, phi(k)) for k in k_range]
    report = NormReport(0.0)
    for k, inter in items:
        F = FFunction(zeta, inter.lattice.dim)
        val, arg = _norm_single(inter, F, n, "host")
        if val > report.value:
            report.value, report.argmax = val, (k,) + (arg or ())
        report.per_k.append((k, val, report.value))
    return report


def bulk_norm(phi_on_l: Interaction, zeta: WeightProfile, n: int, M: int) -> float:
    """Norm restricted to supports inside Lambda_M, with l1 distances and diameters."""
    if M > phi_on_l.lattice.radius:
        raise DomainError("M exceeds the volume of the interaction")
    window = set(phi_on_l.lattice.box(M).sites)
    F = FFunction(zeta, phi_on_l.lattice.dim)
    return _norm_single(phi_on_l, F, n, "l1", window)[0]


# --------------------------------------------------------------------------- Lipschitz potentials

@dataclass(frozen=True)
class LipschitzPotential:
    """On-site potential v(x), possibly depending on the box it is restricted to."""

    func: Callable
    name: str = "potential"

    def value(self, lat: Lattice, x) -> float:
        return float(self.func(lat.site(x), lat))

    def values(self, lat: Lattice) -> dict:
        return {x: self.value(lat, x) for x in lat.sites}

    @classmethod
    def linear_field(cls, strength: float, axis: int = 0) -> "LipschitzPotential":
        return cls(lambda x, lat: strength * x[axis], f"linear({strength})")

    @classmethod
    def constant(cls, c: float) -> "LipschitzPotential":
        return cls(lambda x, lat: c, f"constant({c})")

    @classmethod
    def from_values(cls, values: dict) -> "LipschitzPotential":
        vals = {(k,) if isinstance(k, int) else tuple(k): float(v) for k, v in values.items()}
        return cls(lambda x, lat: vals.get(x, 0.0), "table")

    def clamped(self, radius: int) -> "LipschitzPotential":
        """Extension of the restriction to Lambda_radius, clamped at its boundary values."""
        base = self

        def f(x, lat):
            inner = Lattice(lat.dim, radius, "open", lat.spin)
            return base.func(tuple(min(max(c, -radius), radius) for c in x), inner)

        return LipschitzPotential(f, f"{self.name}|clamp{radius}")


def lipschitz_constant(v: LipschitzPotential, lattices: Iterable[Lattice]) -> float:
    """sup over boxes and x != y of |v(x) - v(y)| / d(x, y)."""
    best = 0.0
    for lat in lattices:
        vals = np.array([v.value(lat, x) for x in lat.sites])
        D = distance_matrix(lat)
        off = D > 0
        if off.any():
            best = max(best, float((np.abs(vals[:, None] - vals[None, :])[off] / D[off]).max()))
    return best


def lipschitz_operator(v: LipschitzPotential, space) -> LocalOperator:
    """V = sum_x v(x) sum_i n_{x,i}."""
    if isinstance(space, Lattice):
        space = FockSpace(space)
    return site_potential(space, {x: v.value(space.lattice, x) for x in space.sites})


def potential_interaction(v: LipschitzPotential, lat: Lattice) -> Interaction:
    """On-site interaction {x} -> v(x) n_x."""
    phi = Interaction(lat)
    for x in lat.sites:
        val = v.value(lat, x)
        if val:
            sp = local_space(lat, (x,))
            phi.add((x,), site_potential(sp, {x: val}))
    return phi


# --------------------------------------------------------------------------- commutators

def _embed_term(op: LocalOperator, lat: Lattice, key: tuple) -> np.ndarray:
    return embed(op, local_space(lat, key)).matrix


def commutator_interaction(phiA: Interaction, phiB: Interaction) -> Interaction:
    """Terms [Phi_A(X), Phi_B(Y)] on X u Y for overlapping X, Y."""
    if phiA.lattice != phiB.lattice:
        raise DomainError("interactions on different lattices")
    lat = phiA.lattice
    out = Interaction(lat)
    for X, a in phiA.items():
        sx = set(X)
        for Y, b in phiB.items():
            if sx.isdisjoint(Y):
                continue
            Z = tuple(sorted(sx | set(Y)))
            A, B = _embed_term(a, lat, Z), _embed_term(b, lat, Z)
            out.add(Z, A @ B - B @ A)
    out.terms = {k: v for k, v in out.terms.items() if np.any(v.matrix)}
    return out


def lipschitz_commutator(phiA: Interaction, v: LipschitzPotential) -> Interaction:
    """Terms [Phi_A(X), V restricted to X] on X."""
    lat = phiA.lattice
    out = Interaction(lat)
    for X, a in phiA.items():
        Vx = site_potential(a.space, {x: v.value(lat, x) for x in X})
        c = commutator(a, Vx).matrix
        if np.any(c):
            out.add(X, c)
    return out


def lipschitz_commutator_bound(phiA, v: LipschitzPotential, zeta: WeightProfile, n: int,
                               k_range=None) -> dict:
    """Compare ||Phi_[A,V]||_{zeta,n} against C_v r ||Phi_A||_{zeta,n+d+1} times 2^d.

    For each term, [Phi(X), V|X] = [Phi(X), V|X - c N_X] with c the midrange of v on X,
    which gives ||[Phi(X), V|X]|| <= r |X| C_v diam(X) ||Phi(X)|| and |X| <= 2^d diam^d.
    """
    if isinstance(phiA, Interaction):
        lats, fam = [phiA.lattice], (lambda k: phiA)
        ks = [phiA.lattice.radius]
    else:
        ks, fam = list(k_range), phiA
        lats = [phiA.lattice(k) for k in ks]
    d = lats[0].dim
    r = lats[0].spin
    Cv = lipschitz_constant(v, lats)
    lhs = interaction_norm(InteractionFamily(lambda lat: lipschitz_commutator(fam(lat.radius), v),
                                             lats[0]), zeta, n, ks).value
    rhs_norm = interaction_norm(fam if not isinstance(phiA, Interaction) else phiA,
                                zeta, n + d + 1, ks).value
    return {"lhs": lhs, "C_v": Cv, "norm_shifted": rhs_norm,
            "bound": 2 ** d * Cv * r * rhs_norm, "half_bound": 0.5 * Cv * r * rhs_norm}


# --------------------------------------------------------------------------- rapid t.d.l.

@dataclass
class TdlReport:
    rows: list
    constant: float
    verdict: bool
    flags: list
    note: str = "a single weight zeta is used for every derived family"


def rapid_tdl_report(family, gamma: float, zeta: WeightProfile, n: int, lam: float,
                     M_range: Sequence[int], k_max: int | None = None,
                     k_pairs: Sequence[tuple] | None = None, times: Sequence | None = None,
                     tol: float = 1e-12) -> TdlReport:
    """Table of ||Phi^{Lambda_l} - Phi^{Lambda_k}||_{zeta,n,Lambda_M} for k, l >= M + lam M^gamma.

    ``family`` maps k (and, when ``times`` is given, (k, t)) to an Interaction.
    The verdict asks that the ratio to zeta(M^gamma) does not grow with M.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    zg = zeta.gamma_transform(gamma)
    t_list = list(times) if times is not None else [None]
    cache: dict = {}

    def get(k, t):
        if (k, t) not in cache:
            cache[(k, t)] = family(k) if t is None else family(k, t)
        return cache[(k, t)]

    rows, flags = [], []
    for M in M_range:
        k0 = math.ceil(M + lam * M ** gamma)
        if k_pairs is not None:
            pairs = [(k, l) for k, l in k_pairs if min(k, l) >= k0]
        else:
            top = k_max if k_max is not None else k0 + 2
            pairs = [(k, l) for k in range(k0, top + 1) for l in range(k + 1, top + 1)]
        if not pairs:
            flags.append(f"no admissible (k, l) for M={M} (need k >= {k0})")
            continue
        worst = 0.0
        for k, l in pairs:
            diff = max(bulk_norm(difference_on_window(get(max(k, l), t), get(min(k, l), t), M),
                                 zeta, n, M) for t in t_list)
            rows.append({"M": M, "k": k, "l": l, "diff": diff})
            worst = max(worst, diff)
        ratio = worst / float(zg(M))
        for row in rows:
            if row["M"] == M:
                row["ratio"] = ratio
    by_M = {}
    for row in rows:
        by_M[row["M"]] = row["ratio"]
    ratios = [by_M[M] for M in sorted(by_M)]
    if len(ratios) < 2:
        flags.append("fewer than two window sizes: trend not assessable")
    constant = max(ratios, default=0.0)
    scale = max(ratios, default=0.0)
    verdict = all(b <= a + tol * max(1.0, scale) for a, b in zip(ratios, ratios[1:]))
    return TdlReport(rows, constant, bool(verdict) and len(ratios) >= 1, flags)
