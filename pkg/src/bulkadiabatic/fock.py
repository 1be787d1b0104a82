"""Fermionic Fock spaces, Jordan-Wigner generators and even local operators.

Basis states are bit patterns. Mode ``j`` (in lexicographic site order, then
internal index) is bit ``n_modes - 1 - j``, so the full-space basis index is
the integer value of the pattern and mode 0 is the leftmost tensor factor.
A single mode has basis {vacuum, occupied} and ``a* = [[0, 0], [1, 0]]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .lattice import DomainError, Lattice, SiteSet

MAX_MODES = 16
HERMITIAN_TOL = 1e-10


class ParityError(ValueError):
    """An odd or mixed-parity operator was passed where an even one is required."""


class FockSpace:
    """Fock space over a set of sites, optionally restricted to ``N`` particles."""

    def __init__(self, lattice: Lattice, sites=None, particle_number: int | None = None,
                 max_modes: int = MAX_MODES):
        self.lattice = lattice
        if sites is None:
            sites = lattice.all_sites()
        elif not isinstance(sites, SiteSet):
            sites = SiteSet(lattice, sites)
        self.sites = sites
        self.modes = tuple((x, i) for x in sites for i in range(lattice.spin))
        n = len(self.modes)
        if n > max_modes:
            raise DomainError(f"{n} modes exceed the cap of {max_modes}")
        if particle_number is not None and not 0 <= particle_number <= n:
            raise DomainError(f"particle number {particle_number} out of range for {n} modes")
        self.particle_number = particle_number
        self._pos = {m: j for j, m in enumerate(self.modes)}

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def is_full(self) -> bool:
        return self.particle_number is None

    @cached_property
    def states(self) -> np.ndarray:
        n = self.n_modes
        if self.particle_number is None:
            return np.arange(2 ** n, dtype=np.int64)
        pats = [sum(1 << (n - 1 - j) for j in occ)
                for occ in itertools.combinations(range(n), self.particle_number)]
        return np.array(sorted(pats), dtype=np.int64)

    @property
    def dim(self) -> int:
        return len(self.states)

    @cached_property
    def occupations(self) -> np.ndarray:
        """(dim, n_modes) array of 0/1 occupation numbers."""
        shifts = np.arange(self.n_modes - 1, -1, -1)
        return ((self.states[:, None] >> shifts) & 1).astype(np.int8)

    @cached_property
    def particle_numbers(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    def mode_position(self, x, i: int = 0) -> int:
        key = (self.lattice.site(x), i)
        if key not in self._pos:
            raise DomainError(f"mode {key} is not in this Fock space")
        return self._pos[key]

    def locate(self, states) -> np.ndarray:
        """Basis indices of the given patterns, -1 where absent."""
        states = np.asarray(states, dtype=np.int64)
        if self.particle_number is None:
            return states.copy()
        idx = np.searchsorted(self.states, states)
        idx = np.minimum(idx, self.dim - 1)
        return np.where(self.states[idx] == states, idx, -1)

    def full(self) -> "FockSpace":
        return FockSpace(self.lattice, self.sites) if not self.is_full else self

    def sector(self, N: int) -> "FockSpace":
        return FockSpace(self.lattice, self.sites, N)

    def _key(self):
        return (self.lattice, self.sites, self.particle_number)

    def __eq__(self, other):
        return isinstance(other, FockSpace) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        sec = "" if self.is_full else f", N={self.particle_number}"
        return f"FockSpace({self.n_modes} modes{sec})"


def _combine_parity(p, q, product):
    if "mixed" in (p, q):
        return "mixed"
    if product:
        return "even" if p == q else "odd"
    return p if p == q else "mixed"


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """Matrix on a Fock space together with its declared support.

    ``charge`` is the change of particle number (0 for number-conserving
    operators, None when indefinite).
    """

    matrix: np.ndarray
    space: FockSpace
    support: SiteSet
    parity: str = "even"
    charge: int | None = 0

    @property
    def number_conserving(self) -> bool:
        return self.charge == 0

    @property
    def shape(self):
        return self.matrix.shape

    def _wrap(self, matrix, other=None, product=False):
        if other is None:
            return LocalOperator(matrix, self.space, self.support, self.parity, self.charge)
        if other.space != self.space:
            raise DomainError("operators live on different Fock spaces")
        if product:
            charge = None if None in (self.charge, other.charge) else self.charge + other.charge
        else:
            charge = self.charge if self.charge == other.charge else None
        return LocalOperator(matrix, self.space, self.support | other.support,
                             _combine_parity(self.parity, other.parity, product), charge)

    def __add__(self, other):
        if isinstance(other, LocalOperator):
            return self._wrap(self.matrix + other.matrix, other)
        return self._wrap(self.matrix + other * np.eye(self.space.dim))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, LocalOperator):
            return self._wrap(self.matrix - other.matrix, other)
        return self._wrap(self.matrix - other * np.eye(self.space.dim))

    def __neg__(self):
        return self._wrap(-self.matrix)

    def __mul__(self, c):
        return self._wrap(c * self.matrix)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self._wrap(self.matrix / c)

    def __matmul__(self, other):
        return self._wrap(self.matrix @ other.matrix, other, product=True)

    def dagger(self) -> "LocalOperator":
        charge = None if self.charge is None else -self.charge
        return LocalOperator(self.matrix.conj().T, self.space, self.support, self.parity, charge)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        scale = max(1.0, float(np.abs(self.matrix).max(initial=0.0)))
        return bool(np.abs(self.matrix - self.matrix.conj().T).max(initial=0.0) <= tol * scale)


def commutator(A: LocalOperator, B: LocalOperator) -> LocalOperator:
    return A @ B - B @ A


def anticommutator(A: LocalOperator, B: LocalOperator) -> LocalOperator:
    return A @ B + B @ A


def identity(space: FockSpace) -> LocalOperator:
    return LocalOperator(np.eye(space.dim, dtype=complex), space, SiteSet(space.lattice))


def zero(space: FockSpace) -> LocalOperator:
    return LocalOperator(np.zeros((space.dim, space.dim), complex), space, SiteSet(space.lattice))


def parity_operator(space: FockSpace) -> np.ndarray:
    return np.diag(1.0 - 2.0 * (space.particle_numbers % 2))


def creation(fock: FockSpace, x, i: int = 0) -> LocalOperator:
    """a*_{x,i} with the Jordan-Wigner string over all earlier modes."""
    if not fock.is_full:
        raise DomainError("creation operators leave a fixed-particle sector")
    j = fock.mode_position(x, i)
    bit = fock.n_modes - 1 - j
    st = fock.states
    empty = ((st >> bit) & 1) == 0
    src = st[empty]
    sign = 1.0 - 2.0 * (np.bitwise_count(src >> (bit + 1)) % 2)
    M = np.zeros((fock.dim, fock.dim), dtype=complex)
    M[src | (1 << bit), src] = sign
    return LocalOperator(M, fock, SiteSet(fock.lattice, [x]), "odd", 1)


def annihilation(fock: FockSpace, x, i: int = 0) -> LocalOperator:
    return creation(fock, x, i).dagger()


def number_operator(fock: FockSpace, X) -> LocalOperator:
    """N_X = sum over sites of X and internal indices of a* a."""
    if not isinstance(X, SiteSet):
        X = SiteSet(fock.lattice, X)
    cols = [fock.mode_position(x, i) for x in X for i in range(fock.lattice.spin)]
    diag = fock.occupations[:, cols].sum(axis=1).astype(complex)
    return LocalOperator(np.diag(diag), fock, X)


def site_potential(fock: FockSpace, values: dict) -> LocalOperator:
    """sum_x v(x) n_x for a map site -> real value."""
    diag = np.zeros(fock.dim)
    spin = fock.lattice.spin
    occ = fock.occupations
    support = []
    for x, v in values.items():
        x = fock.lattice.site(x)
        if v == 0:
            continue
        support.append(x)
        for i in range(spin):
            diag += v * occ[:, fock.mode_position(x, i)]
    return LocalOperator(np.diag(diag.astype(complex)), fock, SiteSet(fock.lattice, support))


def _local_index_map(op_space: FockSpace, into: FockSpace):
    positions = np.array([into.mode_position(x, i) for (x, i) in op_space.modes], dtype=np.int64)
    return _kernels.split_modes(into.states, into.n_modes, positions)


def embed(op: LocalOperator, into: FockSpace) -> LocalOperator:
    """Even operator on a sub-region, acting as identity on the remaining modes."""
    if op.parity != "even":
        raise ParityError(f"only even operators can be embedded, got parity {op.parity!r}")
    if op.space == into:
        return op
    if not op.space.is_full:
        raise DomainError("embedding is defined for operators on a full local Fock space")
    if not op.space.sites <= into.sites or op.space.lattice.spin != into.lattice.spin:
        raise DomainError("operator support is not contained in the target space")
    if not into.is_full and op.charge != 0:
        raise DomainError("only number-conserving operators embed into a particle sector")
    local, rest, sign = _local_index_map(op.space, into)
    same = rest[:, None] == rest[None, :]
    M = op.matrix[np.ix_(local, local)] * np.outer(sign, sign)
    M = np.where(same, M, 0.0)
    support = SiteSet(into.lattice, op.support.sites)
    return LocalOperator(M.astype(complex), into, support, "even", op.charge)


def restrict(op: LocalOperator, space: FockSpace) -> LocalOperator:
    """Block of a full-space number-conserving operator on a particle sector."""
    if op.space == space:
        return op
    if not op.space.is_full or op.space.sites != space.sites:
        raise DomainError("restriction needs a full-space operator on the same sites")
    if op.charge != 0:
        raise DomainError("only number-conserving operators restrict to a sector")
    idx = space.states
    return LocalOperator(op.matrix[np.ix_(idx, idx)], space, op.support, op.parity, 0)


def sector_blocks(space: FockSpace):
    """Index arrays of the fixed-particle blocks of a full space."""
    pn = space.particle_numbers
    return [np.flatnonzero(pn == N) for N in range(space.n_modes + 1)]


def op_norm(op) -> float:
    """Largest singular value; block-wise for number-conserving operators."""
    M = op.matrix if isinstance(op, LocalOperator) else np.asarray(op)
    if isinstance(op, LocalOperator) and op.charge == 0 and op.space.is_full and M.shape[0] > 64:
        return max((_dense_norm(M[np.ix_(b, b)]) for b in sector_blocks(op.space) if b.size),
                   default=0.0)
    return _dense_norm(M)


def _dense_norm(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    if np.allclose(M, M.conj().T, rtol=0, atol=1e-14 * max(1.0, np.abs(M).max())):
        return float(np.abs(np.linalg.eigvalsh(M)).max())
    return float(np.linalg.norm(M, 2))


@dataclass(frozen=True, eq=False)
class DensityState:
    """Pure state (``vector``) or density matrix on a Fock space."""

    space: FockSpace
    vector: np.ndarray | None = None
    density: np.ndarray | None = None

    @cached_property
    def matrix(self) -> np.ndarray:
        if self.density is not None:
            return self.density
        return np.outer(self.vector, self.vector.conj())

    def expectation(self, A) -> complex:
        M = A.matrix if isinstance(A, LocalOperator) else A
        if self.vector is not None:
            return complex(self.vector.conj() @ (M @ self.vector))
        return complex(np.trace(self.density @ M))

    def validate(self, tol: float = 1e-10) -> None:
        if self.vector is not None:
            if abs(np.linalg.norm(self.vector) - 1) > tol:
                raise ValueError("state vector is not normalized")
            return
        rho = self.density
        if np.abs(rho - rho.conj().T).max() > tol or abs(np.trace(rho) - 1) > tol:
            raise ValueError("density matrix is not Hermitian with unit trace")
        if np.linalg.eigvalsh(rho).min() < -tol:
            raise ValueError("density matrix is not positive")


def check_hermitian(H: LocalOperator, what: str = "operator") -> None:
    if not H.is_hermitian():
        dev = float(np.abs(H.matrix - H.matrix.conj().T).max())
        raise ValueError(f"{what} is not Hermitian (max deviation {dev:.3e})")


def ground_state(H: LocalOperator, degeneracy_tol: float | None = None):
    """Lowest eigenvector of ``H``, the gap E1 - E0 and whether it exceeds the tolerance."""
    check_hermitian(H, "Hamiltonian")
    M = 0.5 * (H.matrix + H.matrix.conj().T)
    E, U = np.linalg.eigh(M)
    scale = max(abs(E[0]), abs(E[-1]), 1e-300)
    tol = 1e-8 * scale if degeneracy_tol is None else degeneracy_tol
    gap = float(E[1] - E[0]) if E.size > 1 else float("inf")
    return DensityState(H.space, vector=U[:, 0]), gap, gap > tol


def random_even_operator(space: FockSpace, sites, rng: np.random.Generator,
                         hermitian: bool = True, number_conserving: bool = False) -> LocalOperator:
    """Random even operator of unit norm supported on ``sites``, embedded into ``space``."""
    local_space = FockSpace(space.lattice, sites)
    d = local_space.dim
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    pn = local_space.particle_numbers
    keep = (pn[:, None] == pn[None, :]) if number_conserving else ((pn[:, None] - pn[None, :]) % 2 == 0)
    M = np.where(keep, M, 0.0)
    if hermitian:
        M = 0.5 * (M + M.conj().T)
    M /= _dense_norm(M)
    op = LocalOperator(M, local_space, local_space.sites, "even", 0 if number_conserving else None)
    if not space.is_full and not number_conserving:
        raise DomainError("sector spaces need number-conserving random operators")
    return embed(op, space)
