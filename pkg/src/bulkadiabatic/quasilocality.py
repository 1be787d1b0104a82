"""Conditional expectations onto boxes, f-norms and localization profiles.

The conditional expectation of an even operator onto the modes of a region S
is the normalized partial trace over the other modes, tensored with the
identity. Reordering the modes so that S comes first (a signed permutation of
the occupation basis) makes the even part of the algebra of S act on the
leading tensor factor, where the ordinary partial trace applies.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .fock import LocalOperator, ParityError, op_norm
from .lattice import DomainError, SiteSet, fatten


def _region(A: LocalOperator, region) -> SiteSet:
    lat = A.space.lattice
    if isinstance(region, SiteSet):
        return region
    if isinstance(region, (int, np.integer)):
        if region > lat.radius:
            raise DomainError("box radius exceeds the lattice")
        return lat.box(int(region)) & A.space.sites
    return SiteSet(lat, region)


def conditional_expectation(A: LocalOperator, region) -> LocalOperator:
    """E_S(A) for an even operator on a full Fock space; ``region`` is M or a SiteSet."""
    if A.parity != "even":
        raise ParityError(f"conditional expectation needs an even operator, got {A.parity!r}")
    space = A.space
    if not space.is_full:
        raise DomainError("conditional expectation needs the full Fock space")
    S = _region(A, region)
    pos = np.array([space.mode_position(x, i) for x in S for i in range(space.lattice.spin)],
                   dtype=np.int64)
    local, rest, sign = _kernels.split_modes(space.states, space.n_modes, pos)
    nS = len(pos)
    dS, dR = 2 ** nS, space.dim // 2 ** nS
    _, rank = np.unique(rest, return_inverse=True)
    table = np.empty((dS, dR), dtype=np.int64)
    table[local, rank] = np.arange(space.dim)
    sg = sign.astype(float)[table]
    M = A.matrix
    gathered = M[table[:, None, :], table[None, :, :]] * (sg[:, None, :] * sg[None, :, :])
    B = gathered.sum(axis=2) / dR
    same = rest[:, None] == rest[None, :]
    out = np.where(same, B[np.ix_(local, local)] * np.outer(sign, sign), 0.0)
    charge = A.charge
    return LocalOperator(out.astype(complex), space, S, "even", charge)


def tail_norm(A: LocalOperator, region) -> float:
    """||(1 - E_S)(A)||."""
    return op_norm(A - conditional_expectation(A, region))


# --------------------------------------------------------------------------- decay functions

@dataclass
class DecayFunction:
    """Bounded, non-increasing, positive samples f(0..K)."""

    values: np.ndarray
    name: str = "f"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values <= 0):
            raise ValueError("decay function must be strictly positive")
        if np.any(np.diff(self.values) > 0):
            raise ValueError("decay function must be non-increasing")

    def __call__(self, k):
        return self.values[np.asarray(k, dtype=int)]

    @property
    def k_max(self) -> int:
        return len(self.values) - 1

    def certifies_limit(self) -> bool:
        return bool(self.values[-1] < self.values[0] / 100.0)

    @classmethod
    def from_callable(cls, f: Callable, k_max: int, name: str = "f") -> "DecayFunction":
        return cls(np.array([f(k) for k in range(k_max + 1)], dtype=float), name)

    @classmethod
    def stretched_exponential(cls, k_max: int, beta: float = 0.9, scale: float = 1.0) -> "DecayFunction":
        return cls.from_callable(lambda k: math.exp(-scale * k ** beta), k_max, f"exp(-k^{beta})")

    def sequence_member(self, j: int, R: float) -> "DecayFunction":
        """f_j = f^(1 / (5 R^2)^j)."""
        q = (5.0 * R * R) ** j
        return DecayFunction(self.values ** (1.0 / q), f"{self.name}_{j}")

    def dominance_ratio(self, other: "DecayFunction", alpha: float, beta: float) -> np.ndarray:
        """self(k)^alpha / other(k)^beta on the sampled range."""
        return self.values ** alpha / other.values ** beta


def f_norm(A: LocalOperator, f: DecayFunction, k_max: int | None = None):
    """||A|| + max_{k <= k_max} ||(1 - E_k)(A)|| / f(k), with the maximizing k."""
    lat = A.space.lattice
    k_max = min(lat.radius, f.k_max) if k_max is None else k_max
    best, arg = 0.0, None
    for k in range(k_max + 1):
        val = tail_norm(A, k) / float(f(k))
        if val > best:
            best, arg = val, k
    return op_norm(A) + best, arg


# --------------------------------------------------------------------------- profiles

@dataclass
class LocalizationProfile:
    ks: list
    values: list
    envelope: list | None = None
    fits: dict = field(default_factory=dict)

    @property
    def monotone(self) -> bool:
        return all(b <= a * (1 + 1e-9) + 1e-14 for a, b in zip(self.values, self.values[1:]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["k", "residual_norm", "envelope"])
            env = self.envelope or [""] * len(self.ks)
            for k, v, e in zip(self.ks, self.values, env):
                wr.writerow([k, repr(float(v)), "" if e == "" else repr(float(e))])


def fit_decay(ks: Sequence[float], values: Sequence[float], gamma: float = 0.5,
              floor: float = 1e-14) -> dict:
    """Least-squares slopes of log(values) against k and against k^gamma."""
    ks = np.asarray(ks, dtype=float)
    vals = np.asarray(values, dtype=float)
    keep = vals > floor
    out = {"points": int(keep.sum())}
    if keep.sum() < 2:
        out.update(linear_rate=None, stretched_rate=None)
        return out
    y = np.log(vals[keep])
    for name, x in (("linear_rate", ks[keep]), ("stretched_rate", ks[keep] ** gamma)):
        slope, _ = np.polyfit(x, y, 1)
        out[name] = float(-slope)
    out["gamma"] = gamma
    return out


def localization_profile(A: LocalOperator, k_range: Sequence[int],
                         envelope: Callable | None = None, gamma: float = 0.5) -> LocalizationProfile:
    ks = list(k_range)
    vals = [tail_norm(A, k) for k in ks]
    env = [float(envelope(k)) for k in ks] if envelope is not None else None
    return LocalizationProfile(ks, vals, env, fit_decay(ks, vals, gamma))


def cone_decomposition(A: LocalOperator, X, radius0: float, step: float,
                       n_shells: int | None = None) -> list:
    """A^(0) = E_{X fattened by radius0}(A), then shell differences; sums to A.

    Without ``n_shells`` the shells continue until they cover the Fock space.
    """
    lat = A.space.lattice
    if not isinstance(X, SiteSet):
        X = SiteSet(lat, X)
    if step <= 0:
        raise ValueError("step must be positive")
    full = A.space.sites
    pieces, prev = [], None
    j = 0
    while True:
        region = fatten(lat, X, radius0 + j * step) & full
        cur = conditional_expectation(A, region)
        pieces.append(cur if prev is None else cur - prev)
        prev = cur
        j += 1
        covered = region == full
        if (n_shells is not None and j >= n_shells) or (n_shells is None and covered):
            break
    if n_shells is not None and not covered:
        pieces.append(A - prev)
    return pieces
