"""Super-adiabatic dressing of the ground state to a fixed order n.

Conventions. e^{iuL}(A) = e^{iuH} A e^{-iuH}, L(A) = [H, A], and the inverse
Liouvillian I satisfies L(I(A)) = i (A - J(A)) with J(A) diagonal in energy
differences below g. The dressed state is

    Pi_n(t)(A) = rho_0(t)(e^{-i eps S_n} A e^{i eps S_n}),  S_n = sum_j eps^{j-1} A_j,

and the generator seen in the dressed frame, shifted by the parallel transport
term eta I(dH0/dt), is

    G = e^{-i eps S}(H0 + eps V)e^{i eps S}
        + eta int_0^1 e^{-i l eps S} eps dS/dt e^{i l eps S} dl + eta I(dH0/dt)
      = H0 + sum_j eps^j R_j.

The order-j coefficient splits as R_j = i L(A_j) + R~_j where R~_j only involves
A_1..A_{j-1}. Choosing A_j = I(R~_j) leaves R_j = J(R~_j), which commutes with
the ground-state projection when the gap exceeds g. With theta = eta / eps,
A_1 = I(V + theta I(dH0/dt)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import FrozenHamiltonian, evolve_state
from .fock import DensityState, LocalOperator
from .liouvillian import GapError, SpectralLiouvillian, WeightFunction

MAX_ORDER = 6


# --------------------------------------------------------------------------- series

class OperatorSeries:
    """Truncated power series sum_j eps^j X_j of matrices."""

    def __init__(self, coeffs: Sequence, max_order: int, theta: float | None = None):
        if max_order > MAX_ORDER:
            raise ValueError(f"order {max_order} exceeds the supported maximum {MAX_ORDER}")
        coeffs = [None if c is None else np.asarray(c, dtype=complex) for c in coeffs]
        self.coeffs = (coeffs + [None] * (max_order + 1))[: max_order + 1]
        self.max_order = max_order
        self.theta = theta

    @classmethod
    def constant(cls, X, max_order: int) -> "OperatorSeries":
        return cls([X], max_order)

    def __getitem__(self, j: int) -> np.ndarray | None:
        return self.coeffs[j] if j <= self.max_order else None

    def coefficient(self, j: int, dim: int) -> np.ndarray:
        c = self[j]
        return np.zeros((dim, dim), dtype=complex) if c is None else c

    def _combine(self, other, f):
        out = []
        for a, b in zip(self.coeffs, other.coeffs):
            if a is None:
                out.append(None if b is None else f(0, b))
            elif b is None:
                out.append(f(a, 0))
            else:
                out.append(f(a, b))
        return OperatorSeries(out, min(self.max_order, other.max_order), self.theta)

    def __add__(self, other: "OperatorSeries") -> "OperatorSeries":
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other: "OperatorSeries") -> "OperatorSeries":
        return self._combine(other, lambda a, b: a - b)

    def scaled(self, c: complex) -> "OperatorSeries":
        return OperatorSeries([None if x is None else c * x for x in self.coeffs],
                              self.max_order, self.theta)

    def shifted(self, k: int = 1) -> "OperatorSeries":
        """eps^k times the series, truncated."""
        return OperatorSeries([None] * k + self.coeffs, self.max_order, self.theta)

    def commutator(self, other: "OperatorSeries") -> "OperatorSeries":
        order = min(self.max_order, other.max_order)
        out = [None] * (order + 1)
        for a, A in enumerate(self.coeffs):
            if A is None:
                continue
            for b, B in enumerate(other.coeffs[: order + 1 - a]):
                if B is None:
                    continue
                C = A @ B - B @ A
                out[a + b] = C if out[a + b] is None else out[a + b] + C
        return OperatorSeries(out, order, self.theta)

    def product(self, other: "OperatorSeries") -> "OperatorSeries":
        order = min(self.max_order, other.max_order)
        out = [None] * (order + 1)
        for a, A in enumerate(self.coeffs):
            if A is None:
                continue
            for b, B in enumerate(other.coeffs[: order + 1 - a]):
                if B is None:
                    continue
                out[a + b] = A @ B if out[a + b] is None else out[a + b] + A @ B
        return OperatorSeries(out, order, self.theta)

    def is_zero(self) -> bool:
        return all(c is None or not np.any(c) for c in self.coeffs)

    def evaluate(self, eps: float, dim: int) -> np.ndarray:
        out = np.zeros((dim, dim), dtype=complex)
        for j, c in enumerate(self.coeffs):
            if c is not None:
                out += eps ** j * c
        return out


def _nested(eps_s: OperatorSeries, X: OperatorSeries, order: int, weights) -> OperatorSeries:
    """sum_m weights(m) ad_{eps S}^m(X), truncated at ``order``."""
    total = X.scaled(weights(0))
    term = X
    for m in range(1, order + 1):
        term = eps_s.commutator(term)
        if term.is_zero():
            break
        total = total + term.scaled(weights(m))
    return total


def conjugation_series(S: OperatorSeries, X, order: int) -> OperatorSeries:
    """e^{-i eps S} X e^{i eps S} as a series in eps, with S itself a series.

    ``X`` is a matrix or an OperatorSeries.
    """
    if order > MAX_ORDER:
        raise ValueError(f"order {order} exceeds the supported maximum {MAX_ORDER}")
    Xs = X if isinstance(X, OperatorSeries) else OperatorSeries.constant(X, order)
    Xs = OperatorSeries(Xs.coeffs, order, Xs.theta)
    eps_s = OperatorSeries(S.coeffs, order).shifted(1)
    return _nested(eps_s, Xs, order, lambda m: (-1j) ** m / math.factorial(m))


def _transport_series(S: OperatorSeries, S_dot: OperatorSeries, order: int) -> OperatorSeries:
    """int_0^1 e^{-i l eps S} eps dS/dt e^{i l eps S} dl as a series."""
    eps_s = OperatorSeries(S.coeffs, order).shifted(1)
    eps_sdot = OperatorSeries(S_dot.coeffs, order).shifted(1)
    return _nested(eps_s, eps_sdot, order, lambda m: (-1j) ** m / math.factorial(m + 1))


def build_A1(H0, V, Hdot0, inverse, theta: float) -> np.ndarray:
    """A_1 = I(V + theta I(dH0/dt)) with ``inverse`` the inverse Liouvillian of H0."""
    Vm = V.matrix if isinstance(V, LocalOperator) else np.asarray(V)
    Hd = Hdot0.matrix if isinstance(Hdot0, LocalOperator) else np.asarray(Hdot0)
    return inverse(Vm + theta * inverse(Hd))


# --------------------------------------------------------------------------- construction

def _richardson_derivative(f, t: float, h: float, levels: int) -> np.ndarray:
    """Central difference at steps h, h/2, ..., extrapolated to order h^(2 levels + 2)."""
    col = [(f(t + hk) - f(t - hk)) / (2 * hk) for hk in (h / 2 ** k for k in range(levels + 1))]
    for m in range(1, levels + 1):
        c = 4 ** m
        col = [(c * col[k + 1] - col[k]) / (c - 1) for k in range(len(col) - 1)]
    return col[0]


class NeassConstruction:
    """A_1..A_n at arbitrary times for one frozen Hamiltonian and ratio theta.

    Time derivatives of the A_i are central differences of the whole
    construction, extrapolated over the steps h, h/2, h/4 and memoized on the
    time grid. Roundoff is amplified by 1/h per nesting level, so the wide
    base step keeps A_j Hermitian to about 1e-9 through j = 4.
    """

    def __init__(self, frozen: FrozenHamiltonian, weight: WeightFunction, theta: float,
                 h_t: float = 2e-2, require_gap: bool = True, richardson: int = 2):
        self.frozen = frozen
        self.weight = weight
        self.theta = theta
        self.h_t = h_t
        self.richardson = richardson
        self.require_gap = require_gap
        self.dim = frozen.space.dim
        self._spectral: dict = {}
        self._A: dict = {}
        self._dot: dict = {}
        self.residuals: dict = {}

    @staticmethod
    def _key(t: float) -> float:
        return round(float(t), 12)

    def spectral(self, t: float) -> SpectralLiouvillian:
        k = self._key(t)
        if k not in self._spectral:
            sp = SpectralLiouvillian(self.frozen.h0(t), self.weight)
            if self.require_gap and sp.gap < self.weight.g:
                raise GapError(f"spectral gap {sp.gap:.6g} at t={t:g} is below g = {self.weight.g:g}")
            self._spectral[k] = sp
        return self._spectral[k]

    def a_dot(self, t: float, i: int) -> np.ndarray:
        key = (self._key(t), i)
        if key not in self._dot:
            f = lambda s: self.generators(s, i)[i - 1]
            self._dot[key] = _richardson_derivative(f, t, self.h_t, self.richardson)
        return self._dot[key]

    def generator_series(self, t: float, As: Sequence[np.ndarray], order: int) -> OperatorSeries:
        """G up to ``order`` built from A_1..A_len(As) (later A_j taken as zero)."""
        fr, sp, th = self.frozen, self.spectral(t), self.theta
        S = OperatorSeries(list(As), order)
        H = OperatorSeries([fr.h0(t), fr.v(t)], order)
        G = conjugation_series(S, H, order)
        G = G + OperatorSeries([None, th * sp.inverse(fr.h0_dot(t))], order)
        if th and As and order >= 2:
            Sdot = OperatorSeries([self.a_dot(t, i + 1) for i in range(min(len(As), order - 1))], order)
            G = G + _transport_series(S, Sdot, order).scaled(th).shifted(1)
        return G

    def generators(self, t: float, n: int) -> list:
        k = self._key(t)
        As = self._A.setdefault(k, [])
        while len(As) < n:
            j = len(As) + 1
            G = self.generator_series(t, As, j)
            R_tilde = G.coefficient(j, self.dim)
            As.append(self.spectral(t).inverse(R_tilde))
        return As[:n]

    def verify(self, t: float, n: int) -> list:
        """Per order j: split residual and the ground-projection commutator of R_j."""
        As = self.generators(t, n)
        sp = self.spectral(t)
        P0 = np.outer(sp.ground_vector, sp.ground_vector.conj())
        out = []
        for j in range(1, n + 1):
            R_tilde = self.generator_series(t, As[: j - 1], j).coefficient(j, self.dim)
            R = self.generator_series(t, As[:j], j).coefficient(j, self.dim)
            split = R - (1j * sp.liouvillian(As[j - 1]) + R_tilde)
            out.append({
                "order": j,
                "norm_A": float(np.linalg.norm(As[j - 1], 2)),
                "split_residual": float(np.abs(split).max()),
                "ground_commutator": float(np.linalg.norm(R @ P0 - P0 @ R, 2)),
                "hermiticity": float(np.abs(As[j - 1] - As[j - 1].conj().T).max()),
            })
        return out


@dataclass
class NeassBundle:
    order: int
    t: float
    epsilon: float
    eta: float
    generators: list
    S: np.ndarray
    dressing: np.ndarray
    state: DensityState
    ground: DensityState
    gap: float
    leakage: float
    checks: list = field(default_factory=list)

    def expectation(self, A) -> float:
        return self.state.expectation(A).real

    def summary(self) -> dict:
        return {
            "order": self.order, "t": self.t, "epsilon": self.epsilon, "eta": self.eta,
            "norms_A": [float(np.linalg.norm(A, 2)) for A in self.generators],
            "gap": self.gap, "leakage": self.leakage,
            "dressing_distance": float(np.linalg.norm(self.dressing - np.eye(len(self.S)), 2)),
            "checks": self.checks,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def construction_for(frozen: FrozenHamiltonian, weight: WeightFunction, epsilon: float | None = None,
                     eta: float | None = None, **kw) -> NeassConstruction:
    eps = frozen.epsilon if epsilon is None else epsilon
    eta = frozen.eta if eta is None else eta
    return NeassConstruction(frozen, weight, eta / eps if eps else 0.0, **kw)


def build_bundle(frozen: FrozenHamiltonian, weight: WeightFunction, n: int, t: float,
                 epsilon: float | None = None, eta: float | None = None,
                 construction: NeassConstruction | None = None, verify: bool = False,
                 **kw) -> NeassBundle:
    """Order-n dressed state at time t.

    At epsilon = 0 the dressing is the identity; this requires dH0/dt = 0 at t,
    since the expansion is carried in powers of epsilon at fixed eta / epsilon.
    """
    if not 1 <= n <= MAX_ORDER:
        raise ValueError(f"order must lie in 1..{MAX_ORDER}")
    eps = frozen.epsilon if epsilon is None else epsilon
    eta = frozen.eta if eta is None else eta
    con = construction or construction_for(frozen, weight, eps, eta, **kw)
    sp = con.spectral(t)
    dim = con.dim
    if eps == 0:
        if np.abs(frozen.h0_dot(t)).max() > 0:
            raise ValueError("epsilon = 0 needs dH0/dt = 0 at the evaluation time")
        As = [np.zeros((dim, dim), dtype=complex) for _ in range(n)]
    else:
        As = con.generators(t, n)
    S = sum((eps ** j * A for j, A in enumerate(As)), np.zeros((dim, dim), dtype=complex))
    S = 0.5 * (S + S.conj().T)
    E, V = np.linalg.eigh(S)
    dressing = (V * np.exp(1j * eps * E)) @ V.conj().T
    psi0 = sp.ground_vector
    state = DensityState(frozen.space, vector=dressing @ psi0)
    checks = con.verify(t, n) if verify and eps else []
    return NeassBundle(n, t, eps, eta, list(As), S, dressing, state,
                       DensityState(frozen.space, vector=psi0), sp.gap, weight.leakage, checks)


def adiabatic_defect(frozen: FrozenHamiltonian, weight: WeightFunction, observables, n: int,
                     t0: float, t: float, steps: int | None = None, tol: float = 1e-9,
                     construction: NeassConstruction | None = None, **kw):
    """|Pi_n(t0)(U(t, t0)*(A) ) - Pi_n(t)(A)| for each observable.

    Returns (defects, info); ``observables`` is one operator or a sequence.
    """
    single = not isinstance(observables, (list, tuple))
    obs = [observables] if single else list(observables)
    con = construction or construction_for(frozen, weight, **kw)
    b0 = build_bundle(frozen, weight, n, t0, construction=con)
    if t == t0:
        vals = [0.0] * len(obs)
        info = {"steps": 0, "error_estimate": 0.0, "converged": True}
    else:
        bt = build_bundle(frozen, weight, n, t, construction=con)
        psi, info = evolve_state(frozen, b0.state.vector, t0, t, steps, tol)
        vals = []
        for A in obs:
            M = A.matrix if isinstance(A, LocalOperator) else A
            evolved = complex(psi.conj() @ (M @ psi)).real
            vals.append(abs(evolved - bt.expectation(M)))
    info = dict(info, gap_t0=b0.gap, leakage=weight.leakage)
    return (vals[0] if single else vals), info
