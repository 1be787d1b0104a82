"""Propagators for slowly driven Hamiltonians and Lieb-Robinson diagnostics.

Time evolution solves i dU/dt = (1/eta) H(t) U with H = H0 + eps (V + H1).
Full propagators use the midpoint-frozen exponential (exact per step through
Hermitian eigendecomposition, block-wise on particle sectors). State vectors on
large sectors are advanced with a fourth-order commutator-free exponential
integrator applied through truncated-Taylor ``expm_multiply`` actions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import expm_multiply

from .fock import FockSpace, LocalOperator, embed, op_norm, sector_blocks
from .interactions import (FFunction, Interaction, LipschitzPotential, WeightProfile,
                           interaction_norm, lipschitz_operator)
from .lattice import Lattice
from .models import Schedule, TimeDependentInteraction
from .quasilocality import fit_decay

STEPS_PER_UNIT = 200


# --------------------------------------------------------------------------- Hamiltonians

@dataclass
class HamiltonianFamily:
    """H(t) = H0(t) + epsilon (s(t) V_v + H1(t)), evolved with generator H / eta."""

    h0: TimeDependentInteraction
    h1: TimeDependentInteraction | None = None
    potential: LipschitzPotential | None = None
    potential_schedule: Schedule = field(default_factory=Schedule)
    epsilon: float = 0.0
    eta: float = 1.0
    potential_radius: int | None = None

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")

    def with_params(self, epsilon: float | None = None, eta: float | None = None) -> "HamiltonianFamily":
        return HamiltonianFamily(self.h0, self.h1, self.potential, self.potential_schedule,
                                 self.epsilon if epsilon is None else epsilon,
                                 self.eta if eta is None else eta, self.potential_radius)

    def effective_potential(self) -> LipschitzPotential | None:
        if self.potential is None or self.potential_radius is None:
            return self.potential
        return self.potential.clamped(self.potential_radius)

    def on(self, space: FockSpace) -> "FrozenHamiltonian":
        return FrozenHamiltonian(self, space)

    def interaction(self, lat: Lattice, t: float) -> Interaction:
        return self.h0.at(lat, t)


class FrozenHamiltonian:
    """Matrices of a HamiltonianFamily on one Fock space, assembled once."""

    def __init__(self, fam: HamiltonianFamily, space: FockSpace):
        self.family = fam
        self.space = space
        self.epsilon, self.eta = fam.epsilon, fam.eta
        self._h0 = fam.h0.assembled(space)
        self._h1 = fam.h1.assembled(space) if fam.h1 is not None else []
        v = fam.effective_potential()
        self._v = lipschitz_operator(v, space).matrix if v is not None else None
        for _, M, name in self._h0 + self._h1:
            if np.abs(M - M.conj().T).max() > 1e-12 * max(1.0, np.abs(M).max()):
                raise ValueError(f"assembled term {name!r} is not Hermitian")
        self.blocks = _number_blocks(space, [M for _, M, _ in self._h0 + self._h1])

    @staticmethod
    def _sum(parts, t, deriv=False):
        out = None
        for s, M, _ in parts:
            c = s.derivative(t) if deriv else s(t)
            if c:
                out = c * M if out is None else out + c * M
        return out

    def _zero(self):
        return np.zeros((self.space.dim, self.space.dim), dtype=complex)

    def h0(self, t: float) -> np.ndarray:
        out = self._sum(self._h0, t)
        return self._zero() if out is None else out

    def h0_dot(self, t: float) -> np.ndarray:
        out = self._sum(self._h0, t, True)
        return self._zero() if out is None else out

    def v(self, t: float) -> np.ndarray:
        out = self._zero()
        if self._v is not None:
            out = out + self.family.potential_schedule(t) * self._v
        h1 = self._sum(self._h1, t)
        return out if h1 is None else out + h1

    def v_dot(self, t: float) -> np.ndarray:
        out = self._zero()
        if self._v is not None:
            out = out + self.family.potential_schedule.derivative(t) * self._v
        h1 = self._sum(self._h1, t, True)
        return out if h1 is None else out + h1

    def h(self, t: float) -> np.ndarray:
        if self.epsilon:
            return self.h0(t) + self.epsilon * self.v(t)
        return self.h0(t)

    @property
    def is_static(self) -> bool:
        fam = self.family
        static = fam.h0.is_static and (fam.h1 is None or fam.h1.is_static)
        if self.epsilon and self._v is not None:
            static = static and fam.potential_schedule.is_static
        return static


def _number_blocks(space: FockSpace, mats) -> list | None:
    """Particle-number blocks when every matrix conserves particle number."""
    if not space.is_full:
        return None
    pn = space.particle_numbers
    off = pn[:, None] != pn[None, :]
    if all(not np.any(M[off]) for M in mats):
        return [b for b in sector_blocks(space) if b.size]
    return None


def _expm_herm(H: np.ndarray, tau: float, blocks=None) -> np.ndarray:
    """exp(-i tau H) for Hermitian H, block-wise if blocks are given."""
    if blocks is None:
        E, V = np.linalg.eigh(0.5 * (H + H.conj().T))
        return (V * np.exp(-1j * tau * E)) @ V.conj().T
    U = np.zeros_like(H, dtype=complex)
    for b in blocks:
        U[np.ix_(b, b)] = _expm_herm(H[np.ix_(b, b)], tau)
    return U


# --------------------------------------------------------------------------- propagators

@dataclass
class Propagator:
    U: np.ndarray
    t0: float
    t: float
    log: list = field(default_factory=list)
    converged: bool = True

    def unitarity_defect(self) -> float:
        return float(np.abs(self.U.conj().T @ self.U - np.eye(len(self.U))).max())

    def heisenberg(self, A):
        M = A.matrix if isinstance(A, LocalOperator) else A
        out = self.U.conj().T @ M @ self.U
        if isinstance(A, LocalOperator):
            return LocalOperator(out, A.space, A.space.sites, A.parity, A.charge)
        return out


def _midpoint(frozen: FrozenHamiltonian, t0: float, t: float, steps: int) -> np.ndarray:
    dt = (t - t0) / steps
    U = np.eye(frozen.space.dim, dtype=complex)
    for k in range(steps):
        H = frozen.h(t0 + (k + 0.5) * dt)
        U = _expm_herm(H, dt / frozen.eta, frozen.blocks) @ U
    return U


def default_steps(eta: float, t0: float, t: float) -> int:
    return max(1, int(math.ceil(STEPS_PER_UNIT * abs(t - t0) / eta)))


def propagate(fam, space: FockSpace | None, t0: float, t: float, steps: int | None = None,
              tol: float = 1e-8, verify: bool = True, max_refine: int = 3) -> Propagator:
    """U(t, t0) for ``fam`` (a HamiltonianFamily with ``space``, or a FrozenHamiltonian).

    Time-independent generators use the exact exponential. Otherwise the step
    count is doubled until the step-doubling estimate ||U_2s - U_s|| / 3 is
    below ``tol`` or ``max_refine`` refinements are used up; ``converged``
    records the outcome.
    """
    frozen = fam if isinstance(fam, FrozenHamiltonian) else fam.on(space)
    if steps is not None and steps < 1:
        raise ValueError("steps must be at least 1")
    if t == t0:
        return Propagator(np.eye(frozen.space.dim, dtype=complex), t0, t)
    if frozen.is_static:
        U = _expm_herm(frozen.h(t0), (t - t0) / frozen.eta, frozen.blocks)
        return Propagator(U, t0, t, [{"steps": 0, "method": "exact"}])
    n = steps or default_steps(frozen.eta, t0, t)
    U = _midpoint(frozen, t0, t, n)
    log = [{"steps": n}]
    if not verify:
        return Propagator(U, t0, t, log)
    for _ in range(max_refine + 1):
        U2 = _midpoint(frozen, t0, t, 2 * n)
        est = float(np.abs(U2 - U).max()) / 3.0
        log.append({"steps": 2 * n, "doubling_defect": 3 * est, "error_estimate": est})
        n, U = 2 * n, U2
        if est <= tol:
            return Propagator(U, t0, t, log, True)
    return Propagator(U, t0, t, log, False)


def heisenberg(fam, space, A: LocalOperator, t0: float, t: float, steps: int | None = None,
               **kw) -> LocalOperator:
    """U(t, t0)* A U(t, t0)."""
    return propagate(fam, space, t0, t, steps, **kw).heisenberg(A)


# --------------------------------------------------------------------------- state evolution

_CF4_A = (3 - 2 * math.sqrt(3)) / 12
_CF4_B = (3 + 2 * math.sqrt(3)) / 12
_CF4_C = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)


def _cf4(frozen: FrozenHamiltonian, psi: np.ndarray, t0: float, t: float, steps: int) -> np.ndarray:
    dt = (t - t0) / steps
    scale = -1j * dt / frozen.eta
    for k in range(steps):
        s = t0 + k * dt
        H1 = frozen.h(s + _CF4_C[0] * dt)
        H2 = frozen.h(s + _CF4_C[1] * dt)
        psi = expm_multiply(scale * (_CF4_B * H1 + _CF4_A * H2), psi)
        psi = expm_multiply(scale * (_CF4_A * H1 + _CF4_B * H2), psi)
    return psi


def evolve_state(frozen: FrozenHamiltonian, psi0: np.ndarray, t0: float, t: float,
                 steps: int | None = None, tol: float = 1e-9, max_refine: int = 4):
    """psi(t) = U(t, t0) psi0 with fourth-order commutator-free exponentials.

    Returns (psi, info). Steps double until the step-doubling estimate
    ||psi_2s - psi_s|| / 15 is below ``tol``.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if t == t0:
        return psi0.copy(), {"steps": 0, "error_estimate": 0.0, "converged": True}
    if frozen.is_static:
        if frozen.blocks is None:
            psi = expm_multiply(-1j * (t - t0) / frozen.eta * frozen.h(t0), psi0)
        else:
            psi = _expm_herm(frozen.h(t0), (t - t0) / frozen.eta, frozen.blocks) @ psi0
        return psi, {"steps": 0, "error_estimate": 0.0, "converged": True}
    n = steps or max(4, int(math.ceil(10 * abs(t - t0) / frozen.eta)))
    psi = _cf4(frozen, psi0, t0, t, n)
    info = {"steps": n, "error_estimate": None, "converged": False}
    for _ in range(max_refine + 1):
        psi2 = _cf4(frozen, psi0, t0, t, 2 * n)
        est = float(np.linalg.norm(psi2 - psi)) / 15.0
        n, psi = 2 * n, psi2
        info = {"steps": n, "error_estimate": est, "converged": est <= tol}
        if est <= tol:
            break
    return psi, info


# --------------------------------------------------------------------------- Lieb-Robinson

def lieb_robinson_velocity(phi, a: float = 1.0, k_range: Sequence[int] | None = None) -> dict:
    """v_a = 2 C_F ||Phi||_{exp(-a r), 0} / a over the given boxes."""
    zeta = WeightProfile.exponential(a)
    rep = interaction_norm(phi, zeta, 0, k_range)
    if isinstance(phi, Interaction):
        lats = [phi.lattice]
    else:
        lats = [phi.lattice(k) for k in k_range]
    C = FFunction(zeta, lats[0].dim).convolution_constant(lats)["value"]
    return {"v_a": 2.0 * C * rep.value / a, "C_F": C, "norm": rep.value, "a": a}


@dataclass
class LRScan:
    rows: list
    fitted_velocity: float | None
    theoretical: dict
    crossings: dict
    level: float
    beyond_cone: dict

    @property
    def passed(self) -> bool:
        return (self.fitted_velocity is not None
                and self.fitted_velocity <= self.theoretical["v_a"]
                and self.beyond_cone["monotone"])


def lr_commutator_scan(frozen: FrozenHamiltonian, A: LocalOperator, targets: Sequence[tuple],
                       times: Sequence[float], t0: float = 0.0, level: float = 1e-3,
                       theoretical: dict | None = None, steps: int | None = None,
                       noise: float = 1e-12) -> LRScan:
    """Table of ||[U(t, t0)*(A), B]|| over t and dist(X, Y).

    ``targets`` is a list of (dist, B). The fitted velocity is the slope of the
    line through the first times at which each distance reaches ``level``.
    Norms below ``noise * ||A|| ||B||`` are round-off and are left out of the
    decay check beyond the cone.
    """
    times = sorted(times)
    blocks = frozen.blocks
    conserving = blocks is not None and A.charge == 0 and all(B.charge == 0 for _, B in targets)
    if not conserving:
        blocks = [np.arange(frozen.space.dim)]
    sub = lambda M, b: M[np.ix_(b, b)]
    rows = []
    if frozen.is_static:
        eig = [np.linalg.eigh(sub(frozen.h(t0), b)) for b in blocks]

        def evolved(t):
            if t == t0:
                return [np.eye(len(b), dtype=complex) for b in blocks]
            phase = [np.exp(-1j * (t - t0) / frozen.eta * E) for E, _ in eig]
            return [(V * p) @ V.conj().T for (_, V), p in zip(eig, phase)]
    else:
        state = {"t": t0, "U": [np.eye(len(b), dtype=complex) for b in blocks]}

        def evolved(t):
            step = propagate(frozen, None, state["t"], t, steps).U
            state["U"] = [sub(step, b) @ Ub for b, Ub in zip(blocks, state["U"])]
            state["t"] = t
            return state["U"]
    for t in times:
        U = evolved(t)
        At = [Ub.conj().T @ sub(A.matrix, b) @ Ub for b, Ub in zip(blocks, U)]
        for dist, B in targets:
            val = 0.0
            for b, Ab in zip(blocks, At):
                Bb = sub(B.matrix, b)
                val = max(val, _commutator_norm(Ab, Bb))
            rows.append({"t": t, "dist": dist, "commutator_norm": val})
    crossings = {}
    for dist in sorted({d for d, _ in targets}):
        series = [(r["t"], r["commutator_norm"]) for r in rows if r["dist"] == dist]
        crossings[dist] = _first_crossing(series, level)
    pts = [(t, d) for d, t in crossings.items() if t is not None and t > t0]
    fitted = None
    if len(pts) >= 2:
        ts, ds = np.array(pts).T
        fitted = float(np.polyfit(ts - t0, ds, 1)[0])
    theo = theoretical or {"v_a": math.inf}
    norm_ab = op_norm(A) * max(op_norm(B) for _, B in targets)
    cone = _beyond_cone(rows, theo["v_a"], frozen.eta, t0, noise * norm_ab)
    return LRScan(rows, fitted, theo, crossings, level, cone)


def _commutator_norm(A: np.ndarray, B: np.ndarray) -> float:
    C = A @ B - B @ A
    if C.size == 0:
        return 0.0
    H = 1j * C
    if np.abs(H - H.conj().T).max() <= 1e-13 * max(1.0, np.abs(H).max()):
        return float(np.abs(np.linalg.eigvalsh(0.5 * (H + H.conj().T))).max())
    return float(np.linalg.norm(C, 2))


def _first_crossing(series, level):
    prev = None
    for t, v in series:
        if v >= level:
            if prev is None or prev[1] <= 0:
                return t
            t1, v1 = prev
            # interpolate in log scale
            frac = (math.log(level) - math.log(v1)) / (math.log(v) - math.log(v1))
            return t1 + frac * (t - t1)
        prev = (t, v)
    return None


def _beyond_cone(rows, v_a, eta, t0, floor):
    """Per time, commutator norms at distances beyond 2 v_a |t - t0| / eta."""
    out, ok, checked = {}, True, 0
    for t in sorted({r["t"] for r in rows}):
        radius = 2 * v_a * abs(t - t0) / eta if t != t0 else 0.0
        pts = sorted((r["dist"], r["commutator_norm"]) for r in rows
                     if r["t"] == t and r["dist"] > radius)
        pts = [(d, v) for d, v in pts if v > floor]
        vals = [v for _, v in pts]
        if len(vals) >= 3:
            checked += 1
            mono = all(b < a for a, b in zip(vals, vals[1:]))
            out[t] = {"dists": [d for d, _ in pts], "monotone": mono,
                      "fit": fit_decay([d for d, _ in pts], vals)}
            ok = ok and mono
    return {"per_time": out, "monotone": ok and checked > 0, "times_checked": checked,
            "noise_floor": floor}


# --------------------------------------------------------------------------- volume convergence

@dataclass
class VolumeConvergence:
    rows: list
    decay_factor: float
    superpolynomial: bool
    fits: dict


def volume_convergence(build: Callable[[int], FrozenHamiltonian], observable: Callable[[FockSpace], LocalOperator],
                       t: float, ks: Sequence[int], t0: float = 0.0, bulk_radius: int = 0,
                       gamma: float = 0.5, floor: float = 1e-15) -> VolumeConvergence:
    """||(U^{Lambda_l} - U^{Lambda_k})(A)|| for consecutive k < l in ``ks``.

    ``build(k)`` returns the frozen Hamiltonian on Lambda_k and
    ``observable(space)`` the bulk observable on that space. The difference is
    taken on the larger volume after embedding.
    """
    ks = sorted(ks)
    evolved = {}
    for k in ks:
        fr = build(k)
        A = observable(fr.space)
        evolved[k] = propagate(fr, None, t0, t).heisenberg(A)
    rows = []
    for k, l in zip(ks, ks[1:]):
        small = LocalOperator(evolved[k].matrix, evolved[k].space, evolved[k].space.sites,
                              "even", evolved[k].charge)
        diff = evolved[l] - embed(small, evolved[l].space)
        rows.append({"k": k, "l": l, "diff_norm": op_norm(diff),
                     "boundary_dist": k - bulk_radius})
    vals = [r["diff_norm"] for r in rows]
    dists = [r["boundary_dist"] for r in rows]
    top = max(vals, default=0.0)
    bottom = max(vals[-1] if vals else 0.0, floor)
    factor = top / bottom if top > 0 else math.inf
    fits = fit_decay(dists, vals, gamma, floor)
    # superpolynomial: successive log-log slopes steepen across the window
    pos = [(d, v) for d, v in zip(dists, vals) if v > floor and d > 0]
    slopes = [(math.log(v2) - math.log(v1)) / (math.log(d2) - math.log(d1))
              for (d1, v1), (d2, v2) in zip(pos, pos[1:])]
    fits["loglog_slopes"] = slopes
    superpoly = len(slopes) >= 2 and all(b < a for a, b in zip(slopes, slopes[1:]))
    if t == t0:
        superpoly = True
    return VolumeConvergence(rows, factor, superpoly, fits)
