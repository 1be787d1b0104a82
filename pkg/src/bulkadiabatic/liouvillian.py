"""Band-limited weight function and the weighted inverse of the Liouvillian.

Convention: the Heisenberg flow is e^{iuL}(A) = e^{iuH} A e^{-iuH} with
L(A) = [H, A]. In the eigenbasis of H this multiplies A_mn by e^{iu(E_m - E_n)}.
With K(E) = integral of w(s) cos(sE) ds (the Fourier transform of w up to
sqrt(2 pi)) the maps act element-wise as

    J(A)_mn = K(E_mn) A_mn,
    I(A)_mn = W(E_mn) A_mn,   W(E) = i (1 - K(E)) / E,   W(0) = 0,

so that L(I(A)) = i (A - J(A)). K vanishes for |E| >= g, where W(E) = i / E.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .fock import LocalOperator

BIN_TOL = 1e-9


class GapError(ValueError):
    """The spectral gap is too small for the requested weight function."""


class WeightConstructionError(ValueError):
    """The sampling grid cannot certify the Fourier support of the weight."""


def sinc_frequencies(n_terms: int) -> np.ndarray:
    """a_n proportional to 1 / (n log^2(n + 1)), scaled so that sum 2 a_n = 1."""
    n = np.arange(1, n_terms + 1)
    a = 1.0 / (n * np.log(n + 1.0) ** 2)
    return a / (2.0 * a.sum())


def _product_sinc2(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    out = np.ones_like(x, dtype=float)
    for an in a:
        out *= np.sinc(an * x / np.pi) ** 2
    return out


@dataclass
class WeightFunction:
    """Even, non-negative, unit-mass weight whose Fourier transform lives in [-g, g]."""

    g: float
    n_terms: int
    s_max: float
    s: np.ndarray
    w: np.ndarray
    freqs: np.ndarray
    norm_const: float
    leakage: float
    k_grid: np.ndarray = field(repr=False, default=None)
    w_hat: np.ndarray = field(repr=False, default=None)

    @property
    def spacing(self) -> float:
        return float(self.s[1] - self.s[0])

    def __call__(self, s) -> np.ndarray:
        """Closed-form value at arbitrary points."""
        s = np.asarray(s, dtype=float)
        return self.g * self.norm_const * _product_sinc2(self.g * s, self.freqs)

    def integral(self) -> float:
        return float(np.trapezoid(self.w, self.s))

    def moments(self, n_max: int = 10) -> list:
        """sup_s |s|^n w(s) on the grid for n = 0..n_max."""
        return [float(np.max(np.abs(self.s) ** n * self.w)) for n in range(n_max + 1)]

    def kernel_nodes(self, bandwidth: float, cutoff: float = 1e-22):
        """Half-line trapezoid weights c_i on s_i = i*h with K(E) = sum c_i cos(E s_i).

        The trapezoid rule is exact for band-limited integrands when
        h < 2 pi / (g + |E|); ``bandwidth`` bounds |E|.
        """
        h_fine = self.spacing
        h_max = math.pi / (self.g + bandwidth)
        stride = max(1, int(h_max // h_fine))
        centre = len(self.s) // 2
        half = self.w[centre::stride]
        keep = np.flatnonzero(half > cutoff * half[0])
        half = half[: keep[-1] + 1]
        h = stride * h_fine
        c = 2.0 * h * half
        c[0] = h * half[0]
        c /= c.sum()
        return c, h

    def fourier(self, k) -> np.ndarray:
        """sqrt(2 pi) * w_hat(k) = integral of w(s) cos(ks) ds, from the samples."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        c, h = self.kernel_nodes(float(np.abs(k).max(initial=0.0)))
        return _kernels.cosine_sum(np.abs(k), c, h)

    def write_csv(self, s_path, k_path, stride: int = 64) -> None:
        with open(s_path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["s", "w"])
            for s, w in zip(self.s[::stride], self.w[::stride]):
                wr.writerow([repr(float(s)), repr(float(w))])
        with open(k_path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["k", "abs_w_hat"])
            sel = np.abs(self.k_grid) <= 3 * self.g
            for k, v in zip(self.k_grid[sel], self.w_hat[sel]):
                wr.writerow([repr(float(k)), repr(float(abs(v)))])


def build_weight(g: float = 1.0, n_terms: int = 15, s_max: float | None = None,
                 grid_points: int = 2 ** 16, certify: float = 1e-3) -> WeightFunction:
    """Product of squared sincs, rescaled to w_g(s) = g w(g s), with measured leakage."""
    if n_terms < 2:
        raise ValueError("n_terms must be at least 2")
    if g <= 0:
        raise ValueError("g must be positive")
    s_max = 400.0 / g if s_max is None else float(s_max)
    half_n = grid_points // 2
    s_half = np.linspace(0.0, s_max, half_n + 1)
    a = sinc_frequencies(n_terms)
    w_half = g * _product_sinc2(g * s_half, a)
    s = np.concatenate([-s_half[:0:-1], s_half])
    w = np.concatenate([w_half[:0:-1], w_half])
    h = s_half[1] - s_half[0]
    mass = float(np.trapezoid(w, s))
    w = w / mass
    norm_const = 1.0 / mass

    nyquist = math.pi / h
    if nyquist < 2.0 * g:
        raise WeightConstructionError(
            f"grid spacing {h:.3g} resolves |k| <= {nyquist:.3g} < 2g; "
            f"use grid_points >= {int(4 * g * s_max / math.pi) + 1}")
    spectrum = np.fft.fft(np.fft.ifftshift(w)) * h
    k = 2.0 * np.pi * np.fft.fftfreq(len(w), h)
    order = np.argsort(k)
    k, spectrum = k[order], spectrum[order]
    outside = np.abs(k) > g
    leakage = float(np.abs(spectrum[outside]).max() / abs(spectrum[np.argmin(np.abs(k))]))
    if leakage > certify:
        raise WeightConstructionError(
            f"measured leakage {leakage:.3g} exceeds {certify:g}; "
            f"increase s_max (now {s_max:g}) or n_terms (now {n_terms})")
    w_hat = spectrum / math.sqrt(2 * math.pi)
    return WeightFunction(g, n_terms, s_max, s, w, a, norm_const, leakage, k, w_hat)


# --------------------------------------------------------------------------- spectral maps

def _mat(A):
    return A.matrix if isinstance(A, LocalOperator) else np.asarray(A)


def _like(A, M):
    if isinstance(A, LocalOperator):
        return LocalOperator(M, A.space, A.support, A.parity, A.charge)
    return M


def liouvillian(H, A):
    """[H, A]."""
    Hm, Am = _mat(H), _mat(A)
    return _like(A, Hm @ Am - Am @ Hm)


class SpectralLiouvillian:
    """Eigen-decomposition of a frozen Hamiltonian with the I and J kernels."""

    def __init__(self, H, weight: WeightFunction, bin_tol: float = BIN_TOL):
        Hm = _mat(H)
        if np.abs(Hm - Hm.conj().T).max() > 1e-10 * max(1.0, np.abs(Hm).max()):
            raise ValueError("Hamiltonian is not Hermitian")
        self.H = 0.5 * (Hm + Hm.conj().T)
        self.weight = weight
        self.energies, self.vectors = np.linalg.eigh(self.H)
        E = self.energies
        delta = E[:, None] - E[None, :]
        iu = np.triu_indices(len(E), 1)
        mag = np.abs(delta[iu])
        keys = np.rint(mag / bin_tol).astype(np.int64)
        uniq, inv = np.unique(keys, return_inverse=True)
        reps = uniq * bin_tol
        Kvals, Wvals = kernel_values(reps, weight)
        K = np.eye(len(E))
        Wm = np.zeros((len(E), len(E)), dtype=complex)
        K[iu] = Kvals[inv]
        K.T[iu] = Kvals[inv]
        # W is odd in E; upper triangle has E_m - E_n <= 0
        sgn = np.sign(delta[iu])
        Wm[iu] = sgn * Wvals[inv]
        Wm.T[iu] = -sgn * Wvals[inv]
        self.K = K
        self.W = Wm
        self.n_bins = len(uniq)

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0]) if len(self.energies) > 1 else math.inf

    @property
    def ground_vector(self) -> np.ndarray:
        return self.vectors[:, 0]

    def to_eigen(self, M):
        return self.vectors.conj().T @ M @ self.vectors

    def from_eigen(self, M):
        return self.vectors @ M @ self.vectors.conj().T

    def _traceless(self, M):
        # I(1) = 0 and J(1) = 1; removing the identity part keeps both exact
        c = np.trace(M) / len(M)
        return M - c * np.eye(len(M)), c

    def inverse(self, A):
        M, _ = self._traceless(_mat(A))
        return _like(A, self.from_eigen(self.W * self.to_eigen(M)))

    def j(self, A):
        M, c = self._traceless(_mat(A))
        return _like(A, self.from_eigen(self.K * self.to_eigen(M)) + c * np.eye(len(M)))

    def liouvillian(self, A):
        Am = _mat(A)
        return _like(A, self.H @ Am - Am @ self.H)

    def ground_expectation(self, A) -> complex:
        v = self.ground_vector
        return complex(v.conj() @ _mat(A) @ v)


def kernel_values(E: np.ndarray, weight: WeightFunction):
    """K(E) and W(E) for E >= 0 (W(0) = 0)."""
    E = np.asarray(E, dtype=float)
    K = np.ones_like(E)
    W = np.zeros_like(E, dtype=complex)
    if E.size == 0:
        return K, W
    c, h = weight.kernel_nodes(float(E.max()))
    s = np.arange(c.size) * h
    nz = E > 0
    small = nz & (E * s[-1] < 1.0)
    big = nz & ~small
    if big.any():
        K[big] = _kernels.cosine_sum(E[big], c, h)
        W[big] = 1j * (1.0 - K[big]) / E[big]
    if small.any():
        # 1 - cos(x) = 2 sin^2(x / 2) avoids cancellation for tiny gaps
        Es = E[small]
        one_minus = (2.0 * np.sin(0.5 * np.outer(Es, s)) ** 2) @ c
        K[small] = 1.0 - one_minus
        W[small] = 1j * one_minus / Es
    return K, W


def inverse_liouvillian_spectral(H, A, w: WeightFunction):
    return SpectralLiouvillian(H, w).inverse(A)


def j_map(H, A, w: WeightFunction):
    return SpectralLiouvillian(H, w).j(A)


def inverse_liouvillian_quadrature(H, A, w: WeightFunction, u_points: float = 4.0,
                                   panel_points: int = 10, s_max: float | None = None,
                                   return_report: bool = False):
    """Nested quadrature of integral w(s) integral_0^s e^{iuH} A e^{-iuH} du ds.

    Uses evenness of w: I(A) = int_0^inf w(s) int_0^s [f(u) - f(-u)] du ds with
    f(u) = e^{iuH} A e^{-iuH}. The outer integral is composite Gauss-Legendre on
    panels resolving both w and the fastest phase; the inner integral is
    accumulated between consecutive outer nodes by Gauss-Legendre with
    ``u_points`` nodes per radian of the fastest phase (at least 4).
    """
    Hm = _mat(H)
    E, V = np.linalg.eigh(0.5 * (Hm + Hm.conj().T))
    At = (V.conj().T @ _mat(A) @ V).astype(complex)
    delta = E[:, None] - E[None, :]
    dmax = float(np.abs(delta).max()) if delta.size else 0.0
    s_max = w.s_max if s_max is None else s_max
    width = min(1.0 / w.g, math.pi / max(dmax, 1e-12))
    n_panels = int(math.ceil(s_max / width))
    xg, wg = np.polynomial.legendre.leggauss(panel_points)
    edges = np.linspace(0.0, s_max, n_panels + 1)
    acc = np.zeros_like(At)
    cum = np.zeros_like(At)
    prev = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        for x, q in zip(xg, wg):
            s = mid + half * x
            seg = s - prev
            p = max(4, int(math.ceil(u_points * seg * dmax)))
            ux, uq = np.polynomial.legendre.leggauss(p)
            us = prev + 0.5 * seg * (ux + 1.0)
            phase = np.zeros_like(At)
            for u, qu in zip(us, uq):
                phase += qu * 2j * np.sin(u * delta)
            cum = cum + 0.5 * seg * phase * At
            acc += q * half * w(s) * cum
            prev = s
    tail = float(w(s_max) * s_max ** 2)
    out = _like(A, V @ acc @ V.conj().T)
    if return_report:
        return out, {"panels": n_panels, "tail_estimate": tail, "s_max": s_max}
    return out


def invliou_identity_residual(H, A, B, w: WeightFunction, spectral: SpectralLiouvillian | None = None,
                              return_report: bool = False):
    """|rho_0([L(I(A)) - iA, B])| for the ground state of H."""
    sp = spectral or SpectralLiouvillian(H, w)
    if sp.gap < w.g:
        raise GapError(f"spectral gap {sp.gap:.6g} is below the weight parameter g = {w.g:g}")
    Am, Bm = _mat(A), _mat(B)
    X = sp.liouvillian(sp.inverse(Am)) - 1j * Am
    val = abs(sp.ground_expectation(X @ Bm - Bm @ X))
    if return_report:
        return val, {"gap": sp.gap, "gap_margin": sp.gap - w.g, "leakage": w.leakage}
    return val


def gs_derivative_check(h0, h0_dot, t: float, A, w: WeightFunction, h_t: float = 1e-3):
    """(finite-difference d/dt rho_0(t)(A), i rho_0([dH0/dt, I(A)])) at time t.

    ``h0`` and ``h0_dot`` map t to Hermitian matrices. The finite difference is
    central with one Richardson step.
    """
    def rho(tt):
        Hm = _mat(h0(tt))
        _, V = np.linalg.eigh(0.5 * (Hm + Hm.conj().T))
        v = V[:, 0]
        return (v.conj() @ _mat(A) @ v).real

    d1 = (rho(t + h_t) - rho(t - h_t)) / (2 * h_t)
    d2 = (rho(t + h_t / 2) - rho(t - h_t / 2)) / h_t
    fd = (4 * d2 - d1) / 3
    sp = SpectralLiouvillian(h0(t), w)
    if sp.gap < w.g:
        raise GapError(f"spectral gap {sp.gap:.6g} is below the weight parameter g = {w.g:g}")
    IA = sp.inverse(_mat(A))
    Hd = _mat(h0_dot(t))
    formula = 1j * sp.ground_expectation(Hd @ IA - IA @ Hd)
    return float(fd), float(formula.real)
