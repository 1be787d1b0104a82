import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from bulkadiabatic.dynamics import HamiltonianFamily
from bulkadiabatic.fock import FockSpace, number_operator
from bulkadiabatic.interactions import LipschitzPotential
from bulkadiabatic.lattice import Lattice
from bulkadiabatic.liouvillian import GapError, SpectralLiouvillian, build_weight
from bulkadiabatic.models import Ramp, Schedule, chain_model
from bulkadiabatic.neass import (MAX_ORDER, OperatorSeries, adiabatic_defect, build_A1, build_bundle,
                                 conjugation_series, construction_for)

LAT = Lattice.chain(6, "torus")
SPACE = FockSpace(LAT, particle_number=3)
RAMP = Ramp("switch", 0.0, 2.0)


def family(eps, eta=None, field=0.2, delta=1.0):
    H0 = chain_model(hopping=1.0, staggered=1.5, ramp=RAMP, deltas={"staggered": delta})
    v = LipschitzPotential.linear_field(field) if field else None
    return HamiltonianFamily(H0, None, v, Schedule(0.0, 1.0, RAMP), eps, eps if eta is None else eta)


@pytest.fixture(scope="module")
def weight():
    return build_weight(1.5)


def _rand(rng, d, herm=True):
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (M + M.conj().T) if herm else M


# --------------------------------------------------------------------------- series arithmetic

@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 4))
def test_series_arithmetic_matches_evaluation(seed, order):
    rng = np.random.default_rng(seed)
    d = 4
    a = OperatorSeries([_rand(rng, d) for _ in range(order + 1)], order)
    b = OperatorSeries([_rand(rng, d) for _ in range(order + 1)], order)
    eps = 1e-3
    A, B = a.evaluate(eps, d), b.evaluate(eps, d)
    tol = 50 * eps ** (order + 1)
    assert np.abs((a + b).evaluate(eps, d) - (A + B)).max() <= 1e-12
    assert np.abs((a - b.scaled(2j)).evaluate(eps, d) - (A - 2j * B)).max() <= 1e-12
    assert np.abs(a.product(b).evaluate(eps, d) - A @ B).max() <= tol
    assert np.abs(a.commutator(b).evaluate(eps, d) - (A @ B - B @ A)).max() <= tol
    assert a.product(b).max_order == order


def test_series_shift_and_zero():
    X = np.eye(2)
    s = OperatorSeries.constant(X, 3)
    assert s.shifted(2).coefficient(2, 2) is not None
    assert np.array_equal(s.shifted(2).coefficient(2, 2), X)
    assert s.shifted(4).is_zero()
    assert OperatorSeries([], 2).is_zero()


def test_conjugation_series_basics(rng):
    d = 5
    X = _rand(rng, d)
    S1 = _rand(rng, d)
    zero = conjugation_series(OperatorSeries([], 3), X, 3)
    assert np.array_equal(zero.coefficient(0, d), X) and zero.coefficient(1, d).any() == False
    one = conjugation_series(OperatorSeries([S1], 3), np.eye(d), 3)
    assert np.abs(one.evaluate(0.3, d) - np.eye(d)).max() <= 1e-13
    c1 = conjugation_series(OperatorSeries([S1], 3), X, 3).coefficient(1, d)
    assert np.abs(c1 - (-1j) * (S1 @ X - X @ S1)).max() <= 1e-13
    with pytest.raises(ValueError):
        conjugation_series(OperatorSeries([S1], MAX_ORDER + 1), X, MAX_ORDER + 1)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_conjugation_series_ratio(order, rng):
    d = 6
    X = _rand(rng, d)
    coeffs = [_rand(rng, d) for _ in range(order)]
    S = OperatorSeries(coeffs, order)

    def err(eps):
        Sm = sum(eps ** j * c for j, c in enumerate(coeffs))
        exact = expm(-1j * eps * Sm) @ X @ expm(1j * eps * Sm)
        return np.abs(conjugation_series(S, X, order).evaluate(eps, d) - exact).max()

    ratio = err(0.02) / err(0.01)
    assert ratio == pytest.approx(2 ** (order + 1), rel=0.15)


# --------------------------------------------------------------------------- first order

def test_build_A1_reductions(weight):
    fr = family(0.1).on(SPACE)
    sp = SpectralLiouvillian(fr.h0(0.0), weight)
    zero = np.zeros((SPACE.dim, SPACE.dim))
    assert np.abs(build_A1(fr.h0(0.0), zero, zero, sp.inverse, 1.0)).max() == 0.0
    V = fr.v(1.4) + 0.3 * np.eye(SPACE.dim)
    assert np.array_equal(build_A1(None, V, fr.h0_dot(1.4), sp.inverse, 0.0), sp.inverse(V))


def test_build_A1_inverts_liouvillian(weight):
    fr = family(0.1).on(SPACE)
    t, theta = 1.4, 1.0
    sp = SpectralLiouvillian(fr.h0(t), weight)
    Y = fr.v(t) + theta * sp.inverse(fr.h0_dot(t))
    A1 = build_A1(fr.h0(t), fr.v(t), fr.h0_dot(t), sp.inverse, theta)
    # L(I(Y)) = i (Y - J(Y)), and J(Y) has no ground-to-excited block
    resid = sp.liouvillian(A1) - 1j * (Y - sp.j(Y))
    assert np.abs(resid).max() <= 1e-10
    P0 = np.outer(sp.ground_vector, sp.ground_vector.conj())
    JY = sp.j(Y)
    off = (np.eye(len(P0)) - P0) @ JY @ P0
    assert np.linalg.norm(off, 2) <= 1e-4 * np.linalg.norm(Y, 2)
    assert np.abs(A1 - A1.conj().T).max() <= 1e-12


# --------------------------------------------------------------------------- construction

def test_construction_split_and_hermiticity(weight):
    fr = family(0.1).on(SPACE)
    con = construction_for(fr, weight)
    for row in con.verify(1.4, 4):
        assert row["split_residual"] <= 1e-8
        assert row["ground_commutator"] <= 1e-8
        assert row["hermiticity"] <= 1e-9


def test_first_order_bundle_matches_build_A1(weight):
    fr = family(0.1, 0.05).on(SPACE)
    b = build_bundle(fr, weight, 1, 1.4)
    sp = SpectralLiouvillian(fr.h0(1.4), weight)
    ref = build_A1(fr.h0(1.4), fr.v(1.4), fr.h0_dot(1.4), sp.inverse, 0.5)
    assert np.abs(b.generators[0] - ref).max() <= 1e-12


def test_bundle_invariants(weight):
    fr = family(0.1).on(SPACE)
    b = build_bundle(fr, weight, 2, 1.4, verify=True)
    assert np.abs(b.S - b.S.conj().T).max() <= 1e-12
    U = b.dressing
    assert np.abs(U.conj().T @ U - np.eye(len(U))).max() <= 1e-10
    b.state.validate()
    assert len(b.checks) == 2
    summ = b.summary()
    assert summ["order"] == 2 and len(summ["norms_A"]) == 2
    assert '"dressing_distance"' in b.to_json()


def test_dressing_shrinks_with_epsilon(weight):
    dist = []
    for eps in (0.2, 0.1, 0.05):
        fr = family(eps).on(SPACE)
        dist.append(build_bundle(fr, weight, 2, 1.4).summary()["dressing_distance"])
    assert dist[0] > dist[1] > dist[2]


def test_stationary_unperturbed_is_ground_state(weight):
    fr = HamiltonianFamily(chain_model(hopping=1.0, staggered=1.5), epsilon=0.1, eta=0.1).on(SPACE)
    b = build_bundle(fr, weight, 3, 0.7)
    assert all(np.abs(A).max() == 0.0 for A in b.generators)
    assert np.abs(b.state.matrix - b.ground.matrix).max() <= 1e-10


def test_gap_rejected():
    fr = family(0.1).on(SPACE)
    with pytest.raises(GapError):
        build_bundle(fr, build_weight(20.0), 1, 1.4)


def test_epsilon_zero_needs_stationary_time(weight):
    fr = family(0.0, 0.1).on(SPACE)
    with pytest.raises(ValueError):
        build_bundle(fr, weight, 1, 1.0)
    b = build_bundle(fr, weight, 1, 0.0)
    assert np.array_equal(b.dressing, np.eye(SPACE.dim))


def test_defect_trivial_cases(weight):
    fr = family(0.1).on(SPACE)
    obs = number_operator(SPACE, [0])
    assert adiabatic_defect(fr, weight, obs, 2, 1.4, 1.4)[0] == 0.0
    static = HamiltonianFamily(chain_model(hopping=1.0, staggered=1.5), epsilon=0.0, eta=0.1).on(SPACE)
    val, info = adiabatic_defect(static, weight, obs, 2, 0.0, 1.0)
    assert val <= 1e-9


def _schrodinger_residual(eps, n, weight, t=1.4, h=1e-4):
    """|| i eta d/dt rho_n - [H, rho_n] || for the dressed projector along the driven path."""
    fr = family(eps).on(SPACE)
    con = construction_for(fr, weight)
    rho = lambda s: build_bundle(fr, weight, n, s, construction=con).state.matrix
    drho = (rho(t + h) - rho(t - h)) / (2 * h)
    H = fr.h(t)
    R = 1j * fr.eta * drho - (H @ rho(t) - rho(t) @ H)
    return np.linalg.norm(R, 2)


@pytest.mark.parametrize("n", [1, 2])
def test_dressed_state_solves_schrodinger_to_order(n, weight):
    eps = [0.1, 0.05]
    r = [_schrodinger_residual(e, n, weight) for e in eps]
    slope = math.log(r[0] / r[1]) / math.log(2.0)
    assert slope == pytest.approx(n + 1, abs=0.3)
