import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bulkadiabatic.dynamics import (HamiltonianFamily, evolve_state, heisenberg, lieb_robinson_velocity,
                                    lr_commutator_scan, propagate, volume_convergence)
from bulkadiabatic.fock import FockSpace, identity, number_operator, op_norm, random_even_operator
from bulkadiabatic.interactions import InteractionFamily, LipschitzPotential
from bulkadiabatic.lattice import Lattice
from bulkadiabatic.models import Ramp, Schedule, TimeDependentInteraction, bond_term_piece, chain_model

LAT = Lattice.chain(6)
SPACE = FockSpace(LAT)


def driven(eps=0.1, eta=0.5):
    H0 = chain_model(hopping=1.0, staggered=1.0, ramp=Ramp("switch", 0.0, 1.0), deltas={"staggered": 0.5})
    return HamiltonianFamily(H0, None, LipschitzPotential.linear_field(0.2),
                             Schedule(0.0, 1.0, Ramp("switch", 0.0, 1.0)), eps, eta)


def static(eta=0.7):
    return HamiltonianFamily(chain_model(hopping=1.0, staggered=0.8), epsilon=0.0, eta=eta)


def test_zero_hamiltonian_gives_identity():
    fam = HamiltonianFamily(chain_model(hopping=0.0))
    U = propagate(fam, SPACE, 0.0, 1.0).U
    assert np.array_equal(U, np.eye(SPACE.dim))


def test_static_matches_eigendecomposition():
    fam = static()
    fr = fam.on(SPACE)
    E, V = np.linalg.eigh(fr.h(0.0))
    ref = (V * np.exp(-1j * 1.3 / 0.7 * E)) @ V.conj().T
    assert np.abs(propagate(fam, SPACE, 0.0, 1.3).U - ref).max() <= 1e-10


def test_second_order_convergence():
    fr = driven().on(SPACE)
    ref = propagate(fr, None, 0.1, 0.9, steps=1600, verify=False).U
    errs = [np.abs(propagate(fr, None, 0.1, 0.9, steps=s, verify=False).U - ref).max() for s in (50, 100)]
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_unitarity_and_cocycle():
    fr = driven().on(SPACE)
    P = propagate(fr, None, 0.0, 0.8)
    assert P.converged and P.unitarity_defect() <= 1e-9
    U1 = propagate(fr, None, 0.0, 0.3).U
    U2 = propagate(fr, None, 0.3, 0.8).U
    assert np.abs(U2 @ U1 - P.U).max() <= 1e-7
    assert np.array_equal(propagate(fr, None, 0.4, 0.4).U, np.eye(SPACE.dim))


def test_rejects_non_hermitian_and_bad_steps():
    bad = TimeDependentInteraction().add(Schedule(), bond_term_piece([{"sites": [0], "strength": 1j}]))
    with pytest.raises(ValueError, match="not Hermitian"):
        HamiltonianFamily(static().h0, bad, epsilon=0.1).on(SPACE)
    with pytest.raises(ValueError):
        propagate(driven(), SPACE, 0.0, 1.0, steps=0)
    with pytest.raises(ValueError):
        HamiltonianFamily(static().h0, eta=0.0)


def test_heisenberg_trivial_cases(rng):
    fam = static()
    I = identity(SPACE)
    assert np.abs(heisenberg(fam, SPACE, I, 0.0, 1.0).matrix - I.matrix).max() <= 1e-12
    fr = fam.on(SPACE)
    from bulkadiabatic.fock import LocalOperator
    H = LocalOperator(fr.h(0.0), SPACE, SPACE.sites)
    assert np.abs(heisenberg(fam, SPACE, H, 0.0, 2.0).matrix - H.matrix).max() <= 1e-10


@pytest.fixture(scope="module")
def driven_propagator():
    return propagate(driven(), SPACE, 0.0, 0.6)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1))
def test_heisenberg_is_automorphism(driven_propagator, seed):
    rng = np.random.default_rng(seed)
    P = driven_propagator
    A = random_even_operator(SPACE, [0, 1], rng, hermitian=False)
    B = random_even_operator(SPACE, [-1, 0], rng, hermitian=False)
    lhs = P.heisenberg(A @ B).matrix
    rhs = P.heisenberg(A).matrix @ P.heisenberg(B).matrix
    assert np.abs(lhs - rhs).max() <= 1e-10
    assert abs(op_norm(P.heisenberg(A)) - op_norm(A)) <= 1e-10


def test_energy_conservation_static():
    fam = HamiltonianFamily(chain_model(hopping=1.0, staggered=0.8), None,
                            LipschitzPotential.linear_field(0.3), Schedule(), 0.5, 0.7)
    fr = fam.on(SPACE)
    psi0 = np.random.default_rng(1).normal(size=SPACE.dim).astype(complex)
    psi0 /= np.linalg.norm(psi0)
    H = fr.h(0.0)
    e0 = (psi0.conj() @ H @ psi0).real
    for t in (0.5, 1.5, 3.0):
        psi, _ = evolve_state(fr, psi0, 0.0, t)
        assert abs((psi.conj() @ H @ psi).real - e0) <= 1e-9


def test_state_evolution_agrees_with_propagator():
    fr = driven().on(SPACE)
    psi0 = np.zeros(SPACE.dim, complex)
    psi0[5] = 1.0
    psi, info = evolve_state(fr, psi0, 0.0, 0.9, tol=1e-10)
    assert info["converged"]
    # Richardson-extrapolated second-order midpoint propagator as the reference
    U1 = propagate(fr, None, 0.0, 0.9, steps=1600, verify=False).U
    U2 = propagate(fr, None, 0.0, 0.9, steps=3200, verify=False).U
    ref = (4 * U2 - U1) @ psi0 / 3
    assert np.linalg.norm(psi - ref) <= 1e-9


def test_sector_blocks_used():
    fr = driven().on(SPACE)
    assert fr.blocks is not None and len(fr.blocks) == LAT.n_modes + 1
    P = propagate(fr, None, 0.0, 0.5)
    N = number_operator(SPACE, SPACE.sites).matrix
    assert np.abs(P.U @ N - N @ P.U).max() <= 1e-12
    sec = driven().on(FockSpace(LAT, particle_number=3))
    assert propagate(sec, None, 0.0, 0.5).unitarity_defect() <= 1e-9


def test_lr_scan_examples():
    lat = Lattice.chain(8)
    sp = FockSpace(lat)
    fam = HamiltonianFamily(chain_model(hopping=1.0))
    fr = fam.on(sp)
    A = number_operator(sp, [-4])
    targets = [(abs(y[0] + 4), number_operator(sp, [y])) for y in lat.sites if y != (-4,)]
    theo = lieb_robinson_velocity(InteractionFamily(lambda L: fam.h0.at(L, 0.0), lat), 1.0, [lat.radius])
    times = [0.0, 0.01, 0.02, 0.04, 0.2, 0.5, 1.0, 1.5, 2.0, 2.5]
    scan = lr_commutator_scan(fr, A, targets, times, level=1e-3, theoretical=theo)
    assert all(r["commutator_norm"] == 0.0 for r in scan.rows if r["t"] == 0.0)
    assert scan.fitted_velocity is not None and 0 < scan.fitted_velocity <= theo["v_a"]
    assert scan.passed
    # overlapping supports at t = t0: the plain commutator norm
    from bulkadiabatic.dynamics import _commutator_norm
    from bulkadiabatic.fock import annihilation, creation
    hop = creation(sp, -4) @ annihilation(sp, -3)
    hop = hop + hop.dagger()
    C = A.matrix @ hop.matrix - hop.matrix @ A.matrix
    assert _commutator_norm(A.matrix, hop.matrix) == pytest.approx(np.linalg.norm(C, 2))
    rows = lr_commutator_scan(fr, A, [(0, hop)], [0.0]).rows
    assert rows[0]["commutator_norm"] == pytest.approx(1.0)


def test_lr_velocity_formula():
    lat = Lattice.chain(10)
    phi = InteractionFamily(lambda L: chain_model(hopping=1.0).at(L, 0.0), lat)
    theo = lieb_robinson_velocity(phi, 1.0, [lat.radius])
    assert theo["v_a"] == pytest.approx(2 * theo["C_F"] * theo["norm"])


def _build(k, fam=None):
    fam = fam or static(1.0)
    return fam.on(FockSpace(Lattice(1, k)))


def test_volume_convergence_examples():
    obs = lambda sp: number_operator(sp, [0])
    zero = volume_convergence(_build, obs, 0.0, [2, 3, 4])
    assert all(r["diff_norm"] == 0.0 for r in zero.rows)
    tiny = volume_convergence(_build, obs, 0.01, [4, 5])
    assert all(r["diff_norm"] < 1e-8 for r in tiny.rows)
    edge = volume_convergence(_build, lambda sp: number_operator(sp, [2]), 2.0, [2, 3])
    assert edge.rows[0]["diff_norm"] > 0.1
    conv = volume_convergence(_build, obs, 0.4, [2, 3, 4, 5])
    vals = [r["diff_norm"] for r in conv.rows]
    assert vals[0] > vals[1] > vals[2]
    assert conv.superpolynomial
