import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bulkadiabatic.fock import FockSpace, commutator, number_operator
from bulkadiabatic.interactions import (FFunction, Interaction, InteractionFamily, LipschitzPotential,
                                        WeightProfile, assemble, bulk_norm, commutator_interaction,
                                        interaction_norm, lipschitz_commutator,
                                        lipschitz_commutator_bound, lipschitz_constant,
                                        lipschitz_operator, local_space, potential_interaction,
                                        rapid_tdl_report)
from bulkadiabatic.lattice import Lattice
from bulkadiabatic.models import chain_model, density_piece, hopping_piece, one_body_matrix

from oracles import brute_force_norm

ZETA = WeightProfile.exponential(1.0)


def model_interactions():
    """Three model interactions on small chains."""
    hop = (Lattice.chain(6, "torus"), chain_model(hopping=1.0))
    stag = (Lattice.chain(7, "open"), chain_model(hopping=0.7, staggered=1.3))
    ssh = (Lattice.chain(6, "open"), chain_model(intra=0.5, inter=1.5, density=0.4, edge_field=0.3))
    return [(lat, H.at(lat, 0.0)) for lat, H in (hop, stag, ssh)]


@pytest.mark.parametrize("n", [0, 1, 2])
@pytest.mark.parametrize("case", range(3))
def test_interaction_norm_matches_brute_force(case, n):
    lat, phi = model_interactions()[case]
    terms = {k: op.matrix for k, op in phi.items()}
    ref = brute_force_norm(terms, lat.sites, lat.length, lat.geometry == "torus", ZETA, n)
    assert interaction_norm(phi, ZETA, n).value == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("M", [1, 2])
@pytest.mark.parametrize("case", range(3))
def test_bulk_norm_matches_brute_force(case, M):
    lat, phi = model_interactions()[case]
    terms = {k: op.matrix for k, op in phi.items()}
    window = set(lat.box(M).sites)
    ref = brute_force_norm(terms, lat.sites, lat.length, False, ZETA, 1, window=window)
    assert bulk_norm(phi, ZETA, 1, M) == pytest.approx(ref, rel=1e-13)


def test_norm_examples():
    lat = Lattice(1, 2)
    phi = Interaction(lat)
    assert interaction_norm(phi, ZETA, 0).value == 0.0
    x0 = (0,)
    phi.add((x0,), number_operator(local_space(lat, (x0,)), [x0]))
    assert interaction_norm(phi, ZETA, 0).value == 1.0


def test_weight_profile_checks():
    for z in (WeightProfile.exponential(0.7), WeightProfile.power(2.0)):
        c = z.check()
        assert c["positive"] and c["non_increasing"] and c["bounded"] and c["log_superadditive"]
    assert WeightProfile.exponential(2.0)(3.0) == pytest.approx(math.exp(-6.0))
    F = FFunction(ZETA, 1)
    assert F(2.0) == pytest.approx(math.exp(-2) / 9)
    rep = F.convolution_constant([Lattice(1, k) for k in (2, 3, 4)])
    assert math.isfinite(rep["value"]) and rep["monotone"]


def test_assemble_examples():
    lat = Lattice(1, 1)
    phi = potential_interaction(LipschitzPotential.constant(1.0), lat)
    N = assemble(phi, lat)
    assert sorted(set(np.round(np.diag(N.matrix).real, 12))) == [0, 1, 2, 3]
    assert np.abs(assemble(Interaction(lat), lat).matrix).max() == 0.0


def test_assemble_matches_one_body_second_quantization():
    lat = Lattice.chain(4, "torus")
    H = chain_model(hopping=1.0, staggered=0.5)
    sp = FockSpace(lat)
    Hm = assemble(H.at(lat, 0.0), sp).matrix
    h = one_body_matrix(lat, H)
    from bulkadiabatic.fock import annihilation, creation
    a = [annihilation(sp, x).matrix for x in lat.sites]
    ref = sum(h[i, j] * a[i].conj().T @ a[j] for i in range(4) for j in range(4))
    assert np.abs(Hm - ref).max() <= 1e-13


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2))
def test_norm_homogeneity_and_triangle(a, b, n):
    lat = Lattice.chain(5)
    A = hopping_piece(1, 1.0)(lat)
    B = density_piece(1)(lat)
    nA, nB = interaction_norm(A, ZETA, n).value, interaction_norm(B, ZETA, n).value
    assert interaction_norm(A.scaled(a), ZETA, n).value == pytest.approx(abs(a) * nA, rel=1e-12, abs=1e-14)
    mix = A.scaled(a) + B.scaled(b)
    assert interaction_norm(mix, ZETA, n).value <= abs(a) * nA + abs(b) * nB + 1e-12


def test_norm_monotone_in_n_and_bulk_consistency():
    lat = Lattice.chain(7)
    phi = chain_model(hopping=1.0, density=0.5).at(lat, 0.0)
    vals = [interaction_norm(phi, ZETA, n).value for n in range(4)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    for M in (1, 2, 3):
        assert bulk_norm(phi, ZETA, 1, M) <= interaction_norm(phi, ZETA, 1).value + 1e-12


def test_assemble_linear():
    lat = Lattice.chain(5)
    A, B = hopping_piece(1, 1.0)(lat), density_piece(1)(lat)
    lhs = assemble(A.scaled(2.0) + B.scaled(-0.5), lat).matrix
    rhs = 2.0 * assemble(A, lat).matrix - 0.5 * assemble(B, lat).matrix
    assert np.abs(lhs - rhs).max() <= 1e-13


def test_lipschitz_constants():
    lin = LipschitzPotential.linear_field(1.0)
    assert lipschitz_constant(lin, [Lattice(1, k) for k in (1, 2, 3)]) == 1.0
    assert lipschitz_constant(LipschitzPotential.constant(3.0), [Lattice(1, 2)]) == 0.0
    assert lipschitz_constant(lin, [Lattice(1, 2, "torus")]) == 4.0
    for k in (2, 3):
        assert lipschitz_constant(lin, [Lattice(1, k, "torus")]) >= lipschitz_constant(lin, [Lattice(1, k)])


def test_lipschitz_operator():
    lat = Lattice(1, 2)
    V = lipschitz_operator(LipschitzPotential.linear_field(0.5), lat)
    sp = V.space
    assert V.matrix[0, 0] == 0.0
    single = np.flatnonzero(sp.particle_numbers == 1)
    vals = sorted(V.matrix[i, i].real for i in single)
    assert vals == [-1.0, -0.5, 0.0, 0.5, 1.0]
    C = lipschitz_operator(LipschitzPotential.constant(2.0), lat)
    assert np.allclose(C.matrix, 2.0 * number_operator(sp, sp.sites).matrix)


def test_commutator_interaction_assembles_to_matrix_commutator():
    lat = Lattice.chain(4)
    A = hopping_piece(1, 1.0)(lat)
    B = potential_interaction(LipschitzPotential.from_values({-2: 0.3, -1: -1.0, 0: 0.7, 1: 2.0}), lat)
    C = commutator_interaction(A, B)
    ref = commutator(assemble(A, lat), assemble(B, lat)).matrix
    assert np.abs(assemble(C, lat).matrix - ref).max() <= 1e-12
    assert commutator_interaction(A, A).is_zero(1e-14)
    assert commutator_interaction(B, B).is_zero()


def test_lipschitz_commutator():
    lat = Lattice.chain(5)
    A = chain_model(hopping=1.0, density=0.3).at(lat, 0.0)
    v = LipschitzPotential.linear_field(0.8)
    C = lipschitz_commutator(A, v)
    ref = commutator(assemble(A, lat), lipschitz_operator(v, lat)).matrix
    assert np.abs(assemble(C, lat).matrix - ref).max() <= 1e-12
    assert lipschitz_commutator(A, LipschitzPotential.constant(1.3)).is_zero()
    assert lipschitz_commutator(Interaction(lat), v).is_zero()


@pytest.mark.parametrize("geometry", ["open", "torus"])
def test_lipschitz_commutator_bound(geometry):
    lat = Lattice.chain(6, geometry)
    fam = InteractionFamily(lambda L: chain_model(hopping=1.0, density=0.5).at(L, 0.0), lat)
    rep = lipschitz_commutator_bound(fam, LipschitzPotential.linear_field(1.0), ZETA, 1, [2, 3])
    assert rep["lhs"] <= rep["bound"]


def test_lipschitz_commutator_hopping_value():
    # nearest-neighbour hopping: [h_xy, v] = (v_y - v_x)(a*_x a_y - h.c.), so the
    # commutator norm is exactly C_v times the hopping norm, twice the half-constant bound
    lat = Lattice.chain(6)
    rep = lipschitz_commutator_bound(hopping_piece(1, 1.0)(lat), LipschitzPotential.linear_field(1.0),
                                     ZETA, 0)
    assert rep["lhs"] == pytest.approx(rep["C_v"] * rep["norm_shifted"], rel=1e-13)
    assert rep["lhs"] == pytest.approx(2 * rep["half_bound"], rel=1e-13)


def test_rapid_tdl_restriction_is_zero():
    tmpl = Lattice(1, 2)
    H = chain_model(hopping=1.0, staggered=0.5)
    rep = rapid_tdl_report(lambda k: H.at(tmpl.with_radius(k), 0.0), 0.5, ZETA, 1, 1.0, [1, 2], k_max=5)
    assert rep.rows and all(r["diff"] == 0.0 for r in rep.rows)
    assert rep.verdict


def test_rapid_tdl_torus_wrap_terms_exit():
    tmpl = Lattice(1, 2, "torus")
    H = chain_model(hopping=1.0)
    rep = rapid_tdl_report(lambda k: H.at(tmpl.with_radius(k), 0.0), 0.5, ZETA, 0, 1.0, [1, 2], k_max=5)
    assert all(r["diff"] == 0.0 for r in rep.rows)
    assert rep.verdict


def test_rapid_tdl_polynomial_family_fails():
    tmpl = Lattice(1, 2)

    def fam(k):
        lat = tmpl.with_radius(k)
        return hopping_piece(1, 1.0)(lat).scaled(1.0 + 1.0 / k)

    # differences fall like 1/k^2 while zeta(M^gamma) falls like exp(-sqrt(M))
    rep = rapid_tdl_report(fam, 0.5, ZETA, 0, 1.0, [12, 24, 36])
    ratios = [rep.rows[i]["ratio"] for i in range(0, len(rep.rows), 3)]
    assert ratios[0] < ratios[1] < ratios[2]
    assert not rep.verdict


def test_rapid_tdl_flags_short_range():
    tmpl = Lattice(1, 2)
    H = chain_model(hopping=1.0)
    rep = rapid_tdl_report(lambda k: H.at(tmpl.with_radius(k), 0.0), 0.5, ZETA, 0, 1.0, [4],
                           k_pairs=[(2, 3)])
    assert rep.flags
