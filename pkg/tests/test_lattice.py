import itertools

import pytest
from hypothesis import given, strategies as st

from bulkadiabatic.lattice import DomainError, Lattice, SiteSet, boundary_distance, fatten, l1, metric


def test_box_sites_and_order():
    lat = Lattice(1, 2)
    assert lat.sites == ((-2,), (-1,), (0,), (1,), (2,))
    lat2 = Lattice(2, 1)
    assert len(lat2) == 9
    assert list(lat2.sites) == sorted(lat2.sites)


def test_even_chain():
    lat = Lattice.chain(6, "torus")
    assert list(lat.coords) == [-3, -2, -1, 0, 1, 2]
    assert lat.n_modes == 6
    assert Lattice.chain(6, spin=2).n_modes == 12


def test_invalid_lattices():
    with pytest.raises(DomainError):
        Lattice(1, 0)
    with pytest.raises(DomainError):
        Lattice(1, 2, "tube")
    with pytest.raises(DomainError):
        Lattice(1, 2).site(3)


def test_torus_metric_wraps():
    lat = Lattice(1, 2, "torus")
    assert metric(lat, -2, 2) == 1
    assert metric(Lattice(1, 2), -2, 2) == 4


def test_boundary_distance_examples():
    lat = Lattice(1, 4)
    assert boundary_distance(lat, [3], 3) == 1
    assert boundary_distance(lat, [0, 2], 2) == 1
    assert boundary_distance(lat, [0], 2) == 3


def test_site_set_algebra():
    lat = Lattice(1, 3)
    a, b = SiteSet(lat, [0, 1]), SiteSet(lat, [1, 2])
    assert (a | b) == SiteSet(lat, [0, 1, 2])
    assert (a & b) == SiteSet(lat, [1])
    assert len(a.complement()) == 5
    assert a.distance(SiteSet(lat, [3])) == 2
    assert SiteSet(lat, [-3, 3]).diameter() == 6
    assert SiteSet(Lattice(1, 3, "torus"), [-3, 3]).diameter() == 1
    assert SiteSet(Lattice(1, 3, "torus"), [-3, 3]).diameter("l1") == 6


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_triangle_inequality_exhaustive(k):
    for geo in ("open", "torus"):
        lat = Lattice(1, k, geo)
        for x, y, z in itertools.product(lat.sites, repeat=3):
            assert metric(lat, x, z) <= metric(lat, x, y) + metric(lat, y, z)


def test_torus_equals_open_on_short_distances():
    k = 4
    op, tor = Lattice(1, k), Lattice(1, k, "torus")
    for x, y in itertools.product(op.sites, repeat=2):
        if l1(x, y) <= k:
            assert metric(op, x, y) == metric(tor, x, y)


sites_2d = st.tuples(st.integers(-2, 2), st.integers(-2, 2))


@given(sites_2d, sites_2d, sites_2d, st.sampled_from(["open", "torus"]))
def test_triangle_inequality_2d(x, y, z, geo):
    lat = Lattice(2, 2, geo)
    assert metric(lat, x, z) <= metric(lat, x, y) + metric(lat, y, z)


@given(st.sets(st.integers(-4, 4), min_size=1, max_size=4), st.integers(0, 6), st.integers(0, 6))
def test_fatten_monotone(X, d1, d2):
    lat = Lattice(1, 4)
    lo, hi = sorted((d1, d2))
    assert fatten(lat, X, lo) <= fatten(lat, X, hi)
    assert SiteSet(lat, X) <= fatten(lat, X, lo)
