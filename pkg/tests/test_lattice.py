from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgtlab.lattice import (
    Link,
    LatticeError,
    Plaquette,
    boundary_set,
    build_box,
    build_chain,
    build_cube,
    centered_chain,
    complement,
    from_element,
    from_text,
    is_bulk,
    neighbor_set,
    shell_sites,
    to_text,
)


def _brute_links(T):
    """Independent enumeration of all unit edges between sites of T."""
    out = set()
    for x, y in itertools.permutations(T.sites, 2):
        d = [b - a for a, b in zip(x, y)]
        if sorted(d) == [0, 0, 1]:
            out.add((x, y))
    return out


@pytest.mark.parametrize("n,dim", [(0, 3), (1, 3), (2, 3), (2, 2), (3, 1)])
def test_cube_counts(n, dim):
    S = build_cube(n, dim)
    side = 2 * n + 1
    assert len(S.sites) == side**dim
    assert len(S.links) == dim * (side - 1) * side ** (dim - 1)
    assert len(S.plaquettes) == (dim * (dim - 1) // 2) * (side - 1) ** 2 * side ** (dim - 2)
    assert {(ln.tail, ln.head) for ln in S.links} == _brute_links(S)


@pytest.mark.parametrize("d,n,expected", [(1, 3, 54), (2, 4, 150), (3, 5, 294)])
def test_boundary_link_count_closed_form(d, n, expected):
    T, R = build_cube(n, 3), build_cube(d, 3)
    links = boundary_set(T, R, "links")
    assert len(links) == expected == 6 * (2 * d + 1) ** 2
    assert len(boundary_set(T, R, "plaquettes")) <= 24 * (2 * d + 1) ** 2


def test_boundary_matches_brute_force():
    T, R = build_cube(2, 3), build_cube(1, 3)
    rs = R.sites
    want_links = {ln for ln in T.links if (ln.tail in rs) != (ln.head in rs)}
    want_plaq = {p for p in T.plaquettes if any(s in rs for s in p.sites) and any(s not in rs for s in p.sites)}
    assert boundary_set(T, R, "links") == want_links
    assert boundary_set(T, R, "plaquettes") == want_plaq
    assert boundary_set(T, R) == want_links | want_plaq


def test_bulk_neighbor_sets():
    S = build_cube(2, 3)
    ln = Link((0, 0, 0), (1, 0, 0))
    p = Plaquette((0, 0, 0), 0, 1)
    assert is_bulk(S, ln) and is_bulk(S, p)
    assert len(neighbor_set(S, ln)) == 30
    assert len(neighbor_set(S, p)) == 48
    # at a corner the set shrinks
    corner = Link((-2, -2, -2), (-1, -2, -2))
    assert not is_bulk(S, corner)
    assert len(neighbor_set(S, corner)) < 30


def test_plaquette_path_is_closed():
    p = Plaquette((1, 0, 2), 0, 2)
    pos = p.corner
    for ln, sign in p.links:
        a, b = (ln.tail, ln.head) if sign > 0 else (ln.head, ln.tail)
        assert a == pos
        pos = b
    assert pos == p.corner
    assert set(p.sites) == {s for ln, _ in p.links for s in ln.sites}


def test_invalid_inputs():
    with pytest.raises(LatticeError):
        Link((0, 0, 0), (0, 2, 0))
    with pytest.raises(LatticeError):
        Link((1, 0, 0), (0, 0, 0))
    with pytest.raises(LatticeError):
        Plaquette((0, 0, 0), 1, 0)
    with pytest.raises(LatticeError):
        centered_chain(4)
    with pytest.raises(LatticeError):
        build_chain(0)
    with pytest.raises(LatticeError):
        boundary_set(build_cube(1, 3), build_cube(2, 3))
    with pytest.raises(LatticeError):
        neighbor_set(build_cube(1, 3), Link((5, 0, 0), (6, 0, 0)))


def test_shell_and_complement():
    T, R = build_chain(5), build_chain(3, start=1)
    assert shell_sites(R) == {(1, 0, 0), (3, 0, 0)}
    assert shell_sites(R, T) == {(1, 0, 0), (3, 0, 0)}
    C = complement(T, R)
    assert C.sites == {(0, 0, 0), (4, 0, 0)}
    assert not C.links


def test_from_element():
    p = Plaquette((0, 0, 0), 0, 1)
    S = from_element(p, 2)
    assert len(S.sites) == 4 and len(S.links) == 4 and S.plaquettes == {p}


boxes = st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 2))


@settings(max_examples=25, deadline=None)
@given(boxes)
def test_text_round_trip(shape):
    S = build_box((0, 0, 0), tuple(s - 1 for s in shape), 3)
    assert from_text(to_text(S)) == S


@settings(max_examples=25, deadline=None)
@given(boxes, st.data())
def test_boundary_elements_straddle(shape, data):
    T = build_box((0, 0, 0), tuple(s - 1 for s in shape), 3)
    sites = sorted(T.sites)
    chosen = data.draw(st.lists(st.sampled_from(sites), min_size=1, unique=True))
    R = build_box(chosen[0], chosen[0], 3)
    for q in boundary_set(T, R):
        assert any(s in R.sites for s in q.sites)
        assert any(s not in R.sites for s in q.sites)
    # every element of T touching R but not inside it is in the boundary
    inside = {q for q in T.elements() if all(s in R.sites for s in q.sites)}
    touching = {q for q in T.elements() if any(s in R.sites for s in q.sites)}
    assert boundary_set(T, R) == touching - inside
