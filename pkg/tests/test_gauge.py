from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgtlab.gauge import (
    GaugeElement,
    GaugeError,
    boundary_exempt_sites,
    fermi_bilinear,
    gauge_unitary,
    gauss_projector,
    is_sector_diagonal,
    random_gauge_element,
    reduce_observable,
    sector_decomposition,
    wilson_loop,
)
from lgtlab.hamiltonian import CouplingParams, assemble, make_layout
from lgtlab.lattice import Link, Plaquette, build_box, build_chain
from lgtlab.linkspace import GaugeGroupModel, electric_operator, link_matrix
from lgtlab.opalg import Operator, operator_norm

PARAMS = CouplingParams(1.0, 1.0, 0.5)


def _system(kind, volume, preset):
    m = GaugeGroupModel.u1(1) if kind == "u1" else GaugeGroupModel.su2(0.5)
    S = build_box((0, 0), (1, 1), 2) if volume == "plaquette" else build_chain(volume)
    lay = make_layout(S, m, preset)
    return S, m, lay, assemble(S, PARAMS, m, lay).total.matrix


def brute_force_gauss_dim(S, cutoff, fermions, exempt=()):
    """Count basis configurations with out(x) - in(x) - n(x) = 0 at every constrained site."""
    sites, links = S.site_list, S.link_list
    occs = itertools.product((0, 1), repeat=len(sites)) if fermions else [(0,) * len(sites)]
    count = 0
    for occ in occs:
        n = dict(zip(sites, occ))
        for vals in itertools.product(range(-cutoff, cutoff + 1), repeat=len(links)):
            div = dict.fromkeys(sites, 0)
            for ln, v in zip(links, vals):
                div[ln.tail] += v
                div[ln.head] -= v
            if all(div[x] - n[x] == 0 for x in sites if x not in exempt):
                count += 1
    return count


def fixed_space_dim(lay, model, seeds=(1, 2, 3)):
    """Dimension of the common fixed space of a few random gauge transformations."""
    sites = sorted({s for ln in lay.links for s in ln.sites} | set(lay.fermion.sites if lay.fermion else ()))
    n = lay.total_dim
    rows = []
    for sd in seeds:
        z = random_gauge_element(model, sites, np.random.default_rng(sd))
        rows.append(gauge_unitary(z, lay).matrix.toarray() - np.eye(n))
    s = np.linalg.svd(np.vstack(rows), compute_uv=False)
    return int(np.sum(s < 1e-8))


@pytest.mark.parametrize(
    "kind,volume,preset,dim",
    [("u1", "plaquette", "none", 81), ("u1", 4, "reduced", 432), ("su2", "plaquette", "none", 625), ("su2", 2, "reduced", 80)],
)
def test_hamiltonian_gauge_invariant(kind, volume, preset, dim):
    S, m, lay, H = _system(kind, volume, preset)
    assert lay.total_dim == dim
    hn = operator_norm(H)
    rng = np.random.default_rng(7)
    for _ in range(5):
        U = gauge_unitary(random_gauge_element(m, S.site_list, rng), lay).matrix
        assert operator_norm(U @ H - H @ U) / hn < 1e-10
        assert operator_norm(U @ U.conj().T - np.eye(dim)) < 1e-12


def test_wilson_loop_and_bilinear_invariant():
    S, m, lay, _ = _system("su2", "plaquette", "none")
    W = wilson_loop(Plaquette((0, 0, 0), 0, 1).links, m, lay).matrix
    S2, m2, lay2, _ = _system("u1", 3, "reduced")
    path = [(ln, 1) for ln in S2.link_list]
    Q = fermi_bilinear(path, m2, lay2).matrix
    rng = np.random.default_rng(0)
    for _ in range(5):
        U = gauge_unitary(random_gauge_element(m, S.site_list, rng), lay).matrix
        assert operator_norm(U @ W - W @ U) < 1e-10
        U2 = gauge_unitary(random_gauge_element(m2, S2.site_list, rng), lay2).matrix
        assert operator_norm(U2 @ Q - Q @ U2) < 1e-10
    # a bare link matrix element is not invariant
    bare = lay2.product(links={S2.link_list[0]: link_matrix(m2, 0, 0)})
    U2 = gauge_unitary(GaugeElement(m2, {(0, 0, 0): 1.0}), lay2).matrix
    assert operator_norm(U2 @ bare - bare @ U2) > 0.1


def test_gauge_unitary_homomorphism():
    S, m, lay, _ = _system("su2", 2, "reduced")
    rng = np.random.default_rng(11)
    z1 = random_gauge_element(m, S.site_list, rng)
    z2 = random_gauge_element(m, S.site_list, rng)
    U1, U2 = gauge_unitary(z1, lay).matrix, gauge_unitary(z2, lay).matrix
    U12 = gauge_unitary(z1.compose(z2), lay).matrix
    assert operator_norm(U1 @ U2 - U12) < 1e-12


def test_support_outside_layout_rejected():
    S, m, lay, _ = _system("u1", 2, "reduced")
    with pytest.raises(GaugeError):
        gauge_unitary(GaugeElement(m, {(5, 0, 0): 0.3}), lay)
    with pytest.raises(GaugeError):
        wilson_loop([(Link((0, 0, 0), (1, 0, 0)), 1)], m, lay)


@pytest.mark.parametrize(
    "volume,preset,exempt_boundary",
    [("plaquette", "none", False), (4, "reduced", False), (3, "reduced", True), ("plaquette", "reduced", False)],
)
def test_u1_projector_dimension_brute_force(volume, preset, exempt_boundary):
    S, m, lay, H = _system("u1", volume, preset)
    exempt = boundary_exempt_sites(lay) if exempt_boundary else ()
    P, defect = gauss_projector(lay, m, exempt=exempt)
    Pm = P.matrix
    assert defect < 1e-12
    assert operator_norm(Pm @ Pm - Pm) < 1e-10
    assert operator_norm(Pm - Pm.conj().T) < 1e-10
    assert operator_norm(Pm @ H - H @ Pm) < 1e-10
    rank = int(round(Pm.diagonal().real.sum()))
    assert rank == brute_force_gauss_dim(S, 1, preset != "none", exempt)


@pytest.mark.parametrize("volume,preset", [("plaquette", "none"), (2, "reduced")])
def test_su2_projector_matches_fixed_space(volume, preset):
    S, m, lay, H = _system("su2", volume, preset)
    P, defect = gauss_projector(lay, m)
    Pm = P.matrix.toarray()
    assert defect < 1e-10
    assert np.abs(Pm @ Pm - Pm).max() < 1e-10
    assert operator_norm(Pm @ H - H @ Pm) < 1e-10
    rank = int(round(np.trace(Pm).real))
    assert rank == fixed_space_dim(lay, m)


def test_u1_projector_matches_fixed_space():
    S, m, lay, _ = _system("u1", 3, "reduced")
    P, _ = gauss_projector(lay, m)
    assert int(round(P.matrix.diagonal().real.sum())) == fixed_space_dim(lay, m)


def test_reduce_observable():
    S, m, lay, H = _system("u1", "plaquette", "none")
    P, _ = gauss_projector(lay, m)
    red, basis = reduce_observable(Operator(H, lay), P)
    assert red.shape == (basis.shape[1],) * 2
    assert np.allclose(basis.conj().T @ basis, np.eye(basis.shape[1]))
    bare = Operator(lay.product(links={S.link_list[0]: link_matrix(m, 0, 0)}), lay)
    with pytest.raises(GaugeError):
        reduce_observable(bare, P)


def test_sectors_block_diagonalize_invariant_operators():
    S, m, lay, H = _system("u1", 4, "reduced")
    sec = sector_decomposition(lay, m)
    assert sec.sizes.sum() == lay.total_dim
    assert is_sector_diagonal(H, sec)
    E = lay.product(links={S.link_list[1]: electric_operator(m)})
    assert is_sector_diagonal(E, sec)
    bare = lay.product(links={S.link_list[0]: link_matrix(m, 0, 0)})
    assert not is_sector_diagonal(bare, sec)
    with pytest.raises(GaugeError):
        sector_decomposition(lay, GaugeGroupModel.su2(0.5))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["u1", "su2"]))
def test_random_gauge_commutation_property(seed, kind):
    S, m, lay, H = _system(kind, 2, "reduced")
    U = gauge_unitary(random_gauge_element(m, S.site_list, np.random.default_rng(seed)), lay).matrix
    assert operator_norm(U @ H - H @ U) < 1e-10 * operator_norm(H)


def test_dynamics_commutes_with_gauge_action():
    from scipy.linalg import expm

    S, m, lay, H = _system("u1", 3, "reduced")
    Hd = H.toarray()
    V = expm(1j * 0.8 * Hd)
    alpha = lambda X: V @ X @ V.conj().T  # noqa: E731
    U = gauge_unitary(random_gauge_element(m, S.site_list, np.random.default_rng(9)), lay).matrix.toarray()
    A = lay.product(links={S.link_list[0]: link_matrix(m, 0, 0)}).toarray()
    assert np.abs(U @ alpha(A) @ U.conj().T - alpha(U @ A @ U.conj().T)).max() < 1e-10
    P, _ = gauss_projector(lay, m)
    Pm = P.matrix.toarray()
    assert np.abs(Pm @ V - V @ Pm).max() < 1e-10


def test_reduced_identity_and_hamiltonian():
    from lgtlab.groundstate import ground

    S, m, lay, H = _system("u1", 4, "reduced")
    P, _ = gauss_projector(lay, m, exempt=[(0, 0, 0), (3, 0, 0)])
    I, basis = reduce_observable(Operator.identity(lay), P)
    assert np.allclose(I, np.eye(basis.shape[1]))
    red, _ = reduce_observable(Operator(H, lay), P)
    assert np.linalg.eigvalsh(red)[0] >= ground(H).lambda_grnd - 1e-10
