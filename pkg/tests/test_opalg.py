from __future__ import annotations

import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from lgtlab.fermions import FermionLayout, mode_annihilator
from lgtlab.lattice import Link, build_chain
from lgtlab.opalg import (
    HilbertLayout,
    Operator,
    OperatorError,
    commutator,
    embed,
    graded_commutator,
    group_degenerate,
    lowest_eigenpairs,
    operator_norm,
    read_operator,
    tighten_support,
    write_operator,
)

L01 = Link((0, 0, 0), (1, 0, 0))
L12 = Link((1, 0, 0), (2, 0, 0))


def _layout(n_sites=3, link_dim=3):
    S = build_chain(n_sites)
    fl = FermionLayout.reduced(S.site_list)
    return HilbertLayout(fl, S.link_list, link_dim, lattice=S)


def test_dimensions():
    lay = _layout()
    assert lay.fock_dim == 8 and lay.link_dim == 9 and lay.total_dim == 72


def test_product_orders_fermion_first():
    lay = _layout()
    X = sp.csr_matrix(np.diag([1.0, 2.0, 3.0]))
    op = lay.product(links={L12: X}).toarray()
    want = np.kron(np.eye(8), np.kron(np.eye(3), np.diag([1.0, 2.0, 3.0])))
    assert np.allclose(op, want)


def test_operator_shape_check():
    lay = _layout()
    with pytest.raises(OperatorError):
        Operator(np.eye(3), lay)


def test_parity_tags():
    lay = _layout()
    c = lay.product(fermion=mode_annihilator(3, 0))
    assert Operator(c, lay).parity == "odd"
    assert Operator(c.conj().T @ c, lay).parity == "even"
    assert (Operator(c, lay) + Operator(c.conj().T @ c, lay)).parity == "mixed"


def test_embed_preserves_graded_locality():
    full = _layout()
    sub = HilbertLayout(FermionLayout.reduced([(2, 0, 0)]), [], 3)
    c2 = embed(Operator(mode_annihilator(1, 0), sub), full)
    c0 = Operator(full.product(fermion=mode_annihilator(3, 0)), full)
    assert np.allclose(c2.matrix.toarray(), full.product(fermion=mode_annihilator(3, 2)).toarray())
    g = graded_commutator(c0, c2)
    assert abs(g.matrix).sum() < 1e-14
    # the plain commutator does not vanish for odd elements
    assert abs(commutator(c0, c2).matrix).sum() > 0


def test_norm_power_iteration_matches_svd():
    A = sp.random(300, 300, density=0.05, random_state=1, dtype=float) + 1j * sp.random(300, 300, density=0.05, random_state=2)
    exact = np.linalg.norm(A.toarray(), 2)
    assert np.isclose(operator_norm(A, dense_threshold=10, tol=1e-13), exact, rtol=1e-6)
    assert np.isclose(operator_norm(A), exact, rtol=1e-12)


def test_lanczos_matches_dense():
    X = sp.random(400, 400, density=0.02, random_state=5)
    H = (X + X.T).tocsr()
    vals, vecs = lowest_eigenpairs(H, 3, dense_threshold=10)
    exact = np.linalg.eigvalsh(H.toarray())[:3]
    assert np.allclose(vals, exact, atol=1e-8)
    res = np.linalg.norm(H @ vecs - vecs * vals, axis=0)
    assert res.max() < 1e-6


def test_group_degenerate():
    assert group_degenerate([0.0, 1e-12, 1.0, 1.0 + 1e-11, 2.0]) == [[0, 1], [2, 3], [4]]
    assert group_degenerate([]) == []


def test_tighten_support():
    lay = _layout()
    op = Operator(lay.product(links={L01: sp.identity(3) * 2.0}) + lay.product(links={L12: sp.diags([1.0, 0, 0])}), lay)
    S = tighten_support(op)
    assert S.links == {L12}


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.floats(0.0, 0.5), st.integers(0, 1000))
def test_serialization_round_trip(n, density, seed):
    A = sp.random(n, n, density=density, random_state=seed) * (1 + 2j)
    buf = io.BytesIO()
    write_operator(A, buf)
    buf.seek(0)
    B = read_operator(buf)
    assert B.shape == A.shape
    assert abs(B - A).sum() == 0


def test_read_rejects_garbage():
    with pytest.raises(OperatorError):
        read_operator(io.BytesIO(b"NOTOP" + bytes(40)))
