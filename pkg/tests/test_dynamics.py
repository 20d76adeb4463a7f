from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from lgtlab.dynamics import (
    DynamicsError,
    EvolutionPlan,
    InfeasibleDimension,
    cocycle,
    commutator_ivp,
    convergence_study,
    dyson_cocycle,
    dyson_tail_bound,
    evolve_vector,
    free_evolution,
    heisenberg,
)
from lgtlab.hamiltonian import CouplingParams, assemble, make_layout
from lgtlab.lattice import Link, build_chain, centered_chain, from_element
from lgtlab.linkspace import GaugeGroupModel, electric_operator
from lgtlab.opalg import Operator, operator_norm

M = GaugeGroupModel.u1(1)
P = CouplingParams(1.0, 1.0, 0.5)


def _chain(n, method="auto", **kw):
    S = build_chain(n)
    lay = make_layout(S, M, "reduced")
    return S, lay, EvolutionPlan(assemble(S, P, M, lay), method, **kw)


def _electric(lay, ln):
    return Operator(lay.product(links={ln: electric_operator(M)}), lay, from_element(ln, 1))


def rk4_commutator(A, B, f0, t0, t1, steps):
    """Classical fixed-step RK4 for f' = i[f, A(t)] + B(t)."""
    f = np.array(f0, dtype=complex)
    h = (t1 - t0) / steps
    rhs = lambda t, y: 1j * (y @ A(t) - A(t) @ y) + B(t)  # noqa: E731
    t = t0
    for _ in range(steps):
        k1 = rhs(t, f)
        k2 = rhs(t + h / 2, f + h / 2 * k1)
        k3 = rhs(t + h / 2, f + h / 2 * k2)
        k4 = rhs(t + h, f + h * k3)
        f = f + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return f


def test_heisenberg_methods_agree():
    S, lay, dense = _chain(4, "dense")
    A = _electric(lay, S.link_list[0])
    H = dense.H.toarray()
    U = expm(1j * 0.7 * H)
    want = U @ A.matrix.toarray() @ U.conj().T
    for method in ("dense", "krylov", "sector"):
        plan = EvolutionPlan(dense.hamiltonian, method)
        got = heisenberg(A, plan, 0.7).matrix.toarray()
        assert np.abs(got - want).max() < 1e-10, method


def test_evolve_vector_preserves_norm():
    S, lay, plan = _chain(4, "krylov")
    v = np.random.default_rng(0).normal(size=lay.total_dim) + 0j
    w = evolve_vector(v, plan, 1.3)
    assert np.isclose(np.linalg.norm(w), np.linalg.norm(v))


def test_cocycle_matches_definition():
    S, lay, plan = _chain(3, "dense")
    B = _electric(lay, S.link_list[0]).matrix.toarray()
    H = plan.H.toarray()
    Hloc = plan.hamiltonian.h_loc.matrix.toarray()
    t = 0.4
    V = expm(1j * t * H) @ expm(-1j * t * Hloc)
    assert np.abs(cocycle(B, plan, t).matrix.toarray() - V @ B @ V.conj().T).max() < 1e-12
    # alpha_t = tau_t o alpha^loc_t
    lhs = heisenberg(B, plan, t).matrix.toarray()
    rhs = cocycle(free_evolution(B, plan, t).matrix, plan, t).matrix.toarray()
    assert np.abs(lhs - rhs).max() < 1e-12


def test_dyson_tail_bound_definition():
    x = 0.3
    direct = sum(x**n / math.factorial(n) for n in range(4, 40))
    assert math.isclose(dyson_tail_bound(0.5, 2.0, 0.3, 3), 2.0 * direct, rel_tol=1e-13)
    assert dyson_tail_bound(0.0, 1.0, 1.0, 0) == 0.0


@pytest.mark.parametrize("order", [0, 1, 2, 3, 4, 5, 6])
def test_dyson_error_below_bound(order):
    S, lay, plan = _chain(3, "dense")
    B = _electric(lay, S.link_list[0])
    t = 0.2
    exact = cocycle(B, plan, t).matrix.toarray()
    approx, bound = dyson_cocycle(B, plan, t, order)
    err = np.linalg.norm(approx.matrix.toarray() - exact, 2)
    assert err <= bound
    assert math.isclose(bound, dyson_tail_bound(operator_norm(plan.hamiltonian.h_int.matrix), operator_norm(B.matrix), t, order), rel_tol=1e-12)


def test_commutator_ivp_against_rk4():
    rng = np.random.default_rng(5)
    d = 6
    X, Y, Z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(3))
    H0, H1 = X + X.conj().T, Y + Y.conj().T
    A = lambda t: H0 + np.sin(2 * t) * H1  # noqa: E731
    B = lambda t: np.cos(t) * Z  # noqa: E731
    f0 = np.diag(np.arange(d, dtype=complex))
    res = commutator_ivp(A, B, f0, 0.0, 1.0)
    ref = rk4_commutator(A, B, f0, 0.0, 1.0, 4000)
    assert np.linalg.norm(res.f - ref, 2) < 1e-7
    assert res.norm <= res.f0_norm + res.b_integral
    assert res.estimate_slack >= 0


def test_refusals():
    S, lay, _ = _chain(4)
    h = assemble(S, P, M, lay)
    with pytest.raises(InfeasibleDimension):
        EvolutionPlan(h, "dense", dense_threshold=100)
    with pytest.raises(InfeasibleDimension):
        EvolutionPlan(h, "auto", dense_threshold=10, sparse_budget=10, sector_budget=10)
    with pytest.raises(DynamicsError):
        EvolutionPlan(h, "magic")
    with pytest.raises(DynamicsError):
        dyson_cocycle(np.eye(lay.total_dim), EvolutionPlan(h, "dense"), 0.1, -1)
    with pytest.raises(InfeasibleDimension) as exc:
        EvolutionPlan(h, "auto", dense_threshold=10, sparse_budget=10, sector_budget=10)
    assert "432" in str(exc.value) and "budget" in str(exc.value)


def test_convergence_study_small():
    vols = [centered_chain(3), centered_chain(5)]
    lay = make_layout(vols[-1], M, "reduced")
    A = _electric(lay, Link((0, 0, 0), (1, 0, 0)))
    rows = convergence_study(A, vols, [0.0, 0.5], P, M, lay)
    assert [r.t for r in rows] == [0.0, 0.5]
    assert rows[0].diff_norm < 1e-14
    assert 0 < rows[1].diff_norm <= rows[1].lr_bound
    with pytest.raises(DynamicsError):
        convergence_study(A, vols[:1], [0.5], P, M, lay)


@settings(max_examples=10, deadline=None)
@given(st.floats(-2.0, 2.0))
def test_heisenberg_is_automorphism(t):
    S, lay, plan = _chain(3, "dense")
    A = _electric(lay, S.link_list[0]).matrix.toarray()
    B = lay.product(fermion=None, links={S.link_list[1]: electric_operator(M)}).toarray()
    At, Bt = heisenberg(A, plan, t).matrix.toarray(), heisenberg(B, plan, t).matrix.toarray()
    ABt = heisenberg(A @ B, plan, t).matrix.toarray()
    assert np.abs(At @ Bt - ABt).max() < 1e-11
    # group law alpha_s alpha_t = alpha_{s+t}
    assert np.abs(heisenberg(At, plan, 0.3).matrix.toarray() - heisenberg(A, plan, t + 0.3).matrix.toarray()).max() < 1e-11
