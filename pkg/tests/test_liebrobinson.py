from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgtlab.dynamics import EvolutionPlan
from lgtlab.hamiltonian import CouplingParams, assemble, make_layout
from lgtlab.lattice import Link, boundary_set, build_box, build_chain, build_cube, element_sites, from_element, neighbor_set
from lgtlab.liebrobinson import (
    LRBoundError,
    LRBoundInput,
    a_k_majorant_3d,
    bound_3d_tail,
    commutator_experiment,
    convergence_bound_3d,
    generic_bound,
    integrated_bound,
    path_counts,
)
from lgtlab.linkspace import GaugeGroupModel, electric_operator
from lgtlab.opalg import Operator


def brute_paths(T, R, k_max, dsites):
    """Enumerate every path explicitly (exponential, small cases only)."""
    weighted, total = [], []
    frontier = [[q] for q in boundary_set(T, R)]
    for _ in range(k_max):
        total.append(len(frontier))
        weighted.append(sum(1 for p in frontier if set(element_sites(p[-1])) & dsites))
        frontier = [p + [q] for p in frontier for q in neighbor_set(T, p[-1])]
    return weighted, total


@pytest.mark.parametrize(
    "T,R,dsites",
    [
        (build_chain(5), from_element(Link((0, 0, 0), (1, 0, 0)), 1), {(4, 0, 0)}),
        (build_box((0, 0), (2, 2), 2), from_element(Link((0, 0, 0), (1, 0, 0)), 2), {(2, 2, 0), (2, 1, 0)}),
        (build_cube(1, 3), build_box((0, 0, 0), (0, 0, 0), 3), {(1, 1, 1)}),
    ],
)
def test_path_counts_brute_force(T, R, dsites):
    k = 4 if T.dimension < 3 else 3
    pc = path_counts(T, R, k, dsites)
    w, t = brute_paths(T, R, k, dsites)
    assert list(pc.weighted) == w
    assert list(pc.total) == t


def test_a_k_majorant_3d():
    T, R = build_cube(3, 3), build_cube(1, 3)
    pc = path_counts(T, R, 5, T.sites)
    for k, a in enumerate(pc.total, start=1):
        assert a <= a_k_majorant_3d(1, k)
    assert pc.total[0] == len(boundary_set(T, R))


def test_path_counts_exact_integers_beyond_int64():
    T = build_cube(1, 3)
    pc = path_counts(T, build_box((0, 0, 0), (0, 0, 0), 3), 20, T.sites)
    assert all(isinstance(v, int) for v in pc.total)
    assert pc.total[-1] > 2**63


def test_bound_3d_tail_closed_form():
    # 2 (2d+1)^2 (5/8) sum_{k>=3} 1/k! = 11.25 (e - 5/2) for d=1, n=6, 96 psi t = 1
    inp = LRBoundInput(d=1, n=6, t=1.0, psi_norm=1 / 96)
    assert math.isclose(bound_3d_tail(inp), 11.25 * (math.e - 2.5), rel_tol=1e-14)
    assert convergence_bound_3d(inp) > 0


def test_closed_form_preconditions():
    with pytest.raises(LRBoundError):
        bound_3d_tail(LRBoundInput(d=1, n=5, t=1.0, psi_norm=0.1))
    with pytest.raises(LRBoundError):
        bound_3d_tail(LRBoundInput(d=1, n=9, t=1.0, psi_norm=0.1, dimension=2))
    with pytest.raises(LRBoundError):
        LRBoundInput(d=1, n=9, t=1.0, psi_norm=-1.0)
    with pytest.raises(LRBoundError):
        path_counts(build_chain(3), build_chain(3), 21, [])


def test_generic_below_3d_closed_form():
    T, R = build_cube(6, 3), build_cube(1, 3)
    psi, t = 0.5, 0.01
    shell = {x for x in T.sites if max(map(abs, x)) == 6}
    gb, rem = generic_bound(T, R, psi, 1.0, 1.0, t, shell)
    cf = bound_3d_tail(LRBoundInput(1, 6, t, psi))
    assert 0 < gb <= cf
    assert rem <= 1e-6 * gb


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 1.5))
def test_bound_monotone_in_time(t):
    T, R = build_chain(6), from_element(Link((0, 0, 0), (1, 0, 0)), 1)
    b1, _ = generic_bound(T, R, 0.5, 1.0, 1.0, t, {(5, 0, 0)})
    b2, _ = generic_bound(T, R, 0.5, 1.0, 1.0, t + 0.1, {(5, 0, 0)})
    assert b1 <= b2
    ib, _ = integrated_bound(T, R, 0.5, 1.0, 1.0, t, {(5, 0, 0)})
    assert ib <= t * b1 * (1 + 1e-9) + 1e-300


def test_remainder_tolerance_unreachable_raises():
    T, R = build_chain(6), from_element(Link((0, 0, 0), (1, 0, 0)), 1)
    with pytest.raises(LRBoundError):
        generic_bound(T, R, 0.5, 1.0, 1.0, 5.0, {(5, 0, 0)})


@settings(max_examples=8, deadline=None)
@given(st.floats(0.05, 2.0))
def test_measured_commutator_below_bound(t):
    S = build_chain(4)
    m = GaugeGroupModel.u1(1)
    lay = make_layout(S, m, "reduced")
    plan = EvolutionPlan(assemble(S, CouplingParams(1.0, 1.0, 0.5), m, lay), "dense")
    first, last = S.link_list[0], S.link_list[-1]
    A = Operator(lay.product(links={first: electric_operator(m)}), lay, from_element(first, 1))
    D = Operator(lay.product(links={last: electric_operator(m)}), lay, from_element(last, 1))
    (row,) = commutator_experiment(D, A, plan, [t])
    assert row.measured < row.generic_bound
    assert not row.violated


def test_trivial_cases():
    assert bound_3d_tail(LRBoundInput(1, 6, 0.0, 0.5)) == 0.0
    assert convergence_bound_3d(LRBoundInput(1, 6, 0.0, 0.5)) == 0.0
    T = build_chain(4)
    assert list(path_counts(T, T, 5, T.sites).total) == [0] * 5
    far = from_element(Link((0, 0, 0), (1, 0, 0)), 1)
    gb, _ = generic_bound(build_chain(8), far, 0.5, 1.0, 1.0, 0.0, {(7, 0, 0)})
    assert gb == 0.0


def test_a_k_vanishes_below_shell_distance():
    n, d = 5, 1
    T, R = build_cube(n, 3), build_cube(d, 3)
    shell = {x for x in T.sites if max(map(abs, x)) == n}
    a = path_counts(T, R, n - d - 2, shell).weighted
    assert all(v == 0 for v in a[: n - d - 3])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 3), st.integers(5, 9), st.floats(1e-4, 0.05))
def test_bound_3d_tail_monotone_in_n(d, extra, x):
    n = d + extra
    t = x / 96
    assert bound_3d_tail(LRBoundInput(d, n + 1, t, 1.0)) <= bound_3d_tail(LRBoundInput(d, n, t, 1.0))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 3), st.integers(5, 9), st.floats(0.01, 3.0), st.floats(0.05, 1.0))
def test_convergence_closed_form_dominates_integrated_tail(d, extra, x, psi):
    from scipy.integrate import quad

    n = d + extra
    t = x / (96 * psi)
    # integrand of the in-proof estimate: 30 (2n+1)^2 boundary terms of norm psi, each bounded by the tail
    f = lambda s: 30 * (2 * n + 1) ** 2 * psi * bound_3d_tail(LRBoundInput(d, n, s, psi))  # noqa: E731
    integral, err = quad(f, 0.0, t, epsabs=0.0, epsrel=1e-10, limit=200)
    assert convergence_bound_3d(LRBoundInput(d, n, t, psi)) >= integral - err


def test_closed_form_factorial_decay():
    vals = [convergence_bound_3d(LRBoundInput(1, n, 0.01, 1.0)) for n in range(6, 14)]
    ratios = [b / a for a, b in zip(vals, vals[1:])]
    assert all(r2 < r1 for r1, r2 in zip(ratios, ratios[1:]))
    assert ratios[-1] < 0.2


def test_commutator_zero_at_time_zero():
    S = build_chain(4)
    m = GaugeGroupModel.u1(1)
    lay = make_layout(S, m, "reduced")
    plan = EvolutionPlan(assemble(S, CouplingParams(1.0, 1.0, 0.5), m, lay), "dense")
    first, last = S.link_list[0], S.link_list[-1]
    A = Operator(lay.product(links={first: electric_operator(m)}), lay, from_element(first, 1))
    D = Operator(lay.product(links={last: electric_operator(m)}), lay, from_element(last, 1))
    (row,) = commutator_experiment(D, A, plan, [0.0])
    assert row.measured == 0.0 and row.generic_bound == 0.0
