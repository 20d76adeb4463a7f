"""Lieb-Robinson machinery: exact path counts, iterated bounds and closed forms.

For ``A`` supported in ``R`` inside a volume ``T`` and an observable ``D``,
iterating the commutator estimate ``N`` times gives

    ||[D, alpha_t(A)]|| / (2 ||A||)
        <= ||D|| (delta_R + sum_{k=1}^N (2 psi |t|)^k / k! a_k) + R_N,

    a_k = #{paths q_1 .. q_k : q_1 in Delta_T(R), q_{i+1} in Delta_T(q_i)} weighted by delta_{q_k},
    R_N = (2 psi |t|)^(N+1) ||D|| P_{N+1} / (N+1)!,

where ``P_k`` is the unweighted path count, ``psi`` bounds every interaction
term, and ``delta_q = 1`` when ``q`` meets the sites where ``D`` acts. All
path counts are exact Python integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, factorial, fsum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lattice import (
    Element,
    Site,
    SubLattice,
    boundary_set,
    element_sites,
    neighbor_set,
    shell_sites,
)

K_CAP = 20


class LRBoundError(ValueError):
    """Precondition violation or unreachable remainder tolerance."""


# path counting -------------------------------------------------------------------------

@dataclass(frozen=True)
class PathCounts:
    """Exact path statistics from ``Delta_T(R)`` up to length ``k_max``.

    ``weighted[k-1] = a_k`` and ``total[k-1] = P_k`` for ``k = 1..k_max``.
    """

    weighted: tuple[int, ...]
    total: tuple[int, ...]
    delta_R: int


def _adjacency(T: SubLattice) -> tuple[list[Element], np.ndarray, np.ndarray]:
    elems = list(T.elements("both"))
    index = {q: i for i, q in enumerate(elems)}
    src, dst = [], []
    for i, q in enumerate(elems):
        for q2 in neighbor_set(T, q):
            src.append(i)
            dst.append(index[q2])
    src_a = np.asarray(src, dtype=np.int64)
    dst_a = np.asarray(dst, dtype=np.int64)
    order = np.argsort(dst_a, kind="stable")
    return elems, src_a[order], dst_a[order]


def path_counts(
    T: SubLattice,
    R: SubLattice | Element,
    k_max: int,
    delta_sites: Iterable[Site],
) -> PathCounts:
    """Exact ``a_k`` and ``P_k`` for ``k = 1..k_max`` (``k_max <= 20``)."""
    if k_max > K_CAP:
        raise LRBoundError(f"path counting is capped at k = {K_CAP}")
    R_sites = frozenset(R.sites) if isinstance(R, SubLattice) else frozenset(element_sites(R))
    if not R_sites <= frozenset(T.sites):
        raise LRBoundError("R is not contained in T")
    dsites = frozenset(tuple(s) for s in delta_sites)
    delta_R = int(bool(R_sites & dsites))
    if k_max <= 0:
        return PathCounts((), (), delta_R)
    elems, src, dst = _adjacency(T)
    index = {q: i for i, q in enumerate(elems)}
    delta = np.array([bool(frozenset(element_sites(q)) & dsites) for q in elems])
    count = np.zeros(len(elems), dtype=np.int64)
    for q in boundary_set(T, R, "both"):
        count[index[q]] = 1
    starts = np.flatnonzero(np.r_[True, dst[1:] != dst[:-1]]) if len(dst) else np.zeros(0, dtype=np.int64)
    targets = dst[starts]
    indeg = np.diff(np.r_[starts, len(dst)])
    weighted, total = [], []
    for k in range(1, k_max + 1):
        weighted.append(int(count[delta].sum()))
        total.append(int(count.sum()))
        if k == k_max:
            break
        if count.dtype != object and int(count.max(initial=0)) * int(indeg.max(initial=0)) >= 2**62:
            count = count.astype(object)
        new = np.zeros(len(elems), dtype=count.dtype)
        if len(dst):
            new[targets] = np.add.reduceat(count[src], starts)
        count = new
    return PathCounts(tuple(weighted), tuple(total), delta_R)


def a_coefficients(T: SubLattice, R: SubLattice | Element, k_max: int, delta_sites: Iterable[Site]) -> list[int]:
    """``[a_1, ..., a_k_max]`` as exact integers."""
    return list(path_counts(T, R, k_max, delta_sites).weighted)


def delta_region(T: SubLattice, ambient: SubLattice) -> frozenset[Site]:
    """Sites of ``T`` touched by elements of ``Delta_ambient(T)``."""
    return shell_sites(T, ambient)


# generic bound --------------------------------------------------------------------------

def _series_terms(x: float, counts: Sequence[int]) -> list[float]:
    """``x^k / k! * c_k`` for k = 1.. via a running ratio."""
    out, term = [], 1.0
    for k, c in enumerate(counts, start=1):
        term *= x / k
        out.append(term * float(c))
    return out


def generic_bound(
    T: SubLattice,
    R: SubLattice | Element,
    psi_norm: float,
    a_norm: float,
    d_norm: float,
    t: float,
    delta_sites: Iterable[Site],
    rtol: float = 1e-6,
    n_max: int = K_CAP,
) -> tuple[float, float]:
    """Iterated bound on ``||[D, alpha_t(A)]||`` with exact path counts.

    Returns ``(bound, remainder)``: ``bound`` already contains ``2 ||A|| R_N``
    and is therefore rigorous for any ``N``. ``N`` is the smallest order with
    ``2 ||A|| R_N <= rtol * bound``; :class:`LRBoundError` if none up to
    ``n_max`` qualifies.
    """
    pc = path_counts(T, R, min(n_max + 1, K_CAP), delta_sites)
    x = 2.0 * psi_norm * abs(t)
    wterms = _series_terms(x, pc.weighted)
    tterms = _series_terms(x, pc.total)
    best = None
    for N in range(0, len(pc.total)):
        head = a_norm * 2.0 * d_norm * (pc.delta_R + fsum(wterms[:N]))
        rem = 2.0 * a_norm * d_norm * tterms[N]
        best = (head + rem, rem)
        if rem <= rtol * (head + rem) or rem == 0.0:
            return best
    raise LRBoundError(f"remainder {best[1]:.3e} above rtol {rtol:.1e} of bound {best[0]:.3e} at N = {len(pc.total) - 1}")


def integrated_bound(
    T: SubLattice,
    R: SubLattice | Element,
    psi_norm: float,
    a_norm: float,
    d_norm: float,
    t: float,
    delta_sites: Iterable[Site],
    rtol: float = 1e-6,
) -> tuple[float, float]:
    """``int_0^|t|`` of :func:`generic_bound`, integrated term by term."""
    pc = path_counts(T, R, K_CAP, delta_sites)
    s = abs(t)
    x = 2.0 * psi_norm * s
    # int_0^s (2 psi u)^k / k! du = s * x^k / (k+1)!
    wterms = [s * v / (k + 1) for k, v in enumerate(_series_terms(x, pc.weighted), start=1)]
    tterms = [s * v / (k + 1) for k, v in enumerate(_series_terms(x, pc.total), start=1)]
    best = None
    for N in range(0, len(pc.total)):
        head = 2.0 * a_norm * d_norm * (pc.delta_R * s + fsum(wterms[:N]))
        rem = 2.0 * a_norm * d_norm * tterms[N]
        best = (head + rem, rem)
        if rem <= rtol * (head + rem) or rem == 0.0:
            return best
    raise LRBoundError(f"remainder {best[1]:.3e} above rtol {rtol:.1e} of bound {best[0]:.3e}")


def boundary_norm_sum(T: SubLattice, ambient: SubLattice, term_norms: Mapping[Element, float]) -> float:
    """``sum' ||Psi(q)||`` over ``q in Delta_ambient(T)``."""
    return fsum(term_norms.get(q, 0.0) for q in boundary_set(ambient, T, "both"))


def convergence_bound(
    small: SubLattice,
    big: SubLattice,
    support: SubLattice,
    psi_norm: float,
    a_norm: float,
    term_norms: Mapping[Element, float],
    t: float,
) -> float:
    """Bound on ``||alpha^big_t(A) - alpha^small_t(A)||`` for ``A`` supported in ``support``.

    The difference of the two evolutions is the integral of
    ``[D, alpha^small_s(A)]`` with ``D`` the sum of interaction terms crossing
    from ``small`` into ``big``.
    """
    d_norm = boundary_norm_sum(small, big, term_norms)
    if d_norm == 0.0 or t == 0:
        return 0.0
    return integrated_bound(small, support, psi_norm, a_norm, d_norm, t, delta_region(small, big))[0]


# 3D closed forms ----------------------------------------------------------------------------

@dataclass(frozen=True)
class LRBoundInput:
    """Inputs of the cube-to-cube estimates (``d`` inner and ``n`` outer radius)."""

    d: int
    n: int
    t: float
    psi_norm: float
    a_norm: float = 1.0
    d_norm: float = 1.0
    dimension: int = 3

    def __post_init__(self) -> None:
        if min(self.psi_norm, self.a_norm, self.d_norm) < 0:
            raise LRBoundError("norms must be nonnegative")
        if self.d < 0 or self.n < 0:
            raise LRBoundError("radii must be nonnegative")

    def require_closed_form(self) -> None:
        if self.dimension != 3:
            raise LRBoundError("closed-form bounds are stated for dimension 3")
        if not self.n > self.d + 4:
            raise LRBoundError(f"closed forms need n > d + 4, got d={self.d}, n={self.n}")


def _exp_tail(x: float, k0: int) -> list[float]:
    """Terms ``x^k / k!`` for ``k >= k0`` until negligible."""
    if x == 0.0:
        return [1.0] if k0 == 0 else []
    term = 1.0
    for k in range(1, k0 + 1):
        term *= x / k
    out = [term]
    k = k0
    while True:
        k += 1
        term *= x / k
        out.append(term)
        if k > x and term <= 1e-18 * fsum(out):
            return out


def bound_3d_tail(inp: LRBoundInput) -> float:
    """``2 ||A|| ||D|| (2d+1)^2 sum_{k >= n-d-2} (5/8) (96 psi |t|)^k / k!``."""
    inp.require_closed_form()
    x = 96.0 * inp.psi_norm * abs(inp.t)
    return 2.0 * inp.a_norm * inp.d_norm * (2 * inp.d + 1) ** 2 * 0.625 * fsum(_exp_tail(x, inp.n - inp.d - 2))


def convergence_bound_3d(inp: LRBoundInput) -> float:
    """``(75/192) ||A|| (2d+1)^2 (2n+1)^2 (96 psi |t|)^(n-d-1) / (n-d-2)! exp(96 psi |t|)``."""
    inp.require_closed_form()
    x = 96.0 * inp.psi_norm * abs(inp.t)
    k = inp.n - inp.d - 2
    return (75.0 / 192.0) * inp.a_norm * (2 * inp.d + 1) ** 2 * (2 * inp.n + 1) ** 2 * x ** (k + 1) / factorial(k) * exp(x)


def a_k_majorant_3d(d: int, k: int) -> int:
    """``30 (2d+1)^2 48^(k-1)``."""
    return 30 * (2 * d + 1) ** 2 * 48 ** (k - 1)


# numerical experiment --------------------------------------------------------------------------

@dataclass
class LRRow:
    t: float
    measured: float
    generic_bound: float
    closed_form_bound: float | None

    @property
    def violated(self) -> bool:
        return self.measured > self.generic_bound


def commutator_experiment(D, A, plan, t_grid: Sequence[float], T: SubLattice | None = None) -> list[LRRow]:
    """Measured ``||[D, alpha_t(A)]||`` next to the generic bound.

    ``A`` and ``D`` are :class:`~lgtlab.opalg.Operator` with supports set.
    The volume ``T`` defaults to the plan layout's lattice.
    """
    from .dynamics import heisenberg, sector_commutator_norms
    from .opalg import operator_norm

    T = T if T is not None else plan.layout.lattice
    if T is None or A.support is None or D.support is None:
        raise LRBoundError("the volume and the supports of A and D must be known")
    psi = plan.hamiltonian.psi_norm
    a_norm = operator_norm(A.matrix)
    d_norm = operator_norm(D.matrix)
    t_grid = [float(t) for t in t_grid]
    if plan.method == "sector":
        measured = sector_commutator_norms(plan, D, A, t_grid)
    else:
        measured = []
        for t in t_grid:
            At = heisenberg(A, plan, t).matrix
            measured.append(operator_norm(D.matrix @ At - At @ D.matrix))
    rows = []
    for t, m in zip(t_grid, measured):
        gb, _ = generic_bound(T, A.support, psi, a_norm, d_norm, t, D.support.sites)
        rows.append(LRRow(t, float(m), gb, None))
    return rows
