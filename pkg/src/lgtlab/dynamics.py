"""Finite-volume Heisenberg dynamics, interaction-picture cocycle and Dyson series.

Three evolution methods are available.

``dense``
    Full eigendecomposition of ``H``; exact up to rounding.
``krylov``
    Action of ``exp(itH)`` on vectors and dense operator columns via
    :func:`scipy.sparse.linalg.expm_multiply`, with an a-posteriori norm
    check against the plan tolerance.
``sector``
    For U(1) layouts: every gauge-invariant operator is block diagonal in the
    joint eigenbasis of the Gauss charges, so ``H`` and sector-diagonal
    observables are diagonalized block by block. Blocks of equal size are
    batched through :func:`numpy.linalg.eigh`.

Time is measured in units with ``hbar = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial, fsum
from typing import Callable, Sequence

import numpy as np
import numpy.polynomial.chebyshev as C
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from .gauge import SectorDecomposition, is_sector_diagonal, sector_decomposition
from .hamiltonian import HamiltonianTerms, assemble
from .lattice import SubLattice
from .opalg import DENSE_THRESHOLD, HilbertLayout, Operator, embed, operator_norm

METHODS = ("auto", "dense", "krylov", "sector")
SPARSE_BUDGET = 200_000
SECTOR_BUDGET = 5_000_000
SECTOR_BLOCK_MAX = 2048
KRYLOV_OPERATOR_MAX = 4096


class DynamicsError(RuntimeError):
    """Evolution, quadrature or tolerance failure."""


class InfeasibleDimension(DynamicsError):
    """Requested computation exceeds the configured dimension budget."""


# plan --------------------------------------------------------------------------------

@dataclass
class EvolutionPlan:
    """How to evolve with a given Hamiltonian.

    Parameters
    ----------
    hamiltonian : HamiltonianTerms
    method : {"auto", "dense", "krylov", "sector"}
        ``auto`` picks dense below ``dense_threshold``, then sector (U(1)),
        then krylov within ``sparse_budget``.
    tolerance : float
        Accepted norm defect of the Krylov action.
    """

    hamiltonian: HamiltonianTerms
    method: str = "auto"
    tolerance: float = 1e-10
    dense_threshold: int = DENSE_THRESHOLD
    sparse_budget: int = SPARSE_BUDGET
    sector_budget: int = SECTOR_BUDGET
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise DynamicsError(f"unknown evolution method '{self.method}'")
        if not self.tolerance > 0:
            raise DynamicsError("tolerance must be positive")
        n = self.dim
        if self.method == "auto":
            if n <= self.dense_threshold:
                self.method = "dense"
            elif self.hamiltonian.model.kind == "u1" and n <= self.sector_budget:
                self.method = "sector"
            elif n <= self.sparse_budget:
                self.method = "krylov"
            else:
                lay = self.hamiltonian.layout
                sector = (
                    f"sector budget {self.sector_budget}" if self.hamiltonian.model.kind == "u1"
                    else "sector method needs U(1)"
                )
                raise InfeasibleDimension(
                    f"total_dim = fock_dim {lay.fock_dim} x link_dim {lay.link_dim} = {n} exceeds "
                    f"dense threshold {self.dense_threshold}, {sector} and sparse budget {self.sparse_budget}"
                )
        if self.method == "dense" and n > self.dense_threshold:
            raise InfeasibleDimension(f"dense evolution refused: total_dim {n} > dense threshold {self.dense_threshold}")
        if self.method == "krylov" and n > self.sparse_budget:
            raise InfeasibleDimension(f"krylov evolution refused: total_dim {n} > sparse budget {self.sparse_budget}")
        if self.method == "sector" and n > self.sector_budget:
            raise InfeasibleDimension(f"sector evolution refused: total_dim {n} > sector budget {self.sector_budget}")

    @property
    def layout(self) -> HilbertLayout:
        return self.hamiltonian.layout

    @property
    def dim(self) -> int:
        return self.hamiltonian.layout.total_dim

    @property
    def H(self) -> sp.csr_matrix:
        if "H" not in self._cache:
            self._cache["H"] = self.hamiltonian.total.matrix.tocsr()
        return self._cache["H"]

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached dense eigendecomposition of ``H`` (dense method only)."""
        if self.dim > self.dense_threshold:
            raise InfeasibleDimension(f"dense eigendecomposition refused: total_dim {self.dim} > {self.dense_threshold}")
        if "eig" not in self._cache:
            self._cache["eig"] = np.linalg.eigh(self.H.toarray())
        return self._cache["eig"]

    def loc_eigh(self) -> tuple[np.ndarray, np.ndarray | None]:
        """Eigenvalues of ``H_loc`` and its eigenvectors (``None`` when diagonal)."""
        if "loc" not in self._cache:
            d = self.hamiltonian.h_loc_diagonal
            if d is not None:
                self._cache["loc"] = (d, None)
            else:
                w, v = np.linalg.eigh(self.hamiltonian.h_loc.toarray())
                self._cache["loc"] = (w, v)
        return self._cache["loc"]

    def sectors(self) -> SectorDecomposition:
        if "sectors" not in self._cache:
            self._cache["sectors"] = sector_decomposition(self.layout, self.hamiltonian.model)
        return self._cache["sectors"]


def _matrix(A) -> sp.spmatrix | np.ndarray:
    return A.matrix if isinstance(A, Operator) else A


def _dense(A) -> np.ndarray:
    M = _matrix(A)
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=complex)


def _wrap(M, layout: HilbertLayout) -> Operator:
    return Operator(sp.csr_matrix(M), layout, None, None)


# propagators --------------------------------------------------------------------------

def propagator(plan: EvolutionPlan, t: float) -> np.ndarray:
    """Dense ``exp(itH)``."""
    w, v = plan.eigh()
    return (v * np.exp(1j * t * w)) @ v.conj().T


def loc_propagator(plan: EvolutionPlan, t: float) -> np.ndarray | sp.spmatrix:
    """``exp(itH_loc)`` (sparse diagonal when ``H_loc`` is diagonal)."""
    w, v = plan.loc_eigh()
    if v is None:
        return sp.diags(np.exp(1j * t * w)).tocsr()
    return (v * np.exp(1j * t * w)) @ v.conj().T


def evolve_vector(v: np.ndarray, plan: EvolutionPlan, t: float) -> np.ndarray:
    """``exp(itH) v`` for a vector or a block of column vectors."""
    v = np.asarray(v, dtype=complex)
    if plan.method == "dense":
        w, V = plan.eigh()
        return V @ (np.exp(1j * t * w)[:, None] * (V.conj().T @ v.reshape(len(w), -1))).reshape(v.shape)
    out = expm_multiply(1j * t * plan.H, v)
    n0 = np.linalg.norm(v, axis=0)
    n1 = np.linalg.norm(out, axis=0)
    if np.any(np.abs(n1 - n0) > plan.tolerance * np.maximum(n0, 1.0) * 10):
        raise DynamicsError(f"exponential action lost unitarity: defect {np.max(np.abs(n1 - n0)):.3e}")
    return out


def heisenberg(A, plan: EvolutionPlan, t: float) -> Operator:
    """``alpha_t(A) = exp(itH) A exp(-itH)``."""
    if t == 0:
        return _wrap(_matrix(A), plan.layout)
    if plan.method == "dense":
        w, v = plan.eigh()
        At = v.conj().T @ _dense(A) @ v
        ph = np.exp(1j * t * w)
        return _wrap(v @ (At * np.outer(ph, ph.conj())) @ v.conj().T, plan.layout)
    if plan.method == "sector":
        blocks, states = _sector_heisenberg_blocks(plan, _matrix(A), t)
        return _wrap(_assemble_blocks(blocks, states, plan.dim), plan.layout)
    if plan.dim > KRYLOV_OPERATOR_MAX:
        raise InfeasibleDimension(
            f"operator-level krylov evolution refused: {plan.dim}^2 dense entries exceed {KRYLOV_OPERATOR_MAX}^2"
        )
    X = evolve_vector(_dense(A), plan, t)
    Y = evolve_vector(X.conj().T, plan, t).conj().T
    return _wrap(Y, plan.layout)


def interaction_propagator(plan: EvolutionPlan, t: float, s: float) -> np.ndarray:
    """``U(t, s) = exp(itH_loc) exp(i(s-t)H) exp(-isH_loc)``."""
    return loc_propagator(plan, t) @ propagator(plan, s - t) @ loc_propagator(plan, -s)


def free_evolution(A, plan: EvolutionPlan, t: float) -> Operator:
    """``A(t) = Ad(exp(itH_loc))(A)``."""
    U = loc_propagator(plan, t)
    Ud = U.conj().T
    M = U @ _matrix(A) @ Ud
    return _wrap(M, plan.layout)


def cocycle(B, plan: EvolutionPlan, t: float) -> Operator:
    """Exact ``tau_t(B) = Ad(exp(itH) exp(-itH_loc))(B) = Ad(U(0, t))(B)``."""
    U = interaction_propagator(plan, 0.0, t)
    return _wrap(U @ _dense(B) @ U.conj().T, plan.layout)


# Dyson series ------------------------------------------------------------------------

def dyson_tail_bound(h_int_norm: float, b_norm: float, t: float, order: int) -> float:
    """``sum_{n>N} (2 ||H_int|| |t|)^n / n! ||B||``, evaluated without cancellation."""
    x = 2.0 * h_int_norm * abs(t)
    if x == 0.0 or b_norm == 0.0:
        return 0.0
    # leading term then a ratio recursion; stop when terms are negligible
    term = x ** (order + 1) / factorial(order + 1)
    terms = [term]
    n = order + 1
    while True:
        n += 1
        term *= x / n
        terms.append(term)
        if term <= 1e-18 * sum(terms) and n > x:
            break
    return fsum(terms) * b_norm


def _cheb_nodes(n: int, t: float) -> np.ndarray:
    x = np.cos(np.pi * (np.arange(n) + 0.5) / n)[::-1]
    return 0.5 * t * (x + 1.0)


def _dyson_factors(hint: np.ndarray, E: np.ndarray, t: float, order: int, n_nodes: int) -> list[np.ndarray]:
    """``V_k(t)`` for k = 0..order with ``V_k(s) = int_0^s V_{k-1}(r) i H_int(r) dr``.

    ``H_int(r)_{ab} = exp(ir(E_a - E_b)) H_int_{ab}`` in the eigenbasis of
    ``H_loc``. Each integral is a Chebyshev interpolant on ``[0, t]`` of
    degree ``n_nodes - 1`` integrated exactly.
    """
    d = hint.shape[0]
    r = _cheb_nodes(n_nodes, t)
    x = 2.0 * r / t - 1.0
    dE = E[:, None] - E[None, :]
    Hr = np.exp(1j * r[:, None, None] * dE[None]) * hint[None]  # (n, d, d)
    V = np.broadcast_to(np.eye(d, dtype=complex), (n_nodes, d, d)).copy()
    out = [np.eye(d, dtype=complex)]
    vander = C.chebvander(x, n_nodes - 1)
    for _ in range(order):
        integrand = 1j * np.einsum("nab,nbc->nac", V, Hr).reshape(n_nodes, -1)
        coef = np.linalg.solve(vander, integrand)
        icoef = C.chebint(coef, lbnd=-1) * (t / 2.0)
        V = (C.chebvander(x, n_nodes) @ icoef).reshape(n_nodes, d, d)
        end = C.chebval(1.0, icoef).reshape(d, d)
        out.append(end)
    return out


def dyson_cocycle(
    B,
    plan: EvolutionPlan,
    t: float,
    order: int,
    tol: float = 1e-13,
    max_nodes: int = 512,
) -> tuple[Operator, float]:
    """Order-``N`` Dyson approximation of ``tau_t(B)`` and its certified tail bound.

    Writing ``exp(itH) exp(-itH_loc) = sum_k V_k(t)``, the order-``n`` term of
    ``tau_t(B)`` is ``sum_{k+l=n} V_k B V_l^*``. The nested time integrals
    are Chebyshev interpolants integrated in closed form; the node count
    doubles until the result changes by less than ``tol`` (relative).
    """
    if order < 0:
        raise DynamicsError("order must be nonnegative")
    if plan.dim > plan.dense_threshold:
        raise InfeasibleDimension(f"Dyson series refused: total_dim {plan.dim} > {plan.dense_threshold}")
    Bm = _dense(B)
    hint_op = plan.hamiltonian.h_int
    hnorm = operator_norm(hint_op.matrix)
    bnorm = operator_norm(Bm)
    bound = dyson_tail_bound(hnorm, bnorm, t, order)
    if t == 0 or hnorm == 0 or order == 0:
        return _wrap(Bm, plan.layout), bound
    E, Q = plan.loc_eigh()
    hint = hint_op.toarray()
    if Q is not None:
        hint = Q.conj().T @ hint @ Q
        Bm = Q.conj().T @ Bm @ Q

    def series(n_nodes: int) -> np.ndarray:
        V = _dyson_factors(hint, E, t, order, n_nodes)
        acc = np.zeros_like(Bm)
        for k in range(order + 1):
            left = V[k] @ Bm
            for l in range(order + 1 - k):
                acc += left @ V[l].conj().T
        return acc

    n = 16
    prev = series(n)
    while True:
        n *= 2
        cur = series(n)
        change = np.linalg.norm(cur - prev, 2)
        if change <= tol * max(1.0, np.linalg.norm(cur, 2)):
            break
        if n >= max_nodes:
            raise DynamicsError(f"Dyson quadrature not certified: change {change:.3e} at {n} nodes")
        prev = cur
    if Q is not None:
        cur = Q @ cur @ Q.conj().T
    return _wrap(cur, plan.layout), bound


# commutator initial-value problem -------------------------------------------------------

@dataclass
class IVPResult:
    """Solution of ``f' = i[f, A(t)] + B(t)`` at the final time."""

    f: np.ndarray
    f0_norm: float
    b_integral: float
    estimate_slack: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.f, 2))


def _gl_panels(fun: Callable[[float], np.ndarray], t0: float, t1: float, panels: int, nodes: int = 8):
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(t0, t1, panels + 1)
    acc = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        h = 0.5 * (b - a)
        for xi, wi in zip(x, w):
            acc = acc + wi * h * fun(a + h * (xi + 1.0))
    return acc


def commutator_ivp(
    A: Callable[[float], np.ndarray],
    B: Callable[[float], np.ndarray],
    f0,
    t0: float,
    t1: float,
    tol: float = 1e-11,
    max_panels: int = 256,
) -> IVPResult:
    """Solve ``f'(t) = i[f(t), A(t)] + B(t)``, ``f(t0) = f0``.

    With the propagator ``U' = -i A U``, ``U(t0) = 1`` the solution is
    ``f(t) = U(t) (f0 + int U(s)^* B(s) U(s) ds) U(t)^*``. ``U`` comes from an
    adaptive high-order integrator with dense output; the integral uses
    composite Gauss-Legendre panels doubled until converged.
    """
    f0 = _dense(f0)
    d = f0.shape[0]

    def rhs(s, y):
        return (-1j * (_dense(A(s)) @ y.reshape(d, d))).ravel()

    sol = solve_ivp(rhs, (t0, t1), np.eye(d, dtype=complex).ravel(), method="DOP853",
                    rtol=1e-13, atol=1e-14, dense_output=True)
    if not sol.success:
        raise DynamicsError(f"propagator integration failed: {sol.message}")

    def U(s):
        return sol.sol(s).reshape(d, d)

    def integrand(s):
        u = U(s)
        return u.conj().T @ _dense(B(s)) @ u

    panels = 4
    prev = _gl_panels(integrand, t0, t1, panels)
    while True:
        panels *= 2
        cur = _gl_panels(integrand, t0, t1, panels)
        change = np.linalg.norm(cur - prev, 2) if np.ndim(cur) else 0.0
        if change <= tol * max(1.0, np.linalg.norm(cur, 2) if np.ndim(cur) else 1.0):
            break
        if panels >= max_panels:
            raise DynamicsError(f"integral not converged: change {change:.3e} at {panels} panels")
        prev = cur
    u1 = U(t1)
    f = u1 @ (f0 + cur) @ u1.conj().T
    bint = float(_gl_panels(lambda s: np.linalg.norm(_dense(B(s)), 2), min(t0, t1), max(t0, t1), panels))
    f0n = float(np.linalg.norm(f0, 2))
    slack = f0n + bint - float(np.linalg.norm(f, 2))
    return IVPResult(f, f0n, bint, slack)


# sector engine ----------------------------------------------------------------------------

def _pos_in_sector(sectors: SectorDecomposition) -> np.ndarray:
    pos = np.empty(len(sectors.labels), dtype=np.int64)
    within = np.arange(len(sectors.order)) - np.repeat(sectors.starts, sectors.sizes)
    pos[sectors.order] = within
    return pos


def extract_blocks(M: sp.spmatrix, states: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Dense sector blocks ``M[states[c], states[c]]``, shape ``(count, k, k)``.

    ``M`` must be sector diagonal; entries leaving a sector are not looked up.
    """
    c, k = states.shape
    rows = states.ravel()
    sub = sp.csr_matrix(M)[rows].tocoo()
    out = np.zeros((c, k, k), dtype=complex)
    r = sub.row
    out[r // k, r % k, pos[sub.col]] = sub.data
    return out


def _assemble_blocks(blocks: list[np.ndarray], states: list[np.ndarray], n: int) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for b, s in zip(blocks, states):
        c, k, _ = b.shape
        rows.append(np.repeat(s, k, axis=1).ravel())
        cols.append(np.tile(s, (1, k)).ravel())
        vals.append(b.ravel())
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _require_sector_diagonal(ops: Sequence, sectors: SectorDecomposition, what: str) -> None:
    for M in ops:
        if not is_sector_diagonal(M, sectors, tol=1e-13):
            raise DynamicsError(f"{what} is not diagonal in the Gauss charge sectors")
    if sectors.max_size > SECTOR_BLOCK_MAX:
        raise InfeasibleDimension(f"largest charge sector {sectors.max_size} exceeds block limit {SECTOR_BLOCK_MAX}")


def _evolve_block(w: np.ndarray, v: np.ndarray, At: np.ndarray, t: float) -> np.ndarray:
    ph = np.exp(1j * t * w)
    X = At * (ph[:, :, None] * ph.conj()[:, None, :])
    return v @ X @ np.conj(np.swapaxes(v, 1, 2))


def _sector_heisenberg_blocks(plan: EvolutionPlan, A, t: float):
    sectors = plan.sectors()
    H = plan.H
    _require_sector_diagonal([H, A], sectors, "operator")
    pos = _pos_in_sector(sectors)
    blocks, states_all = [], []
    for states in sectors.groups():
        Hb = extract_blocks(H, states, pos)
        Ab = extract_blocks(A, states, pos)
        w, v = np.linalg.eigh(Hb)
        At = np.conj(np.swapaxes(v, 1, 2)) @ Ab @ v
        blocks.append(_evolve_block(w, v, At, t))
        states_all.append(states)
    return blocks, states_all


def _herm_norm_batch(X: np.ndarray) -> np.ndarray:
    """Largest ``|eigenvalue|`` of each Hermitian block."""
    w = np.linalg.eigvalsh(X)
    return np.max(np.abs(w), axis=-1)


def sector_commutator_norms(plan: EvolutionPlan, D, A, times: Sequence[float]) -> np.ndarray:
    """``||[D, alpha_t(A)]||`` for Hermitian sector-diagonal ``A`` and ``D``."""
    sectors = plan.sectors()
    H, Am, Dm = plan.H, _matrix(A), _matrix(D)
    _require_sector_diagonal([H, Am, Dm], sectors, "operator")
    pos = _pos_in_sector(sectors)
    out = np.zeros(len(times))
    for states in sectors.groups():
        Hb = extract_blocks(H, states, pos)
        Ab = extract_blocks(Am, states, pos)
        Db = extract_blocks(Dm, states, pos)
        w, v = np.linalg.eigh(Hb)
        At = np.conj(np.swapaxes(v, 1, 2)) @ Ab @ v
        for i, t in enumerate(times):
            X = _evolve_block(w, v, At, t)
            Cm = 1j * (Db @ X - X @ Db)  # Hermitian for Hermitian A, D
            out[i] = max(out[i], float(_herm_norm_batch(Cm).max()))
    return out


def sector_difference_norms(
    hamiltonians: Sequence[sp.spmatrix], A, sectors: SectorDecomposition, times: Sequence[float]
) -> np.ndarray:
    """``||alpha^{(k+1)}_t(A) - alpha^{(k)}_t(A)||`` for consecutive Hamiltonians.

    Returns shape ``(len(hamiltonians) - 1, len(times))``.
    """
    Am = _matrix(A)
    _require_sector_diagonal(list(hamiltonians) + [Am], sectors, "operator")
    pos = _pos_in_sector(sectors)
    out = np.zeros((len(hamiltonians) - 1, len(times)))
    for states in sectors.groups(max_entries=1_500_000):
        Ab = extract_blocks(Am, states, pos)
        prev = None
        for h_i, H in enumerate(hamiltonians):
            Hb = extract_blocks(H, states, pos)
            w, v = np.linalg.eigh(Hb)
            At = np.conj(np.swapaxes(v, 1, 2)) @ Ab @ v
            cur = [_evolve_block(w, v, At, t) for t in times]
            if prev is not None:
                for j in range(len(times)):
                    out[h_i - 1, j] = max(out[h_i - 1, j], float(_herm_norm_batch(cur[j] - prev[j]).max()))
            prev = cur
    return out


# convergence study --------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    volume: int
    t: float
    diff_norm: float
    lr_bound: float


def convergence_study(
    A,
    volumes: Sequence[SubLattice],
    t_grid: Sequence[float],
    params,
    model,
    layout: HilbertLayout,
    method: str = "auto",
    dense_threshold: int = DENSE_THRESHOLD,
    sparse_budget: int = SPARSE_BUDGET,
    sector_budget: int = SECTOR_BUDGET,
) -> list[ConvergenceRow]:
    """Cauchy differences ``||alpha^{S_{k+1}}_t(A) - alpha^{S_k}_t(A)||`` on nested volumes.

    All Hamiltonians act on ``layout`` (built for the largest volume). Each
    row carries the integrated Lieb-Robinson bound for the same difference.
    ``volume`` is the site count of ``S_{k+1}``.
    """
    from .liebrobinson import convergence_bound

    if len(volumes) < 2:
        raise DynamicsError("a convergence study needs at least two volumes")
    for small, big in zip(volumes, volumes[1:]):
        if not small.issubset(big):
            raise DynamicsError("volumes must be nested")
    n = layout.total_dim
    budget = {"dense": dense_threshold, "krylov": sparse_budget, "sector": sector_budget}
    if method == "auto":
        method = "dense" if n <= dense_threshold else ("sector" if model.kind == "u1" else "krylov")
    if n > budget[method] or (method == "krylov" and n > KRYLOV_OPERATOR_MAX):
        cap = budget[method] if method != "krylov" else min(sparse_budget, KRYLOV_OPERATOR_MAX)
        raise InfeasibleDimension(
            f"volume with {len(volumes[-1].sites)} sites needs total_dim {n} > {method} budget {cap}"
        )
    if not isinstance(A, Operator):
        A = Operator(sp.csr_matrix(A), layout)
    if not A.layout.same_as(layout):
        A = embed(A, layout)
    terms = [assemble(S, params, model, layout) for S in volumes]
    a_norm = operator_norm(A.matrix)
    supp = A.support if A.support is not None else volumes[0]
    t_grid = list(t_grid)
    if method == "sector":
        sectors = sector_decomposition(layout, model)
        table = sector_difference_norms([h.total.matrix for h in terms], A.matrix, sectors, t_grid)
    else:
        table = np.zeros((len(volumes) - 1, len(t_grid)))
        for k in range(len(volumes) - 1):
            p0 = EvolutionPlan(terms[k], method, dense_threshold=dense_threshold, sparse_budget=sparse_budget)
            p1 = EvolutionPlan(terms[k + 1], method, dense_threshold=dense_threshold, sparse_budget=sparse_budget)
            for j, t in enumerate(t_grid):
                diff = heisenberg(A, p1, t).matrix - heisenberg(A, p0, t).matrix
                table[k, j] = operator_norm(diff)
    rows = []
    for k in range(len(volumes) - 1):
        big = terms[k + 1]
        psi = max(terms[k].psi_norm, big.psi_norm)
        for j, t in enumerate(t_grid):
            lr = convergence_bound(volumes[k], volumes[k + 1], supp, psi, a_norm, big.term_norms, t)
            rows.append(ConvergenceRow(len(volumes[k + 1].sites), float(t), float(table[k, j]), lr))
    return rows
