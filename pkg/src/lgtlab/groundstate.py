"""Finite-volume ground states, spectral subadditivity and ground-state certificates.

Eigenvalue routes:

* dense diagonalization up to the dense threshold,
* for U(1) layouts, exact minimization over Gauss-charge sector blocks
  (every Hamiltonian here is sector diagonal),
* restarted Lanczos otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import fsum
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import norm as sparse_norm

from .fermions import mode_annihilator
from .gauge import SectorDecomposition, is_sector_diagonal, sector_decomposition
from .hamiltonian import (
    CouplingParams,
    HamiltonianTerms,
    assemble,
    assemble_parts,
    local_term_norm,
    make_layout,
)
from .lattice import Element, Link, SubLattice, boundary_set, element_sites
from .linkspace import GaugeGroupModel
from .opalg import (
    DENSE_THRESHOLD,
    HilbertLayout,
    Operator,
    group_degenerate,
    lowest_eigenpairs,
)


class GroundStateError(RuntimeError):
    """Solver failure or infeasible problem size."""


@dataclass
class GroundStateResult:
    """Lowest eigenvalue, an orthonormal basis of its eigenspace, degeneracy and gap."""

    lambda_grnd: float
    eigenspace: np.ndarray
    degeneracy: int
    gap: float
    residual: float
    method: str = "dense"

    @property
    def vector(self) -> np.ndarray:
        return self.eigenspace[:, 0]


def _matrix(H) -> sp.spmatrix | np.ndarray:
    if isinstance(H, HamiltonianTerms):
        return H.total.matrix
    if isinstance(H, Operator):
        return H.matrix
    return H


def _residual(M, V: np.ndarray, lam: float) -> float:
    R = M @ V - lam * V
    return float(np.max(np.linalg.norm(R, axis=0))) if V.size else 0.0


def ground(
    H,
    tol: float = 1e-10,
    tol_abs: float = 1e-9,
    tol_rel: float = 1e-9,
    dense_threshold: int = DENSE_THRESHOLD,
    method: str = "auto",
    layout: HilbertLayout | None = None,
    model: GaugeGroupModel | None = None,
    seed: int = 0,
) -> GroundStateResult:
    """Lowest eigenpairs of a Hermitian Hamiltonian with degeneracy detection.

    ``H`` may be :class:`HamiltonianTerms`, an :class:`Operator` or a matrix.
    ``method`` is ``auto``, ``dense``, ``sector`` or ``lanczos``.
    """
    M = _matrix(H)
    n = M.shape[0]
    if isinstance(H, HamiltonianTerms):
        layout, model = layout or H.layout, model or H.model
    if method == "auto":
        if n <= dense_threshold:
            method = "dense"
        elif model is not None and model.kind == "u1" and layout is not None:
            method = "sector"
        else:
            method = "lanczos"
    if method == "sector":
        if layout is None or model is None:
            raise GroundStateError("the sector method needs the layout and gauge model")
        return _sector_ground(sp.csr_matrix(M), sector_decomposition(layout, model), tol_abs, tol_rel)
    if method == "dense":
        if n > max(dense_threshold, 1):
            raise GroundStateError(f"dense diagonalization refused: dimension {n} > {dense_threshold}")
        Md = M.toarray() if sp.issparse(M) else np.asarray(M)
        vals, vecs = np.linalg.eigh(Md)
        return _from_spectrum(M, vals, vecs, tol_abs, tol_rel, "dense")
    if method != "lanczos":
        raise GroundStateError(f"unknown method '{method}'")
    k = 4
    while True:
        k = min(k, n)
        vals, vecs = lowest_eigenpairs(M, k, tol=tol, dense_threshold=0, seed=seed)
        groups = group_degenerate(vals, tol_abs, tol_rel)
        if len(groups) > 1 or k == n:
            return _from_spectrum(M, vals, vecs, tol_abs, tol_rel, "lanczos")
        k *= 2


def _from_spectrum(M, vals, vecs, tol_abs, tol_rel, method) -> GroundStateResult:
    groups = group_degenerate(vals, tol_abs, tol_rel)
    g0 = groups[0]
    lam = float(vals[0])
    V = vecs[:, g0]
    gap = float(vals[groups[1][0]] - lam) if len(groups) > 1 else float("inf")
    return GroundStateResult(lam, V, len(g0), gap, _residual(M, V, lam), method)


def _sector_ground(M: sp.csr_matrix, sectors: SectorDecomposition, tol_abs: float, tol_rel: float) -> GroundStateResult:
    from .dynamics import _pos_in_sector, extract_blocks

    if not is_sector_diagonal(M, sectors, tol=1e-13):
        raise GroundStateError("Hamiltonian is not diagonal in the Gauss charge sectors")
    pos = _pos_in_sector(sectors)
    n = M.shape[0]
    lows = []
    for states in sectors.groups():
        w = np.linalg.eigvalsh(extract_blocks(M, states, pos))
        lows.append(w[:, :2].ravel())
    low = np.sort(np.concatenate(lows))
    best = float(low[0])
    spread = float(low[-1] - low[0])
    thr = max(tol_abs, tol_rel * spread)
    vecs = []
    for states in sectors.groups():
        blocks = extract_blocks(M, states, pos)
        w = np.linalg.eigvalsh(blocks)
        hit = np.flatnonzero(w[:, 0] <= best + thr)
        if not len(hit):
            continue
        w, v = np.linalg.eigh(blocks[hit])
        for c, st in enumerate(states[hit]):
            for j in np.flatnonzero(w[c] <= best + thr):
                x = np.zeros(n, dtype=complex)
                x[st] = v[c][:, j]
                vecs.append(x)
    V = np.column_stack(vecs)
    above = low[low > best + thr]
    gap = float(above[0] - best) if len(above) else float("inf")
    return GroundStateResult(best, V, V.shape[1], gap, _residual(M, V, best), "sector")


def shifted(H, result: GroundStateResult) -> Operator | sp.spmatrix:
    """``H~ = H - lambda_grnd``."""
    M = _matrix(H)
    Ms = sp.csr_matrix(M) - result.lambda_grnd * sp.identity(M.shape[0], dtype=complex, format="csr")
    if isinstance(H, HamiltonianTerms):
        return Operator(Ms, H.layout, None, "even")
    if isinstance(H, Operator):
        return Operator(Ms, H.layout, H.support, H.parity)
    return Ms


# subadditivity -----------------------------------------------------------------------

@dataclass
class SubadditivityResult:
    """``lhs = lambda_n + lambda_{m\\n} - lambda_m`` against ``rhs = -sum' ||Psi(q)||``."""

    lambda_m: float
    lambda_n: float
    lambda_rest: float
    lhs: float
    rhs: float
    rhs_3d: float | None
    n_boundary_terms: int

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.lhs >= self.rhs


def split_terms(m: SubLattice, n: SubLattice):
    """Term lists of ``H_{m\\n}`` and the crossing set ``Delta_m(n)``."""
    if not n.issubset(m):
        raise GroundStateError("inner volume is not contained in the outer volume")
    nsites = frozenset(n.sites)
    rest_sites = sorted(frozenset(m.sites) - nsites)
    rest_links = sorted(frozenset(m.links) - frozenset(n.links))
    rest_int = [q for q in m.elements("both") if not (frozenset(element_sites(q)) & nsites)]
    crossing = boundary_set(m, n, "both")
    return rest_sites, rest_links, rest_int, crossing


def boundary_rhs(
    m: SubLattice, n: SubLattice, params: CouplingParams, model: GaugeGroupModel, fermions: str = "reduced"
) -> tuple[float, float | None, float]:
    """Exact ``-sum'_{Delta_m(n)} ||Psi(q)||``, the 3D constant ``-30 (2r+1)^2 ||Psi||`` and ``||Psi||``.

    The closed form is reported when ``m`` and ``n`` are 3D cubes centred at
    the origin (``r`` the radius of ``n``); otherwise ``None``.
    """
    crossing = boundary_set(m, n, "both")
    cache: dict = {}

    def norm(q: Element) -> float:
        key = ("l", q.direction) if isinstance(q, Link) else ("p", q.mu, q.nu)
        if key not in cache:
            cache[key] = local_term_norm(q, params, model, fermions)
        return cache[key]

    exact = -fsum(norm(q) for q in crossing)
    psi = max((norm(q) for q in m.elements("both")), default=0.0)
    r = _cube_radius(n)
    closed = -30.0 * (2 * r + 1) ** 2 * psi if r is not None and _cube_radius(m) is not None and n.dimension == 3 else None
    return exact, closed, psi


def _cube_radius(S: SubLattice) -> int | None:
    xs = np.array(S.site_list)
    r = int(xs.max())
    if int(xs.min()) != -r:
        return None
    if len(S.sites) != (2 * r + 1) ** S.dimension:
        return None
    return r


def subadditivity_check(
    m_volume: SubLattice,
    n_volume: SubLattice,
    params: CouplingParams,
    model: GaugeGroupModel,
    fermions: str = "reduced",
    dense_threshold: int = DENSE_THRESHOLD,
    budget: int = 5_000_000,
) -> SubadditivityResult:
    """``lambda_n + lambda_{m\\n} - lambda_m >= -sum'_{Delta_m(n)} ||Psi(q)||``.

    ``H_{m\\n}`` carries the local terms of the sites of ``m`` outside ``n``
    and of the links of ``m`` outside ``n``, plus the interaction terms with
    no site in ``n``; hence ``H_m = H_n + H_{m\\n} + sum' Psi(q)``.
    """
    rest_sites, rest_links, rest_int, crossing = split_terms(m_volume, n_volume)
    lay_m = make_layout(m_volume, model, fermions)
    if lay_m.total_dim > budget:
        raise GroundStateError(f"outer volume needs total_dim {lay_m.total_dim} > budget {budget}")
    h_m = assemble(m_volume, params, model, lay_m)
    lay_n = make_layout(n_volume, model, fermions)
    h_n = assemble(n_volume, params, model, lay_n)
    lay_r = make_layout(m_volume, model, fermions, sites=rest_sites, links=rest_links)
    h_r = assemble_parts(lay_r, params, model, rest_sites, rest_links, rest_int)
    lam_m = ground(h_m, dense_threshold=dense_threshold).lambda_grnd
    lam_n = ground(h_n, dense_threshold=dense_threshold).lambda_grnd
    lam_r = _ground_any(h_r, model, dense_threshold)
    exact, closed, _ = boundary_rhs(m_volume, n_volume, params, model, fermions)
    lhs = lam_n + lam_r - lam_m
    return SubadditivityResult(lam_m, lam_n, lam_r, lhs, exact, closed, len(crossing))


def _ground_any(h: HamiltonianTerms, model: GaugeGroupModel, dense_threshold: int) -> float:
    if h.layout.total_dim == 1:
        return float(h.total.matrix.toarray()[0, 0].real)
    d = h.total.matrix
    off = d - sp.diags(d.diagonal())
    if off.nnz == 0 or np.abs(off.data).max() == 0:
        return float(d.diagonal().real.min())
    return ground(h, dense_threshold=dense_threshold).lambda_grnd


# certificates -----------------------------------------------------------------------

@dataclass
class CertificateResult:
    """Largest variational violation ``-Re omega(A^* [H, A])`` found."""

    random_max: float
    optimized: float
    trials: int

    @property
    def max_violation(self) -> float:
        return max(self.random_max, self.optimized)

    def flagged(self, tol: float = 1e-9) -> bool:
        return self.max_violation > tol


def _state_parts(omega) -> tuple[np.ndarray, np.ndarray]:
    """``(weights, vectors)`` of a vector state or a density matrix."""
    w = np.asarray(omega, dtype=complex)
    if w.ndim == 1:
        return np.array([1.0]), (w / np.linalg.norm(w))[:, None]
    rho = (w + w.conj().T) / 2
    p, V = np.linalg.eigh(rho)
    keep = p > 1e-14
    p = p[keep] / p[keep].sum()
    return p, V[:, keep]


def violation(omega, H, A) -> float:
    """``-Re omega(A^* [H, A])``."""
    M = _matrix(H)
    Am = A.matrix if isinstance(A, Operator) else A
    p, V = _state_parts(omega)
    total = 0.0
    for pi, v in zip(p, V.T):
        av = Am @ v
        total += pi * (np.vdot(av, M @ av) - np.vdot(av, Am @ (M @ v))).real
    return float(-total)


def random_local_operators(layout: HilbertLayout, count: int, seed: int) -> list[sp.csr_matrix]:
    """Frobenius-normalized random operators on one link factor or one site's modes."""
    rng = np.random.default_rng(seed)
    factors: list = [("link", ln) for ln in layout.links]
    if layout.fermion is not None:
        factors += [("site", s) for s in layout.fermion.sites]
    if not factors:
        raise GroundStateError("layout has no factors")
    out = []
    for _ in range(count):
        kind, f = factors[rng.integers(len(factors))]
        if kind == "link":
            d = layout.link_dims[layout.link_index[f]]
            X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            X /= np.linalg.norm(X)
            out.append(layout.product(links={f: sp.csr_matrix(X)}))
        else:
            fl = layout.fermion
            modes = fl.site_modes(f)
            ops = [mode_annihilator(fl.n_modes, k) for k in modes]
            # random polynomial in the site's modes of degree <= 2
            X = (rng.standard_normal() + 1j * rng.standard_normal()) * sp.identity(fl.fock_dim, dtype=complex)
            for c in ops:
                X = X + (rng.standard_normal() + 1j * rng.standard_normal()) * c
                X = X + (rng.standard_normal() + 1j * rng.standard_normal()) * c.conj().T
                X = X + (rng.standard_normal() + 1j * rng.standard_normal()) * (c.conj().T @ c)
            X = X / sparse_norm(X)
            out.append(layout.product(fermion=X))
    return out


def random_dense_operators(dim: int, count: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        out.append(X / np.linalg.norm(X))
    return out


def optimized_violation(omega, H, ops: Sequence) -> float:
    """``max`` of the violation over unit-coefficient combinations ``sum c_a X_a``.

    With ``K_ab = omega(X_a^* H X_b)`` and ``L_ab = omega(X_a^* X_b H)``, the
    violation of ``sum c_a X_a`` is ``-Re c^* (K - L) c``; its maximum over
    ``|c| = 1`` is ``-lambda_min`` of the Hermitian part.
    """
    M = _matrix(H)
    p, V = _state_parts(omega)
    m = len(ops)
    K = np.zeros((m, m), dtype=complex)
    L = np.zeros((m, m), dtype=complex)
    for pi, v in zip(p, V.T):
        Hv = M @ v
        XV = np.column_stack([np.asarray(X @ v).ravel() for X in ops])
        HXV = np.column_stack([np.asarray(M @ XV[:, a]).ravel() for a in range(m)])
        XHV = np.column_stack([np.asarray(X @ Hv).ravel() for X in ops])
        K += pi * (XV.conj().T @ HXV)
        L += pi * (XV.conj().T @ XHV)
    G = K - L
    G = (G + G.conj().T) / 2
    return float(max(0.0, -np.linalg.eigvalsh(G)[0]))


def ground_certificate(
    omega,
    H,
    trials: int = 50,
    seed: int = 0,
    layout: HilbertLayout | None = None,
    ops: Sequence | None = None,
) -> CertificateResult:
    """Search for ``A`` with ``omega(A^* [H, A]) < 0``.

    Trial operators are random local operators on ``layout`` (or random dense
    operators without a layout). Returns the worst single trial and the
    worst combination of all trials.
    """
    M = _matrix(H)
    if layout is None and isinstance(H, HamiltonianTerms):
        layout = H.layout
    if ops is None:
        ops = random_local_operators(layout, trials, seed) if layout is not None else random_dense_operators(M.shape[0], trials, seed)
    rnd = max((violation(omega, M, X) for X in ops), default=0.0)
    opt = optimized_violation(omega, M, ops)
    return CertificateResult(max(0.0, rnd), opt, len(ops))


# partial ground states --------------------------------------------------------------

@dataclass
class PartialGroundState:
    """``omega_n``: a convex combination of eigenvector states of one volume."""

    volume: SubLattice
    basis: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.basis = np.atleast_2d(np.asarray(self.basis, dtype=complex))
        if self.weights is None:
            self.weights = np.full(self.basis.shape[1], 1.0 / self.basis.shape[1])
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1) > 1e-12:
            raise GroundStateError("weights must be a probability vector")

    @classmethod
    def from_result(cls, volume: SubLattice, result: GroundStateResult) -> "PartialGroundState":
        return cls(volume, result.eigenspace)

    def density(self) -> np.ndarray:
        return (self.basis * self.weights) @ self.basis.conj().T

    def expectation(self, A) -> complex:
        Am = A.matrix if isinstance(A, Operator) else A
        return complex(sum(w * np.vdot(v, Am @ v) for w, v in zip(self.weights, self.basis.T)))

    def mix(self, other: "PartialGroundState", p: float) -> "PartialGroundState":
        """``p self + (1 - p) other`` on the same volume."""
        if other.volume != self.volume:
            raise GroundStateError("can only mix states of the same volume")
        return PartialGroundState(
            self.volume,
            np.hstack([self.basis, other.basis]),
            np.concatenate([p * self.weights, (1 - p) * other.weights]),
        )


def gauge_invariant_ground(result: GroundStateResult, P) -> np.ndarray | None:
    """Orthonormal basis of ``P_G E_S`` or ``None`` when the compression vanishes."""
    Pm = P.matrix if isinstance(P, Operator) else P
    W = Pm @ result.eigenspace
    U, s, _ = np.linalg.svd(np.asarray(W), full_matrices=False)
    keep = s > 1e-8
    if not keep.any():
        return None
    return U[:, keep]
