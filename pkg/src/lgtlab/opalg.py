"""Operator workbench: Hilbert layouts, sparse operators, embeddings and spectra.

The state space of a sublattice is the Fock space of its fermion modes
(Jordan-Wigner ordered, see :mod:`lgtlab.fermions`) tensored with one
truncated factor per link, in the order of ``HilbertLayout.links``. The Fock
factor is leftmost, so a basis index is ``fock_index * link_dim + link_index``.
"""

from __future__ import annotations

import io
import struct
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .fermions import FermionLayout, mode_annihilator, parity_diag
from .lattice import Link, SubLattice, support_union

DENSE_THRESHOLD = 2048


class OperatorError(ValueError):
    """Layout mismatch, bad parity or malformed input."""


class NormConvergenceError(RuntimeError):
    """Power iteration hit its cap; ``bracket`` holds (lower, upper) bounds."""

    def __init__(self, msg: str, bracket: tuple[float, float]):
        super().__init__(msg)
        self.bracket = bracket


class LanczosError(RuntimeError):
    """Lanczos failed to converge; ``restarts`` counts the restarts performed."""

    def __init__(self, msg: str, restarts: int):
        super().__init__(msg)
        self.restarts = restarts


# layout ---------------------------------------------------------------------------

class HilbertLayout:
    """Tensor factorization: fermion Fock factor followed by link factors.

    Parameters
    ----------
    fermion : FermionLayout or None
        ``None`` for pure-gauge systems.
    links : sequence of Link
        Link factors in storage order.
    link_dims : sequence of int or int
        Per-link dimensions.
    lattice : SubLattice, optional
        The sublattice the layout was built for (used as default support).
    """

    def __init__(
        self,
        fermion: FermionLayout | None,
        links: Sequence[Link],
        link_dims: Sequence[int] | int,
        lattice: SubLattice | None = None,
    ) -> None:
        self.fermion = fermion
        self.links: tuple[Link, ...] = tuple(links)
        if isinstance(link_dims, int):
            link_dims = [link_dims] * len(self.links)
        self.link_dims: tuple[int, ...] = tuple(int(d) for d in link_dims)
        if len(self.link_dims) != len(self.links):
            raise OperatorError("one dimension per link is required")
        if len(set(self.links)) != len(self.links):
            raise OperatorError("duplicate link factors")
        self.lattice = lattice
        self.link_index = {ln: i for i, ln in enumerate(self.links)}

    @property
    def n_modes(self) -> int:
        return 0 if self.fermion is None else self.fermion.n_modes

    @property
    def fock_dim(self) -> int:
        return 2**self.n_modes

    @cached_property
    def link_dim(self) -> int:
        return int(np.prod(self.link_dims, dtype=np.int64)) if self.links else 1

    @property
    def total_dim(self) -> int:
        return self.fock_dim * self.link_dim

    def __repr__(self) -> str:
        return f"HilbertLayout(modes={self.n_modes}, links={len(self.links)}, dim={self.total_dim})"

    def same_as(self, other: "HilbertLayout") -> bool:
        fa, fb = self.fermion, other.fermion
        same_f = (fa is None and fb is None) or (
            fa is not None and fb is not None and fa == fb
        )
        return same_f and self.links == other.links and self.link_dims == other.link_dims

    # basis helpers --------------------------------------------------------------
    @cached_property
    def link_digits(self) -> np.ndarray:
        """Per-link basis indices of every link-product basis state, shape ``(link_dim, n_links)``."""
        idx = np.arange(self.link_dim, dtype=np.int64)
        out = np.empty((self.link_dim, len(self.links)), dtype=np.int16)
        for i in range(len(self.links) - 1, -1, -1):
            out[:, i] = idx % self.link_dims[i]
            idx //= self.link_dims[i]
        return out

    @cached_property
    def parity_full(self) -> np.ndarray:
        """Fermion parity of every basis state."""
        if self.fermion is None:
            return np.ones(self.total_dim, dtype=np.int8)
        return np.repeat(parity_diag(self.fermion).astype(np.int8), self.link_dim)

    # operator construction -------------------------------------------------------
    def link_part(self, ops: Mapping[Link, sp.spmatrix]) -> sp.csr_matrix:
        """Kronecker product over link factors, identity on unlisted links."""
        for ln in ops:
            if ln not in self.link_index:
                raise OperatorError(f"{ln} is not a factor of this layout")
        out = sp.identity(1, dtype=complex, format="csr")
        run = 1
        for ln, d in zip(self.links, self.link_dims):
            if ln in ops:
                if run > 1:
                    out = sp.kron(out, sp.identity(run, dtype=complex), format="csr")
                    run = 1
                m = sp.csr_matrix(ops[ln], dtype=complex)
                if m.shape != (d, d):
                    raise OperatorError(f"operator on {ln} has shape {m.shape}, expected {(d, d)}")
                out = sp.kron(out, m, format="csr")
            else:
                run *= d
        if run > 1:
            out = sp.kron(out, sp.identity(run, dtype=complex), format="csr")
        return out

    def product(
        self,
        fermion: sp.spmatrix | None = None,
        links: Mapping[Link, sp.spmatrix] | None = None,
    ) -> sp.csr_matrix:
        """``fermion (x) links`` with identities on the remaining factors."""
        f = sp.identity(self.fock_dim, dtype=complex, format="csr") if fermion is None else sp.csr_matrix(fermion)
        if f.shape != (self.fock_dim, self.fock_dim):
            raise OperatorError("fermion factor has the wrong shape")
        l = self.link_part(links or {})
        if self.link_dim == 1:
            return f.astype(complex)
        if fermion is None and not links:
            return sp.identity(self.total_dim, dtype=complex, format="csr")
        return sp.kron(f, l, format="csr")

    def diag_from_links(self, vals: Mapping[Link, np.ndarray]) -> np.ndarray:
        """Diagonal of ``sum_l diag(vals[l])`` on the link factors, repeated over the Fock factor."""
        d = np.zeros(self.link_dim)
        digits = self.link_digits
        for ln, v in vals.items():
            d = d + np.asarray(v)[digits[:, self.link_index[ln]]]
        return np.tile(d, self.fock_dim)

    def annihilator(self, k: int) -> sp.csr_matrix:
        """Jordan-Wigner annihilator of mode ``k`` on the full layout."""
        if self.fermion is None:
            raise OperatorError("layout has no fermions")
        return self.product(fermion=mode_annihilator(self.n_modes, k))


# operator -------------------------------------------------------------------------

def _parity_of(matrix: sp.spmatrix, layout: HilbertLayout) -> str:
    if layout.fermion is None:
        return "even"
    coo = sp.coo_matrix(matrix)
    if coo.nnz == 0:
        return "even"
    p = layout.parity_full
    prod = p[coo.row] * p[coo.col]
    if np.all(prod == 1):
        return "even"
    if np.all(prod == -1):
        return "odd"
    return "mixed"


class Operator:
    """A sparse operator on a :class:`HilbertLayout`, tagged with support and parity.

    Support tracking is conservative: arithmetic unites supports. Call
    :func:`tighten_support` for the minimal support.
    """

    __array_priority__ = 20

    def __init__(
        self,
        matrix: sp.spmatrix | np.ndarray,
        layout: HilbertLayout,
        support: SubLattice | None = None,
        parity: str | None = None,
    ) -> None:
        m = sp.csr_matrix(matrix, dtype=complex)
        if m.shape != (layout.total_dim, layout.total_dim):
            raise OperatorError(f"matrix shape {m.shape} does not match layout dim {layout.total_dim}")
        self.matrix = m
        self.layout = layout
        self.support = support if support is not None else layout.lattice
        self.parity = parity if parity is not None else _parity_of(m, layout)

    # basic protocol --------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape  # type: ignore[return-value]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __repr__(self) -> str:
        return f"Operator(dim={self.shape[0]}, nnz={self.nnz}, parity={self.parity})"

    def _check(self, other: "Operator") -> None:
        if not isinstance(other, Operator):
            raise OperatorError("operand is not an Operator")
        if other.layout is not self.layout and not self.layout.same_as(other.layout):
            raise OperatorError("layout mismatch")

    def _union(self, other: "Operator") -> SubLattice | None:
        if self.support is None or other.support is None:
            return self.layout.lattice
        if self.support.dimension != other.support.dimension:
            return self.layout.lattice
        return support_union(self.support, other.support)

    @staticmethod
    def _sum_parity(a: str, b: str, a_zero: bool, b_zero: bool) -> str | None:
        if a_zero:
            return b
        if b_zero:
            return a
        return a if a == b else None

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        par = self._sum_parity(self.parity, other.parity, self.nnz == 0, other.nnz == 0)
        return Operator(self.matrix + other.matrix, self.layout, self._union(other), par)

    def __sub__(self, other: "Operator") -> "Operator":
        return self + (-1.0) * other

    def __neg__(self) -> "Operator":
        return (-1.0) * self

    def __mul__(self, c: complex) -> "Operator":
        if isinstance(c, Operator):
            raise OperatorError("use @ for operator products")
        return Operator(self.matrix * complex(c), self.layout, self.support, self.parity)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check(other)
        if self.parity == "mixed" or other.parity == "mixed":
            par = None
        else:
            par = "even" if self.parity == other.parity else "odd"
        return Operator(self.matrix @ other.matrix, self.layout, self._union(other), par)

    @property
    def H(self) -> "Operator":
        """Adjoint."""
        return Operator(self.matrix.conj().T.tocsr(), self.layout, self.support, self.parity)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        d = self.matrix - self.matrix.conj().T
        if d.nnz == 0:
            return True
        scale = max(1.0, float(np.abs(self.matrix.data).max()) if self.nnz else 1.0)
        return float(np.abs(d.data).max()) <= tol * scale

    @classmethod
    def identity(cls, layout: HilbertLayout) -> "Operator":
        return cls(sp.identity(layout.total_dim, dtype=complex, format="csr"), layout, None, "even")

    @classmethod
    def zero(cls, layout: HilbertLayout) -> "Operator":
        return cls(sp.csr_matrix((layout.total_dim, layout.total_dim), dtype=complex), layout, None, "even")


# embedding ------------------------------------------------------------------------

def _mode_positions(sub: HilbertLayout, full: HilbertLayout) -> list[int]:
    fs, ff = sub.fermion, full.fermion
    if fs is None:
        return []
    if ff is None:
        raise OperatorError("sub layout has fermions but the full layout does not")
    if fs.internal_dim != ff.internal_dim:
        raise OperatorError("internal fermion dimensions differ")
    pos = []
    for s in fs.sites:
        if s not in ff.site_index:
            raise OperatorError(f"fermion site {s} missing from the full layout")
        pos.extend(ff.site_modes(s))
    return pos


def embedding_map(sub: HilbertLayout, full: HilbertLayout) -> tuple[np.ndarray, np.ndarray, int]:
    """Index map and Jordan-Wigner signs for embedding ``sub`` into ``full``.

    Returns ``(perm, sign, rest_dim)`` such that full basis state ``i``
    corresponds to ``sign[i]`` times the product state
    ``perm[i] = sub_index * rest_dim + rest_index`` in the sub-first ordering.
    """
    for ln in sub.links:
        if ln not in full.link_index:
            raise OperatorError(f"{ln} missing from the full layout")
        if sub.link_dims[sub.link_index[ln]] != full.link_dims[full.link_index[ln]]:
            raise OperatorError(f"dimension mismatch on {ln}")
    sub_modes = _mode_positions(sub, full)
    n_full = full.n_modes
    rest_modes = [k for k in range(n_full) if k not in set(sub_modes)]
    rest_links = [ln for ln in full.links if ln not in sub.link_index]

    # fermion part
    f_idx = np.arange(full.fock_dim, dtype=np.int64)
    bit = lambda k: (f_idx >> (n_full - 1 - k)) & 1  # noqa: E731
    f_sub = np.zeros(full.fock_dim, dtype=np.int64)
    for k in sub_modes:
        f_sub = f_sub * 2 + bit(k)
    f_rest = np.zeros(full.fock_dim, dtype=np.int64)
    for k in rest_modes:
        f_rest = f_rest * 2 + bit(k)
    # sign: pairs (r, s) with r in rest, s in sub, r < s, both occupied
    inv = np.zeros(full.fock_dim, dtype=np.int64)
    if sub_modes and rest_modes:
        rest_before = np.zeros(full.fock_dim, dtype=np.int64)
        sub_set = set(sub_modes)
        for k in range(n_full):
            b = bit(k)
            if k in sub_set:
                inv += b * rest_before
            else:
                rest_before += b
    f_sign = 1 - 2 * (inv % 2)

    # link part
    digits = full.link_digits
    l_sub = np.zeros(full.link_dim, dtype=np.int64)
    for ln in sub.links:
        l_sub = l_sub * sub.link_dims[sub.link_index[ln]] + digits[:, full.link_index[ln]]
    l_rest = np.zeros(full.link_dim, dtype=np.int64)
    rest_link_dim = 1
    for ln in rest_links:
        d = full.link_dims[full.link_index[ln]]
        l_rest = l_rest * d + digits[:, full.link_index[ln]]
        rest_link_dim *= d

    rest_dim = 2 ** len(rest_modes) * rest_link_dim
    sub_index = f_sub[:, None] * sub.link_dim + l_sub[None, :]
    rest_index = f_rest[:, None] * rest_link_dim + l_rest[None, :]
    perm = (sub_index * rest_dim + rest_index).ravel()
    sign = np.repeat(f_sign, full.link_dim)
    return perm, sign, rest_dim


def embed(op: Operator, full: HilbertLayout, support: SubLattice | None = None) -> Operator:
    """Embed ``op`` from its own layout into ``full``.

    Identity acts on the absent factors; fermionic parts are re-indexed with
    Jordan-Wigner signs so graded locality holds in ``full``. Mixed-parity
    operators with a fermionic part are rejected.
    """
    sub = op.layout
    if sub.same_as(full):
        return Operator(op.matrix, full, op.support, op.parity)
    if sub.fermion is not None and op.parity == "mixed":
        raise OperatorError("mixed-parity fermionic operators cannot be embedded")
    perm, sign, rest_dim = embedding_map(sub, full)
    big = sp.kron(op.matrix, sp.identity(rest_dim, dtype=complex, format="csr"), format="csr")
    m = big[perm][:, perm]
    if np.any(sign < 0):
        s = sp.diags(sign.astype(complex))
        m = s @ m @ s
    return Operator(m.tocsr(), full, support if support is not None else op.support, op.parity)


# norms ----------------------------------------------------------------------------

def _as_matrix(op) -> sp.spmatrix | np.ndarray:
    return op.matrix if isinstance(op, Operator) else op


def operator_norm(
    op,
    tol: float = 1e-10,
    dense_threshold: int = DENSE_THRESHOLD,
    seed: int = 0,
    max_iter: int = 20000,
) -> float:
    """Largest singular value.

    Dense SVD below ``dense_threshold``; otherwise power iteration on
    ``A^* A`` from a deterministic start vector seeded by ``(seed, dim)``.
    """
    A = _as_matrix(op)
    n = A.shape[0]
    if n == 0:
        return 0.0
    if n <= dense_threshold:
        M = A.toarray() if sp.issparse(A) else np.asarray(A)
        return float(np.linalg.norm(M, 2)) if M.size else 0.0
    A = sp.csr_matrix(A)
    AH = A.conj().T.tocsr()
    if A.nnz == 0:
        return 0.0
    absA = abs(A)
    upper = float(np.sqrt(absA.sum(axis=0).max() * absA.sum(axis=1).max()))
    rng = np.random.default_rng([seed, n])
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    rho_old = 0.0
    for _ in range(max_iter):
        w = AH @ (A @ v)
        rho = float(np.vdot(v, w).real)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(rho - rho_old) <= tol * rho:
            return float(np.sqrt(rho))
        rho_old = rho
    lower = float(np.sqrt(max(rho_old, 0.0)))
    raise NormConvergenceError("power iteration did not converge", (lower, upper))


def hermitian_norm(op, tol: float = 1e-10, dense_threshold: int = DENSE_THRESHOLD, seed: int = 0) -> float:
    """Norm of a Hermitian operator from its extreme eigenvalues."""
    A = _as_matrix(op)
    n = A.shape[0]
    if n <= dense_threshold:
        M = A.toarray() if sp.issparse(A) else np.asarray(A)
        ev = np.linalg.eigvalsh(M)
        return float(max(abs(ev[0]), abs(ev[-1])))
    lo, _ = lanczos_lowest(lambda x: A @ x, n, 1, tol=tol, seed=seed)
    hi, _ = lanczos_lowest(lambda x: -(A @ x), n, 1, tol=tol, seed=seed)
    return float(max(abs(lo[0]), abs(hi[0])))


# commutators -----------------------------------------------------------------------

def commutator(a: Operator, b: Operator) -> Operator:
    """``ab - ba``."""
    return a @ b - b @ a


def graded_commutator(a: Operator, b: Operator) -> Operator:
    """``ab - (-1)^{|a||b|} ba`` using the parity tags."""
    if a.parity == "mixed" or b.parity == "mixed":
        raise OperatorError("graded commutator needs homogeneous parity")
    if a.parity == "odd" and b.parity == "odd":
        return a @ b + b @ a
    return commutator(a, b)


# spectra --------------------------------------------------------------------------

def _require_hermitian(A, tol: float = 1e-10) -> None:
    if sp.issparse(A):
        d = A - A.conj().T
        big = float(np.abs(A.data).max()) if A.nnz else 1.0
        bad = d.nnz and float(np.abs(d.data).max()) > tol * max(1.0, big)
    else:
        bad = not np.allclose(A, np.conj(A).T, atol=tol * max(1.0, float(np.abs(A).max(initial=0.0))))
    if bad:
        raise OperatorError("operator is not Hermitian")


def spectrum_dense(op) -> np.ndarray:
    """All eigenvalues of a Hermitian operator, ascending."""
    A = _as_matrix(op)
    _require_hermitian(A)
    M = A.toarray() if sp.issparse(A) else np.asarray(A)
    return np.linalg.eigvalsh(M)


def lanczos_lowest(
    matvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    k: int,
    tol: float = 1e-10,
    krylov_dim: int | None = None,
    max_restarts: int = 500,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``k`` eigenpairs by restarted Lanczos with full reorthogonalization.

    One Ritz pair is locked per cycle once its residual falls below
    ``tol * max(1, |theta|)``; later cycles work in the orthogonal complement
    of the locked vectors, which finds degenerate copies as well.
    """
    if k > n:
        raise OperatorError("cannot request more eigenpairs than the dimension")
    rng = np.random.default_rng([seed, n])
    m = krylov_dim or min(n, max(2 * k + 30, 60))
    locked = np.zeros((n, 0), dtype=complex)

    def project(w: np.ndarray) -> np.ndarray:
        if locked.shape[1]:
            w = w - locked @ (locked.conj().T @ w)
        return w

    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    restarts = 0
    while locked.shape[1] < k:
        room = n - locked.shape[1]
        mm = min(m, room)
        v = project(v)
        v = project(v)
        nv = np.linalg.norm(v)
        if nv < 1e-14:
            v = project(rng.standard_normal(n) + 1j * rng.standard_normal(n))
            nv = np.linalg.norm(v)
        V = np.zeros((n, mm + 1), dtype=complex)
        V[:, 0] = v / nv
        alpha = np.zeros(mm)
        beta = np.zeros(mm)
        steps = mm
        for j in range(mm):
            w = project(matvec(V[:, j]))
            alpha[j] = float(np.vdot(V[:, j], w).real)
            for _ in range(2):
                w = w - V[:, : j + 1] @ (V[:, : j + 1].conj().T @ w)
                w = project(w)
            beta[j] = np.linalg.norm(w)
            if beta[j] <= 1e-13 * max(1.0, abs(alpha[j])):
                steps = j + 1
                beta[j] = 0.0
                break
            V[:, j + 1] = w / beta[j]
        T = np.diag(alpha[:steps]) + np.diag(beta[: steps - 1], 1) + np.diag(beta[: steps - 1], -1)
        theta, S = np.linalg.eigh(T)
        res = abs(beta[steps - 1]) * np.abs(S[-1, :])
        Y = V[:, :steps] @ S
        if res[0] <= tol * max(1.0, abs(theta[0])):
            y = project(Y[:, 0])
            y = project(y)
            y /= np.linalg.norm(y)
            locked = np.column_stack([locked, y])
            restarts = 0
            rest = Y[:, 1 : 1 + (k - locked.shape[1])]
            v = rest.sum(axis=1) if rest.shape[1] else np.zeros(n, dtype=complex)
        else:
            restarts += 1
            if restarts > max_restarts:
                raise LanczosError("Lanczos did not converge", restarts)
            v = Y[:, : max(1, k - locked.shape[1])].sum(axis=1)
        noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v = v + 1e-4 * np.linalg.norm(v) / np.sqrt(n) * noise if np.linalg.norm(v) > 0 else noise
    # final Rayleigh-Ritz on the locked space
    Q, _ = np.linalg.qr(locked)
    HQ = np.column_stack([matvec(Q[:, i]) for i in range(Q.shape[1])])
    Hs = Q.conj().T @ HQ
    vals, U = np.linalg.eigh((Hs + Hs.conj().T) / 2)
    return vals, Q @ U


def lowest_eigenpairs(
    op,
    k: int,
    tol: float = 1e-10,
    dense_threshold: int = DENSE_THRESHOLD,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``k`` eigenpairs of a Hermitian operator (ascending)."""
    A = _as_matrix(op)
    _require_hermitian(A)
    n = A.shape[0]
    if n <= dense_threshold:
        M = A.toarray() if sp.issparse(A) else np.asarray(A)
        vals, vecs = np.linalg.eigh(M)
        return vals[:k], vecs[:, :k]
    A = sp.csr_matrix(A)
    return lanczos_lowest(lambda x: A @ x, n, k, tol=tol, seed=seed)


def group_degenerate(vals: Sequence[float], tol_abs: float = 1e-9, tol_rel: float = 1e-9) -> list[list[int]]:
    """Group ascending eigenvalues whose neighbours differ by less than the threshold."""
    vals = list(vals)
    if not vals:
        return []
    spread = max(vals) - min(vals)
    thr = max(tol_abs, tol_rel * spread)
    groups = [[0]]
    for i in range(1, len(vals)):
        if vals[i] - vals[groups[-1][0]] <= thr:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


# support ---------------------------------------------------------------------------

def tighten_support(op: Operator, tol: float = 1e-12) -> SubLattice:
    """Minimal support: sites whose modes and links whose factors the operator touches."""
    lay = op.layout
    if lay.lattice is None:
        raise OperatorError("layout has no lattice attached")
    dim = lay.lattice.dimension
    A = op.matrix
    scale = max(1.0, float(np.abs(A.data).max()) if A.nnz else 1.0)

    def nonzero(M: sp.spmatrix) -> bool:
        M = sp.csr_matrix(M)
        return M.nnz > 0 and float(np.abs(M.data).max()) > tol * scale

    sites: set = set()
    links: set = set()
    for ln, d in zip(lay.links, lay.link_dims):
        shift = sp.csr_matrix(np.roll(np.eye(d), 1, axis=0))
        clock = sp.diags(np.exp(2j * np.pi * np.arange(d) / d))
        for g in (shift, clock):
            G = lay.product(links={ln: g})
            if nonzero(A @ G - G @ A):
                links.add(ln)
                sites.update(ln.sites)
                break
    if lay.fermion is not None:
        P = sp.diags(lay.parity_full.astype(complex))
        even = (A + P @ A @ P) / 2
        odd = (A - P @ A @ P) / 2
        for s in lay.fermion.sites:
            for k in lay.fermion.site_modes(s):
                c = lay.annihilator(k)
                hit = False
                for g in (c, c.conj().T):
                    if nonzero(even @ g - g @ even) or nonzero(odd @ g + g @ odd):
                        hit = True
                        break
                if hit:
                    sites.add(s)
                    break
    return SubLattice(dim, sites, links)


# serialization -----------------------------------------------------------------------

MAGIC = b"LGTOP"
VERSION = 1


def write_operator(op, fh: io.BufferedIOBase) -> None:
    """Binary triple format (little endian).

    ``b"LGTOP"``, version byte, ``u64 rows, cols, nnz``, then ``indptr``
    (``rows+1`` x i64), ``indices`` (``nnz`` x i64), ``data`` (``nnz`` x
    complex128).
    """
    A = sp.csr_matrix(_as_matrix(op), dtype=complex)
    A.sort_indices()
    fh.write(MAGIC)
    fh.write(bytes([VERSION]))
    fh.write(struct.pack("<QQQ", A.shape[0], A.shape[1], A.nnz))
    fh.write(A.indptr.astype("<i8").tobytes())
    fh.write(A.indices.astype("<i8").tobytes())
    fh.write(A.data.astype("<c16").tobytes())


def read_operator(fh: io.BufferedIOBase) -> sp.csr_matrix:
    head = fh.read(len(MAGIC) + 1)
    if head[: len(MAGIC)] != MAGIC:
        raise OperatorError("not an operator file")
    if head[-1] != VERSION:
        raise OperatorError(f"unsupported version {head[-1]}")
    rows, cols, nnz = struct.unpack("<QQQ", fh.read(24))
    indptr = np.frombuffer(fh.read(8 * (rows + 1)), dtype="<i8")
    indices = np.frombuffer(fh.read(8 * nnz), dtype="<i8")
    data = np.frombuffer(fh.read(16 * nnz), dtype="<c16")
    return sp.csr_matrix((data.copy(), indices.copy(), indptr.copy()), shape=(rows, cols))


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out
