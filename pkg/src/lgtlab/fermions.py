"""CAR algebra on a finite lattice via the Jordan-Wigner encoding.

Modes are ordered by site (lexicographic), then by internal component with
the spinor index outer and the color index inner. Mode ``k`` sits at tensor
position ``k`` of the Fock space (mode 0 leftmost), each factor with basis
``(empty, occupied)``. The annihilator is

    c_k = Z x ... x Z x sigma^- x 1 x ... x 1,   sigma^- = |0><1|,

with ``k`` factors of ``Z = diag(1, -1)`` in front.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .lattice import Site

SIGMA_MINUS = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))
PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def dirac_gammas() -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Dirac-basis gamma matrices ``(gamma0, (gamma1, gamma2, gamma3))``."""
    z = np.zeros((2, 2), dtype=complex)
    i2 = np.eye(2, dtype=complex)
    g0 = np.block([[i2, z], [z, -i2]])
    gk = tuple(np.block([[z, s], [-s, z]]) for s in PAULI)
    return g0, gk  # type: ignore[return-value]


class FermionError(ValueError):
    """Unknown mode or inconsistent fermion layout."""


@dataclass(frozen=True)
class FermionLayout:
    """Ordered fermion modes on a list of sites.

    ``spinor_dim`` is 1 (reduced preset, ``gamma0 = 1``) or 4 (Dirac basis).
    ``color_dim`` matches the gauge group (1 for U(1), 2 for SU(2)).
    """

    sites: tuple[Site, ...]
    spinor_dim: int = 1
    color_dim: int = 1
    gamma0_spinor: np.ndarray = field(default=None, compare=False, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sites", tuple(sorted(tuple(s) for s in self.sites)))
        if len(set(self.sites)) != len(self.sites):
            raise FermionError("duplicate sites")
        if self.gamma0_spinor is None:
            g0 = np.eye(self.spinor_dim, dtype=complex) if self.spinor_dim == 1 else dirac_gammas()[0]
            object.__setattr__(self, "gamma0_spinor", g0)
        g0 = np.asarray(self.gamma0_spinor, dtype=complex)
        if g0.shape != (self.spinor_dim, self.spinor_dim):
            raise FermionError("gamma0 shape does not match spinor_dim")
        if not np.allclose(g0, g0.conj().T) or not np.allclose(g0 @ g0, np.eye(self.spinor_dim)):
            raise FermionError("gamma0 must be a Hermitian involution")

    @classmethod
    def reduced(cls, sites: Sequence[Site], color_dim: int = 1) -> "FermionLayout":
        return cls(tuple(sites), 1, color_dim)

    @classmethod
    def dirac(cls, sites: Sequence[Site], color_dim: int = 1) -> "FermionLayout":
        return cls(tuple(sites), 4, color_dim)

    @property
    def internal_dim(self) -> int:
        return self.spinor_dim * self.color_dim

    @property
    def gamma0(self) -> np.ndarray:
        """gamma0 on the full internal space (spinor x color)."""
        return np.kron(self.gamma0_spinor, np.eye(self.color_dim))

    @property
    def n_modes(self) -> int:
        return len(self.sites) * self.internal_dim

    @property
    def fock_dim(self) -> int:
        return 2**self.n_modes

    @cached_property
    def site_index(self) -> dict[Site, int]:
        return {s: i for i, s in enumerate(self.sites)}

    def mode(self, site: Site, component: int) -> int:
        """Mode index of ``(site, component)``; component = spinor * color_dim + color."""
        if site not in self.site_index:
            raise FermionError(f"site {site} is not in the layout")
        if not 0 <= component < self.internal_dim:
            raise FermionError(f"component {component} out of range")
        return self.site_index[site] * self.internal_dim + component

    def site_modes(self, site: Site) -> list[int]:
        base = self.mode(site, 0)
        return list(range(base, base + self.internal_dim))

    @cached_property
    def occupations(self) -> np.ndarray:
        """Occupation bits, shape ``(fock_dim, n_modes)``; mode 0 is the most significant bit."""
        idx = np.arange(self.fock_dim, dtype=np.int64)
        shifts = np.arange(self.n_modes - 1, -1, -1, dtype=np.int64)
        return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)

    def site_number(self, site: Site) -> np.ndarray:
        """Diagonal of the particle number on ``site`` over the Fock basis."""
        modes = self.site_modes(site)
        return self.occupations[:, modes].sum(axis=1)


def mode_annihilator(n_modes: int, k: int) -> sp.csr_matrix:
    """Jordan-Wigner annihilator for mode ``k`` of ``n_modes``."""
    if not 0 <= k < n_modes:
        raise FermionError(f"mode {k} out of range")
    # Z string: (-1)^(number of occupied modes before k)
    bits = np.arange(2**k, dtype=np.int64)
    par = np.zeros_like(bits)
    for i in range(k):
        par ^= (bits >> i) & 1
    string = 1 - 2 * par
    left = sp.diags(string.astype(complex))
    right = sp.identity(2 ** (n_modes - k - 1), dtype=complex, format="csr")
    return sp.kron(sp.kron(left, SIGMA_MINUS), right, format="csr")


def annihilator(layout: FermionLayout, site: Site, component: int) -> sp.csr_matrix:
    """``psi_component(site)`` on the Fock factor."""
    return mode_annihilator(layout.n_modes, layout.mode(site, component))


def smeared_annihilator(layout: FermionLayout, f: np.ndarray) -> sp.csr_matrix:
    """``a(f) = sum_k conj(f_k) c_k``, antilinear in the mode function ``f``."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (layout.n_modes,):
        raise FermionError("mode function has the wrong length")
    out = sp.csr_matrix((layout.fock_dim, layout.fock_dim), dtype=complex)
    for k, fk in enumerate(f):
        if fk != 0:
            out = out + np.conj(fk) * mode_annihilator(layout.n_modes, k)
    return out


def number_diag(layout: FermionLayout) -> np.ndarray:
    return layout.occupations.sum(axis=1)


def parity_diag(layout: FermionLayout) -> np.ndarray:
    """``(-1)^N`` over the Fock basis."""
    return 1 - 2 * (number_diag(layout) % 2)


def parity_operator(layout: FermionLayout) -> sp.csr_matrix:
    """The grading unitary, diagonal ``+-1`` by occupation parity."""
    return sp.diags(parity_diag(layout).astype(complex)).tocsr()


def quadratic_form(layout: FermionLayout, modes: Sequence[int], K: np.ndarray) -> sp.csr_matrix:
    """``sum_{jk} K[j, k] c_j^* c_k`` over the listed modes."""
    K = np.asarray(K, dtype=complex)
    M = layout.n_modes
    cs = {k: mode_annihilator(M, k) for k in modes}
    out = sp.csr_matrix((layout.fock_dim, layout.fock_dim), dtype=complex)
    for a, j in enumerate(modes):
        for b, k in enumerate(modes):
            if K[a, b] != 0:
                out = out + K[a, b] * (cs[j].conj().T @ cs[k])
    return out.tocsr()


def mass_term(layout: FermionLayout, m: float, a_spacing: float) -> sp.csr_matrix:
    """``m a^3 sum_x psi^*(x) gamma0 psi(x)``."""
    if m == 0:
        return sp.csr_matrix((layout.fock_dim, layout.fock_dim), dtype=complex)
    g0 = layout.gamma0
    if np.allclose(g0, np.diag(np.diag(g0))):
        diag = np.zeros(layout.fock_dim)
        occ = layout.occupations
        for s in layout.sites:
            for c, k in enumerate(layout.site_modes(s)):
                diag += g0[c, c].real * occ[:, k]
        return sp.diags(m * a_spacing**3 * diag.astype(complex)).tocsr()
    out = sp.csr_matrix((layout.fock_dim, layout.fock_dim), dtype=complex)
    for s in layout.sites:
        out = out + quadratic_form(layout, layout.site_modes(s), g0)
    return (m * a_spacing**3 * out).tocsr()


def site_unitary(layout: FermionLayout, site: Site, u: np.ndarray) -> sp.csr_matrix:
    """Second quantization of the one-particle unitary ``u`` acting on one site's modes.

    With ``u = exp(iK)`` this is ``exp(i sum K_jk c_j^* c_k)``, so that
    ``Gamma(u) a(f) Gamma(u)^* = a(u f)``.
    """
    from scipy.linalg import expm, schur

    u = np.asarray(u, dtype=complex)
    n = layout.internal_dim
    if u.shape != (n, n):
        raise FermionError("site unitary has the wrong shape")
    T, Z = schur(u, output="complex")
    K = Z @ np.diag(np.angle(np.diag(T))) @ Z.conj().T
    # the quadratic form on the site's own 2^n Fock factor, then embedded
    local = FermionLayout(((0, 0, 0),), layout.spinor_dim, layout.color_dim, layout.gamma0_spinor)
    gen = quadratic_form(local, list(range(n)), K).toarray()
    g_local = sp.csr_matrix(expm(1j * gen))
    pos = layout.site_index[site]
    left = 2 ** (pos * n)
    right = 2 ** ((len(layout.sites) - pos - 1) * n)
    return sp.kron(sp.kron(sp.identity(left, dtype=complex), g_local), sp.identity(right, dtype=complex), format="csr")
