"""Finite-volume Kogut-Susskind Hamiltonian as a catalogue of local terms.

``H_S = H_loc + H_int`` with

* ``H_loc = sum_l (a/2) c_G Casimir(l) + m a^3 sum_x psi^*(x) gamma0 psi(x)``,
* ``H_int = sum_p W~(p) + sum_l B(l)``, where
  ``W~(p) = (W(p) + W(p)^*) / (2 g^2 a)`` and
  ``B(l) = i (a/2) psibar(x) Gamma Phi(l) psi(y) + h.c.``.

In the reduced fermion preset ``Gamma = 1``; with Dirac spinors
``Gamma = gamma . (y - x)`` where ``y - x`` is the link vector of length ``a``.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .fermions import FermionLayout, dirac_gammas, mass_term, mode_annihilator
from .lattice import Element, Link, Plaquette, Site, SubLattice
from .linkspace import GaugeGroupModel, casimir_diag, link_matrix, local_dim
from .opalg import HilbertLayout, Operator, embed, operator_norm


class HamiltonianError(ValueError):
    """Missing factors or invalid couplings."""


@dataclass(frozen=True)
class CouplingParams:
    """Lattice spacing ``a`` (length), gauge coupling ``g``, mass ``m`` (1/length)."""

    a: float = 1.0
    g: float = 1.0
    m: float = 0.5

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise HamiltonianError("lattice spacing a must be positive")
        if not self.g > 0:
            raise HamiltonianError("gauge coupling g must be positive")
        if not self.m >= 0:
            raise HamiltonianError("mass m must be nonnegative")


FERMION_PRESETS = ("reduced", "dirac", "none")


def make_layout(
    S: SubLattice,
    model: GaugeGroupModel,
    fermions: str = "reduced",
    sites: Sequence[Site] | None = None,
    links: Sequence[Link] | None = None,
) -> HilbertLayout:
    """Layout for a sublattice: fermions on its sites, one factor per link.

    ``sites`` and ``links`` override the sublattice's own lists (used for the
    complement region in the subadditivity split).
    """
    if fermions not in FERMION_PRESETS:
        raise HamiltonianError(f"unknown fermion preset '{fermions}'")
    site_list = list(S.site_list if sites is None else sorted(sites))
    link_list = list(S.link_list if links is None else sorted(links))
    if fermions == "none":
        fl = None
    else:
        spinor = 1 if fermions == "reduced" else 4
        fl = FermionLayout(tuple(site_list), spinor, model.color_dim)
    return HilbertLayout(fl, link_list, local_dim(model), lattice=S if sites is None and links is None else None)


def _preset(layout: HilbertLayout) -> str:
    if layout.fermion is None:
        return "none"
    return "reduced" if layout.fermion.spinor_dim == 1 else "dirac"


# link-operator blocks -----------------------------------------------------------------

def traversal_block(model: GaugeGroupModel, sign: int) -> list[list[sp.csr_matrix]]:
    """Color matrix ``X_ij`` of link operators for a traversal with ``sign``.

    Forward traversal uses ``Phi_ij``; backward traversal uses ``Phi_ji^*`` (the
    matrix elements of ``g^-1``).
    """
    n = model.color_dim
    if sign == +1:
        return [[link_matrix(model, i, j) for j in range(n)] for i in range(n)]
    if sign == -1:
        return [[link_matrix(model, j, i).conj().T.tocsr() for j in range(n)] for i in range(n)]
    raise HamiltonianError("traversal sign must be +1 or -1")


def path_product_local(
    path: Sequence[tuple[Link, int]], model: GaugeGroupModel
) -> tuple[list[Link], list[list[sp.csr_matrix]]]:
    """Color matrix of the ordered link product along ``path`` on a local link layout.

    Returns the local link order and the ``n x n`` array of operators on the
    tensor product of those links.
    """
    local_links: list[Link] = []
    for ln, _ in path:
        if ln not in local_links:
            local_links.append(ln)
    dims = [local_dim(model)] * len(local_links)
    lay = HilbertLayout(None, local_links, dims)
    n = model.color_dim
    acc = [[sp.identity(lay.total_dim, dtype=complex, format="csr") if i == j else sp.csr_matrix((lay.total_dim, lay.total_dim), dtype=complex) for j in range(n)] for i in range(n)]
    for ln, sgn in path:
        X = traversal_block(model, sgn)
        Xf = [[lay.link_part({ln: X[i][j]}) for j in range(n)] for i in range(n)]
        acc = [[sum((acc[i][k] @ Xf[k][j] for k in range(n)), sp.csr_matrix((lay.total_dim, lay.total_dim), dtype=complex)) for j in range(n)] for i in range(n)]
    return local_links, acc


def links_only_to_full(local: sp.spmatrix, local_links: Sequence[Link], layout: HilbertLayout) -> sp.csr_matrix:
    """Embed an operator on a tuple of link factors into ``layout``."""
    for ln in local_links:
        if ln not in layout.link_index:
            raise HamiltonianError(f"{ln} is not a factor of the layout")
    sub = HilbertLayout(None, local_links, [layout.link_dims[layout.link_index[l]] for l in local_links])
    link_lay = HilbertLayout(None, layout.links, layout.link_dims)
    op = embed(Operator(local, sub), link_lay).matrix
    if layout.fock_dim == 1:
        return op
    return sp.kron(sp.identity(layout.fock_dim, dtype=complex, format="csr"), op, format="csr")


def wilson_matrix(path: Sequence[tuple[Link, int]], model: GaugeGroupModel, layout: HilbertLayout) -> sp.csr_matrix:
    """Color trace of the ordered link product around a closed path."""
    local_links, acc = path_product_local(path, model)
    tr = sum(acc[i][i] for i in range(model.color_dim))
    return links_only_to_full(tr, local_links, layout)


# terms ---------------------------------------------------------------------------------

def electric_term(ln: Link, params: CouplingParams, model: GaugeGroupModel, layout: HilbertLayout) -> Operator:
    """``(a/2) c_G Casimir`` on one link."""
    if ln not in layout.link_index:
        raise HamiltonianError(f"{ln} missing from layout")
    d = layout.diag_from_links({ln: 0.5 * params.a * model.laplacian_scale * casimir_diag(model)})
    return Operator(sp.diags(d.astype(complex)).tocsr(), layout, None, "even")


def plaquette_term(p: Plaquette, params: CouplingParams, model: GaugeGroupModel, layout: HilbertLayout) -> Operator:
    """``W~(p) = (W(p) + W(p)^*) / (2 g^2 a)``."""
    for ln, _ in p.links:
        if ln not in layout.link_index:
            raise HamiltonianError(f"{ln} of {p} missing from layout")
    W = wilson_matrix(p.links, model, layout)
    m = (W + W.conj().T) / (2 * params.g**2 * params.a)
    return Operator(m.tocsr(), layout, None, "even")


def hopping_gamma(ln: Link, params: CouplingParams, fermion: FermionLayout) -> np.ndarray:
    """Spinor matrix ``gamma0 Gamma`` multiplying ``psi^*(x) ... psi(y)``."""
    if fermion.spinor_dim == 1:
        return fermion.gamma0_spinor.copy()
    _, gk = dirac_gammas()
    vec = params.a * (np.asarray(ln.head) - np.asarray(ln.tail))
    Gamma = sum(vec[k] * gk[k] for k in range(3))
    return fermion.gamma0_spinor @ Gamma


def hopping_term(ln: Link, params: CouplingParams, model: GaugeGroupModel, layout: HilbertLayout) -> Operator:
    """``B(l) = i (a/2) psibar(x) Gamma Phi(l) psi(y) + h.c.``"""
    fl = layout.fermion
    if fl is None:
        raise HamiltonianError("hopping needs a fermion layout")
    if ln not in layout.link_index:
        raise HamiltonianError(f"{ln} missing from layout")
    x, y = ln.tail, ln.head
    if x not in fl.site_index or y not in fl.site_index:
        raise HamiltonianError(f"endpoints of {ln} missing from the fermion layout")
    M = hopping_gamma(ln, params, fl)
    nc = model.color_dim
    phi = [[link_matrix(model, i, j) for j in range(nc)] for i in range(nc)]
    nm = fl.n_modes
    X = sp.csr_matrix((layout.total_dim, layout.total_dim), dtype=complex)
    cache: dict[int, sp.csr_matrix] = {}

    def c(k: int) -> sp.csr_matrix:
        if k not in cache:
            cache[k] = mode_annihilator(nm, k)
        return cache[k]

    for s1, s2 in itertools.product(range(fl.spinor_dim), repeat=2):
        if M[s1, s2] == 0:
            continue
        for n, m in itertools.product(range(nc), repeat=2):
            kx = fl.mode(x, s1 * nc + n)
            ky = fl.mode(y, s2 * nc + m)
            f = c(kx).conj().T @ c(ky)
            X = X + M[s1, s2] * layout.product(fermion=f, links={ln: phi[n][m]})
    B = 0.5j * params.a * X
    B = B + B.conj().T
    return Operator(B.tocsr(), layout, None, "even")


def mass_operator(params: CouplingParams, layout: HilbertLayout, sites: Iterable[Site] | None = None) -> Operator:
    """Mass term on the listed sites (all fermion sites by default)."""
    fl = layout.fermion
    if fl is None:
        return Operator.zero(layout)
    if sites is None:
        F = mass_term(fl, params.m, params.a)
    else:
        sub = FermionLayout(tuple(sites), fl.spinor_dim, fl.color_dim, fl.gamma0_spinor)
        mask_modes = [k for s in sub.sites for k in fl.site_modes(s)]
        g0 = fl.gamma0
        if not np.allclose(g0, np.diag(np.diag(g0))):
            raise HamiltonianError("partial mass terms need a diagonal gamma0")
        occ = fl.occupations
        diag = np.zeros(fl.fock_dim)
        comp = {k: k % fl.internal_dim for k in mask_modes}
        for k in mask_modes:
            diag += g0[comp[k], comp[k]].real * occ[:, k]
        F = sp.diags(params.m * params.a**3 * diag.astype(complex)).tocsr()
    return Operator(layout.product(fermion=F), layout, None, "even")


# catalog ---------------------------------------------------------------------------

def _local_layout_for(q: Element, model: GaugeGroupModel, preset: str) -> HilbertLayout:
    if isinstance(q, Link):
        fl = None if preset == "none" else FermionLayout(tuple(q.sites), 1 if preset == "reduced" else 4, model.color_dim)
        return HilbertLayout(fl, [q], local_dim(model))
    links = sorted({ln for ln, _ in q.links})
    return HilbertLayout(None, links, local_dim(model))


def interaction_term(q: Element, params: CouplingParams, model: GaugeGroupModel, layout: HilbertLayout) -> Operator:
    """``Psi(q)``: plaquette term for plaquettes, hopping term for links."""
    if isinstance(q, Plaquette):
        return plaquette_term(q, params, model, layout)
    return hopping_term(q, params, model, layout)


def local_term_norm(q: Element, params: CouplingParams, model: GaugeGroupModel, preset: str) -> float:
    """``||Psi(q)||`` computed on the minimal layout carrying q."""
    if isinstance(q, Link) and preset == "none":
        return 0.0
    lay = _local_layout_for(q, model, preset)
    return operator_norm(interaction_term(q, params, model, lay))


class TermCatalog(Mapping):
    """Lazy map ``q -> Psi(q)`` on the full layout."""

    def __init__(self, keys: Sequence[Element], builder: Callable[[Element], Operator]):
        self._keys = list(keys)
        self._set = set(self._keys)
        self._builder = builder

    def __getitem__(self, q: Element) -> Operator:
        if q not in self._set:
            raise KeyError(q)
        return self._builder(q)

    def __iter__(self) -> Iterator[Element]:
        return iter(self._keys)

    def __len__(self) -> int:
        return len(self._keys)


@dataclass
class HamiltonianTerms:
    """Assembled Hamiltonian with its local/interaction split and term catalogue."""

    layout: HilbertLayout
    params: CouplingParams
    model: GaugeGroupModel
    h_loc: Operator
    h_int: Operator
    term_catalog: TermCatalog
    term_norms: dict = field(default_factory=dict)
    psi_norm: float = 0.0

    @property
    def total(self) -> Operator:
        return self.h_loc + self.h_int

    @property
    def h_loc_diagonal(self) -> np.ndarray | None:
        m = self.h_loc.matrix
        off = m - sp.diags(m.diagonal())
        if off.nnz == 0 or np.abs(off.data).max() == 0:
            return m.diagonal().real.copy()
        return None


def assemble_parts(
    layout: HilbertLayout,
    params: CouplingParams,
    model: GaugeGroupModel,
    loc_sites: Iterable[Site],
    loc_links: Iterable[Link],
    int_terms: Iterable[Element],
) -> HamiltonianTerms:
    """Assemble from explicit term lists (all must fit in ``layout``)."""
    preset = _preset(layout)
    loc_links = sorted(loc_links)
    int_terms = sorted(int_terms, key=lambda q: (isinstance(q, Plaquette), q))
    if preset == "none":
        int_terms = [q for q in int_terms if isinstance(q, Plaquette)]
    diag = layout.diag_from_links(
        {ln: 0.5 * params.a * model.laplacian_scale * casimir_diag(model) for ln in loc_links}
    )
    h_loc = Operator(sp.diags(diag.astype(complex)).tocsr(), layout, None, "even")
    loc_sites = sorted(loc_sites)
    if layout.fermion is not None and loc_sites and params.m != 0:
        if set(loc_sites) == set(layout.fermion.sites):
            h_loc = h_loc + mass_operator(params, layout)
        else:
            h_loc = h_loc + mass_operator(params, layout, loc_sites)
    h_int = Operator.zero(layout)
    norms: dict = {}
    norm_cache: dict = {}
    for q in int_terms:
        h_int = h_int + interaction_term(q, params, model, layout)
        key = ("l", q.direction) if isinstance(q, Link) else ("p", q.mu, q.nu)
        if key not in norm_cache:
            norm_cache[key] = local_term_norm(q, params, model, preset)
        norms[q] = norm_cache[key]
    h_int = Operator(h_int.matrix, layout, None, "even")
    catalog = TermCatalog(int_terms, lambda q: interaction_term(q, params, model, layout))
    psi = max(norms.values()) if norms else 0.0
    return HamiltonianTerms(layout, params, model, h_loc, h_int, catalog, norms, psi)


def assemble(
    S: SubLattice,
    params: CouplingParams,
    model: GaugeGroupModel,
    layout: HilbertLayout | None = None,
) -> HamiltonianTerms:
    """``H_S`` on ``layout`` (built for S with reduced fermions when omitted).

    The layout may be larger than S; terms outside S are then absent, which
    gives the finite-volume Hamiltonian of S acting on a larger space.
    """
    if layout is None:
        layout = make_layout(S, model)
    for ln in S.links:
        if ln not in layout.link_index:
            raise HamiltonianError(f"layout lacks link {ln}")
    if layout.fermion is not None:
        missing = [s for s in S.sites if s not in layout.fermion.site_index]
        if missing:
            raise HamiltonianError(f"layout lacks fermion sites {missing[:3]}")
    return assemble_parts(layout, params, model, S.site_list, S.link_list, S.elements("both"))
