"""Gauge transformations, the Gauss-law projector and gauge-invariant observables.

Conventions
-----------
A gauge element assigns a group element ``zeta(x)`` to each site. Its
unitary ``W_zeta`` acts on fermions by the second quantization of pointwise
multiplication by ``zeta(x)`` on the color index, and on each link by
``phi(h) -> phi(zeta(tail)^-1 h zeta(head))``.

For U(1) with angles ``theta_x`` this multiplies a basis state by
``exp(i sum_x theta_x G_x)`` where

    G_x = n_x + (sum of m over links entering x) - (sum of m over links leaving x).

The Gauss law therefore reads ``out(x) - in(x) - n_x = q_x`` with a static
background charge ``q_x`` (default 0). Sites can be exempted from the
constraint, e.g. the boundary of a finite volume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .fermions import site_unitary, mode_annihilator
from .hamiltonian import links_only_to_full, path_product_local
from .lattice import Link, Site, SubLattice, from_sites
from .linkspace import (
    GaugeGroupModel,
    fundamental,
    gauge_link_unitary,
    identity_element,
    u1_charges,
    validate_element,
)
from .opalg import HilbertLayout, Operator, operator_norm


class GaugeError(ValueError):
    """Invalid gauge data or a failed invariance test."""


@dataclass
class GaugeElement:
    """Site-wise group elements; unassigned sites carry the identity."""

    model: GaugeGroupModel
    assignments: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.assignments = {tuple(s): validate_element(self.model, g) for s, g in self.assignments.items()}

    def at(self, x: Site):
        return self.assignments.get(tuple(x), identity_element(self.model))

    def support_sites(self) -> list[Site]:
        out = []
        for s, g in self.assignments.items():
            if self.model.kind == "u1":
                if np.exp(1j * g) != 1:
                    out.append(s)
            elif not np.allclose(g, np.eye(2)):
                out.append(s)
        return sorted(out)

    def support(self, dimension: int) -> SubLattice:
        return from_sites(self.support_sites(), dimension)

    def compose(self, other: "GaugeElement") -> "GaugeElement":
        """Pointwise product ``(self other)(x) = self(x) other(x)``."""
        sites = set(self.assignments) | set(other.assignments)
        if self.model.kind == "u1":
            return GaugeElement(self.model, {s: self.at(s) + other.at(s) for s in sites})
        return GaugeElement(self.model, {s: self.at(s) @ other.at(s) for s in sites})


def random_gauge_element(model: GaugeGroupModel, sites: Iterable[Site], rng: np.random.Generator) -> GaugeElement:
    from .linkspace import random_element

    return GaugeElement(model, {tuple(s): random_element(model, rng) for s in sites})


def layout_sites(layout: HilbertLayout) -> list[Site]:
    """All sites touched by the layout: fermion sites and link endpoints."""
    sites = set(layout.fermion.sites) if layout.fermion is not None else set()
    for ln in layout.links:
        sites.update(ln.sites)
    return sorted(sites)


# unitaries -----------------------------------------------------------------------

def gauge_unitary(zeta: GaugeElement, layout: HilbertLayout) -> Operator:
    """``W_zeta = U^F_zeta (x) (x)_l W^(l)_zeta``."""
    model = zeta.model
    known = set(layout_sites(layout))
    for s in zeta.support_sites():
        if s not in known:
            raise GaugeError(f"gauge support site {s} is outside the layout")
    supp = set(zeta.support_sites())
    fermion = None
    fl = layout.fermion
    if fl is not None:
        f = sp.identity(fl.fock_dim, dtype=complex, format="csr")
        for s in fl.sites:
            if s in supp:
                u = np.kron(np.eye(fl.spinor_dim), fundamental(model, zeta.at(s)))
                f = f @ site_unitary(fl, s, u)
        fermion = f
    links = {
        ln: gauge_link_unitary(model, zeta.at(ln.tail), zeta.at(ln.head))
        for ln in layout.links
        if ln.tail in supp or ln.head in supp
    }
    return Operator(layout.product(fermion=fermion, links=links), layout, None, "even")


# Gauss law (U(1)) ----------------------------------------------------------------

def u1_divergence(layout: HilbertLayout, model: GaugeGroupModel, site: Site) -> np.ndarray:
    """``out(x) - in(x)`` of the electric quantum numbers over the link basis."""
    m = u1_charges(model)
    div = np.zeros(layout.link_dim, dtype=np.int64)
    digits = layout.link_digits
    for ln, i in layout.link_index.items():
        if ln.tail == site:
            div += m[digits[:, i]]
        if ln.head == site:
            div -= m[digits[:, i]]
    return div


def u1_gauss_values(layout: HilbertLayout, model: GaugeGroupModel, site: Site) -> np.ndarray:
    """``out(x) - in(x) - n_x`` for every basis state of the layout."""
    div = u1_divergence(layout, model, site)
    if layout.fermion is None or site not in layout.fermion.site_index:
        return np.tile(div, layout.fock_dim)
    n = layout.fermion.site_number(site).astype(np.int64)
    return (div[None, :] - n[:, None]).ravel()


def _constrained_sites(layout: HilbertLayout, exempt: Iterable[Site]) -> list[Site]:
    ex = {tuple(s) for s in exempt}
    return [s for s in layout_sites(layout) if s not in ex]


def gauss_mask(
    layout: HilbertLayout,
    model: GaugeGroupModel,
    background: Mapping[Site, int] | None = None,
    exempt: Iterable[Site] = (),
) -> np.ndarray:
    """Boolean mask of basis states satisfying the Gauss law at every constrained site."""
    if model.kind != "u1":
        raise GaugeError("basis-state Gauss masks exist for U(1) only")
    bg = {tuple(k): int(v) for k, v in (background or {}).items()}
    mask = np.ones(layout.total_dim, dtype=bool)
    for s in _constrained_sites(layout, exempt):
        mask &= u1_gauss_values(layout, model, s) == bg.get(s, 0)
    return mask


def boundary_exempt_sites(layout: HilbertLayout) -> list[Site]:
    """Sites of the layout's lattice with a lattice neighbour outside it."""
    from .lattice import shell_sites

    if layout.lattice is None:
        raise GaugeError("layout has no lattice to define a boundary")
    return sorted(shell_sites(layout.lattice))


def gauss_projector(
    layout: HilbertLayout,
    model: GaugeGroupModel,
    background: Mapping[Site, int] | None = None,
    exempt: Iterable[Site] = (),
    tol: float = 1e-12,
    max_refinements: int = 4,
) -> tuple[Operator, float]:
    """Orthogonal projector onto the gauge-invariant subspace and its defect ``||P^2 - P||``.

    U(1) is exact: diagonal selection of divergence-constrained states. SU(2)
    averages ``W_zeta`` over a product Euler-angle quadrature at each
    constrained site; node counts are doubled until the defect is below ``tol``.
    """
    if model.kind == "u1":
        mask = gauss_mask(layout, model, background, exempt)
        P = sp.diags(mask.astype(complex)).tocsr()
        return Operator(P, layout, None, "even"), 0.0
    if background:
        raise GaugeError("background charges are only defined for U(1)")
    sites = _constrained_sites(layout, exempt)
    degree = _su2_site_degree(layout, model)
    scale = 1
    for _ in range(max_refinements + 1):
        P = sp.identity(layout.total_dim, dtype=complex, format="csr")
        for s in sites:
            P = P @ _su2_site_average(layout, model, s, degree * scale)
        Pd = P.toarray()
        defect = float(np.linalg.norm(Pd @ Pd - Pd, 2)) if Pd.size else 0.0
        if defect <= tol:
            Pd = (Pd + Pd.conj().T) / 2
            return Operator(sp.csr_matrix(Pd), layout, None, "even"), defect
        scale *= 2
    raise GaugeError(f"SU(2) projector defect {defect:.3e} above tolerance {tol:.1e}")


def _su2_site_degree(layout: HilbertLayout, model: GaugeGroupModel) -> int:
    """Upper bound on twice the total spin meeting at any site."""
    per_site = {}
    for ln in layout.links:
        for s in ln.sites:
            per_site[s] = per_site.get(s, 0) + model.two_jmax
    if layout.fermion is not None:
        for s in layout.fermion.sites:
            per_site[s] = per_site.get(s, 0) + layout.fermion.spinor_dim
    return max(per_site.values(), default=0)


def su2_quadrature(two_J: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Product Euler-angle rule on SU(2), exact for representations up to spin J.

    Nodes are ``Rz(alpha) Ry(beta) Rz(gamma)`` with uniform alpha in
    ``[0, 2pi)``, uniform gamma in ``[0, 4pi)`` and Gauss-Legendre in
    ``cos(beta)``; the weights sum to one.
    """
    na = two_J // 2 + 1
    ng = two_J + 1
    nb = max(1, (two_J // 2 + 2) // 2)
    xs, ws = np.polynomial.legendre.leggauss(nb)
    nodes, weights = [], []
    for a in (2 * np.pi * np.arange(na) / na):
        for x, wb in zip(xs, ws):
            b = np.arccos(x)
            for c in (4 * np.pi * np.arange(ng) / ng):
                rz1 = np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
                ry = np.array([[np.cos(b / 2), -np.sin(b / 2)], [np.sin(b / 2), np.cos(b / 2)]])
                rz2 = np.diag([np.exp(-0.5j * c), np.exp(0.5j * c)])
                nodes.append(rz1 @ ry @ rz2)
                weights.append(wb / 2 / na / ng)
    return nodes, np.asarray(weights)


def _su2_site_average(layout: HilbertLayout, model: GaugeGroupModel, site: Site, two_J: int) -> sp.csr_matrix:
    nodes, weights = su2_quadrature(two_J)
    acc = sp.csr_matrix((layout.total_dim, layout.total_dim), dtype=complex)
    for g, w in zip(nodes, weights):
        W = gauge_unitary(GaugeElement(model, {site: g}), layout).matrix
        acc = acc + w * W
    return acc


# observables --------------------------------------------------------------------

def _traverse(ln: Link, sign: int) -> tuple[Site, Site]:
    return (ln.tail, ln.head) if sign == +1 else (ln.head, ln.tail)


def _check_path(path: Sequence[tuple[Link, int]], closed: bool) -> None:
    if not path:
        raise GaugeError("empty path")
    for (l1, s1), (l2, s2) in zip(path, path[1:]):
        if _traverse(l1, s1)[1] != _traverse(l2, s2)[0]:
            raise GaugeError("path is not connected")
    if closed and _traverse(path[-1][0], path[-1][1])[1] != _traverse(path[0][0], path[0][1])[0]:
        raise GaugeError("path does not close")


def wilson_loop(path: Sequence[tuple[Link, int]], model: GaugeGroupModel, layout: HilbertLayout) -> Operator:
    """``W(L) = Tr(g_1 ... g_m)`` around a closed ``(link, sign)`` path."""
    from .hamiltonian import wilson_matrix

    _check_path(path, closed=True)
    return Operator(wilson_matrix(path, model, layout), layout, None, "even")


def fermi_bilinear(
    path: Sequence[tuple[Link, int]],
    model: GaugeGroupModel,
    layout: HilbertLayout,
    site: Site | None = None,
) -> Operator:
    """``Q(C) = psi^*_i(x_1) (link product)_ij psi_j(y_m)``, summed over color and spinor.

    A zero-length path needs ``site`` and gives the local density.
    """
    fl = layout.fermion
    if fl is None:
        raise GaugeError("layout has no fermions")
    nc = model.color_dim
    if not path:
        if site is None:
            raise GaugeError("zero-length bilinears need a site")
        x = y = tuple(site)
        local_links: list[Link] = []
        prod = [[sp.identity(1, dtype=complex) if i == j else sp.csr_matrix((1, 1), dtype=complex) for j in range(nc)] for i in range(nc)]
    else:
        _check_path(path, closed=False)
        x = _traverse(*path[0])[0]
        y = _traverse(*path[-1])[1]
        local_links, prod = path_product_local(path, model)
    if x not in fl.site_index or y not in fl.site_index:
        raise GaugeError("path endpoints are not fermion sites")
    nm = fl.n_modes
    out = sp.csr_matrix((layout.total_dim, layout.total_dim), dtype=complex)
    for s in range(fl.spinor_dim):
        for i in range(nc):
            for j in range(nc):
                if prod[i][j].nnz == 0:
                    continue
                cx = mode_annihilator(nm, fl.mode(x, s * nc + i))
                cy = mode_annihilator(nm, fl.mode(y, s * nc + j))
                f = layout.product(fermion=cx.conj().T @ cy)
                if local_links:
                    f = f @ links_only_to_full(prod[i][j], local_links, layout)
                out = out + f
    return Operator(out.tocsr(), layout, None, "even")


def reduce_observable(A: Operator, P: Operator, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Compression ``P A P`` in an orthonormal basis of ``range(P)``.

    Returns ``(reduced matrix, basis columns)``. Raises :class:`GaugeError`
    with the measured commutator norm if ``A`` does not commute with ``P``.
    """
    c = operator_norm(A.matrix @ P.matrix - P.matrix @ A.matrix)
    scale = max(1.0, operator_norm(A.matrix))
    if c > tol * scale:
        raise GaugeError(f"observable does not commute with the Gauss projector: ||[A, P]|| = {c:.3e}")
    Pm = P.matrix
    diag = Pm.diagonal()
    off = Pm - sp.diags(diag)
    if off.nnz == 0 or np.abs(off.data).max() == 0:
        idx = np.flatnonzero(np.abs(diag - 1) < 1e-9)
        basis = sp.identity(Pm.shape[0], dtype=complex, format="csc")[:, idx]
        red = (basis.conj().T @ A.matrix @ basis).toarray()
        return red, basis.toarray()
    vals, vecs = np.linalg.eigh(Pm.toarray())
    basis = vecs[:, vals > 0.5]
    red = basis.conj().T @ (A.matrix @ basis)
    return red, basis


# charge sectors ----------------------------------------------------------------------

@dataclass
class SectorDecomposition:
    """Partition of the basis by the full set of U(1) Gauss charges.

    Every gauge-invariant operator (in particular every Hamiltonian term and
    every electric-field observable) is block diagonal in this partition.
    """

    labels: np.ndarray
    order: np.ndarray
    starts: np.ndarray
    sizes: np.ndarray

    @property
    def n_sectors(self) -> int:
        return len(self.sizes)

    @property
    def max_size(self) -> int:
        return int(self.sizes.max()) if len(self.sizes) else 0

    def sector_of(self) -> np.ndarray:
        out = np.empty(len(self.labels), dtype=np.int64)
        out[self.order] = np.repeat(np.arange(self.n_sectors), self.sizes)
        return out

    def groups(self, max_entries: int = 4_000_000) -> Iterator[np.ndarray]:
        """Yield arrays of shape ``(count, k)`` of basis indices, one row per sector.

        Sectors of equal size are batched; batches are split so that
        ``count * k * k`` stays below ``max_entries``.
        """
        for k in np.unique(self.sizes):
            sel = np.flatnonzero(self.sizes == k)
            idx = self.starts[sel][:, None] + np.arange(k)[None, :]
            states = self.order[idx]
            per = max(1, max_entries // int(k * k))
            for lo in range(0, len(sel), per):
                yield states[lo : lo + per]


def sector_decomposition(layout: HilbertLayout, model: GaugeGroupModel) -> SectorDecomposition:
    """Group basis states by the values of ``out - in - n`` at every site."""
    if model.kind != "u1":
        raise GaugeError("charge sectors are implemented for U(1)")
    sites = layout_sites(layout)
    codes = np.zeros(layout.total_dim, dtype=np.int64)
    radix = 1
    for s in sites:
        g = u1_gauss_values(layout, model, s)
        lo = int(g.min())
        span = int(g.max()) - lo + 1
        if radix > (2**62) // max(span, 1):
            # fall back to lexicographic row labels
            return _sector_rows(layout, model, sites)
        codes += (g - lo) * radix
        radix *= span
    return _from_labels(codes)


def _sector_rows(layout: HilbertLayout, model: GaugeGroupModel, sites: Sequence[Site]) -> SectorDecomposition:
    G = np.stack([u1_gauss_values(layout, model, s) for s in sites], axis=1)
    _, labels = np.unique(G, axis=0, return_inverse=True)
    return _from_labels(labels.ravel().astype(np.int64))


def _from_labels(labels: np.ndarray) -> SectorDecomposition:
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    brk = np.flatnonzero(np.diff(sorted_labels)) + 1
    starts = np.concatenate([[0], brk]).astype(np.int64)
    sizes = np.diff(np.concatenate([starts, [len(labels)]])).astype(np.int64)
    return SectorDecomposition(labels, order, starts, sizes)


def is_sector_diagonal(op, sectors: SectorDecomposition, tol: float = 0.0) -> bool:
    """True if the operator has no matrix elements between different sectors."""
    M = sp.coo_matrix(op.matrix if isinstance(op, Operator) else op)
    lab = sectors.labels
    cross = lab[M.row] != lab[M.col]
    return not np.any(np.abs(M.data[cross]) > tol)
