"""Finite sublattices of the cubic lattice Z^3.

Sites are integer 3-tuples. For dimension d < 3 the unused coordinates are
held at zero. Links carry the positive orientation (head = tail + e_mu) and
plaquettes are stored as ordered 4-tuples of ``(link, sign)`` pairs that
traverse the unit square counterclockwise in its coordinate plane, starting at
the lexicographically least corner.

The boundary sets Delta_T(R) and the neighbour sets Delta_T(q) defined here
drive every Lieb-Robinson estimate in :mod:`lgtlab.liebrobinson`.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Literal, Union

Site = tuple[int, int, int]

Kind = Literal["links", "plaquettes", "both"]


class LatticeError(ValueError):
    """Raised when a lattice precondition is violated."""


def _unit(mu: int) -> Site:
    e = [0, 0, 0]
    e[mu] = 1
    return (e[0], e[1], e[2])


def _add(x: Site, y: Site) -> Site:
    return (x[0] + y[0], x[1] + y[1], x[2] + y[2])


def _sub(x: Site, y: Site) -> Site:
    return (x[0] - y[0], x[1] - y[1], x[2] - y[2])


@dataclass(frozen=True, order=True)
class Link:
    """Positively oriented nearest-neighbour edge ``tail -> head``."""

    tail: Site
    head: Site

    def __post_init__(self) -> None:
        d = _sub(self.head, self.tail)
        if sorted(d) != [0, 0, 1]:
            raise LatticeError(f"link {self.tail}->{self.head} is not a positive unit step")

    @property
    def direction(self) -> int:
        d = _sub(self.head, self.tail)
        return d.index(1)

    @property
    def sites(self) -> tuple[Site, Site]:
        return (self.tail, self.head)

    def __repr__(self) -> str:
        return f"Link({self.tail}->{self.head})"


@dataclass(frozen=True, order=True)
class Plaquette:
    """Oriented unit square given by its least corner and plane ``(mu, nu)``, mu < nu."""

    corner: Site
    mu: int
    nu: int

    def __post_init__(self) -> None:
        if not (0 <= self.mu < self.nu <= 2):
            raise LatticeError(f"bad plaquette plane ({self.mu}, {self.nu})")

    @property
    def links(self) -> tuple[tuple[Link, int], ...]:
        """The four ``(link, sign)`` pairs in traversal order.

        The path is x -> x+mu -> x+mu+nu -> x+nu -> x; a sign of -1 means the
        stored link is traversed against its orientation.
        """
        x = self.corner
        em, en = _unit(self.mu), _unit(self.nu)
        xm, xn = _add(x, em), _add(x, en)
        xmn = _add(xm, en)
        return (
            (Link(x, xm), +1),
            (Link(xm, xmn), +1),
            (Link(xn, xmn), -1),
            (Link(x, xn), -1),
        )

    @property
    def sites(self) -> tuple[Site, Site, Site, Site]:
        x = self.corner
        em, en = _unit(self.mu), _unit(self.nu)
        return (x, _add(x, em), _add(_add(x, em), en), _add(x, en))

    def __repr__(self) -> str:
        return f"Plaquette({self.corner},{self.mu}{self.nu})"


Element = Union[Link, Plaquette]


def element_sites(q: Element) -> tuple[Site, ...]:
    """Sites touched by a link or plaquette."""
    return q.sites


class SubLattice:
    """A finite piece of the cubic lattice: sites, links, plaquettes.

    The object is immutable. Disconnected site sets are allowed (they arise
    as unions of disjoint supports) and are marked by :attr:`connected`.
    """

    def __init__(
        self,
        dimension: int,
        sites: Iterable[Site],
        links: Iterable[Link] = (),
        plaquettes: Iterable[Plaquette] = (),
    ) -> None:
        if dimension not in (1, 2, 3):
            raise LatticeError(f"dimension must be 1, 2 or 3, got {dimension}")
        self.dimension = dimension
        self.sites: frozenset[Site] = frozenset(tuple(int(c) for c in s) for s in sites)  # type: ignore[misc]
        self.links: frozenset[Link] = frozenset(links)
        self.plaquettes: frozenset[Plaquette] = frozenset(plaquettes)
        for s in self.sites:
            if len(s) != 3 or any(s[i] != 0 for i in range(dimension, 3)):
                raise LatticeError(f"site {s} is not a point of Z^{dimension}")
        for ln in self.links:
            if ln.tail not in self.sites or ln.head not in self.sites:
                raise LatticeError(f"{ln} has an endpoint outside the site set")
        for p in self.plaquettes:
            for ln, _ in p.links:
                if ln not in self.links:
                    raise LatticeError(f"{p} uses {ln}, which is not a member link")

    # ordered views -----------------------------------------------------
    @cached_property
    def site_list(self) -> list[Site]:
        return sorted(self.sites)

    @cached_property
    def link_list(self) -> list[Link]:
        return sorted(self.links)

    @cached_property
    def plaquette_list(self) -> list[Plaquette]:
        return sorted(self.plaquettes)

    @cached_property
    def site_links(self) -> dict[Site, list[Link]]:
        """Incidence map site -> links touching it."""
        inc: dict[Site, list[Link]] = {s: [] for s in self.site_list}
        for ln in self.link_list:
            inc[ln.tail].append(ln)
            inc[ln.head].append(ln)
        return inc

    @cached_property
    def link_plaquettes(self) -> dict[Link, list[Plaquette]]:
        """Incidence map link -> plaquettes containing it."""
        inc: dict[Link, list[Plaquette]] = {ln: [] for ln in self.link_list}
        for p in self.plaquette_list:
            for ln, _ in p.links:
                inc[ln].append(p)
        return inc

    @cached_property
    def site_elements(self) -> dict[Site, list[Element]]:
        """Incidence map site -> links and plaquettes containing it."""
        inc: dict[Site, list[Element]] = {s: [] for s in self.site_list}
        for q in self.elements("both"):
            for s in q.sites:
                inc[s].append(q)
        return inc

    @cached_property
    def connected(self) -> bool:
        if len(self.sites) <= 1:
            return True
        start = self.site_list[0]
        seen = {start}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for ln in self.site_links[x]:
                y = ln.head if ln.tail == x else ln.tail
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return len(seen) == len(self.sites)

    def require_connected(self) -> None:
        if not self.connected:
            raise LatticeError("operation requires a connected sublattice")

    def elements(self, kind: Kind = "both") -> list[Element]:
        out: list[Element] = []
        if kind in ("links", "both"):
            out.extend(self.link_list)
        if kind in ("plaquettes", "both"):
            out.extend(self.plaquette_list)
        return out

    def __contains__(self, item: object) -> bool:
        if isinstance(item, Link):
            return item in self.links
        if isinstance(item, Plaquette):
            return item in self.plaquettes
        return item in self.sites

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubLattice):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.sites == other.sites
            and self.links == other.links
            and self.plaquettes == other.plaquettes
        )

    def __hash__(self) -> int:
        return hash((self.dimension, self.sites, self.links, self.plaquettes))

    def __repr__(self) -> str:
        return (
            f"SubLattice(dim={self.dimension}, sites={len(self.sites)}, "
            f"links={len(self.links)}, plaquettes={len(self.plaquettes)})"
        )

    def issubset(self, other: "SubLattice") -> bool:
        return (
            self.sites <= other.sites
            and self.links <= other.links
            and self.plaquettes <= other.plaquettes
        )


# construction ---------------------------------------------------------------

def induced(sites: Iterable[Site], dimension: int) -> SubLattice:
    """The sublattice spanned by ``sites`` with every link and plaquette among them."""
    sset = frozenset(tuple(s) for s in sites)
    links = []
    for x in sset:
        for mu in range(dimension):
            y = _add(x, _unit(mu))
            if y in sset:
                links.append(Link(x, y))
    plaqs = []
    for x in sset:
        for mu, nu in itertools.combinations(range(dimension), 2):
            p = Plaquette(x, mu, nu)
            if all(s in sset for s in p.sites):
                plaqs.append(p)
    return SubLattice(dimension, sset, links, plaqs)


def build_box(lo: Iterable[int], hi: Iterable[int], dimension: int) -> SubLattice:
    """All sites with ``lo[i] <= x_i <= hi[i]`` for the first ``dimension`` axes."""
    lo, hi = list(lo), list(hi)
    if len(lo) != dimension or len(hi) != dimension:
        raise LatticeError("box bounds must have one entry per dimension")
    ranges = [range(lo[i], hi[i] + 1) for i in range(dimension)] + [range(0, 1)] * (3 - dimension)
    return induced(itertools.product(*ranges), dimension)


def build_cube(n: int, dimension: int) -> SubLattice:
    """The cube S_n: every site with ``|x_i| <= n`` together with its links and plaquettes."""
    if n < 0:
        raise LatticeError("cube radius must be nonnegative")
    return build_box([-n] * dimension, [n] * dimension, dimension)


def build_chain(length: int, start: int = 0) -> SubLattice:
    """A 1D path of ``length`` sites starting at coordinate ``start``."""
    if length < 1:
        raise LatticeError("a chain needs at least one site")
    return build_box([start], [start + length - 1], 1)


def centered_chain(length: int) -> SubLattice:
    """Odd-length 1D chain centred on the origin (the 1D cube S_n, length = 2n+1)."""
    if length % 2 != 1:
        raise LatticeError("centred chains have odd length")
    return build_cube(length // 2, 1)


def from_element(q: Element, dimension: int) -> SubLattice:
    """The minimal sublattice carrying a single link or plaquette."""
    if isinstance(q, Link):
        return SubLattice(dimension, q.sites, [q])
    return SubLattice(dimension, q.sites, [ln for ln, _ in q.links], [q])


def from_sites(sites: Iterable[Site], dimension: int) -> SubLattice:
    """A bare site set without links (used for site-only supports)."""
    return SubLattice(dimension, sites)


# set queries ------------------------------------------------------------------

def _as_sites(region: SubLattice | Element) -> frozenset[Site]:
    if isinstance(region, SubLattice):
        return region.sites
    return frozenset(region.sites)


def boundary_set(T: SubLattice, R: SubLattice | Element, kind: Kind = "both") -> set[Element]:
    """Delta_T(R): elements of T with a site in R and a site in T \\ R.

    Parameters
    ----------
    T : SubLattice
        Ambient region.
    R : SubLattice or Link or Plaquette
        Inner region; its sites must lie in T.
    kind : {"links", "plaquettes", "both"}
        Which element types to return.
    """
    rs = _as_sites(R)
    if not rs <= T.sites:
        raise LatticeError("boundary_set requires R to be contained in T")
    want = {"links": (Link,), "plaquettes": (Plaquette,), "both": (Link, Plaquette)}[kind]
    out: set[Element] = set()
    for x in rs:
        for q in T.site_elements[x]:
            if isinstance(q, want) and any(s not in rs for s in q.sites):
                out.add(q)
    return out


def neighbor_set(T: SubLattice, q: Element) -> set[Element]:
    """Delta_T(q) restricted to links and plaquettes."""
    if q not in T:
        raise LatticeError(f"{q} is not an element of the ambient sublattice")
    return boundary_set(T, q, "both")


def support_union(a: SubLattice, b: SubLattice) -> SubLattice:
    """Smallest sublattice containing both arguments (may be disconnected)."""
    if a.dimension != b.dimension:
        raise LatticeError("cannot unite sublattices of different dimension")
    return SubLattice(a.dimension, a.sites | b.sites, a.links | b.links, a.plaquettes | b.plaquettes)


def disjoint(a: SubLattice, b: SubLattice) -> bool:
    """True iff the site sets do not intersect."""
    return a.sites.isdisjoint(b.sites)


def lattice_neighbors(x: Site, dimension: int) -> Iterator[Site]:
    for mu in range(dimension):
        e = _unit(mu)
        yield _add(x, e)
        yield _sub(x, e)


def shell_sites(T: SubLattice, ambient: SubLattice | None = None) -> frozenset[Site]:
    """Sites of T reached by elements crossing out of T.

    With an ``ambient`` region the answer is the set of T-sites lying on some
    element of Delta_ambient(T). Without one, every site of T with a lattice
    neighbour outside T is returned (the same set for boxes inside a larger box).
    """
    if ambient is not None:
        out: set[Site] = set()
        for q in boundary_set(ambient, T, "both"):
            out.update(s for s in q.sites if s in T.sites)
        return frozenset(out)
    return frozenset(
        x for x in T.sites if any(y not in T.sites for y in lattice_neighbors(x, T.dimension))
    )


def complement(T: SubLattice, R: SubLattice) -> SubLattice:
    """Sites of T outside R with the links and plaquettes of T avoiding R entirely."""
    rs = R.sites
    sites = T.sites - rs
    links = [ln for ln in T.links if ln.tail not in rs and ln.head not in rs]
    plaqs = [p for p in T.plaquettes if not any(s in rs for s in p.sites)]
    return SubLattice(T.dimension, sites, links, plaqs)


def is_bulk(T: SubLattice, q: Element) -> bool:
    """True when every lattice neighbour of every site of q lies in T."""
    return all(
        y in T.sites for s in q.sites for y in lattice_neighbors(s, T.dimension)
    )


# text format ------------------------------------------------------------------

def to_text(S: SubLattice, n: int | None = None) -> str:
    """Serialize to the line-oriented format.

    Header ``dim <d> n <n>`` (n is -1 when not a cube), then ``site x y z``,
    ``link x y z -> x y z`` and ``plaq x y z mu nu`` lines in sorted order.
    """
    lines = [f"dim {S.dimension} n {-1 if n is None else n}"]
    lines += [f"site {x} {y} {z}" for (x, y, z) in S.site_list]
    lines += [
        "link {} {} {} -> {} {} {}".format(*ln.tail, *ln.head) for ln in S.link_list
    ]
    lines += [
        "plaq {} {} {} {} {}".format(*p.corner, p.mu, p.nu) for p in S.plaquette_list
    ]
    return "\n".join(lines) + "\n"


def from_text(text: str) -> SubLattice:
    """Inverse of :func:`to_text`."""
    rows = [r.split() for r in text.splitlines() if r.strip()]
    if not rows or rows[0][0] != "dim":
        raise LatticeError("missing 'dim' header")
    dimension = int(rows[0][1])
    sites, links, plaqs = [], [], []
    for r in rows[1:]:
        tag = r[0]
        if tag == "site":
            sites.append(tuple(int(v) for v in r[1:4]))
        elif tag == "link":
            links.append(Link(tuple(int(v) for v in r[1:4]), tuple(int(v) for v in r[5:8])))  # type: ignore[arg-type]
        elif tag == "plaq":
            plaqs.append(Plaquette(tuple(int(v) for v in r[1:4]), int(r[4]), int(r[5])))  # type: ignore[arg-type]
        else:
            raise LatticeError(f"unknown record '{tag}'")
    return SubLattice(dimension, sites, links, plaqs)
