"""Truncated per-link gauge Hilbert spaces.

Two models are provided.

``U1``
    Charge basis ``|m>``, ``m = -c..c`` in ascending order. The electric term
    is ``m**2``, the link variable is the charge-raising shift (dropped at the
    cutoff), left translations and gauge phases are diagonal.

``SU2``
    Truncated Peter-Weyl basis ``|j a b> = sqrt(2j+1) D^j_{ab}``. Blocks are
    ordered by ascending ``j``; inside a block the pair ``(a, b)`` is laid out
    row-major with magnetic numbers running ``j, j-1, ..., -j``. The electric
    term is the Casimir ``j(j+1)``, and the link matrix elements couple
    ``j`` to ``j +- 1/2`` through Clebsch-Gordan coefficients. Couplings above
    ``j_max`` are dropped.

Operators on a single link factor are returned as ``scipy.sparse.csr_matrix``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, sqrt

import numpy as np
import scipy.sparse as sp
from sympy import Rational
from sympy.physics.wigner import clebsch_gordan


class LinkSpaceError(ValueError):
    """Invalid model parameters, indices or group elements."""


@dataclass(frozen=True)
class GaugeGroupModel:
    """A truncated link Hilbert space.

    Attributes
    ----------
    kind : {"u1", "su2"}
    cutoff : int
        Electric cutoff ``c`` for U(1).
    two_jmax : int
        Twice the spin cutoff for SU(2).
    laplacian_scale : float
        Constant multiplying the Casimir in the electric term.
    """

    kind: str
    cutoff: int = 0
    two_jmax: int = 0
    laplacian_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("u1", "su2"):
            raise LinkSpaceError(f"unknown gauge group '{self.kind}'")
        if self.cutoff < 0 or self.two_jmax < 0:
            raise LinkSpaceError("cutoffs must be nonnegative")
        if not self.laplacian_scale > 0:
            raise LinkSpaceError("laplacian_scale must be positive")

    @classmethod
    def u1(cls, cutoff: int, laplacian_scale: float = 1.0) -> "GaugeGroupModel":
        return cls("u1", cutoff=int(cutoff), laplacian_scale=float(laplacian_scale))

    @classmethod
    def su2(cls, jmax: float | Fraction, laplacian_scale: float = 1.0) -> "GaugeGroupModel":
        two = Fraction(jmax) * 2
        if two.denominator != 1:
            raise LinkSpaceError(f"j_max must be a half-integer, got {jmax}")
        return cls("su2", two_jmax=int(two), laplacian_scale=float(laplacian_scale))

    @property
    def color_dim(self) -> int:
        return 1 if self.kind == "u1" else 2

    @property
    def jmax(self) -> Fraction:
        return Fraction(self.two_jmax, 2)

    @property
    def dim(self) -> int:
        return local_dim(self)


def local_dim(model: GaugeGroupModel) -> int:
    """Dimension of one truncated link factor."""
    if model.kind == "u1":
        return 2 * model.cutoff + 1
    return sum((tj + 1) ** 2 for tj in range(model.two_jmax + 1))


def u1_charges(model: GaugeGroupModel) -> np.ndarray:
    """Electric quantum numbers ``m = -c..c`` of the U(1) basis."""
    if model.kind != "u1":
        raise LinkSpaceError("charges are defined for U(1) only")
    return np.arange(-model.cutoff, model.cutoff + 1)


def su2_basis(model: GaugeGroupModel) -> list[tuple[int, int, int]]:
    """Basis labels ``(2j, 2a, 2b)`` in storage order."""
    out = []
    for tj in range(model.two_jmax + 1):
        ms = range(tj, -tj - 1, -2)
        out.extend((tj, ta, tb) for ta in ms for tb in ms)
    return out


def _su2_offsets(two_jmax: int) -> list[int]:
    offs, acc = [], 0
    for tj in range(two_jmax + 1):
        offs.append(acc)
        acc += (tj + 1) ** 2
    return offs


def _su2_index(tj: int, ta: int, tb: int, offs: list[int]) -> int:
    n = tj + 1
    return offs[tj] + ((tj - ta) // 2) * n + (tj - tb) // 2


# electric term ----------------------------------------------------------------

def casimir_diag(model: GaugeGroupModel) -> np.ndarray:
    """Unscaled Casimir eigenvalues in basis order."""
    if model.kind == "u1":
        return u1_charges(model).astype(float) ** 2
    vals = []
    for tj in range(model.two_jmax + 1):
        j = tj / 2
        vals.extend([j * (j + 1)] * (tj + 1) ** 2)
    return np.asarray(vals, dtype=float)


def electric_operator(model: GaugeGroupModel) -> sp.csr_matrix:
    """Diagonal electric Laplacian ``laplacian_scale * Casimir``."""
    return sp.diags(model.laplacian_scale * casimir_diag(model)).tocsr().astype(complex)


# link matrix elements -----------------------------------------------------------

@lru_cache(maxsize=None)
def _cg(two_j1: int, two_m1: int, two_j2: int, two_m2: int, two_J: int, two_M: int) -> float:
    return float(
        clebsch_gordan(
            Rational(two_j1, 2), Rational(two_j2, 2), Rational(two_J, 2),
            Rational(two_m1, 2), Rational(two_m2, 2), Rational(two_M, 2),
        )
    )


@lru_cache(maxsize=None)
def _su2_phi(two_jmax: int, a: int, b: int) -> sp.csr_matrix:
    offs = _su2_offsets(two_jmax)
    dim = offs[-1] + (two_jmax + 1) ** 2
    tma, tmb = 1 - 2 * a, 1 - 2 * b  # color 0 is m = +1/2
    rows, cols, vals = [], [], []
    for tj in range(two_jmax + 1):
        for ta in range(tj, -tj - 1, -2):
            for tb in range(tj, -tj - 1, -2):
                src = _su2_index(tj, ta, tb, offs)
                for tJ in (tj - 1, tj + 1):
                    if tJ < 0 or tJ > two_jmax:
                        continue
                    tA, tB = ta + tma, tb + tmb
                    if abs(tA) > tJ or abs(tB) > tJ:
                        continue
                    c = sqrt((tj + 1) / (tJ + 1)) * _cg(1, tma, tj, ta, tJ, tA) * _cg(1, tmb, tj, tb, tJ, tB)
                    if c != 0.0:
                        rows.append(_su2_index(tJ, tA, tB, offs))
                        cols.append(src)
                        vals.append(c)
    return sp.csr_matrix((np.asarray(vals, complex), (rows, cols)), shape=(dim, dim))


def link_matrix(model: GaugeGroupModel, i: int, j: int) -> sp.csr_matrix:
    """Multiplication by the matrix element ``Phi_ij(g) = (e_i, g e_j)``.

    For U(1) this is the shift ``|m> -> |m+1>``; for SU(2) it is assembled
    from ``1/2 (x) j`` Clebsch-Gordan coefficients. Images beyond the cutoff
    are dropped.
    """
    n = model.color_dim
    if not (0 <= i < n and 0 <= j < n):
        raise LinkSpaceError(f"color index ({i}, {j}) out of range for color_dim={n}")
    if model.kind == "u1":
        d = local_dim(model)
        return sp.eye(d, k=-1, format="csr", dtype=complex)
    return _su2_phi(model.two_jmax, i, j).copy()


@dataclass(frozen=True)
class LinkOperatorSet:
    electric_diag: np.ndarray
    phi: tuple[tuple[sp.csr_matrix, ...], ...]
    dim: int


def link_operators(model: GaugeGroupModel) -> LinkOperatorSet:
    n = model.color_dim
    phi = tuple(tuple(link_matrix(model, i, j) for j in range(n)) for i in range(n))
    return LinkOperatorSet(model.laplacian_scale * casimir_diag(model), phi, local_dim(model))


# group elements -------------------------------------------------------------------

def validate_element(model: GaugeGroupModel, g) -> object:
    """Check a group element and return it in canonical form."""
    if model.kind == "u1":
        try:
            return float(g)
        except (TypeError, ValueError):
            raise LinkSpaceError(f"U(1) elements are real angles, got {g!r}") from None
    u = np.asarray(g, dtype=complex)
    if u.shape != (2, 2):
        raise LinkSpaceError("SU(2) elements are 2x2 matrices")
    if not np.allclose(u.conj().T @ u, np.eye(2), atol=1e-10) or abs(np.linalg.det(u) - 1) > 1e-10:
        raise LinkSpaceError("matrix is not special unitary")
    return u


def identity_element(model: GaugeGroupModel):
    return 0.0 if model.kind == "u1" else np.eye(2, dtype=complex)


def random_element(model: GaugeGroupModel, rng: np.random.Generator):
    """Haar-random group element."""
    if model.kind == "u1":
        return float(rng.uniform(0.0, 2 * np.pi))
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    a, b = q[0] + 1j * q[3], q[2] + 1j * q[1]
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]])


def compose(model: GaugeGroupModel, g, h):
    """Group product ``g h``."""
    if model.kind == "u1":
        return float(g) + float(h)
    return np.asarray(g) @ np.asarray(h)


def inverse(model: GaugeGroupModel, g):
    if model.kind == "u1":
        return -float(g)
    return np.asarray(g).conj().T


def fundamental(model: GaugeGroupModel, g) -> np.ndarray:
    """Defining (color) representation matrix of a group element."""
    if model.kind == "u1":
        return np.array([[np.exp(1j * float(g))]])
    return np.asarray(g, dtype=complex)


def wigner_d(two_j: int, g: np.ndarray) -> np.ndarray:
    """Spin-j representation matrix of ``g`` in SU(2).

    Built from the action ``P(x, y) -> P(a x + c y, b x + d y)`` on homogeneous
    polynomials, with basis ``x^(j+m) y^(j-m) / sqrt((j+m)! (j-m)!)``, rows
    and columns ordered ``m = j..-j``. Spin 1/2 returns ``g`` itself.
    """
    (a, b), (c, d) = np.asarray(g, dtype=complex)
    n = two_j + 1
    out = np.zeros((n, n), dtype=complex)
    for col in range(n):
        p, q = two_j - col, col  # powers of x and y in the source monomial
        norm_src = sqrt(factorial(p) * factorial(q))
        for k in range(p + 1):
            for l in range(q + 1):
                xp = k + l
                row = two_j - xp
                coef = comb(p, k) * comb(q, l) * a**k * c ** (p - k) * b**l * d ** (q - l)
                out[row, col] += coef * sqrt(factorial(xp) * factorial(two_j - xp)) / norm_src
    return out


# translations and gauge phases ------------------------------------------------------

def left_translation(model: GaugeGroupModel, angle: float) -> sp.csr_matrix:
    """U(1) left translation ``U_theta``: diagonal ``exp(-i m theta)``."""
    if model.kind != "u1":
        raise LinkSpaceError("left_translation is only provided for U(1)")
    return sp.diags(np.exp(-1j * u1_charges(model) * float(angle))).tocsr()


def gauge_link_unitary(model: GaugeGroupModel, g_tail, g_head) -> sp.csr_matrix:
    """Gauge action ``phi(h) -> phi(g_tail^-1 h g_head)`` on one link factor.

    U(1): ``diag(exp(i m (theta_head - theta_tail)))``.
    SU(2): on each Peter-Weyl block, ``conj(D^j(g_tail)) (x) D^j(g_head)``.
    """
    gt = validate_element(model, g_tail)
    gh = validate_element(model, g_head)
    if model.kind == "u1":
        return sp.diags(np.exp(1j * u1_charges(model) * (gh - gt))).tocsr()  # type: ignore[operator]
    blocks = [
        np.kron(wigner_d(tj, gt).conj(), wigner_d(tj, gh))  # type: ignore[arg-type]
        for tj in range(model.two_jmax + 1)
    ]
    return sp.block_diag(blocks, format="csr").astype(complex)
