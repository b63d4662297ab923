"""Return-word lattices, their duals and sup-metric constants.

The lattice Gamma is the integer span of return-word population vectors
(a full-rank sublattice of Z^d when the substitution matrix is irreducible);
L = Gamma* is its dual under the standard pairing. Everything metric is
measured in the sup norm: a_L is the minimal distance between distinct points
of L, b_L a certified covering-radius bound, and c_AL = a_L / (4 ||A||) with
||A|| the max-absolute-row-sum norm of A = S^T.

Basis conventions: columns of `gamma_basis` generate Gamma (Hermite normal
form); columns of `dual_basis` (exact rationals) generate L.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import sympy
from mpmath import mp, mpf
from sympy.matrices.normalforms import hermite_normal_form

from .errors import DomainError, EnumerationBudgetError, RankError
from ._util import mat_inf_norm, mat_inverse_fractions, mat_transpose, round_half_up, to_mpf

ENUMERATION_BUDGET = 2_000_000


@dataclass(frozen=True)
class LatticePair:
    """Gamma, its dual L = Gamma*, and the sup-metric constants of L.

    Both bases are stored row-major; their columns are the generators.
    `dual_inv` is the exact inverse of the dual basis matrix, used for Babai
    rounding in lattice coordinates.
    """

    gamma_basis: tuple       # integer matrix, columns generate Gamma
    dual_basis: tuple        # Fraction matrix, columns generate L = Gamma*
    dual_inv: tuple          # exact inverse of dual_basis
    a_L: Fraction
    b_L: Fraction
    A: tuple                 # the matrix S^T acting on L
    A_norm: int
    c_AL: Fraction

    @property
    def d(self):
        return len(self.gamma_basis)

    def dual_is_identity(self):
        d = self.d
        return all(
            self.dual_basis[i][j] == (1 if i == j else 0)
            for i in range(d) for j in range(d)
        )

    def dual_point(self, coords):
        """Exact rational coordinates of the lattice point with given integer coords."""
        d = self.d
        return tuple(
            sum(self.dual_basis[i][j] * coords[j] for j in range(d)) for i in range(d)
        )


@dataclass(frozen=True)
class TorusPoint:
    """A point of R^d, its nearest L-point and the sup-distance between them."""

    raw: tuple
    coords: tuple        # integer coordinates of the nearest point in the dual basis
    nearest: tuple       # the nearest lattice point itself (mpf entries)
    frac: tuple          # raw - nearest
    dist: object         # mpf sup norm of frac


def build_lattice(rws, A):
    """Lattice pair from a ReturnWordSet (or an iterable of integer vectors).

    A is the matrix S^T that will act on the dual lattice; invariance
    S Gamma in Gamma is verified. Raises RankError when the population
    vectors do not span (enumeration cap too small, or reducibility).
    """
    if hasattr(rws, "populations"):
        vectors = sorted(set(rws.populations.values()))
    else:
        vectors = sorted({tuple(int(x) for x in v) for v in rws})
    if not vectors:
        raise RankError("no generating vectors")
    d = len(vectors[0])
    M = sympy.Matrix([list(v) for v in vectors]).T  # columns are generators
    if M.rank() < d:
        raise RankError("population vectors span rank %d < %d" % (M.rank(), d))
    H = hermite_normal_form(M)
    gamma_basis = tuple(tuple(int(H[i, j]) for j in range(d)) for i in range(d))
    # dual basis: columns of (G^{-1})^T, exact rationals
    dual_cols = mat_transpose(mat_inverse_fractions(gamma_basis))
    A = tuple(tuple(int(x) for x in row) for row in A)
    S = mat_transpose(A)
    _check_invariance(S, gamma_basis)
    a = _min_distance_from_basis(dual_cols)
    b = _covering_bound_from_basis(dual_cols)
    nrm = mat_inf_norm(A)
    return LatticePair(
        gamma_basis=gamma_basis,
        dual_basis=dual_cols,
        dual_inv=mat_inverse_fractions(dual_cols),
        a_L=a,
        b_L=b,
        A=A,
        A_norm=nrm,
        c_AL=a / (4 * nrm),
    )


def lattice_from_dual_basis(dual_cols, A):
    """Lattice pair when L is given directly by a rational column basis.

    Used for the standard-lattice case L = Z^d (companion-matrix expansions).
    The stored Gamma basis is exact rational (integer entries whenever the
    dual of L is an integer lattice, as it always is for return-word data).
    """
    d = len(dual_cols)
    dual = tuple(tuple(Fraction(x) for x in dual_cols[i]) for i in range(d))
    inv = mat_inverse_fractions(dual)
    gamma = mat_transpose(inv)
    gamma_basis = tuple(
        tuple(int(x) if Fraction(x).denominator == 1 else Fraction(x) for x in row)
        for row in gamma
    )
    A = tuple(tuple(int(x) for x in row) for row in A)
    a = _min_distance_from_basis(dual)
    b = _covering_bound_from_basis(dual)
    nrm = mat_inf_norm(A)
    return LatticePair(gamma_basis, dual, inv, a, b, A, nrm, a / (4 * nrm))


def standard_lattice(A):
    """L = Z^d with the identity as both bases."""
    d = len(A)
    eye = tuple(tuple(Fraction(int(i == j)) for j in range(d)) for i in range(d))
    return lattice_from_dual_basis(eye, A)


def _check_invariance(S, gamma_basis):
    inv = mat_inverse_fractions(gamma_basis)
    d = len(S)
    for j in range(d):
        col = tuple(gamma_basis[i][j] for i in range(d))
        image = tuple(sum(S[i][k] * col[k] for k in range(d)) for i in range(d))
        coords = tuple(sum(inv[i][k] * image[k] for k in range(d)) for i in range(d))
        for c in coords:
            if Fraction(c).denominator != 1:
                raise RankError("S Gamma is not contained in Gamma")


def _min_distance_from_basis(dual_cols, budget=ENUMERATION_BUDGET):
    """Exact sup-norm minimal distance by exhaustive coefficient enumeration.

    The initial upper bound is the shortest basis column; coefficients are
    then bounded through the inverse basis and every candidate inside the box
    is inspected.
    """
    d = len(dual_cols)
    cols = tuple(tuple(Fraction(dual_cols[i][j]) for i in range(d)) for j in range(d))
    U = min(max(abs(x) for x in col) for col in cols)
    inv = mat_inverse_fractions(tuple(tuple(cols[j][i] for j in range(d)) for i in range(d)))
    ranges = []
    count = 1
    for i in range(d):
        bound = sum(abs(inv[i][j]) for j in range(d)) * U
        k = int(bound) + 1
        ranges.append(range(-k, k + 1))
        count *= 2 * k + 1
        if count > budget:
            raise EnumerationBudgetError("minimal-distance box holds %d > %d points"
                                         % (count, budget))
    best = None
    for coeffs in itertools.product(*ranges):
        if all(c == 0 for c in coeffs):
            continue
        norm = max(abs(sum(cols[j][i] * coeffs[j] for j in range(d))) for i in range(d))
        if best is None or norm < best:
            best = norm
    if best is None or best == 0:
        raise RankError("degenerate lattice basis")
    return best


def _covering_bound_from_basis(dual_cols):
    """Certified covering bound (1/2) sum_i ||column_i||_inf (Babai rounding error)."""
    d = len(dual_cols)
    total = Fraction(0)
    for j in range(d):
        total += max(abs(Fraction(dual_cols[i][j])) for i in range(d))
    return total / 2


def min_distance(L):
    """Minimal sup-norm distance between distinct points; accepts a basis too."""
    if isinstance(L, LatticePair):
        return L.a_L
    return _min_distance_from_basis(tuple(tuple(Fraction(x) for x in row) for row in L))


def covering_radius_bound(L):
    """Certified covering bound (1/2) sum of column sup norms; accepts a basis too."""
    if isinstance(L, LatticePair):
        return L.b_L
    return _covering_bound_from_basis(tuple(tuple(Fraction(x) for x in row) for row in L))


def nearest_point(x, L, search_radius=1):
    """Sup-norm nearest point of L to x: Babai rounding plus offset search.

    Offsets range over {-r..r}^d in lexicographic order; ties keep the
    lexicographically smallest offset. If the best distance still exceeds the
    certified covering bound, the radius escalates up to 3 before the result
    is accepted by the bound.
    """
    d = L.d
    x = tuple(to_mpf(v) for v in x)
    if L.dual_is_identity():
        # exact half-points round down: the equally-near point below has the
        # lexicographically smaller offset
        base = tuple(int(mp.ceil(v - mpf("0.5"))) for v in x)
        frac = tuple(x[i] - base[i] for i in range(d))
        dist = max(abs(f) for f in frac)
        return TorusPoint(x, base, tuple(mpf(b) for b in base), frac, dist)
    # Babai: round the coordinates of x in the lattice basis
    t = tuple(
        sum(to_mpf(L.dual_inv[i][j]) * x[j] for j in range(d)) for i in range(d)
    )
    base = tuple(round_half_up(ti) for ti in t)
    radius = search_radius
    while True:
        best = None
        for offset in itertools.product(range(-radius, radius + 1), repeat=d):
            coords = tuple(base[i] + offset[i] for i in range(d))
            pt = tuple(
                sum(to_mpf(L.dual_basis[i][j]) * coords[j] for j in range(d))
                for i in range(d)
            )
            dist = max(abs(x[i] - pt[i]) for i in range(d))
            if best is None or dist < best[0]:
                best = (dist, coords, pt)
        dist, coords, pt = best
        if dist <= to_mpf(L.b_L) or radius >= 3:
            frac = tuple(x[i] - pt[i] for i in range(d))
            return TorusPoint(x, coords, pt, frac, dist)
        radius += 1
