"""Polynomial and spectral algebra at arbitrary precision.

Characteristic polynomials and irreducibility are decided in exact integer
arithmetic; roots are isolated by Aberth-Ehrlich simultaneous iteration with
a posteriori inclusion-disk certification; eigenbases of an integer matrix and
its transpose are built through spectral projectors and normalized to be dual
to each other under the bilinear pairing <u, v> = sum u_i v_i (no conjugation).

Polynomial coefficients are ascending (constant term first).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from mpmath import mp, mpc, mpf

from .errors import (
    ConvergenceError,
    DegenerateSpectrumError,
    DegreeError,
    DomainError,
    RootIsolationError,
)
from ._util import (
    mat_identity,
    mat_mul,
    mat_transpose,
    mat_vec,
    poly_degree,
    poly_deriv,
    poly_divmod_int,
    poly_eval,
    poly_mod_reduce,
    poly_normalize,
)

PISOT = "Pisot"
SALEM = "Salem"
OTHER = "Other"
REDUCIBLE = "Reducible"

IRREDUCIBILITY_DEGREE_CAP = 12


@dataclass(frozen=True)
class Precision:
    """Working precision in bits plus the guard policy for expanding powers.

    Operations touching alpha^n request ``bits + ceil(n * log2(alpha)) + guard``
    bits, since the error of the expanding direction grows by exactly one
    alpha-factor per step.
    """

    bits: int = 256
    guard: int = 128

    def __post_init__(self):
        if self.bits < 64:
            raise DomainError("precision must be at least 64 bits")

    def for_power(self, n, alpha_log2):
        return int(self.bits + mp.ceil(n * alpha_log2) + self.guard)


@dataclass(frozen=True)
class NumberProfile:
    """Classified root data of a monic integer polynomial.

    ``roots`` are ordered with the real roots first (descending absolute
    value, so the dominant root is roots[0] and, for a palindromic Salem
    polynomial, its reciprocal is roots[1]) followed by complex-conjugate
    pairs in descending modulus, upper half-plane member first.
    """

    coeffs: tuple          # ascending integer coefficients, monic
    roots: tuple           # mpc values at precision `prec_bits`
    classification: str
    prec_bits: int

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def height(self):
        return max(abs(c) for c in self.coeffs)

    @property
    def alpha(self):
        return self.roots[0].real

    def circle_index(self):
        """Index of the first unit-circle conjugate (the |.|=1 direction)."""
        if self.classification != SALEM:
            raise DomainError("no unit-circle direction for a %s profile" % self.classification)
        return 2

    def alpha_at(self, prec):
        """Dominant root refined to `prec` bits by Newton iteration."""
        return refine_root(self.coeffs, self.roots[0], prec).real

    def roots_at(self, prec):
        return tuple(refine_root(self.coeffs, r, prec) for r in self.roots)


def charpoly(S):
    """Characteristic polynomial det(xI - S), exact integers, ascending coeffs."""
    A = [[int(x) for x in row] for row in S]
    n = len(A)
    # Faddeev-LeVerrier: exact integer recursion for a monic result.
    c = [0] * (n + 1)
    c[n] = 1
    I = mat_identity(n)
    Ak = tuple(tuple(row) for row in A)
    prev = Ak
    for k in range(1, n + 1):
        tr = sum(prev[i][i] for i in range(n))
        assert tr % k == 0
        c[n - k] = -tr // k
        if k < n:
            shifted = tuple(
                tuple(prev[i][j] + c[n - k] * I[i][j] for j in range(n)) for i in range(n)
            )
            prev = mat_mul(tuple(tuple(row) for row in A), shifted)
    return tuple(c)


def _divisors_signed(n):
    n = abs(n)
    out = [d for d in range(1, n + 1) if n % d == 0]
    return [x for d in out for x in (d, -d)]


def _landau_mignotte_bound(coeffs, k):
    # max |coefficient| of a degree-k monic integer factor
    norm2 = mp.sqrt(sum(c * c for c in coeffs))
    return int(mp.floor(mpf(2) ** k * norm2)) + 1


def is_irreducible(coeffs):
    """Exact irreducibility over Z for a monic integer polynomial.

    Decided by exhaustive search over integer factor pairs: monic factor
    candidates of each degree k <= d/2 are produced by Kronecker interpolation
    through divisor tuples of sample values, pruned by the Landau-Mignotte
    coefficient bound, and tested by exact division.
    """
    coeffs = poly_normalize(coeffs)
    d = poly_degree(coeffs)
    if coeffs[-1] != 1:
        raise DomainError("polynomial must be monic")
    if d > IRREDUCIBILITY_DEGREE_CAP:
        raise DegreeError("degree %d exceeds the exhaustive-search cap %d"
                          % (d, IRREDUCIBILITY_DEGREE_CAP))
    if d <= 1:
        return True
    if coeffs[0] == 0:
        return False  # x divides
    # linear factors: rational root theorem (monic -> integer roots)
    for r in _divisors_signed(coeffs[0]):
        if poly_eval(coeffs, r) == 0:
            return False
    for k in range(2, d // 2 + 1):
        if _has_monic_factor_of_degree(coeffs, k):
            return False
    return True


def _has_monic_factor_of_degree(coeffs, k):
    pts = [0, 1, -1, 2, -2, 3, -3, 4, -4, 5, -5, 6, -6][: k + 1]
    vals = [poly_eval(coeffs, x) for x in pts]
    if any(v == 0 for v in vals):
        return True  # integer root, already a factor
    bound = _landau_mignotte_bound(coeffs, k)
    # Lagrange basis denominators for integrality-checked interpolation
    choices = [_divisors_signed(v) for v in vals]
    for combo in itertools.product(*choices):
        q = _interpolate_integer_poly(pts, combo, k)
        if q is None or q[-1] != 1:
            continue
        if max(abs(c) for c in q) > bound:
            continue
        _, rem = poly_divmod_int(coeffs, q)
        if poly_degree(rem) == 0 and rem[0] == 0:
            return True
    return False


def _interpolate_integer_poly(xs, ys, k):
    # Newton divided differences over Fractions; returns int coeffs or None.
    n = len(xs)
    table = [Fraction(y) for y in ys]
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            table[i] = (table[i] - table[i - 1]) / (xs[i] - xs[i - j])
    coeffs = [Fraction(0)] * n
    coeffs[0] = table[0]
    basis = [Fraction(1)] + [Fraction(0)] * (n - 1)
    for j in range(1, n):
        # basis *= (x - xs[j-1])
        new = [Fraction(0)] * n
        for i in range(j):
            new[i + 1] += basis[i]
            new[i] -= basis[i] * xs[j - 1]
        basis = new
        for i in range(n):
            coeffs[i] += table[j] * basis[i]
    out = []
    for c in coeffs:
        if c.denominator != 1:
            return None
        out.append(int(c))
    out = poly_normalize(out)
    if poly_degree(out) != k:
        return None
    return out


def isolate_roots(coeffs, prec):
    """All complex roots by Aberth-Ehrlich iteration, certified at 2^(-prec/2).

    Seeds come from a double-precision eigenvalue solve; the refined roots are
    certified by inclusion disks of radius d*|p(z)/p'(z)| which must be
    pairwise disjoint and smaller than 2^(-prec/2).
    """
    coeffs = poly_normalize(coeffs)
    d = poly_degree(coeffs)
    if d == 0:
        return ()
    dcoeffs = poly_deriv(coeffs)
    seeds = np.roots(list(reversed(coeffs)))
    with mp.workprec(prec + 64):
        z = [mpc(complex(s)) for s in seeds]
        target = mpf(2) ** (-(prec // 2) - 8)
        for _ in range(prec + 64):
            moved = mpf(0)
            newton = []
            for i in range(d):
                pv = poly_eval(coeffs, z[i])
                dv = poly_eval(dcoeffs, z[i])
                if dv == 0:
                    dv = mpf(2) ** (-prec)
                newton.append(pv / dv)
            for i in range(d):
                s = mpc(0)
                for j in range(d):
                    if j != i:
                        s += 1 / (z[i] - z[j])
                denom = 1 - newton[i] * s
                if denom == 0:
                    denom = mpf(2) ** (-prec)
                step = newton[i] / denom
                z[i] -= step
                moved = max(moved, abs(step))
            if moved < target:
                break
        else:
            raise ConvergenceError("Aberth iteration did not settle at %d bits" % prec)
        radii = []
        for i in range(d):
            pv = poly_eval(coeffs, z[i])
            dv = poly_eval(dcoeffs, z[i])
            if dv == 0:
                raise RootIsolationError("derivative vanishes at an approximate root")
            radii.append(d * abs(pv / dv))
        for i in range(d):
            if radii[i] > mpf(2) ** (-(prec // 2)):
                raise RootIsolationError(
                    "inclusion radius %s too large at %d bits" % (mp.nstr(radii[i]), prec))
            for j in range(i + 1, d):
                if abs(z[i] - z[j]) <= radii[i] + radii[j]:
                    raise RootIsolationError("inclusion disks %d and %d overlap" % (i, j))
        # snap conjugate symmetry and real roots exactly
        out = []
        used = [False] * d
        for i in range(d):
            if used[i]:
                continue
            if abs(z[i].imag) <= radii[i]:
                out.append(mpc(z[i].real, 0))
                used[i] = True
            else:
                j = min((jj for jj in range(d) if not used[jj] and jj != i),
                        key=lambda jj: abs(z[jj] - z[i].conjugate()), default=None)
                if j is None:
                    raise RootIsolationError("unpaired complex root")
                pair = z[i] if z[i].imag > 0 else z[j]
                pair = mpc(pair.real, abs(pair.imag))
                out.append(pair)
                out.append(pair.conjugate())
                used[i] = used[j] = True
        return tuple(out)


def _order_roots(roots, prec):
    # all arithmetic at full precision; conjugates must not round to ambient prec
    with mp.workprec(prec + 64):
        reals = sorted([r for r in roots if r.imag == 0], key=lambda r: (-abs(r), -r.real))
        uppers = sorted([r for r in roots if r.imag > 0], key=lambda r: (-abs(r), -r.real))
        ordered = list(reals)
        for u in uppers:
            ordered.append(u)
            ordered.append(u.conjugate())
        return tuple(ordered)


def refine_root(coeffs, z0, prec):
    """Newton-refine a simple root approximation to `prec` bits."""
    dcoeffs = poly_deriv(coeffs)
    with mp.workprec(prec + 64):
        z = mpc(z0)
        target = mpf(2) ** (-prec)
        for _ in range(200):
            pv = poly_eval(coeffs, z)
            dv = poly_eval(dcoeffs, z)
            step = pv / dv
            z -= step
            if abs(step) < target * max(1, abs(z)):
                break
        else:
            raise ConvergenceError("Newton refinement stalled")
        if z0.imag == 0:
            return mpc(z.real, 0)
        return z


def classify(coeffs, precision=Precision()):
    """Isolate roots and classify the polynomial as Pisot/Salem/Other/Reducible.

    The Salem test uses the exact palindrome identity c_i = c_{d-i} as the
    primary criterion; numeric modulus checks at tolerance 2^(-P/4) only
    corroborate it, since unit-circle membership is not decidable by a
    floating comparison alone.
    """
    coeffs = poly_normalize(coeffs)
    d = poly_degree(coeffs)
    if d < 1:
        raise DomainError("degree must be at least 1")
    if coeffs[-1] != 1:
        raise DomainError("polynomial must be monic")
    P = precision.bits
    roots = _order_roots(isolate_roots(coeffs, P), P)
    if not is_irreducible(coeffs):
        return NumberProfile(coeffs, roots, REDUCIBLE, P)
    with mp.workprec(P):
        tol = mpf(2) ** (-(P // 4))
        dom = roots[0]
        cls = OTHER
        if dom.imag == 0 and dom.real > 1:
            others = roots[1:]
            if all(abs(r) < 1 - tol for r in others):
                cls = PISOT
            else:
                palindromic = all(coeffs[i] == coeffs[d - i] for i in range(d + 1))
                on_circle = any(abs(abs(r) - 1) <= tol for r in others)
                inside = all(abs(r) <= 1 + tol for r in others)
                if palindromic and on_circle and inside:
                    cls = SALEM
    return NumberProfile(coeffs, roots, cls, P)


@dataclass(frozen=True)
class EigenSystem:
    """Dual eigenbases of an integer matrix A and its transpose.

    e[j] is an eigenvector of A for profile.roots[j]; estar[j] one of A^T,
    scaled so that <e[k], estar[j]> = delta_kj under the bilinear pairing.
    """

    A: tuple
    e: tuple
    estar: tuple
    roots: tuple
    prec_bits: int

    @property
    def d(self):
        return len(self.roots)

    def coord(self, x, j):
        """Eigen-coordinate <x, estar[j]> of a vector x."""
        return sum(x[i] * self.estar[j][i] for i in range(len(x)))

    def estar_l1(self, j):
        return sum(abs(c) for c in self.estar[j])


def _projector_eigenvector(A, roots, j, prec):
    d = len(roots)
    with mp.workprec(prec):
        for seed_idx in range(d):
            v = [mpc(1) if i == seed_idx else mpc(0) for i in range(d)]
            for k in range(d):
                if k == j:
                    continue
                denom = roots[j] - roots[k]
                if abs(denom) < mpf(2) ** (-(prec // 2)):
                    raise DegenerateSpectrumError("eigenvalues %d and %d too close" % (j, k))
                Av = mat_vec(A, v)
                v = [(Av[i] - roots[k] * v[i]) / denom for i in range(d)]
            norm = max(abs(x) for x in v)
            if norm > mpf(2) ** (-(prec // 4)):
                return tuple(x / norm for x in v)
    raise DegenerateSpectrumError("projector annihilated every seed vector")


def eigensystem(A, profile, precision=Precision()):
    """Eigenvectors of A and A^T for the profile's roots, dual-normalized."""
    P = precision.bits
    A = tuple(tuple(int(x) for x in row) for row in A)
    d = len(A)
    if profile.degree != d:
        raise DomainError("matrix size does not match the profile degree")
    roots = profile.roots_at(P) if profile.prec_bits < P else profile.roots
    AT = mat_transpose(A)
    with mp.workprec(P):
        e = []
        estar = []
        for j in range(d):
            ej = _projector_eigenvector(A, roots, j, P)
            fj = _projector_eigenvector(AT, roots, j, P)
            if roots[j].imag == 0:
                ej = tuple(mpc(x.real, 0) for x in ej)
                fj = tuple(mpc(x.real, 0) for x in fj)
                # dominant PF direction: make both sign-definite positive
                if sum(x.real for x in ej) < 0:
                    ej = tuple(-x for x in ej)
                if sum(x.real for x in fj) < 0:
                    fj = tuple(-x for x in fj)
            pairing = sum(ej[i] * fj[i] for i in range(d))
            if abs(pairing) < mpf(2) ** (-(P // 2)):
                raise DegenerateSpectrumError("self-pairing vanishes for eigenvalue %d" % j)
            fj = tuple(x / pairing for x in fj)
            e.append(ej)
            estar.append(fj)
        # enforce exact conjugate symmetry across pairs
        for j in range(d):
            if roots[j].imag < 0:
                e[j] = tuple(x.conjugate() for x in e[j - 1])
                estar[j] = tuple(x.conjugate() for x in estar[j - 1])
        tol = mpf(2) ** (-(P // 2))
        for j in range(d):
            Ae = mat_vec(A, e[j])
            err = max(abs(Ae[i] - roots[j] * e[j][i]) for i in range(d))
            if err > tol * max(1, abs(roots[j])) * d:
                raise DegenerateSpectrumError("eigenvector residual %s too large" % mp.nstr(err))
        for j in range(d):
            for k in range(d):
                val = sum(e[k][i] * estar[j][i] for i in range(d))
                want = 1 if j == k else 0
                if abs(val - want) > tol * d * d:
                    raise DegenerateSpectrumError("duality defect at (%d, %d)" % (k, j))
    return EigenSystem(A, tuple(e), tuple(estar), roots, P)


def companion_matrix(coeffs):
    """Companion matrix (last row carries the negated coefficients)."""
    coeffs = poly_normalize(coeffs)
    d = poly_degree(coeffs)
    if coeffs[-1] != 1:
        raise DomainError("polynomial must be monic")
    rows = []
    for i in range(d - 1):
        rows.append(tuple(1 if j == i + 1 else 0 for j in range(d)))
    rows.append(tuple(-coeffs[j] for j in range(d)))
    return tuple(rows)


def embed(x_coeffs, j, profile, prec=None):
    """Embedding sigma_j of an element of Z[alpha]: evaluate at roots[j-1]."""
    if j < 1 or j > profile.degree:
        raise DomainError("embedding index out of range")
    prec = prec or profile.prec_bits
    root = profile.roots_at(prec)[j - 1] if prec > profile.prec_bits else profile.roots[j - 1]
    with mp.workprec(prec):
        return poly_eval(tuple(x_coeffs), root)


def power_basis_power(n, profile):
    """Exact integer coefficients of alpha^n in the power basis of Z[alpha]."""
    if n < 0:
        raise DomainError("exponent must be nonnegative")
    d = profile.degree
    out = [0] * d
    if n < d:
        out[n] = 1
        return tuple(out)
    # iterate multiplication by x modulo the characteristic polynomial
    cur = [0] * d
    cur[d - 1] = 1
    for _ in range(n - (d - 1)):
        lead = cur[d - 1]
        nxt = [0] + cur[:-1]
        if lead:
            for i in range(d):
                nxt[i] -= lead * profile.coeffs[i]
        cur = nxt
    return tuple(cur)
