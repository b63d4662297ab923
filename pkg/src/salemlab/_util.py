"""Shared numeric helpers: integer polynomials, small exact matrices, formatting.

Polynomials are coefficient sequences in ascending order (constant term first),
matching the CLI convention ``1,-1,-1,-1,1`` for x^4 - x^3 - x^2 - x + 1.
Integer matrices are tuples of row tuples.
"""

from __future__ import annotations

from fractions import Fraction

from mpmath import mp, mpf


# -- polynomials ---------------------------------------------------------------

def poly_degree(coeffs):
    c = list(coeffs)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return len(c) - 1


def poly_normalize(coeffs):
    """Drop trailing zero coefficients (keep at least the constant)."""
    c = list(coeffs)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return tuple(c)


def poly_eval(coeffs, x):
    """Horner evaluation; works for int, Fraction, mpf and mpc arguments."""
    acc = 0 * x if not isinstance(x, int) else 0
    for c in reversed(list(coeffs)):
        acc = acc * x + c
    return acc


def poly_deriv(coeffs):
    return tuple(i * c for i, c in enumerate(coeffs) if i > 0)


def poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return tuple(out)


def poly_divmod_int(num, den):
    """Divide integer polynomials; den must be monic. Returns (quot, rem)."""
    den = poly_normalize(den)
    if den[-1] != 1:
        raise ValueError("divisor must be monic")
    rem = list(num)
    dd = len(den) - 1
    if len(rem) - 1 < dd:
        return (0,), tuple(rem)
    quot = [0] * (len(rem) - dd)
    for i in range(len(rem) - 1, dd - 1, -1):
        q = rem[i]
        quot[i - dd] = q
        if q != 0:
            for j in range(dd + 1):
                rem[i - dd + j] -= q * den[j]
    return poly_normalize(quot), poly_normalize(rem)


def poly_mod_reduce(coeffs, modpoly):
    """Reduce an integer polynomial modulo a monic integer polynomial."""
    _, rem = poly_divmod_int(coeffs, modpoly)
    return rem


# -- exact vectors / matrices ---------------------------------------------------

def mat_identity(d):
    return tuple(tuple(1 if i == j else 0 for j in range(d)) for i in range(d))


def mat_transpose(A):
    return tuple(tuple(row[i] for row in A) for i in range(len(A[0])))


def mat_mul(A, B):
    n, m, p = len(A), len(B), len(B[0])
    return tuple(
        tuple(sum(A[i][k] * B[k][j] for k in range(m)) for j in range(p))
        for i in range(n)
    )


def mat_vec(A, v):
    return tuple(sum(A[i][j] * v[j] for j in range(len(v))) for i in range(len(A)))


def mat_pow(A, k):
    d = len(A)
    out = mat_identity(d)
    base = A
    while k:
        if k & 1:
            out = mat_mul(out, base)
        base = mat_mul(base, base)
        k >>= 1
    return out


def mat_inf_norm(A):
    """Operator norm for the sup metric: max absolute row sum."""
    return max(sum(abs(x) for x in row) for row in A)


def mat_inverse_fractions(A):
    """Exact inverse of an integer/rational matrix via Gauss-Jordan."""
    d = len(A)
    M = [[Fraction(A[i][j]) for j in range(d)] + [Fraction(int(i == j)) for j in range(d)]
         for i in range(d)]
    for col in range(d):
        piv = next((r for r in range(col, d) if M[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular matrix")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(d):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return tuple(tuple(M[i][d + j] for j in range(d)) for i in range(d))


def vec_inf_norm(v):
    return max(abs(x) for x in v)


# -- rounding / formatting --------------------------------------------------------

def round_half_up(x):
    """Nearest integer with ties going up, so the remainder lies in [-1/2, 1/2)."""
    return int(mp.floor(x + mpf("0.5")))


def to_mpf(x):
    """Convert int/Fraction/str/float to mpf at the current working precision."""
    if isinstance(x, Fraction):
        return mpf(x.numerator) / mpf(x.denominator)
    if isinstance(x, str):
        if "/" in x:
            num, den = x.split("/", 1)
            return mpf(int(num)) / mpf(int(den))
        return mpf(x)
    return mpf(x)


def nstr_full(x):
    """Decimal string carrying the full working precision (round-trippable)."""
    digits = int(mp.prec / 3.3219280948873626) + 3
    return mp.nstr(x, digits, strip_zeros=False)
