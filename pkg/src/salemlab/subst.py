"""Substitutions on a finite alphabet: parsing, matrices, powers, return words.

Letters are the integers 1..d. A substitution maps every letter to a nonempty
word; the substitution matrix counts letter occurrencies column by column,
S(i, j) = number of times letter i appears in the image of letter j.

File format (one rule per line, UTF-8):

    1 -> 1,2
    2 -> 1
    # comments and blank lines are ignored

d is inferred as the largest letter mentioned; every letter 1..d must have
exactly one rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from mpmath import mp, mpf

from .errors import (
    AlphabetError,
    CapError,
    ConvergenceError,
    DomainError,
    SizeError,
    SubstSyntaxError,
)
from ._util import mat_mul, mat_pow

WORD_LENGTH_BUDGET = 10 ** 7
_RULE_RE = re.compile(r"^\s*(\d+)\s*->\s*(.*?)\s*$")


@dataclass(frozen=True)
class Substitution:
    """A substitution: images[a-1] is the image word of letter a."""

    d: int
    images: tuple
    power: int = 1

    def __post_init__(self):
        if self.d < 1:
            raise AlphabetError("alphabet must be nonempty")
        if self.power < 1:
            raise DomainError("power must be >= 1")
        if len(self.images) != self.d:
            raise AlphabetError("expected %d images, got %d" % (self.d, len(self.images)))
        for a, img in enumerate(self.images, start=1):
            if len(img) == 0:
                raise AlphabetError("image of letter %d is empty" % a)
            for c in img:
                if not 1 <= c <= self.d:
                    raise AlphabetError("symbol %d out of range 1..%d" % (c, self.d))

    def image(self, a):
        return self.images[a - 1]

    def apply(self, word):
        out = []
        for a in word:
            out.extend(self.images[a - 1])
        return tuple(out)

    def expand(self, a, m, budget=WORD_LENGTH_BUDGET):
        """The word zeta^m(a), guarded by the symbol budget."""
        w = (a,)
        for _ in range(m):
            grow = sum(len(self.images[c - 1]) for c in w)
            if grow > budget:
                raise CapError("expansion exceeds the %d-symbol budget" % budget)
            w = self.apply(w)
        return w


@dataclass(frozen=True)
class SubstMatrix:
    """Column-indexed occurrence counts: entries[i][j] = #{letter i+1 in image of j+1}."""

    entries: tuple

    @property
    def d(self):
        return len(self.entries)

    def column_sums(self):
        return tuple(sum(self.entries[i][j] for i in range(self.d)) for j in range(self.d))


def parse_substitution(text):
    """Parse substitution source text into a validated Substitution."""
    rules = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _RULE_RE.match(line)
        if not m:
            raise SubstSyntaxError("line %d: expected '<letter> -> s1,s2,...'" % lineno)
        letter = int(m.group(1))
        if letter < 1:
            raise AlphabetError("line %d: letters start at 1" % lineno)
        body = m.group(2)
        if not body:
            raise SubstSyntaxError("line %d: empty image" % lineno)
        try:
            symbols = tuple(int(tok.strip()) for tok in body.split(","))
        except ValueError:
            raise SubstSyntaxError("line %d: images are comma-separated integers" % lineno)
        if letter in rules:
            raise SubstSyntaxError("line %d: duplicate rule for letter %d" % (lineno, letter))
        rules[letter] = symbols
    if not rules:
        raise SubstSyntaxError("no rules found")
    d = max(max(rules), max(max(img) for img in rules.values()))
    for a in range(1, d + 1):
        if a not in rules:
            raise AlphabetError("letter %d has no image rule" % a)
    return Substitution(d=d, images=tuple(rules[a] for a in range(1, d + 1)))


def build_matrix(z):
    """S(i, j) = number of occurrences of letter i in the image of letter j."""
    entries = tuple(
        tuple(z.images[j].count(i + 1) for j in range(z.d)) for i in range(z.d)
    )
    return SubstMatrix(entries)


def is_primitive(S):
    """Primitivity with the smallest witness exponent n <= (d-1)^2 + 1.

    Returns (True, n) when S^n is entrywise positive for the minimal n in the
    search order, (False, None) otherwise.
    """
    entries = S.entries if isinstance(S, SubstMatrix) else tuple(tuple(r) for r in S)
    d = len(entries)
    cap = (d - 1) ** 2 + 1
    # clamp entries to 1 to keep the powers small; positivity only needs support
    P = tuple(tuple(min(x, 1) for x in row) for row in entries)
    cur = P
    for n in range(1, cap + 1):
        if all(x > 0 for row in cur for x in row):
            return True, n
        cur = tuple(tuple(min(x, 1) for x in row) for row in mat_mul(cur, P))
    return False, None


def substitution_power(z, k, max_image_len=WORD_LENGTH_BUDGET):
    """The substitution zeta^k; image lengths are kept under the cap."""
    if k < 1:
        raise DomainError("power must be >= 1")
    if k == 1:
        return z
    images = [(a,) for a in range(1, z.d + 1)]
    for _ in range(k):
        images = [z.apply(w) for w in images]
        if any(len(w) > max_image_len for w in images):
            raise SizeError("an image of zeta^%d exceeds %d symbols" % (k, max_image_len))
    return Substitution(d=z.d, images=tuple(images), power=z.power * k)


@dataclass(frozen=True)
class ReturnWordSet:
    """Return words up to a length cap, their good subset and population data.

    A word v is a return word when it starts with some letter c and vc is
    admissible; it is good when vc occurs inside the image of every letter.
    `classical` marks the stricter variant where c occurs in vc only as the
    prefix and the suffix.
    """

    by_letter: dict
    words: tuple
    good: tuple
    irreducible: tuple
    populations: dict
    length_cap: int
    classical: bool
    warning: str | None = field(default=None)

    def population(self, v):
        return self.populations[v]


def _language(z, max_len, budget):
    """All admissible words of length <= max_len, harvested to saturation.

    Words are collected from zeta^m(a) for every letter a, with m growing
    until two successive harvests coincide (unique ergodicity guarantees the
    factor set saturates).
    """
    prev = None
    prev_total = -1
    for m in range(1, 512):
        total = 0
        fac = set()
        long_enough = True
        for a in range(1, z.d + 1):
            w = z.expand(a, m, budget=budget)
            total += len(w)
            if len(w) <= max_len:
                long_enough = False
            for L in range(1, max_len + 1):
                for i in range(len(w) - L + 1):
                    fac.add(w[i:i + L])
        # a degenerate (for example single periodic letter) substitution may
        # never produce long words; a stalled total length then ends the loop
        if fac == prev and (long_enough or total == prev_total):
            return fac
        if total > budget:
            raise CapError("language harvest exceeded the %d-symbol budget" % budget)
        prev, prev_total = fac, total
    raise CapError("language harvest did not saturate within 511 generations")


def _occurs(needle, haystack):
    n = len(needle)
    return any(haystack[i:i + n] == needle for i in range(len(haystack) - n + 1))


def enumerate_return_words(z, length_cap, classical=False, budget=WORD_LENGTH_BUDGET):
    """Return words of length <= length_cap with populations and the good subset."""
    if length_cap < 1:
        raise DomainError("length cap must be positive")
    lang = _language(z, length_cap + 1, budget)
    words = []
    for u in sorted(lang, key=lambda w: (len(w), w)):
        if len(u) < 2 or u[0] != u[-1]:
            continue
        v = u[:-1]
        if classical and any(c == u[0] for c in u[1:-1]):
            continue
        words.append(v)
    word_set = set(words)
    by_letter = {}
    for v in words:
        by_letter.setdefault(v[0], []).append(v)
    good = tuple(
        v for v in words
        if all(_occurs(v + (v[0],), z.images[b - 1]) for b in range(1, z.d + 1))
    )
    irreducible = tuple(v for v in words if not _splits_into_return_words(v, word_set))
    populations = {v: tuple(v.count(i) for i in range(1, z.d + 1)) for v in words}
    warning = None
    if not words:
        warning = "no return word of length <= %d" % length_cap
    elif not good:
        warning = "no good return word at this power; consider substitution_power"
    return ReturnWordSet(
        by_letter={c: tuple(vs) for c, vs in by_letter.items()},
        words=tuple(words),
        good=good,
        irreducible=irreducible,
        populations=populations,
        length_cap=length_cap,
        classical=classical,
        warning=warning,
    )


def _splits_into_return_words(v, word_set):
    """True when v is a concatenation of >= 2 shorter return words."""
    n = len(v)
    reach = [False] * (n + 1)
    reach[0] = True
    for i in range(n):
        if not reach[i]:
            continue
        for j in range(i + 1, n + 1):
            if (i, j) != (0, n) and v[i:j] in word_set:
                reach[j] = True
    return reach[n]


def letter_frequencies(z, prec=128, max_iter=None):
    """Letter frequencies: the normalized right PF eigenvector of the matrix.

    Power iteration at the working precision; converges for any primitive
    substitution, with a ConvergenceError guard otherwise.
    """
    S = build_matrix(z).entries
    d = z.d
    prim, _ = is_primitive(SubstMatrix(S))
    if not prim:
        raise DomainError("letter frequencies require a primitive substitution")
    if max_iter is None:
        max_iter = 64 * prec
    with mp.workprec(prec + 32):
        v = [mpf(1) / d] * d
        tol = mpf(2) ** (-(prec // 2) - 4)
        for _ in range(max_iter):
            w = [sum(mpf(S[i][j]) * v[j] for j in range(d)) for i in range(d)]
            norm = sum(w)
            w = [x / norm for x in w]
            if max(abs(w[i] - v[i]) for i in range(d)) < tol:
                return tuple(w)
            v = w
    raise ConvergenceError("power iteration did not converge at %d bits" % prec)


def factor_complexity(z, max_len, budget=WORD_LENGTH_BUDGET):
    """Factor counts p(1..max_len); a growth diagnostic for non-periodicity.

    Strictly increasing complexity over the harvested sample indicates a
    non-periodic (infinite) subshift; reported as a diagnostic, not a gate.
    """
    lang = _language(z, max_len, budget)
    counts = [0] * (max_len + 1)
    for w in lang:
        counts[len(w)] += 1
    return tuple(counts[1:])
