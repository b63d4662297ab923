"""Vector and scalar digit expansions in an expanding integer matrix base.

The vector expansion tracks A^n * omega * s against the lattice L: with p_n
the nearest lattice point and eps_n the remainder, the digits
z_0 = -p_0, z_n = A p_{n-1} - p_n = eps_n - A eps_{n-1} live in a finite
subset of L, and the remainders obey the certified recursion
eps_n = A eps_{n-1} - z_n, which costs O(d^2) per step and loses exactly one
alpha-factor of precision per step (covered by the guard policy).

The scalar expansion does the same for w * alpha^n against Z, with window
vectors of d consecutive remainders and their eigen-coordinates.

Also here: the scale sequence n_k = 2^(k!), the bad-set predicates at those
scales, the slow rate function h_beta, the tower-only representation of the
threshold R_0, iterated logarithms, and the block lower bound for
sum ||w alpha^n||^2 with its parameter search.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from mpmath import mp, mpf

from .algebra import companion_matrix, power_basis_power
from .errors import (
    BudgetError,
    CertificationError,
    ClassificationError,
    DenominatorError,
    DomainError,
    PrecisionError,
    TraceTooShortError,
)
from .lattice import nearest_point
from ._util import mat_inverse_fractions, mat_vec, poly_eval, round_half_up, to_mpf

SCALES_FACTORIAL_CAP = 12     # 2^(k!) is materialized only up to k = 12
DEFAULT_GUARD_BITS = 256


def auto_precision(n_steps, alpha, base=DEFAULT_GUARD_BITS):
    """Guard-bit policy: one alpha-factor of loss per step plus a base reserve."""
    return int(mp.ceil(n_steps * mp.log(alpha, 2))) + base


# ---------------------------------------------------------------------------
# vector expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EKStep:
    n: int
    z_coords: tuple          # integer coordinates of z_n in the dual basis
    z_exact: tuple           # exact rational coordinates of z_n in R^d
    eps: tuple               # remainder vector (mpf)
    eps_inf: object          # sup norm of eps (mpf)
    eps3_abs: object         # |<eps, estar_3>| or None when d < 3
    digits: tuple            # b_n^(j) = <z_n, estar_j>, complex


@dataclass
class EKTrace:
    """Trace of the vector digit expansion for one (omega, s)."""

    omega: object
    s: tuple
    L: object
    eigsys: object
    steps: list
    F_observed: dict         # z coordinate tuple -> first-appearance index
    prec: int
    C0: object               # max_j ||estar_j||_1
    C1: object               # C0 * b_L, uniform bound for |<eps_n, estar_j>|
    C2: object               # max_{k,j} |b_k^(j)| observed on this trace
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.steps)

    @property
    def d(self):
        return len(self.s)

    @property
    def alpha(self):
        return self.eigsys.roots[0].real

    def z_nonzero_count(self, upto):
        """#{0 <= l <= upto : z_l != 0}."""
        return sum(
            1 for st in self.steps[: upto + 1] if any(c != 0 for c in st.z_coords)
        )


def ek_expand(omega, s, L, eigsys, N, prec=None):
    """Expand A^n omega s, n = 0..N, with per-step certified bound assertions.

    omega may be an int, Fraction, string or mpf; s is the roof vector.
    The recursion never forms A^n: eps_n = A eps_{n-1} - z_n with z_n the
    nearest lattice point of A eps_{n-1}.
    """
    d = L.d
    if tuple(map(tuple, eigsys.A)) != tuple(map(tuple, L.A)):
        raise DomainError("eigensystem and lattice disagree on the matrix A")
    alpha = eigsys.roots[0].real
    if prec is None:
        prec = auto_precision(N, alpha)
    A = L.A
    with mp.workprec(prec):
        om = to_mpf(omega)
        if om == 0:
            raise DomainError("omega must be nonzero")
        svec = tuple(to_mpf(x) for x in s)
        tol = mpf(2) ** (-(prec // 2))
        b_L = to_mpf(L.b_L)
        c_AL = to_mpf(L.c_AL)
        z_bound = (1 + L.A_norm) * L.b_L
        steps = []
        F = {}
        C2 = mpf(0)
        x = tuple(om * svec[i] for i in range(d))
        prev_eps = None
        for n in range(N + 1):
            if n == 0:
                tp = nearest_point(x, L)
                z_coords = tuple(-c for c in tp.coords)   # z_0 = -p_0
                eps = tp.frac
            else:
                # eps_n = A eps_{n-1} - q with q the nearest point of A eps_{n-1},
                # and z_n = A p_{n-1} - p_n = -q
                y = mat_vec(A, prev_eps)
                tp = nearest_point(y, L)
                z_coords = tuple(-c for c in tp.coords)
                eps = tp.frac
            z_exact = L.dual_point(z_coords)
            eps_inf = max(abs(e) for e in eps)
            if eps_inf > b_L + tol:
                raise CertificationError(
                    "step %d: ||eps|| = %s exceeds b_L" % (n, mp.nstr(eps_inf)))
            if max(abs(Fraction(c)) for c in z_exact) > z_bound:
                raise CertificationError("step %d: digit outside the finite set bound" % n)
            if n >= 1 and prev_inf < c_AL - tol and eps_inf < c_AL - tol:
                if any(c != 0 for c in z_coords):
                    raise CertificationError(
                        "step %d: nonzero digit inside the contraction zone" % n)
            digits = tuple(
                sum(to_mpf(z_exact[i]) * eigsys.estar[j][i] for i in range(d))
                for j in range(d)
            )
            C2 = max(C2, max(abs(b) for b in digits))
            eps3 = abs(sum(eps[i] * eigsys.estar[2][i] for i in range(d))) if d >= 3 else None
            if z_coords not in F:
                F[z_coords] = len(F)
            steps.append(EKStep(n, z_coords, z_exact, eps, eps_inf, eps3, digits))
            prev_eps, prev_inf = eps, eps_inf
        C0 = max(eigsys.estar_l1(j) for j in range(d))
        trace = EKTrace(
            omega=omega, s=svec, L=L, eigsys=eigsys, steps=steps,
            F_observed=F, prec=prec, C0=C0, C1=C0 * b_L, C2=C2,
            metadata={
                "N": N,
                "prec_bits": prec,
                "C0_norm": "max_j l1(estar_j)",
            },
        )
        return trace


def digit_polynomial_residual(trace, j, n):
    """Residual of the digit-polynomial identity at embedding j (1-based).

    Returns omega <s, estar_j> - Phi_n^(j)(1/alpha_j) - <eps_n, estar_j> / alpha_j^n,
    which must vanish to working precision on every trace.
    """
    if not 1 <= j <= trace.d:
        raise DomainError("embedding index out of range")
    if n >= len(trace.steps):
        raise TraceTooShortError("trace has %d steps, need %d" % (len(trace.steps), n + 1))
    with mp.workprec(trace.prec):
        root = trace.eigsys.roots[j - 1]
        x = 1 / root
        om = to_mpf(trace.omega)
        lhs = om * sum(trace.s[i] * trace.eigsys.estar[j - 1][i] for i in range(trace.d))
        phi = mp.mpc(0)
        xp = mp.mpc(1)
        for k in range(n + 1):
            phi -= trace.steps[k].digits[j - 1] * xp
            xp *= x
        eps_term = sum(
            trace.steps[n].eps[i] * trace.eigsys.estar[j - 1][i] for i in range(trace.d)
        ) / root ** n
        return lhs - phi - eps_term


def digit_polynomial_residual_max(trace):
    """max over all embeddings j and steps n of |residual|, computed incrementally."""
    worst = mpf(0)
    with mp.workprec(trace.prec):
        om = to_mpf(trace.omega)
        for j in range(1, trace.d + 1):
            root = trace.eigsys.roots[j - 1]
            x = 1 / root
            lhs = om * sum(trace.s[i] * trace.eigsys.estar[j - 1][i] for i in range(trace.d))
            phi = mp.mpc(0)
            xp = mp.mpc(1)
            rp = mp.mpc(1)
            for n, st in enumerate(trace.steps):
                phi -= st.digits[j - 1] * xp
                xp *= x
                eps_term = sum(
                    st.eps[i] * trace.eigsys.estar[j - 1][i] for i in range(trace.d)
                ) / rp
                worst = max(worst, abs(lhs - phi - eps_term))
                rp *= root
    return worst


def reconstruction_error(trace, n):
    """Error of the base-A expansion identity at depth n.

    Evaluates omega s + z_0 + A^{-1} z_1 + ... + A^{-n} z_n - A^{-n} eps_n,
    with the digit part in exact rational arithmetic.
    """
    if n >= len(trace.steps):
        raise TraceTooShortError("trace has %d steps, need %d" % (len(trace.steps), n + 1))
    d = trace.d
    Ainv = mat_inverse_fractions(trace.L.A)
    power = tuple(tuple(Fraction(int(i == j)) for j in range(d)) for i in range(d))
    acc = list(mat_vec(power, trace.steps[0].z_exact))
    for k in range(1, n + 1):
        power = tuple(
            tuple(sum(power[i][t] * Ainv[t][j] for t in range(d)) for j in range(d))
            for i in range(d)
        )
        term = mat_vec(power, trace.steps[k].z_exact)
        acc = [acc[i] + term[i] for i in range(d)]
    # `power` now holds A^-n exactly; the remainder part is evaluated in floats
    with mp.workprec(trace.prec):
        eps_part = tuple(
            sum(to_mpf(power[i][j]) * trace.steps[n].eps[j] for j in range(d))
            for i in range(d)
        )
        om = to_mpf(trace.omega)
        return max(
            abs(om * trace.s[i] + to_mpf(acc[i]) - eps_part[i]) for i in range(d)
        )


def eq3_gap(trace, n, B):
    """Left and right side of the digit-ratio gap inequality at step n.

    lhs = |<s, estar_3> - Phi_n^(3)(1/alpha_3) / Phi_n^(1)(1/alpha)|;
    rhs = B |<eps_n, estar_3>| + C1 C2 B (n+1) / (alpha^n (1/B - C1 alpha^-n)).
    Requires a unit-circle direction (Salem data) and |omega| in [1/B, B].
    """
    d = trace.d
    if d < 3:
        raise ClassificationError("no unit-circle direction in dimension %d" % d)
    with mp.workprec(trace.prec):
        a3 = trace.eigsys.roots[2]
        if abs(abs(a3) - 1) > mpf(2) ** (-(trace.prec // 4)):
            raise ClassificationError("third eigenvalue is not on the unit circle")
        om = abs(to_mpf(trace.omega))
        B = to_mpf(B)
        if om < 1 / B or om > B:
            raise DomainError("|omega| outside [1/B, B]")
        alpha = trace.alpha
        denom_low = 1 / B - trace.C1 * alpha ** (-n)
        if denom_low <= 0:
            raise DenominatorError(
                "1/B - C1 alpha^-n <= 0 at n = %d; increase n" % n)
        root1 = trace.eigsys.roots[0]
        phi1 = mp.mpc(0)
        phi3 = mp.mpc(0)
        x1 = 1 / root1
        x3 = 1 / a3
        xp1 = mp.mpc(1)
        xp3 = mp.mpc(1)
        for k in range(n + 1):
            phi1 -= trace.steps[k].digits[0] * xp1
            phi3 -= trace.steps[k].digits[2] * xp3
            xp1 *= x1
            xp3 *= x3
        s_e3 = sum(trace.s[i] * trace.eigsys.estar[2][i] for i in range(d))
        lhs = abs(s_e3 - phi3 / phi1)
        eps3 = trace.steps[n].eps3_abs
        rhs = B * eps3 + trace.C1 * trace.C2 * B * (n + 1) / (alpha ** n * denom_low)
        return {"lhs": lhs, "rhs": rhs, "ok": bool(lhs <= rhs), "n": n}


# ---------------------------------------------------------------------------
# scales and predicates
# ---------------------------------------------------------------------------

def scales(k):
    """The super-exponential scale n_k = 2^(k!) as an exact integer."""
    if k < 1:
        raise DomainError("scale index starts at 1")
    if k > SCALES_FACTORIAL_CAP:
        raise BudgetError(
            "2^(%d!) has %d bits; scales are materialized only up to k = %d"
            % (k, factorial(k), SCALES_FACTORIAL_CAP))
    return 1 << factorial(k)


def bad_set_predicates(trace, k, B=None, partial=False):
    """The three bad-set predicates at scale n_k for one trace.

    E1: #{l <= n_k : z_l != 0} < k/2       (the count includes l = 0)
    E2: z_l = 0 for every l in the open interval (n_{k-1}, n_k)
    E3: |eps_{n_{k-1}}|_3 < (2k / n_k)^(1/2)

    With partial=True, predicates whose scale exceeds the trace length are
    reported as None instead of raising TraceTooShortError.
    """
    if k < 1:
        raise DomainError("scale index starts at 1")
    n_k = scales(k)
    n_prev = scales(k - 1) if k >= 2 else 2  # n_0 = 2^(0!) = 2
    have = len(trace.steps) - 1
    out = {"k": k, "n_k": n_k, "n_k_minus_1": n_prev, "B": B}
    if n_k > have and not partial:
        raise TraceTooShortError(
            "predicates at k = %d need %d steps, trace has %d" % (k, n_k, have))
    if n_k <= have:
        count = trace.z_nonzero_count(n_k)
        out["E1"] = bool(count < k / 2)
        out["E1_count"] = count
        out["E2"] = all(
            all(c == 0 for c in trace.steps[l].z_coords)
            for l in range(n_prev + 1, n_k)
        )
    else:
        out["E1"] = None
        out["E2"] = None
    if n_prev <= have and trace.d >= 3:
        with mp.workprec(trace.prec):
            thresh = mp.sqrt(mpf(2) * k / mpf(n_k))
            out["E3"] = bool(trace.steps[n_prev].eps3_abs < thresh)
            out["E3_threshold"] = thresh
    else:
        out["E3"] = None
    return out


def B_of_omega(omega):
    """B(omega) = max{16, ceil|omega|, ceil|omega|^-1}; exact for rationals."""
    if isinstance(omega, (int, Fraction)):
        om = Fraction(omega)
        if om == 0:
            raise DomainError("omega must be nonzero")
        om = abs(om)
        up = -((-om.numerator) // om.denominator)
        down = -((-om.denominator) // om.numerator)
        return max(16, up, down)
    om = abs(to_mpf(omega))
    if om == 0:
        raise DomainError("omega must be nonzero")
    return max(16, int(mp.ceil(om)), int(mp.ceil(1 / om)))


# ---------------------------------------------------------------------------
# rate functions
# ---------------------------------------------------------------------------

def psi(tau):
    """psi(tau) = log(tau) / log log(tau), logs base 2, for tau >= 4."""
    tau = to_mpf(tau)
    if tau < 4:
        raise DomainError("psi needs tau >= 4")
    lt = mp.log(tau, 2)
    return lt / mp.log(lt, 2)


def rate_h(r, beta, alpha):
    """The slow mixing rate h_beta(r) = exp(-beta psi(loglog_alpha(1/2r))).

    Defined when the quadruple-log chain exists and its innermost value
    exceeds 16, that is for r < alpha^-16 / 2; otherwise raises DomainError
    carrying the admissible boundary.
    """
    r = to_mpf(r)
    alpha = to_mpf(alpha)
    if alpha <= 1:
        raise DomainError("alpha must exceed 1")
    boundary = alpha ** (-16) / 2
    if r <= 0 or r >= boundary:
        raise DomainError(
            "rate defined for r < %s (got %s)" % (mp.nstr(boundary), mp.nstr(r)))
    u1 = mp.log(1 / (2 * r), 2) / mp.log(alpha, 2)   # log_alpha(1/2r) > 16
    u2 = mp.log(u1, 2)
    return mp.exp(-to_mpf(beta) * psi(u2))


def r0_loglog(B, gamma):
    """log2 log_alpha of the threshold R_0 = alpha^(2^(floor(gamma psi(B))!)).

    Only the tower exponent floor(gamma psi(B))! is materialized; R_0 itself
    is astronomically large.
    """
    if B < 16:
        raise DomainError("B >= 16 required")
    if gamma < 1:
        raise DomainError("gamma >= 1 required")
    t = int(mp.floor(to_mpf(gamma) * psi(B)))
    return factorial(t)


def r_below_r0(r, B, gamma, alpha):
    """Whether r <= r_0(omega), compared in log2 log_alpha coordinates."""
    r = to_mpf(r)
    if r <= 0:
        raise DomainError("r must be positive")
    tower = r0_loglog(B, gamma)
    u1 = mp.log(1 / (2 * r), 2) / mp.log(to_mpf(alpha), 2)
    if u1 <= 0:
        return False
    return mp.log(u1, 2) >= tower


def logstar(x, base=2):
    """Iterated-logarithm count min{n >= 0 : log^n(x) <= 1} in the given base."""
    x = to_mpf(x)
    if x < 1:
        raise DomainError("logstar needs x >= 1")
    base = to_mpf(base)
    if base <= 1:
        raise DomainError("logstar base must exceed 1")
    lb = mp.log(base)
    count = 0
    while x > 1:
        x = mp.log(x) / lb
        count += 1
        if count > 10 ** 6:
            raise DomainError("logstar did not terminate")
    return count


def t_threshold(L):
    """The point t_L >= 16 past which psi(t) >= log2(L), by bisection.

    psi is increasing on [16, oo) with psi(16) = 2, so for L <= 4 the
    threshold clamps to 16 (conservative: psi(t) >= log2(L) already holds
    there).
    """
    target = mp.log(to_mpf(L), 2)
    if target <= 2:
        return mpf(16)
    lo, hi = mpf(16), mpf(32)
    while psi(hi) < target:
        hi *= hi
    for _ in range(200):
        mid = (lo + hi) / 2
        if psi(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi


def K_threshold(L):
    """K_L = max{4, t_L}."""
    return max(mpf(4), t_threshold(L))


def logstar_floor_gap(x, L):
    """(lhs, rhs) of the iterated-log comparison lemma for base L > 2.

    lhs = logstar_L(x); rhs = floor((logstar(x) - logstar(K_L)) / 2).
    The lemma asserts lhs >= rhs.
    """
    if L <= 2:
        raise DomainError("base must exceed 2")
    kl = K_threshold(L)
    lhs = logstar(x, base=L)
    rhs = (logstar(x) - logstar(kl)) // 2
    return lhs, int(rhs)


# ---------------------------------------------------------------------------
# scalar expansion
# ---------------------------------------------------------------------------

@dataclass
class ScalarEKTrace:
    """Remainders of w alpha^n against Z with window vectors of length d."""

    w: object
    profile: object
    p: list                   # nearest integers
    eps: list                 # remainders in [-1/2, 1/2)
    prec: int
    delta1: Fraction
    _acache: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.profile.degree

    @property
    def n_windows(self):
        return len(self.eps) - self.d + 1

    def eps_vec(self, k):
        return tuple(self.eps[k: k + self.d])

    def p_vec(self, k):
        return tuple(self.p[k: k + self.d])

    def eps_vec_inf(self, k):
        return max(abs(e) for e in self.eps_vec(k))

    def a_coeffs(self, k):
        """Eigen-coordinates a_j^(k) of the window vector eps_vec(k)."""
        if k in self._acache:
            return self._acache[k]
        d = self.d
        with mp.workprec(self.prec):
            roots = self.profile.roots_at(self.prec)
            V = mp.matrix(d, d)
            for i in range(d):
                for j in range(d):
                    V[i, j] = roots[j] ** i
            sol = mp.lu_solve(V, mp.matrix([[e] for e in self.eps_vec(k)]))
            out = tuple(sol[i] for i in range(d))
        self._acache[k] = out
        return out


def scalar_ek(w, profile, N, prec=None):
    """Scalar digit expansion of w alpha^n, n = 0..N, w in [1, alpha).

    alpha^n is taken from its exact integer power-basis coefficients and
    evaluated once per step at working precision; remainders use the
    round-half-up convention so eps_n lies in [-1/2, 1/2). The window step
    rule (consecutive windows below delta_1 are related by the companion
    matrix) is asserted on every eligible window.
    """
    d = profile.degree
    if prec is None:
        prec = auto_precision(N + d, profile.alpha)
    with mp.workprec(prec):
        alpha = profile.alpha_at(prec)
        wv = to_mpf(w)
        if not (1 <= wv < alpha):
            raise DomainError("w must lie in [1, alpha)")
        roots_pows = [alpha ** i for i in range(d)]
        delta1 = Fraction(1, 1 + d * profile.height)
        p_list, eps_list = [], []
        coeffs = power_basis_power(0, profile)
        for n in range(N + d):
            val = wv * sum(coeffs[i] * roots_pows[i] for i in range(d))
            pn = round_half_up(val)
            eps = val - pn
            p_list.append(pn)
            eps_list.append(eps)
            coeffs = _shift_reduce(coeffs, profile.coeffs)
        trace = ScalarEKTrace(w=w, profile=profile, p=p_list, eps=eps_list,
                              prec=prec, delta1=delta1)
        _assert_window_step_rule(trace)
        return trace


def _shift_reduce(coeffs, modpoly):
    d = len(coeffs)
    lead = coeffs[d - 1]
    nxt = [0] + list(coeffs[:-1])
    if lead:
        for i in range(d):
            nxt[i] -= lead * modpoly[i]
    return tuple(nxt[:d])


def _assert_window_step_rule(trace):
    d = trace.d
    A = companion_matrix(trace.profile.coeffs)
    with mp.workprec(trace.prec):
        dl = to_mpf(trace.delta1)
        tol = mpf(2) ** (-(trace.prec // 2))
        for k in range(trace.n_windows - 1):
            cur, nxt = trace.eps_vec(k), trace.eps_vec(k + 1)
            if max(abs(e) for e in cur) < dl and max(abs(e) for e in nxt) < dl:
                pred = mat_vec(A, cur)
                if max(abs(pred[i] - nxt[i]) for i in range(d)) > tol * (1 + trace.profile.height * d):
                    raise CertificationError(
                        "window %d: step rule violated below delta_1" % k)


def garsia_coefficient_check(trace, k):
    """|a_3^(k)| together with its alpha^(kd)-rescaling (the lower-bound scale)."""
    if trace.d < 3:
        raise ClassificationError("no unit-circle coordinate in dimension %d" % trace.d)
    if k >= trace.n_windows:
        raise TraceTooShortError("window %d beyond the trace" % k)
    with mp.workprec(trace.prec):
        a3 = abs(trace.a_coeffs(k)[2])
        scale = to_mpf(trace.profile.alpha_at(trace.prec)) ** (k * trace.d)
        return {"a3_abs": a3, "a3_scaled": a3 * scale, "k": k}


# ---------------------------------------------------------------------------
# block sum lower bound
# ---------------------------------------------------------------------------

def block_scales(L_base, ell, budget=10 ** 6):
    """k_0 = 1, k_i = L^(k_{i-1}); returns k_ell, guarded by the step budget."""
    if L_base < 2:
        raise DomainError("block base must be at least 2")
    if ell < 1:
        raise DomainError("ell must be at least 1")
    k = 1
    for _ in range(ell):
        if k * mp.log(L_base, 2) > mp.log(budget, 2):
            raise BudgetError("block scale k_%d exceeds the %d step budget" % (ell, budget))
        k = L_base ** k
    if k > budget:
        raise BudgetError("block scale %d exceeds the %d step budget" % (k, budget))
    return k


def fractional_parts_pow(profile, N, prec):
    """alpha^n for n < N at working precision, certified at the last power.

    Powers are produced by iterated multiplication (cheap); the final one is
    compared against the exact integer power-basis evaluation so that any
    drift surfaces as a PrecisionError.
    """
    alpha = profile.alpha_at(prec + 64)
    with mp.workprec(prec + 64):
        out = [mpf(1)]
        for _ in range(N - 1):
            out.append(out[-1] * alpha)
        # certify the last power against the exact integer coefficients
        coeffs = power_basis_power(N - 1, profile)
        roots_pows = [alpha ** i for i in range(profile.degree)]
        exact = sum(coeffs[i] * roots_pows[i] for i in range(profile.degree))
        if abs(exact - out[-1]) > mpf(2) ** (-(prec // 2)) * max(1, abs(exact)):
            raise PrecisionError("iterated powers drifted from the exact value")
    return out


def salem_sum_bound(w, profile, L_base, ell=1, prec=None, budget=10 ** 6):
    """sum_{n < k_ell} ||w alpha^n||^2 compared against ell * delta_1."""
    if profile.classification != "Salem":
        raise ClassificationError("block sum bound applies to Salem profiles")
    N = block_scales(L_base, ell, budget)
    if prec is None:
        prec = max(512, auto_precision(N, profile.alpha, base=128))
    pows = fractional_parts_pow(profile, N, prec)
    with mp.workprec(prec):
        wv = to_mpf(w)
        total = mpf(0)
        for n in range(N):
            x = wv * pows[n]
            total += (x - round_half_up(x)) ** 2
        bound = ell * to_mpf(Fraction(1, 1 + profile.degree * profile.height))
        return {"sum": total, "bound": bound, "pass": bool(total >= bound), "N": N}


def salem_sum_grid(profile, L_base, n_grid, ell=1, prec=None, budget=10 ** 6):
    """Minimum of the block sum over an n_grid-point w grid in [1, alpha)."""
    if profile.classification != "Salem":
        raise ClassificationError("block sum bound applies to Salem profiles")
    N = block_scales(L_base, ell, budget)
    if prec is None:
        prec = max(512, auto_precision(N, profile.alpha, base=128))
    pows = fractional_parts_pow(profile, N, prec)
    with mp.workprec(prec):
        alpha = profile.alpha_at(prec)
        worst = None
        worst_w = None
        for i in range(n_grid):
            wv = 1 + (alpha - 1) * (2 * i + 1) / (2 * n_grid)
            total = mpf(0)
            for n in range(N):
                x = wv * pows[n]
                total += (x - round_half_up(x)) ** 2
            if worst is None or total < worst:
                worst, worst_w = total, wv
        bound = ell * to_mpf(Fraction(1, 1 + profile.degree * profile.height))
        return {"min_sum": worst, "argmin_w": worst_w, "bound": bound,
                "pass": bool(worst >= bound), "N": N, "grid": n_grid}


def select_L(profile, c2, K_check=6):
    """Smallest integer block base L with L^k - k >= ceil((delta_1/c2^2) alpha^(2kd)) d.

    Checked explicitly for k = 1..max(K_check, k*), where k* certifies the
    tail: beyond it (L/alpha^(2d))^k >= 2 (ratio+1) d makes the inequality
    automatic. Requires c2 > 0.
    """
    return _select_L_from_params(
        profile.alpha, profile.degree,
        Fraction(1, 1 + profile.degree * profile.height), c2, K_check)


def _select_L_from_params(alpha, d, delta1, c2, K_check=6):
    with mp.workprec(128):
        c2 = to_mpf(c2)
        if c2 <= 0:
            raise DomainError("c2 must be positive")
        alpha = to_mpf(alpha)
        ratio = to_mpf(delta1) / (c2 * c2)
        growth = alpha ** (2 * d)
        L = max(2, int(mp.floor(growth)) + 1)
        while True:
            q = L / growth
            k_star = int(mp.ceil(mp.log(2 * (ratio + 1) * d) / mp.log(q))) if q > 1 else K_check
            k_max = max(K_check, max(1, k_star))
            ok = True
            for k in range(1, k_max + 1):
                need = int(mp.ceil(ratio * growth ** k)) * d
                if L ** k - k < need:
                    ok = False
                    break
            if ok:
                return L
            L += 1


def calibrate_c2(profile, n_w=256, n_steps=None, prec=512, shrink=Fraction(3, 4)):
    """Empirical c2 for the window lower bound, fitted against its definition.

    For a deterministic w grid the trace is scanned for maximal runs of
    consecutive remainders below delta_1; each run yields the observable
    sum * alpha^(2kd) / n over its initial window, and c2 is the square root
    of the smallest observable, shrunk by the given safety factor.
    """
    d = profile.degree
    if n_steps is None:
        n_steps = 24 * d
    delta1 = Fraction(1, 1 + d * profile.height)
    best = None
    with mp.workprec(prec):
        alpha = profile.alpha_at(prec)
        dl = to_mpf(delta1)
        for i in range(n_w):
            wv = 1 + (alpha - 1) * (2 * i + 1) / (2 * n_w)
            tr = scalar_ek(wv, profile, n_steps, prec=prec)
            j = 0
            M = len(tr.eps)
            while j < M:
                if abs(tr.eps[j]) >= dl:
                    j += 1
                    continue
                start = j
                while j < M and abs(tr.eps[j]) < dl:
                    j += 1
                run_len = j - start
                n_win = run_len // d
                if n_win < 1:
                    continue
                total = sum(tr.eps[t] ** 2 for t in range(start, start + n_win * d))
                observable = total * alpha ** (2 * start * d) / n_win
                if best is None or observable < best:
                    best = observable
        if best is None:
            raise DomainError("no window below delta_1 found; increase the sample")
        return mp.sqrt(best) * to_mpf(shrink)
