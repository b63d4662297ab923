"""Fourier transforms of (biased) Bernoulli convolutions and slow-decay tools.

The transform is the infinite product over n of
p e^(-2 pi i lambda^n xi) + (1-p) e^(+2 pi i lambda^n xi), truncated with a
certified tail: each dropped factor differs from 1 by at most
2 pi lambda^n |xi|, so the relative truncation error is controlled by a
geometric series.

Around it: the Pisot non-decay experiment, the iterated-log decay envelope
for Salem reciprocals with its fitted constants, decay-exponent caps for the
biased and unbiased cases, and the construction of eta in Z[alpha] whose
whole forward orbit eta alpha^n stays within epsilon of the integers
(existence by a convex-body volume threshold; the search seeds along the
direction annihilating the small conjugates, rounds, locally enumerates, and
always verifies the winner directly at high precision).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import warnings

import numpy as np
from mpmath import mp, mpc, mpf

from .algebra import companion_matrix, power_basis_power
from .errors import (
    ClassificationError,
    DomainError,
    SearchBudgetError,
    SingularityWarning,
    VerificationFailure,
)
from ._util import poly_eval, round_half_up, to_mpf

ETA_SCAN_BUDGET = 8_000_000
ETA_BOX_BUDGET = 5_000_000


@dataclass(frozen=True)
class BernoulliSpec:
    """Contraction ratio lambda in (0,1), sign bias p in (0,1), precision."""

    lam: object
    p: object
    prec: int = 256

    def __post_init__(self):
        with mp.workprec(self.prec):
            lam = to_mpf(self.lam)
            p = to_mpf(self.p)
            if not 0 < lam < 1:
                raise DomainError("lambda must lie in (0, 1)")
            if not 0 < p < 1:
                raise DomainError("p must lie in (0, 1)")


def spec_from_profile(profile, p=Fraction(1, 2), prec=None):
    prec = prec or profile.prec_bits
    with mp.workprec(prec):
        return BernoulliSpec(lam=1 / profile.alpha_at(prec), p=p, prec=prec)


def truncation_length(lam, xi_abs, tol):
    """Factors needed so the dropped tail multiplies by at most e^tol."""
    if xi_abs == 0:
        return 0
    n = mp.ceil(mp.log(2 * mp.pi * xi_abs / ((1 - lam) * tol)) / mp.log(1 / lam))
    return max(0, int(n))


def fourier(spec, xi, tol=mpf("1e-30")):
    """Certified evaluation of the transform at xi.

    Returns (value, certified_error, n_factors). The error covers both the
    dropped tail (each factor within 2 pi lambda^n |xi| of 1) and the
    accumulated rounding of the retained factors.
    """
    with mp.workprec(spec.prec):
        tol = to_mpf(tol)
        if tol <= 0:
            raise DomainError("tolerance must be positive")
        lam = to_mpf(spec.lam)
        p = to_mpf(spec.p)
        x = to_mpf(xi)
        ax = abs(x)
        work = spec.prec + max(0, int(mp.ceil(mp.log(max(2, ax), 2)))) + 32
    with mp.workprec(work):
        lam = to_mpf(spec.lam)
        p = to_mpf(spec.p)
        x = to_mpf(xi)
        N = truncation_length(lam, abs(x), tol)
        val = mpc(1)
        arg = 2 * mp.pi * x
        for n in range(N):
            theta = arg * lam ** n
            val *= p * mp.expj(-theta) + (1 - p) * mp.expj(theta)
        tail = 2 * mp.pi * abs(x) * lam ** N / (1 - lam)
        err = abs(val) * mp.expm1(tail) + (N + 2) * mpf(2) ** (-work + 4)
        return val, err, N


def pisot_nondecay(profile, N_max, w=1, tol=mpf("1e-30"), prec=None):
    """|transform| along xi = alpha^N w for a Pisot alpha; the running infimum
    stays bounded away from zero (no decay at infinity)."""
    if profile.classification != "Pisot":
        raise ClassificationError("non-decay experiment needs a Pisot profile")
    prec = prec or (profile.prec_bits + int(mp.ceil(N_max * mp.log(profile.alpha, 2))))
    spec = spec_from_profile(profile, prec=prec)
    with mp.workprec(prec):
        alpha = profile.alpha_at(prec)
        wv = to_mpf(w)
        values = []
        infimum = None
        for N in range(N_max + 1):
            v, err, _ = fourier(spec, wv * alpha ** N, tol)
            a = abs(v)
            infimum = a if infimum is None else min(infimum, a)
            values.append({"N": N, "abs": a, "err": err})
        return {"values": values, "infimum": infimum}


def _fit_line(xs, ys):
    n = len(xs)
    xbar = sum(xs) / n
    ybar = sum(ys) / n
    sxx = sum((x - xbar) ** 2 for x in xs)
    if sxx == 0:
        return ybar, mpf(0)
    slope = sum((xs[i] - xbar) * (ys[i] - ybar) for i in range(n)) / sxx
    return ybar - slope * xbar, slope


def salem_logstar_decay(profile, p=Fraction(1, 2), N_max=64, tol=mpf("1e-30"), prec=None):
    """Transform values on the geometric grid xi = alpha^N with the fitted
    iterated-log envelope A exp(-C logstar xi) and per-point satisfaction.

    Each row also carries the product chain bound
    prod_{n<N} (1 - ((1-p)/2) ||2 alpha^n t||^2), t = alpha^-N xi, the
    inequality route that links the transform to orbit sums.
    """
    from .ekspansion import logstar

    if profile.classification != "Salem":
        raise ClassificationError("decay fit needs a Salem profile")
    prec = prec or (profile.prec_bits + int(mp.ceil(N_max * mp.log(profile.alpha, 2))))
    spec = spec_from_profile(profile, p=p, prec=prec)
    rows = []
    with mp.workprec(prec):
        alpha = profile.alpha_at(prec)
        pv = to_mpf(p)
        for N in range(1, N_max + 1):
            xi = alpha ** N
            v, err, _ = fourier(spec, xi, tol)
            t = mpf(1)   # alpha^-N xi = 1 on this grid
            chain = mpf(1)
            for n in range(N):
                tau = 2 * alpha ** n * t
                dist = abs(tau - round_half_up(tau))
                chain *= 1 - (1 - pv) / 2 * dist ** 2
            rows.append({
                "N": N, "xi": xi, "abs": abs(v), "err": err,
                "logstar": logstar(xi), "chain_bound": chain,
            })
        from .spectral import fit_logstar_envelope
        A_c, C_c = fit_logstar_envelope([r["logstar"] for r in rows],
                                        [r["abs"] for r in rows])
        for r in rows:
            r["envelope"] = A_c * mp.exp(-C_c * r["logstar"])
            r["pass"] = bool(r["abs"] <= r["envelope"] * (1 + mpf(2) ** -40))
        return {"A_c": A_c, "C_c": C_c, "rows": rows}


def biased_gamma_cap(profile, p):
    """Exponent cap (d-1)/2 log_alpha((1-2p)^-1) for any power-of-log decay."""
    if profile.classification != "Salem":
        raise ClassificationError("the cap is stated for Salem reciprocals")
    with mp.workprec(profile.prec_bits):
        pv = to_mpf(p)
        if not 0 < pv < mpf("0.5"):
            raise DomainError("bias must lie in (0, 1/2)")
        alpha = profile.alpha
        return (profile.degree - 1) / mpf(2) * mp.log(1 / (1 - 2 * pv)) / mp.log(alpha)


def fit_biased_gamma(profile, p, eta_coeffs, N_max=48, window=Fraction(1, 2), prec=None):
    """Empirical gamma of |transform| <= C (log_alpha xi)^-gamma.

    Measured along the slow-decay frequencies xi = eta alpha^N (multiples of
    an orbit witness eta), where the transform stays large; a plain geometric
    grid would measure the fast transient instead of the envelope exponent.
    Fitted over the top part of the grid (asymptotic statement).
    """
    if profile.classification != "Salem":
        raise ClassificationError("the fit is stated for Salem reciprocals")
    prec = prec or (profile.prec_bits + int(mp.ceil(N_max * mp.log(profile.alpha, 2))))
    spec = spec_from_profile(profile, p=p, prec=prec)
    with mp.workprec(prec):
        alpha = profile.alpha_at(prec)
        ev = abs(poly_eval(tuple(eta_coeffs), alpha))
        T0 = mp.log(ev, 2) / mp.log(alpha, 2)
        lo = int(N_max * (1 - to_mpf(window)))
        xs, ys = [], []
        for N in range(max(1, lo), N_max + 1):
            v, _, _ = fourier(spec, ev * alpha ** N)
            xs.append(mp.log(T0 + N, 2))          # log2 of log_alpha xi
            ys.append(mp.log(abs(v), 2))
        _, slope = _fit_line(xs, ys)
        return -slope


def unbiased_beta_cap():
    """Cap for the doubly-logarithmic exponent in the unbiased envelope."""
    return 1


def fit_unbiased_beta(log_alpha_xis, values, prec=200):
    """Empirical beta of |v| <= T^(-gamma (log T)^beta), T = log_alpha xi.

    Linearized on the doubly-log scale with the constant normalized to 1:
    log2(-log2(v) / log2(T)) regressed on log2 log2 T has slope beta. The
    data must decay below 1 (T > 2 and v < 1); synthetic data of exactly this
    shape is recovered exactly. Power-law data v ~ xi^-c has no finite beta
    in this family (the local slope grows like ln(2) log2 T).
    """
    if len(values) < 3:
        raise DomainError("need at least three points")
    with mp.workprec(prec):
        Ts = [to_mpf(t) for t in log_alpha_xis]
        vs = [to_mpf(v) for v in values]
        if any(t <= 2 for t in Ts):
            raise DomainError("points need log_alpha xi > 2")
        if any(v <= 0 or v >= 1 for v in vs):
            raise DomainError("fit expects values decaying below 1")
        xs, ys = [], []
        for t, v in zip(Ts, vs):
            y = -mp.log(v, 2) / mp.log(t, 2)
            xs.append(mp.log(mp.log(t, 2), 2))
            ys.append(mp.log(y, 2))
        _, slope = _fit_line(xs, ys)
        return slope


# ---------------------------------------------------------------------------
# eta construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EtaResult:
    """A verified eta = sum n_i alpha^i with a uniformly small integer orbit."""

    coeffs: tuple
    epsilon: object          # max verified distance, < the requested epsilon
    E: object                # the box height used for the value form
    N_ver: int
    max_observed: object
    seed_k: int
    search_eps: object
    prec_ver: int


def _small_root_indices(profile):
    # roots ordered [alpha, 1/alpha, pair members ...]; the small forms use
    # 1/alpha and one member of each conjugate pair
    d = profile.degree
    idx = [1]
    j = 2
    while j < d:
        idx.append(j)
        j += 2
    return idx


def salem_C_coefficients(profile, s, prec=None):
    """Coefficients of s in the eigenbasis (1, alpha_j, ..., alpha_j^(d-1)).

    The first coefficient is normalized to 1 (rescaling the roof changes the
    flow only by a time scale).
    """
    d = profile.degree
    prec = prec or profile.prec_bits
    with mp.workprec(prec):
        roots = profile.roots_at(prec)
        V = mp.matrix(d, d)
        for i in range(d):
            for j in range(d):
                V[i, j] = roots[j] ** i
        rhs = mp.matrix([[to_mpf(x)] for x in s])
        sol = mp.lu_solve(V, rhs)
        c1 = sol[0]
        if abs(c1) < mpf(2) ** (-(prec // 2)):
            raise DomainError("roof vector has no dominant-direction component")
        return tuple(sol[i] / c1 for i in range(d))


def det_M(profile, C=None, prec=None):
    """Determinant of the embedding-form matrix with a nonvanishing certificate.

    Rows are the realified forms (value at alpha; C_2 w - sigma_0(w); real and
    imaginary parts of C_{2j+1} w - sigma_j(w)) applied to the power basis.
    Column operations reduce it to a Vandermonde matrix of the distinct roots,
    so |det| must match the root-difference product up to the exact factor
    2^m from realified pairs; both are returned.
    """
    d = profile.degree
    if profile.classification != "Salem":
        raise ClassificationError("the embedding matrix is built for Salem profiles")
    m = (d - 2) // 2
    prec = prec or profile.prec_bits
    if C is None:
        C = tuple([1] + [0] * (d - 1))
    with mp.workprec(prec):
        roots = profile.roots_at(prec)
        C = tuple(mpc(c) for c in C)
        M = mp.matrix(d, d)
        small = _small_root_indices(profile)
        for i in range(d):
            M[i, 0] = roots[0].real ** i
            M[i, 1] = (C[1] * roots[0] ** i - roots[1] ** i).real
            for jj, rj in enumerate(small[1:], start=1):
                form = C[2 * jj + 1] * roots[0] ** i - roots[rj] ** i
                M[i, 2 * jj] = form.real
                M[i, 2 * jj + 1] = form.imag
        det = mp.det(M)
        vdm = mpf(1)
        for i in range(d):
            for j in range(i + 1, d):
                vdm *= abs(roots[j] - roots[i])
        expected = vdm / mpf(2) ** m
        tol = mpf(2) ** (-(prec // 2))
        degenerate = abs(det) < tol
        if degenerate:
            warnings.warn("embedding determinant below certification threshold",
                          SingularityWarning)
        return {"det": det, "abs_det": abs(det), "vandermonde_reduced": expected,
                "match": bool(abs(abs(det) - expected) <= tol * max(1, expected)),
                "degenerate": degenerate}


def eta_search(profile, epsilon, s=None, N_ver=500, scan_budget=ETA_SCAN_BUDGET,
               minkowski_const=4, prec=None):
    """Nonzero eta in Z[alpha] with ||eta A^n s|| < epsilon for n = 0..N_ver.

    The inequality system asks for |eta| < E and all small-conjugate forms
    below epsilon/(d-1); E sits above the convex-body volume threshold
    const |det M| (eps)^(1-d). Candidates are seeded along multiples of
    p(x)/(x - alpha) (the direction where every small form vanishes), rounded
    to integers, screened vectorized in double precision, locally enumerated
    over unit offsets, confirmed at working precision, and finally the winner
    is verified directly at >= 1100 bits with exact integer orbit
    coefficients. A verified failure raises VerificationFailure rather than
    silently dropping the candidate.
    """
    d = profile.degree
    if profile.classification != "Salem":
        raise ClassificationError("eta construction applies to Salem numbers (degree >= 4)")
    with mp.workprec(64):
        eps = to_mpf(epsilon)
        if not 0 < eps < mpf("0.5"):
            raise DomainError("epsilon must lie in (0, 1/2)")
    prec = prec or max(256, profile.prec_bits)
    with mp.workprec(prec):
        roots = profile.roots_at(prec)
        alpha = roots[0].real
        if s is None:
            C = tuple([mpc(1)] + [mpc(0)] * (d - 1))
        else:
            C = salem_C_coefficients(profile, s, prec)
        dm = det_M(profile, C, prec)
        eps_search = to_mpf(epsilon) / (d - 1) * mpf("0.98")
        E = minkowski_const * dm["abs_det"] * eps_search ** (-(d - 1))
        # form matrix rows: tau_0 and one form per conjugate pair, on the power basis
        small = _small_root_indices(profile)
        forms = []
        forms.append([C[1] * roots[0] ** i - roots[1] ** i for i in range(d)])
        for jj, rj in enumerate(small[1:], start=1):
            forms.append([C[2 * jj + 1] * roots[0] ** i - roots[rj] ** i for i in range(d)])
        # seed direction: p(x)/(x - alpha), monic of degree d-1 (descending synth. division)
        desc = [mpf(c) for c in reversed(profile.coeffs)]
        qd = [desc[0]]
        for cval in desc[1:-1]:
            qd.append(qd[-1] * alpha + cval)
        q_asc = list(reversed(qd)) + [mpf(0)] * (d - len(qd))
        cand = _scan_candidates(q_asc, forms, eps_search, E, alpha, d, scan_budget, prec)
        if cand is None:
            cand = _box_search(forms, eps_search, E, alpha, d, prec)
        if cand is None:
            raise SearchBudgetError(
                "no candidate within the scan budget %d" % scan_budget)
        coeffs, k_seed = cand
    result = verify_eta(profile, coeffs, epsilon, s=s, N_ver=N_ver)
    return EtaResult(coeffs=coeffs, epsilon=result["max_dist"], E=E, N_ver=N_ver,
                     max_observed=result["max_dist"], seed_k=k_seed,
                     search_eps=eps_search, prec_ver=result["prec"])


def _scan_candidates(q_asc, forms, eps_search, E, alpha, d, budget, prec,
                     chunk=500_000):
    qf = np.array([float(x) for x in q_asc])
    forms_f = [np.array([complex(c) for c in row]) for row in forms]
    slack = 1.05
    k0 = 1
    while k0 <= budget:
        hi = min(budget, k0 + chunk - 1)
        ks = np.arange(k0, hi + 1, dtype=np.float64)
        prod = np.outer(ks, qf)
        nmat = np.round(prod)
        dmat = nmat - prod
        ok = np.ones(len(ks), dtype=bool)
        for row in forms_f:
            val = dmat @ row
            ok &= np.abs(val) < float(eps_search) * slack
        for idx in np.nonzero(ok)[0]:
            k = int(ks[idx])
            base = [int(x) for x in np.round(k * qf)]
            hit = _confirm_candidate(base, forms, eps_search, E, alpha, d, prec)
            if hit is not None:
                return hit, k
        k0 = hi + 1
    return None


def _confirm_candidate(base, forms, eps_search, E, alpha, d, prec):
    """Precise check of the rounded seed and its unit-offset neighbours."""
    import itertools
    with mp.workprec(prec):
        for offset in itertools.product((0, -1, 1), repeat=d):
            n = tuple(base[i] + offset[i] for i in range(d))
            if all(x == 0 for x in n):
                continue
            if any(abs(sum(row[i] * n[i] for i in range(d))) >= eps_search
                   for row in forms):
                continue
            value = abs(poly_eval(n, alpha))
            if value < E:
                return n
    return None


def _box_search(forms, eps_search, E, alpha, d, prec, budget=ETA_BOX_BUDGET):
    """Exhaustive fallback over a small coefficient box (d <= 6 only)."""
    import itertools
    if d > 6:
        return None
    radius = 3
    while True:
        count = (2 * radius + 1) ** d
        if count > budget:
            return None
        with mp.workprec(prec):
            for n in itertools.product(range(-radius, radius + 1), repeat=d):
                if all(x == 0 for x in n):
                    continue
                if any(abs(sum(row[i] * n[i] for i in range(d))) >= eps_search
                       for row in forms):
                    continue
                if abs(poly_eval(n, alpha)) < E:
                    return tuple(n), 0
        radius *= 2


def verify_eta(profile, coeffs, epsilon, s=None, N_ver=500, prec=None):
    """Direct verification of the orbit bound at high precision.

    For the self-similar roof the orbit coordinates are eta alpha^(n+v) with
    exact integer power-basis coefficients; only the final distance to the
    integers is evaluated in floats. Raises VerificationFailure when any
    distance reaches epsilon.
    """
    d = profile.degree
    if s is not None:
        raise DomainError("direct verification is implemented for the "
                          "self-similar roof (s = dominant eigenvector)")
    if all(c == 0 for c in coeffs):
        raise DomainError("eta must be nonzero")
    need = int(mp.ceil((N_ver + d) * mp.log(profile.alpha, 2))) + 256
    prec = max(prec or 0, 1100, need)
    with mp.workprec(prec):
        eps = to_mpf(epsilon)
        alpha = profile.alpha_at(prec)
        pows = [alpha ** i for i in range(d)]
        cur = tuple(int(c) for c in coeffs)
        worst = mpf(0)
        for m in range(N_ver + d):
            val = sum(cur[i] * pows[i] for i in range(d))
            dist = abs(val - round_half_up(val))
            worst = max(worst, dist)
            if worst >= eps:
                raise VerificationFailure(
                    "candidate %r fails at orbit index %d: distance %s"
                    % (tuple(coeffs), m, mp.nstr(dist, 10)))
            lead = cur[d - 1]
            nxt = [0] + list(cur[:-1])
            if lead:
                for i in range(d):
                    nxt[i] -= lead * profile.coeffs[i]
            cur = tuple(nxt[:d])
        return {"max_dist": worst, "prec": prec, "N_ver": N_ver}
