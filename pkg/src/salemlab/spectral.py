"""Suspension flows over substitutions and their twisted Birkhoff integrals.

The flow moves upward at unit speed under a roof vector s; orbits read the
letters of zeta^m(a). Twisted integrals of cylindrical test functions are
exact per tile for level-0 functions and trapezoid-quadrature for Lipschitz
samples; long horizons R use the substitution block structure, so R ~ alpha^64
costs O(depth * image length) instead of O(R) tiles.

Bounds assembled here: the Hof-type ball bound pi^2 G_R / (4R) with the
pairing R = 1/(2r); the product bound driven by torus distances of the digit
expansion; the near-zero bound for mean-zero functions; and the combined
three-branch estimate (near-zero / main / glue) with the slow rate h_beta.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from mpmath import mp, mpc, mpf

from . import ekspansion as ek
from .algebra import Precision, charpoly, classify, eigensystem
from .errors import (
    BudgetError,
    ClassificationError,
    DomainError,
    MeanNotZeroError,
    ModeError,
)
from .subst import build_matrix, letter_frequencies
from ._util import mat_transpose, to_mpf

MODE_GENERAL = "general"
MODE_SELF_SIMILAR = "self_similar"
MODE_UNIT = "unit"

TILE_BUDGET = 200_000


@dataclass
class SuspensionSpec:
    """A substitution, a positive roof vector and the derived spectral data.

    In self-similar mode the roof is the dominant eigenvector of S^T,
    normalized so that its pairing with the dominant dual eigenvector is 1
    (recorded in `normalization`).
    """

    z: object
    s: tuple
    mode: str
    prec: int
    profile: object
    eigsys: object
    frequencies: tuple
    normalization: object       # <s, estar_1> before rescaling
    measure_norm: object        # sum_j mu_j s_j, the probability normalizer
    _cache_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _word_cache: dict = field(default_factory=dict, repr=False)

    @property
    def d(self):
        return self.z.d

    @property
    def A(self):
        return self.eigsys.A

    @property
    def alpha(self):
        return self.profile.alpha

    def word(self, a, m):
        with self._cache_lock:
            got = self._word_cache.get((a, m))
        if got is not None:
            return got
        w = self.z.expand(a, m)
        with self._cache_lock:
            self._word_cache[(a, m)] = w
        return w


def make_suspension(z, mode=MODE_SELF_SIMILAR, prec=256, s=None, normalize=None):
    """Build a SuspensionSpec for the given mode.

    s is required in general mode and ignored otherwise. normalize defaults
    to True except in unit mode (where the roof is exactly the 1-vector).
    """
    S = build_matrix(z)
    A = mat_transpose(S.entries)
    profile = classify(charpoly(S.entries), Precision(bits=prec))
    es = eigensystem(A, profile, Precision(bits=prec))
    if normalize is None:
        normalize = mode != MODE_UNIT
    with mp.workprec(prec):
        if mode == MODE_SELF_SIMILAR:
            raw = tuple(x.real for x in es.e[0])
        elif mode == MODE_UNIT:
            raw = tuple(mpf(1) for _ in range(z.d))
        elif mode == MODE_GENERAL:
            if s is None:
                raise DomainError("general mode needs an explicit roof vector")
            raw = tuple(to_mpf(x) for x in s)
        else:
            raise ModeError("unknown suspension mode %r" % mode)
        if any(x <= 0 for x in raw):
            raise DomainError("roof entries must be positive")
        pairing = sum(raw[i] * es.estar[0][i].real for i in range(z.d))
        roof = tuple(x / pairing for x in raw) if normalize else raw
        freqs = letter_frequencies(z, prec=prec)
        measure_norm = sum(freqs[i] * roof[i] for i in range(z.d))
    return SuspensionSpec(
        z=z, s=roof, mode=mode, prec=prec, profile=profile, eigsys=es,
        frequencies=freqs, normalization=pairing, measure_norm=measure_norm,
    )


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CylFunction:
    """A cylindrical test function: level-0 constants or Lipschitz samples.

    For kind "lip", samples[j] holds uniformly spaced values of psi_j over
    [0, s_j] and lip_const an upper Lipschitz bound; integration is composite
    trapezoid with error O(lip_const * h) per tile.
    """

    kind: str
    values: tuple = ()            # level-0 constants, one per letter
    samples: tuple = ()           # lip: tuple of value tuples
    lip_const: object = None
    mean: object = 0
    mean_zero: bool = False
    norm_inf: object = 1


def make_level0(spec, values):
    """Level-0 cylindrical function with mean computed in the flow measure."""
    with mp.workprec(spec.prec):
        vals = tuple(to_mpf(v) for v in values)
        if len(vals) != spec.d:
            raise DomainError("need one constant per letter")
        mean = sum(
            vals[j] * spec.frequencies[j] * spec.s[j] for j in range(spec.d)
        ) / spec.measure_norm
        tol = mpf(2) ** (-(spec.prec // 4))
        norm = max(abs(v) for v in vals)
        return CylFunction(kind="level0", values=vals, mean=mean,
                           mean_zero=bool(abs(mean) <= tol * max(1, norm)),
                           norm_inf=norm)


def make_level0_mean_zero(spec):
    """A canonical mean-zero level-0 function supported on the first two letters."""
    with mp.workprec(spec.prec):
        c = [mpf(0)] * spec.d
        c[0] = spec.frequencies[1] * spec.s[1]
        c[1] = -spec.frequencies[0] * spec.s[0]
        norm = max(abs(x) for x in c)
        return make_level0(spec, tuple(x / norm for x in c))


def make_lip(spec, sample_rows, lip_const):
    """Lipschitz cylindrical function from per-letter uniform samples."""
    with mp.workprec(spec.prec):
        rows = tuple(tuple(to_mpf(v) for v in row) for row in sample_rows)
        if len(rows) != spec.d or any(len(r) < 2 for r in rows):
            raise DomainError("need >= 2 samples per letter")
        means = []
        for j in range(spec.d):
            h = spec.s[j] / (len(rows[j]) - 1)
            tr = (rows[j][0] + rows[j][-1]) / 2 + sum(rows[j][1:-1])
            means.append(tr * h)
        mean = sum(
            means[j] * spec.frequencies[j] for j in range(spec.d)
        ) / spec.measure_norm
        norm = max(max(abs(v) for v in row) for row in rows)
        tol = mpf(2) ** (-(spec.prec // 4))
        return CylFunction(kind="lip", samples=rows, lip_const=to_mpf(lip_const),
                           mean=mean, mean_zero=bool(abs(mean) <= tol * max(1, norm)),
                           norm_inf=norm)


# ---------------------------------------------------------------------------
# orbits and twisted integrals
# ---------------------------------------------------------------------------

def _orbit_segments(spec, start, horizon, budget=TILE_BUDGET):
    """(letter, in-tile lo, in-tile hi) segments covering the orbit window."""
    a, pos = start
    pos = to_mpf(pos)
    horizon = to_mpf(horizon)
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    with mp.workprec(mp.prec):
        m = 0
        while True:
            w = spec.word(a, m)
            total = sum(spec.s[c - 1] for c in w)
            if total >= pos + horizon:
                break
            m += 1
            if len(w) > budget:
                raise BudgetError("orbit needs more than %d tiles" % budget)
        segments = []
        t = mpf(0)
        remaining = horizon
        for c in w:
            dur = spec.s[c - 1]
            if t + dur <= pos:
                t += dur
                continue
            lo = max(pos - t, mpf(0))
            use = min(dur - lo, remaining)
            segments.append((c, lo, lo + use))
            remaining -= use
            t += dur
            if remaining <= 0:
                break
            if len(segments) > budget:
                raise BudgetError("orbit needs more than %d tiles" % budget)
        return segments


def orbit_tiles(spec, start, horizon, budget=TILE_BUDGET):
    """Tiles (letter, duration) covering [0, horizon] of the orbit.

    start = (seed letter, time offset along the zeta^m(seed) tiling); the
    first and last tiles are truncated so durations sum to the horizon.
    """
    with mp.workprec(spec.prec):
        return [(c, hi - lo) for c, lo, hi in _orbit_segments(spec, start, horizon, budget)]


class _PrefixEngine:
    """Hierarchical twisted-integral evaluator over one seed letter's tiling.

    Level-k block values M[k][a] are the twisted integrals of the zeta^k(a)
    tiling with phase starting at 0; a prefix of duration T descends the
    hierarchy in O(depth * image length) block terms.
    """

    def __init__(self, spec, f, omega, prec):
        self.spec = spec
        self.f = f
        self.prec = prec
        with mp.workprec(prec):
            self.omega = to_mpf(omega)
        self.dur = [tuple(spec.s)]
        self.M = [None]
        self._base = {}

    def _phase(self, t):
        return mp.expj(2 * mp.pi * self.omega * t)

    def _base_integral(self, letter, lo, hi):
        f = self.f
        om = self.omega
        if f.kind == "level0":
            c = f.values[letter - 1]
            if om == 0:
                return c * (hi - lo)
            tw = 2 * mp.pi * om
            return c * (mp.expj(tw * hi) - mp.expj(tw * lo)) / (mpc(0, 1) * tw)
        # lip: trapezoid on fresh nodes with linear interpolation of samples
        row = f.samples[letter - 1]
        s_len = self.spec.s[letter - 1]
        n_nodes = max(2, int(len(row)))
        h = (hi - lo) / (n_nodes - 1)
        if h == 0:
            return mpc(0)
        total = mpc(0)
        for i in range(n_nodes):
            t = lo + h * i
            u = t / s_len * (len(row) - 1)
            i0 = min(int(mp.floor(u)), len(row) - 2)
            frac = u - i0
            val = row[i0] * (1 - frac) + row[i0 + 1] * frac
            wgt = h if 0 < i < n_nodes - 1 else h / 2
            total += val * mp.expj(2 * mp.pi * om * t) * wgt
        return total

    def _ensure_level(self, k):
        with mp.workprec(self.prec):
            if self.M[0] is None:
                self.M[0] = tuple(
                    self._base_integral(a, mpf(0), self.spec.s[a - 1])
                    for a in range(1, self.spec.d + 1)
                )
            while len(self.dur) <= k:
                lev = len(self.dur)
                durs = []
                vals = []
                for a in range(1, self.spec.d + 1):
                    t = mpf(0)
                    acc = mpc(0)
                    for b in self.spec.z.image(a):
                        acc += self._phase(t) * self.M[lev - 1][b - 1]
                        t += self.dur[lev - 1][b - 1]
                    durs.append(t)
                    vals.append(acc)
                self.dur.append(tuple(durs))
                self.M.append(tuple(vals))

    def level_for(self, seed, T):
        with mp.workprec(self.prec):
            k = 0
            self._ensure_level(0)
            while self.dur[k][seed - 1] < T:
                k += 1
                self._ensure_level(k)
                if k > 4096:
                    raise BudgetError("prefix horizon unreachable")
            return k

    def prefix(self, seed, T):
        """Twisted integral over [0, T] of the tiling of zeta^k(seed)."""
        with mp.workprec(self.prec):
            T = to_mpf(T)
            if T < 0:
                raise DomainError("prefix duration must be nonnegative")
            if T == 0:
                return mpc(0)
            k = self.level_for(seed, T)
            return self._descend(k, seed, T)

    def _descend(self, k, letter, T):
        if T >= self.dur[k][letter - 1]:
            return self.M[k][letter - 1]
        if k == 0:
            return self._base_integral(letter, mpf(0), T)
        acc = mpc(0)
        t = mpf(0)
        for b in self.spec.z.image(letter):
            block = self.dur[k - 1][b - 1]
            if T >= block:
                acc += self._phase(t) * self.M[k - 1][b - 1]
                t += block
                T -= block
            else:
                acc += self._phase(t) * self._descend(k - 1, b, T)
                return acc
        return acc

    def window(self, seed, t0, R):
        """Twisted integral of the orbit started at time t0, horizon R."""
        with mp.workprec(self.prec):
            t0 = to_mpf(t0)
            R = to_mpf(R)
            hi = self.prefix(seed, t0 + R)
            lo = self.prefix(seed, t0)
            return mp.expj(-2 * mp.pi * self.omega * t0) * (hi - lo)


def twisted_prec(spec, omega, R, base=None):
    """Working precision for phases of size omega * R."""
    base = base or spec.prec
    with mp.workprec(64):
        extra = int(mp.ceil(mp.log(max(2, abs(to_mpf(omega)) * to_mpf(R) + 2), 2)))
    return base + extra


def twisted_sum(spec, f, start, R, omega, prec=None):
    """S^f_R from the given orbit start: integral of f e^(2 pi i t omega).

    Level-0 integrands use the exact per-tile closed form; Lipschitz samples
    use composite trapezoid. Long horizons go through the hierarchical block
    engine; the result is identical to direct tile summation.
    """
    a, pos = start
    if prec is None:
        prec = twisted_prec(spec, omega, to_mpf(pos) + to_mpf(R))
    engine = _PrefixEngine(spec, f, omega, prec)
    return engine.window(a, pos, R)


def twisted_sum_tiles(spec, f, start, R, omega, prec=None, budget=TILE_BUDGET):
    """Direct tile-by-tile evaluation of the same twisted integral."""
    if prec is None:
        prec = twisted_prec(spec, omega, to_mpf(start[1]) + to_mpf(R))
    with mp.workprec(prec):
        om = to_mpf(omega)
        engine = _PrefixEngine(spec, f, omega, prec)
        t = mpf(0)
        acc = mpc(0)
        for letter, lo, hi in _orbit_segments(spec, start, R, budget=budget):
            val = engine._base_integral(letter, lo, hi)
            acc += mp.expj(2 * mp.pi * om * (t - lo)) * val
            t += hi - lo
        return acc


def G_R(spec, f, omega, R, samples=16, seed=0, prec=None, engine=None):
    """Monte-Carlo estimate of the normalized twisted L2 mass.

    Orbit starts are drawn uniformly along a tiling at least four horizons
    long (realizing the invariant measure up to O(1/|word|) boundary bias);
    the return value also carries a standard error and is deterministic for a
    fixed seed.
    """
    if samples < 1:
        raise DomainError("need at least one sample")
    R = to_mpf(R)
    if prec is None:
        prec = twisted_prec(spec, omega, 8 * R)
    if engine is None:
        engine = _PrefixEngine(spec, f, omega, prec)
    seed_letter = 1
    with mp.workprec(prec):
        k = engine.level_for(seed_letter, 4 * R)
        total_len = engine.dur[k][seed_letter - 1]
        rng = np.random.default_rng(seed)
        us = rng.random(samples)
        vals = []
        for u in us:
            t0 = to_mpf(float(u)) * (total_len - R)
            s_val = engine.window(seed_letter, t0, R)
            vals.append(abs(s_val) ** 2)
        mean = sum(vals) / samples
        if samples > 1:
            var = sum((v - mean) ** 2 for v in vals) / (samples - 1)
            stderr = mp.sqrt(var / samples) / R
        else:
            stderr = mpf(0)
        return {"G_R": mean / R, "stderr": stderr, "samples": samples,
                "seed": seed, "R": R}


def direct_sup_twisted(spec, f, omega, R, starts=5, seed=0, prec=None, engine=None):
    """max |S^f_R| over a deterministic family of orbit starts (plus t0 = 0)."""
    R = to_mpf(R)
    if prec is None:
        prec = twisted_prec(spec, omega, 8 * R)
    if engine is None:
        engine = _PrefixEngine(spec, f, omega, prec)
    with mp.workprec(prec):
        k = engine.level_for(1, 4 * R)
        total_len = engine.dur[k][0]
        rng = np.random.default_rng(seed)
        t0s = [mpf(0)] + [to_mpf(float(u)) * (total_len - R) for u in rng.random(starts)]
        return max(abs(engine.window(1, t0, R)) for t0 in t0s)


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

def hof_bound(G_value, R):
    """Ball bound pi^2 G_R / (4R) for the radius r = 1/(2R); needs R >= 1."""
    R = to_mpf(R)
    if R < 1:
        raise DomainError("the pairing R = 1/(2r) needs R >= 1")
    G_value = to_mpf(G_value)
    if G_value < 0:
        raise DomainError("G_R must be nonnegative")
    return {"bound": mp.pi ** 2 / (4 * R) * G_value, "r": 1 / (2 * R), "R": R}


def product_bound(spec, L, omega, R, lam, C1, prec=None, trace=None):
    """The orbit-integral product bound C1 min{1,1/|omega|} R prod(1 - lam dist_n^2).

    dist_n is the torus distance of A^n omega s to the lattice L, taken from
    the digit-expansion trace; the factor list is returned for diagnostics.
    The bound divides out ||f||_inf (multiply by it for a concrete f).
    """
    R = to_mpf(R)
    if R <= 1:
        raise DomainError("product bound needs R > 1")
    lam = to_mpf(lam)
    if not 0 < lam < 1:
        raise DomainError("lambda must lie in (0, 1)")
    n_max = int(mp.floor(mp.log(R) / mp.log(to_mpf(spec.alpha))))
    if trace is None:
        trace = ek.ek_expand(omega, spec.s, L, spec.eigsys, n_max)
    if len(trace.steps) < n_max + 1:
        raise DomainError("trace too short for floor(log_alpha R) = %d" % n_max)
    with mp.workprec(trace.prec):
        om = abs(to_mpf(omega))
        factors = []
        prod = mpf(1)
        for n in range(n_max + 1):
            dist = trace.steps[n].eps_inf
            fac = 1 - lam * dist ** 2
            if fac <= 0:
                raise DomainError("lambda too large: a product factor is nonpositive")
            factors.append(fac)
            prod *= fac
        pref = to_mpf(C1) * (1 if om == 0 else min(mpf(1), 1 / om))
        return {"bound": pref * R * prod, "product": prod, "factors": factors,
                "n_max": n_max, "trace": trace}


def near_zero_bound(f, r, C5, d):
    """Mean-zero ball bound at the origin: C5 ||f||^2 min{log(1/r)^(2d-2) r^2, r}."""
    if not f.mean_zero:
        raise MeanNotZeroError("near-zero bound needs a mean-zero function")
    r = to_mpf(r)
    if not 0 < r < 1:
        raise DomainError("radius must lie in (0, 1)")
    C5 = to_mpf(C5)
    lg = mp.log(1 / r, 2)
    val = min(lg ** (2 * d - 2) * r ** 2, r)
    return C5 * f.norm_inf ** 2 * val


@dataclass(frozen=True)
class RateParams:
    """Parameters of the slow-rate estimate."""

    beta: float = 1.0
    gamma: float = 4.0
    Upsilon: float = 24.0
    k0: int = 1

    def __post_init__(self):
        if self.beta <= 0:
            raise DomainError("beta must be positive")
        if self.gamma < 1:
            raise DomainError("gamma must be at least 1")


def combined_bound(spec, f, L, omega, r, params, constants, prec=None, n_budget=512):
    """Three-branch ball bound with the branch tag that fired.

    near-zero: omega = 0 or r > |omega| (shifted-origin bound, mean zero);
    main: r <= r_0(omega), through the product bound and the ball pairing,
    with R clamped to alpha^n_budget (still valid: larger balls only);
    glue: the remaining band, bounded through B(omega).
    """
    r = to_mpf(r)
    if r <= 0:
        raise DomainError("radius must be positive")
    lam = to_mpf(constants["lambda"])
    C1 = to_mpf(constants["C1"])
    C5 = to_mpf(constants.get("C5", 1))
    rho0 = to_mpf(constants.get("rho0", 0.25))
    om = abs(to_mpf(omega))
    alpha = to_mpf(spec.alpha)
    with mp.workprec(prec or spec.prec):
        try:
            h_val = ek.rate_h(r, params.beta, alpha)
        except DomainError:
            h_val = None
        if om == 0 or r > om:
            r_shift = r + om
            if r_shift >= rho0:
                value = f.norm_inf ** 2        # total spectral mass
                note = "clamped-to-total-mass"
            else:
                value = near_zero_bound(f, r_shift, C5, spec.d)
                note = None
            return {"bound": value, "branch": "near-zero", "h_beta": h_val,
                    "note": note, "r": r, "omega": omega}
        B = ek.B_of_omega(omega)
        if ek.r_below_r0(r, B, params.gamma, alpha):
            R = 1 / (2 * r)
            clamped = False
            if mp.log(R) / mp.log(alpha) > n_budget:
                R = alpha ** n_budget
                clamped = True
            pb = product_bound(spec, L, omega, R, lam, C1)
            value = mp.pi ** 2 / 4 * (pb["bound"] / R) ** 2 * f.norm_inf ** 2
            return {"bound": value, "branch": "main", "h_beta": h_val,
                    "note": "R-clamped" if clamped else None, "r": r,
                    "omega": omega, "product": pb["product"]}
        if om < 1:
            value = 4 * C5 * f.norm_inf ** 2 / B
        else:
            value = mp.pi ** 2 / 4 * C1 ** 2 * f.norm_inf ** 2 / mpf(B) ** 2
        return {"bound": value, "branch": "glue", "h_beta": h_val,
                "note": None, "r": r, "omega": omega}


def fit_logstar_envelope(xs_logstar, values):
    """Least-squares fit of value <= a exp(-c logstar), envelope-adjusted.

    Returns (a, c) with c = -slope of ln(value) against logstar and a lifted
    so the bound holds at every point.
    """
    n = len(values)
    if n < 2:
        raise DomainError("need at least two points to fit")
    with mp.workprec(max(mp.prec, 128)):
        xs = [to_mpf(x) for x in xs_logstar]
        ys = [mp.log(to_mpf(v)) for v in values]
        xbar = sum(xs) / n
        ybar = sum(ys) / n
        sxx = sum((x - xbar) ** 2 for x in xs)
        if sxx == 0:
            return mp.exp(max(ys)), mpf(0)
        slope = sum((xs[i] - xbar) * (ys[i] - ybar) for i in range(n)) / sxx
        c = -slope
        a_log = max(ys[i] + c * xs[i] for i in range(n))
        return mp.exp(a_log), c


def logstar_bound_check(spec, f, omega, R_grid, samples=8, seed=0):
    """Hof bounds over an R grid against the envelope a exp(-c logstar(1/r)).

    Requires the self-similar mode over a Salem profile. Returns the fitted
    constants and a per-point satisfaction table.
    """
    if spec.mode != MODE_SELF_SIMILAR:
        raise ModeError("logstar check applies to the self-similar flow")
    if spec.profile.classification != "Salem":
        raise ModeError("logstar check applies to Salem profiles")
    rows = []
    for R in R_grid:
        g = G_R(spec, f, omega, R, samples=samples, seed=seed)
        hb = hof_bound(g["G_R"], R)
        with mp.workprec(spec.prec):
            ls = ek.logstar(1 / hb["r"])
        rows.append({"R": to_mpf(R), "r": hb["r"], "hof": hb["bound"], "logstar": ls})
    a, c = fit_logstar_envelope([row["logstar"] for row in rows],
                                [row["hof"] for row in rows])
    with mp.workprec(spec.prec):
        for row in rows:
            row["envelope"] = a * mp.exp(-c * row["logstar"])
            row["pass"] = bool(row["hof"] <= row["envelope"] * (1 + mpf(2) ** -40))
    return {"a": a, "c": c, "rows": rows}


def calibrate_product_constants(spec, L, f, omegas, R_grid, lam, starts=4, seed=0):
    """Fit C1 on a training grid: twice the worst direct-to-product ratio.

    The ratio compares max_starts |S^f_R| with ||f||_inf min{1,1/|omega|} R
    times the product; the returned C1 makes the bound dominate the training
    grid with a factor-2 margin. Constants are tied to this substitution and
    recorded alongside.
    """
    worst = mpf(0)
    table = []
    for om in omegas:
        for R in R_grid:
            pb = product_bound(spec, L, om, R, lam, C1=1)
            direct = direct_sup_twisted(spec, f, om, R, starts=starts, seed=seed)
            with mp.workprec(spec.prec):
                denom = f.norm_inf * pb["bound"]
                ratio = direct / denom
                worst = max(worst, ratio)
            table.append({"omega": om, "R": to_mpf(R), "ratio": ratio})
    with mp.workprec(spec.prec):
        C1 = 2 * worst
    return {"lambda": to_mpf(lam), "C1": C1, "worst_ratio": worst, "table": table}
