"""Command-line surface: analyze | ek | spectrum | bernoulli | eta | rates.

Every command reads one JSON config (flags override fields), writes its
reports into the output directory, embeds the config hash and the constants
actually used, and emits numbers as full-precision decimal strings so that a
repeated run with identical inputs, config and seed is byte-identical.

Exit codes: 0 success, 2 validation, 3 budget, 4 precision, 5 internal.
"""

from __future__ import annotations

import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import click
from mpmath import mp, mpf

from . import bernoulli as bern
from . import ekspansion as ek
from . import lattice as lat
from . import spectral as sp
from . import subst as sb
from .algebra import Precision, charpoly, classify, companion_matrix, eigensystem
from .config import load_config
from .errors import BudgetError, PrecisionError, SalemLabError, ValidationError
from ._util import nstr_full, to_mpf


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, str)):
        return str(x)
    if isinstance(x, Fraction):
        return str(x)
    return nstr_full(x)


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _parse_number(text):
    """Exact rational when possible ('1', '1/3', '0.25'), else decimal string."""
    text = text.strip()
    if "/" in text:
        return Fraction(text)
    try:
        return Fraction(text)
    except ValueError:
        return text


def _parse_poly(text):
    return tuple(int(tok.strip()) for tok in text.split(","))


class _Ctx:
    def __init__(self, config, out):
        self.config = config
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)

    def meta(self, **extra):
        base = {"config_hash": self.config.hash(),
                "precision": self.config.precision,
                "seed": self.config.seed}
        base.update(extra)
        return base


@click.group()
@click.option("--precision", type=int, default=None, help="working precision in bits")
@click.option("--seed", type=int, default=None, help="RNG seed for sampled sweeps")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config file")
@click.option("--out", type=click.Path(), default="out", help="output directory")
@click.option("--workers", type=int, default=1, help="parallel workers for sweeps")
@click.pass_context
def main(ctx, precision, seed, config_path, out, workers):
    """High-precision laboratory for substitution flows and their spectra."""
    cfg = load_config(config_path, precision=precision, seed=seed)
    ctx.obj = _Ctx(cfg, out)
    ctx.obj.workers = max(1, workers)


def _load_subst(path, cfg):
    with open(path, "r", encoding="utf-8") as fh:
        return sb.parse_substitution(fh.read())


@main.command()
@click.argument("subst_file", type=click.Path(exists=True))
@click.option("--length-cap", type=int, default=30, help="return-word length cap")
@click.option("--classical/--no-classical", default=False,
              help="use the strict return-word variant")
@click.pass_obj
def analyze(obj, subst_file, length_cap, classical):
    """Matrix, classification, return words and lattice data of a substitution."""
    cfg = obj.config
    z = _load_subst(subst_file, cfg)
    S = sb.build_matrix(z)
    prim, witness = sb.is_primitive(S)
    poly = charpoly(S.entries)
    profile = classify(poly, Precision(bits=cfg.precision))
    payload = {
        "meta": obj.meta(command="analyze", input=str(subst_file)),
        "alphabet_size": z.d,
        "images": [list(img) for img in z.images],
        "matrix": [list(row) for row in S.entries],
        "primitive": prim,
        "primitivity_witness": witness,
        "charpoly_ascending": list(poly),
        "classification": profile.classification,
        "alpha": _fmt(profile.alpha) if prim else None,
        "roots": [[_fmt(r.real), _fmt(r.imag)] for r in profile.roots],
        "factor_complexity": list(sb.factor_complexity(z, 12)),
    }
    if profile.classification == "Reducible":
        payload["warning"] = "characteristic polynomial is reducible"
    if prim:
        with mp.workprec(cfg.precision):
            payload["letter_frequencies"] = [
                _fmt(f) for f in sb.letter_frequencies(z, prec=cfg.precision)]
        rws = sb.enumerate_return_words(z, length_cap, classical=classical,
                                        budget=cfg.word_length_budget)
        payload["return_words"] = ["".join(map(str, v)) for v in rws.words]
        payload["good_return_words"] = ["".join(map(str, v)) for v in rws.good]
        payload["irreducible_return_words"] = [
            "".join(map(str, v)) for v in rws.irreducible]
        payload["populations"] = {
            "".join(map(str, v)): list(p) for v, p in rws.populations.items()}
        if rws.warning:
            payload["return_word_warning"] = rws.warning
        if profile.classification != "Reducible":
            from ._util import mat_transpose
            A = mat_transpose(S.entries)
            L = lat.build_lattice(rws, A)
            payload["lattice"] = {
                "gamma_basis_rows": [list(row) for row in L.gamma_basis],
                "dual_basis_rows": [[str(x) for x in row] for row in L.dual_basis],
                "a_L": str(L.a_L),
                "b_L": str(L.b_L),
                "c_AL": str(L.c_AL),
                "A_norm": L.A_norm,
            }
    _write_json(obj.out / "analysis.json", payload)
    click.echo(str(obj.out / "analysis.json"))


def _ek_inputs(subst_file, poly, s_mode, cfg):
    if (subst_file is None) == (poly is None):
        raise ValidationError("give exactly one of a substitution file or --poly")
    if subst_file is not None:
        z = _load_subst(subst_file, cfg)
        spec = sp.make_suspension(z, mode=s_mode, prec=cfg.precision)
        rws = sb.enumerate_return_words(z, 30, budget=cfg.word_length_budget)
        L = lat.build_lattice(rws, spec.A)
        return spec.profile, spec.eigsys, L, spec.s
    coeffs = _parse_poly(poly)
    profile = classify(coeffs, Precision(bits=cfg.precision))
    A = companion_matrix(coeffs)
    es = eigensystem(A, profile, Precision(bits=cfg.precision))
    L = lat.standard_lattice(A)
    with mp.workprec(cfg.precision):
        if s_mode == sp.MODE_UNIT:
            s = tuple(mpf(1) for _ in range(profile.degree))
        else:
            raw = tuple(x.real for x in es.e[0])
            pairing = sum(raw[i] * es.estar[0][i].real for i in range(profile.degree))
            s = tuple(x / pairing for x in raw)
    return profile, es, L, s


@main.command("ek")
@click.option("--subst-file", type=click.Path(exists=True), default=None)
@click.option("--poly", type=str, default=None,
              help="ascending integer coefficients, e.g. 1,-1,-1,-1,1")
@click.option("--omega", type=str, default="1", help="spectral parameter (rational)")
@click.option("--s-mode", type=click.Choice([sp.MODE_SELF_SIMILAR, sp.MODE_UNIT]),
              default=sp.MODE_SELF_SIMILAR)
@click.option("--steps", "-n", type=int, default=200, help="trace length N")
@click.pass_obj
def ek_cmd(obj, subst_file, poly, omega, s_mode, steps):
    """Digit-expansion trace with per-step bounds and scale predicates."""
    cfg = obj.config
    if steps > cfg.trace_step_budget:
        raise BudgetError("steps %d exceed the trace budget %d"
                          % (steps, cfg.trace_step_budget))
    profile, es, L, s = _ek_inputs(subst_file, poly, s_mode, cfg)
    om = _parse_number(omega)
    need = ek.auto_precision(steps, profile.alpha)
    if es.prec_bits < need:
        es = eigensystem(es.A, profile, Precision(bits=need + 64))
        with mp.workprec(need + 64):
            if s_mode == sp.MODE_UNIT:
                s = tuple(mpf(1) for _ in range(profile.degree))
            else:
                raw = tuple(x.real for x in es.e[0])
                pairing = sum(raw[i] * es.estar[0][i].real
                              for i in range(profile.degree))
                s = tuple(x / pairing for x in raw)
    trace = ek.ek_expand(om, s, L, es, steps)
    zvalues = sorted(trace.F_observed.items(), key=lambda kv: kv[1])
    rows = []
    for st in trace.steps:
        rows.append([st.n, st.eps_inf, st.eps3_abs,
                     int(any(c != 0 for c in st.z_coords)),
                     trace.F_observed[st.z_coords]])
    _write_csv(obj.out / "ek_trace.csv",
               ["n", "eps_inf", "eps3_abs", "z_nonzero", "z_index"], rows)
    _write_json(obj.out / "ek_zvalues.json", {
        "meta": obj.meta(command="ek"),
        "values": [{"index": idx, "coords": list(coords)}
                   for coords, idx in zvalues],
    })
    preds = []
    k = 1
    while True:
        try:
            n_k = ek.scales(k)
        except BudgetError:
            break
        if n_k > steps:
            break
        preds.append(ek.bad_set_predicates(trace, k, B=ek.B_of_omega(om)))
        k += 1
    partial = ek.bad_set_predicates(trace, k, B=ek.B_of_omega(om), partial=True)
    partial["partial"] = True
    preds.append(partial)
    with mp.workprec(trace.prec):
        residual = ek.digit_polynomial_residual_max(trace)
        recon = ek.reconstruction_error(trace, min(30, steps))
    payload = {
        "meta": obj.meta(command="ek", omega=str(omega), s_mode=s_mode,
                         steps=steps, trace_precision=trace.prec),
        "predicates": [
            {kk: (_fmt(vv) if kk == "E3_threshold" else
                  (str(vv) if isinstance(vv, int) and kk.startswith("n_") else vv))
             for kk, vv in p.items()} for p in preds],
        "lemma_bounds": {
            "b_L": str(L.b_L), "c_AL": str(L.c_AL), "A_norm": L.A_norm,
            "all_steps_certified": True,
        },
        "digit_identity_max_residual": _fmt(residual),
        "reconstruction_error_n30": _fmt(recon),
        "C0": _fmt(trace.C0), "C1": _fmt(trace.C1), "C2": _fmt(trace.C2),
        "C0_norm_choice": trace.metadata["C0_norm"],
    }
    _write_json(obj.out / "ek_predicates.json", payload)
    click.echo(str(obj.out / "ek_trace.csv"))


@main.command()
@click.argument("subst_file", type=click.Path(exists=True))
@click.option("--omegas", type=str, default="1,3/2,2",
              help="comma-separated spectral parameters")
@click.option("--r-powers", type=str, default="8,16,32",
              help="horizons R = alpha^k for these k")
@click.option("--samples", type=int, default=8)
@click.option("--s-mode", type=click.Choice([sp.MODE_SELF_SIMILAR, sp.MODE_UNIT]),
              default=sp.MODE_SELF_SIMILAR)
@click.pass_obj
def spectrum(obj, subst_file, omegas, r_powers, samples, s_mode):
    """Twisted-integral sweep: hof, product and combined ball bounds."""
    cfg = obj.config
    z = _load_subst(subst_file, cfg)
    spec = sp.make_suspension(z, mode=s_mode, prec=cfg.precision)
    rws = sb.enumerate_return_words(z, 30, budget=cfg.word_length_budget)
    L = lat.build_lattice(rws, spec.A)
    f = sp.make_level0_mean_zero(spec)
    params = sp.RateParams(beta=cfg.beta, gamma=cfg.gamma,
                           Upsilon=cfg.Upsilon, k0=cfg.k0)
    constants = {"lambda": cfg.lam, "C1": cfg.C1, "C5": cfg.C5}
    om_list = [_parse_number(tok) for tok in omegas.split(",")]
    k_list = [int(tok) for tok in r_powers.split(",")]
    rows = []
    with mp.workprec(cfg.precision):
        alpha = spec.alpha
        for om in om_list:
            for kpow in k_list:
                R = alpha ** kpow
                g = sp.G_R(spec, f, om, R, samples=samples, seed=cfg.seed)
                hb = sp.hof_bound(g["G_R"], R)
                pb = sp.product_bound(spec, L, om, R, cfg.lam, cfg.C1)
                cb = sp.combined_bound(spec, f, L, om, hb["r"], params, constants)
                rows.append([om, R, hb["r"], g["G_R"], g["stderr"], hb["bound"],
                             pb["bound"], cb["bound"], cb["branch"],
                             cb["h_beta"]])
    _write_csv(obj.out / "spectral_grid.csv",
               ["omega", "R", "r", "G_R", "G_R_stderr", "hof_bound",
                "product_bound", "combined_bound", "branch", "h_beta_value"],
               rows)
    _write_json(obj.out / "spectral_report.json", {
        "meta": obj.meta(command="spectrum", s_mode=s_mode, samples=samples,
                         omegas=[str(o) for o in om_list], r_powers=k_list),
        "classification": spec.profile.classification,
        "alpha": _fmt(spec.alpha),
        "roof": [_fmt(x) for x in spec.s],
        "measure_normalizer": _fmt(spec.measure_norm),
        "constants": {"lambda": cfg.lam, "C1": cfg.C1, "C5": cfg.C5,
                      "beta": cfg.beta, "gamma": cfg.gamma},
        "grid_csv": "spectral_grid.csv",
    })
    click.echo(str(obj.out / "spectral_grid.csv"))


def _bernoulli_point(args):
    lam_str, p_str, xi_str, tol_str, prec = args
    spec = bern.BernoulliSpec(lam=Fraction(lam_str), p=Fraction(p_str), prec=prec)
    with mp.workprec(prec):
        v, err, n = bern.fourier(spec, to_mpf(xi_str), to_mpf(tol_str))
        return nstr_full(abs(v)), nstr_full(err), n


@main.command("bernoulli")
@click.option("--poly", type=str, default=None,
              help="Salem/Pisot polynomial; lambda = 1/alpha")
@click.option("--lam", type=str, default=None, help="explicit lambda in (0,1)")
@click.option("--p", type=str, default="1/2", help="sign bias")
@click.option("--mode", type=click.Choice(["decay", "pisot"]), default="decay")
@click.option("--n-max", type=int, default=40, help="grid height xi = alpha^N")
@click.option("--tol", type=str, default="1e-30")
@click.pass_obj
def bernoulli_cmd(obj, poly, lam, p, mode, n_max, tol):
    """Transform decay sweeps: certified products on a geometric grid."""
    cfg = obj.config
    if (poly is None) == (lam is None):
        raise ValidationError("give exactly one of --poly or --lam")
    p_frac = Fraction(p)
    tol_v = _parse_number(tol)
    if poly is not None:
        profile = classify(_parse_poly(poly), Precision(bits=cfg.precision))
        if mode == "pisot":
            res = bern.pisot_nondecay(profile, n_max, tol=tol_v)
            rows = [[v["N"], v["abs"], v["err"], "", ""] for v in res["values"]]
            summary = {"infimum": _fmt(res["infimum"]), "mode": "pisot"}
        else:
            res = bern.salem_logstar_decay(profile, p=p_frac, N_max=n_max,
                                           tol=tol_v)
            rows = [[r["xi"], r["abs"], r["err"], r["logstar"], r["envelope"]]
                    for r in res["rows"]]
            summary = {"A_c": _fmt(res["A_c"]), "C_c": _fmt(res["C_c"]),
                       "all_pass": all(r["pass"] for r in res["rows"]),
                       "mode": "decay"}
    else:
        lam_frac = Fraction(lam)
        prec = cfg.precision
        grid = [(str(lam_frac), str(p_frac), str(Fraction(2) ** k), str(tol_v), prec)
                for k in range(n_max + 1)]
        if obj.workers > 1:
            with ProcessPoolExecutor(max_workers=obj.workers) as ex:
                results = list(ex.map(_bernoulli_point, grid))
        else:
            results = [_bernoulli_point(g) for g in grid]
        rows = []
        with mp.workprec(prec):
            for (args, (a, e, n)) in zip(grid, results):
                xi = to_mpf(args[2])
                rows.append([xi, a, e, ek.logstar(max(1, xi)), ""])
        summary = {"mode": "grid", "lambda": str(lam_frac)}
    _write_csv(obj.out / "bernoulli_decay.csv",
               ["xi", "abs_fourier", "certified_err", "logstar_xi",
                "envelope_value"], rows)
    summary["meta"] = obj.meta(command="bernoulli", p=str(p_frac), n_max=n_max)
    _write_json(obj.out / "bernoulli_summary.json", summary)
    click.echo(str(obj.out / "bernoulli_decay.csv"))


@main.command("eta")
@click.option("--poly", type=str, required=True, help="Salem polynomial")
@click.option("--epsilon", type=str, default="0.1")
@click.option("--n-ver", type=int, default=500)
@click.pass_obj
def eta_cmd(obj, poly, epsilon, n_ver):
    """Construct and verify an eta with uniformly small integer orbit."""
    cfg = obj.config
    profile = classify(_parse_poly(poly), Precision(bits=cfg.precision))
    eps = _parse_number(epsilon)
    result = bern.eta_search(profile, eps, N_ver=n_ver,
                             scan_budget=cfg.eta_scan_budget)
    _write_json(obj.out / "eta_result.json", {
        "meta": obj.meta(command="eta", epsilon=str(epsilon), n_ver=n_ver),
        "coeffs": [str(c) for c in result.coeffs],
        "epsilon_requested": str(epsilon),
        "max_observed_distance": _fmt(result.max_observed),
        "E": _fmt(result.E),
        "search_eps": _fmt(result.search_eps),
        "seed_k": result.seed_k,
        "verification_depth": result.N_ver,
        "verification_precision_bits": result.prec_ver,
    })
    click.echo(str(obj.out / "eta_result.json"))


@main.command("rates")
@click.option("--b-values", type=str, default="16,256,65536")
@click.option("--gamma", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--alpha-poly", type=str, default="1,-1,-1,-1,1")
@click.pass_obj
def rates_cmd(obj, b_values, gamma, beta, alpha_poly):
    """Scale, threshold and slow-rate tables."""
    cfg = obj.config
    gamma = gamma if gamma is not None else cfg.gamma
    beta = beta if beta is not None else cfg.beta
    profile = classify(_parse_poly(alpha_poly), Precision(bits=cfg.precision))
    rows = []
    with mp.workprec(cfg.precision):
        alpha = profile.alpha
        for tok in b_values.split(","):
            B = int(tok)
            psi_b = ek.psi(B)
            tower = ek.r0_loglog(B, gamma)
            # a representative radius safely inside the rate domain
            r = mpf(2) ** (-(2 ** 17)) if B == 16 else alpha ** (-64) / 2
            try:
                h = ek.rate_h(r, beta, alpha)
            except SalemLabError:
                h = None
            rows.append([B, psi_b, tower, _fmt(r), h])
    _write_csv(obj.out / "rates.csv",
               ["B", "psi_B", "log2_log_alpha_R0", "sample_r", "h_beta"],
               rows)
    _write_json(obj.out / "rates_summary.json", {
        "meta": obj.meta(command="rates", gamma=gamma, beta=beta),
        "scales_n_k": {str(k): str(ek.scales(k)) for k in range(1, 6)},
        "alpha": _fmt(profile.alpha),
    })
    click.echo(str(obj.out / "rates.csv"))


def entry():
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(2)
    except ValidationError as exc:
        _emit_error(exc, 2)
    except BudgetError as exc:
        _emit_error(exc, 3)
    except PrecisionError as exc:
        _emit_error(exc, 4)
    except SalemLabError as exc:
        _emit_error(exc, 5)


def _emit_error(exc, code):
    sys.stderr.write(json.dumps({
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": code,
    }, sort_keys=True) + "\n")
    sys.exit(code)


if __name__ == "__main__":
    entry()
