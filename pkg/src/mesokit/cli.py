"""Command-line front end: identity checks, cumulants, limits, sweeps, sampling.

Every command accepts ``--config file.json`` whose keys are flag names
(``"N": 200``); explicit flags override the file.  Outputs carry the
resolved configuration.  Exit codes: 0 ok, 2 configuration error,
3 tolerance failure, 4 numeric failure.
"""
import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from math import factorial

import numpy as np

from . import __version__, comb, cumulants, kernels, limits, sampler, shapes, testfn

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_NUMERIC = 0, 2, 3, 4

IDENTITIES = ("sum_m", "b_gf", "B_gf", "mns_delta2", "dhk", "mcl", "variance", "c3", "c4")


class ConfigError(ValueError):
    pass


class ToleranceFailure(Exception):
    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


# --- formatting ------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, Fraction):
        return str(v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def write_csv(rows, columns, config, stream):
    """Header comment with the config, fixed columns, 17-significant-digit floats."""
    stream.write("# config: " + json.dumps(_jsonable(config), sort_keys=True) + "\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])


def write_json(payload, config, stream):
    doc = {"config": _jsonable(config), "result": _jsonable(payload)}
    stream.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _emit(args, config, rows=None, columns=None, payload=None):
    buf = io.StringIO()
    if args.format == "csv":
        write_csv(rows, columns, config, buf)
    else:
        write_json(payload if payload is not None else rows, config, buf)
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- argument parsing ------------------------------------------------------------------

def _float_list(s):
    s = s.strip()
    return [] if not s else [float(t) for t in s.split(",")]


def _int_list(s):
    s = s.strip()
    return [] if not s else [int(t) for t in s.split(",")]


def _add_common(p):
    p.add_argument("--config", help="JSON file with default values for these flags")
    p.add_argument("--shape", default=None, help="mns | erfc:s | indicator | cue-remove:m")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--f", default=None, help="gj:a:j | y:eps | bump:[a,b] | bump | zero")
    p.add_argument("--n", type=_int_list, default=None, help="orders, comma separated")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)


DEFAULTS = {
    "shape": "mns", "N": 200, "alpha": 0.5, "delta": 0.0, "tau": 1.0, "f": "bump",
    "n": [2], "samples": 1000, "seed": 0, "tol": None, "out": None, "format": "json",
    "geometry": "gue", "method": "auto", "route": "all", "alphas": "0.2,0.4,0.6,0.8",
    "deltas": "0.2,0.4,0.6,0.8", "only": None, "inject_wrong_b3": False, "taus": None,
    "window": "support",
}


def build_parser():
    ap = argparse.ArgumentParser(prog="mesokit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"mesokit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the identity suite")
    _add_common(p)
    p.add_argument("--only", action="append", choices=IDENTITIES)
    p.add_argument("--inject-wrong-b3", dest="inject_wrong_b3", action="store_true", default=None,
                   help="replace b^3 by a wrong table (the b_gf check must fail)")

    p = sub.add_parser("cumulant", help="finite-N cumulants of a linear statistic")
    _add_common(p)
    p.add_argument("--geometry", choices=("gue", "cue", "sine-gue", "sine-cue"), default=None)
    p.add_argument("--method", choices=("auto", "trace", "fourier", "sine-mixture"), default=None)

    p = sub.add_parser("limit", help="limiting cumulants C^n at the critical scale")
    _add_common(p)

    p = sub.add_parser("variance", help="limiting variance by each route, over a tau list")
    _add_common(p)
    p.add_argument("--route", choices=limits.VARIANCE_ROUTES + ("all",), default=None)
    p.add_argument("--taus", default=None, help="comma separated tau values (overrides --tau)")

    p = sub.add_parser("phase-sweep", help="Monte Carlo (alpha, delta) phase table")
    _add_common(p)
    p.add_argument("--alphas", default=None)
    p.add_argument("--deltas", default=None)

    p = sub.add_parser("sample", help="sample configurations (JSON lines) or statistic cumulants")
    _add_common(p)
    p.add_argument("--geometry", choices=("gue", "cue"), default=None)
    p.add_argument("--window", default=None, help="support | full | a,b")
    return ap


def resolve(args):
    """Merge defaults < config file < explicit flags into a plain dict."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                fileconf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(fileconf) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}; valid: {sorted(DEFAULTS)}")
        cfg.update(fileconf)
    for k, v in vars(args).items():
        if k in ("config", "command") or v is None:
            continue
        cfg[k] = v
    cfg["command"] = args.command
    if isinstance(cfg["n"], int):
        cfg["n"] = [cfg["n"]]
    for key in ("alphas", "deltas", "taus"):
        if isinstance(cfg.get(key), str):
            cfg[key] = _float_list(cfg[key])
    return cfg


# --- verify ----------------------------------------------------------------------------

def _check(name, residual, tol, detail=None):
    passed = bool(residual < tol)
    return {"identity": name, "passed": passed, "residual": float(residual),
            "tolerance": tol, "detail": detail or {}}


def _verify_sum_m(cfg):
    res = max(abs(comb.sum_weights(n) - (1 if n == 1 else 0)) for n in range(1, 7))
    return _check("sum_m", float(res), 1e-10)


def _verify_b_gf(cfg):
    table = None
    if cfg["inject_wrong_b3"]:
        table = {3: (1, -3, 1)}
    res = comb.b_gf_residual(8, table=table)
    out = _check("b_gf", float(res), 0.0, {"injected_wrong_b3": bool(table)})
    out["passed"] = res == 0
    return out


def _verify_B_gf(cfg):
    worst = 0.0
    for sh in (shapes.mns_shape(), shapes.erfc_shape(1.0)):
        gf = comb.big_b_gf_coeffs(sh, 6)
        for n in range(2, 7):
            worst = max(worst, abs(comb.big_b(sh, n) - factorial(n) * gf[n]))
    return _check("B_gf", worst, 1e-8)


def _verify_mns_delta2(cfg):
    sh = shapes.mns_shape()
    res = max(abs(comb.big_b(sh, n) - (1.0 if n == 2 else 0.0)) for n in range(2, 9))
    return _check("mns_delta2", res, 1e-8)


def _random_zero_sum(rng, n):
    u = rng.normal(size=n)
    return u - u.mean()


def _verify_dhk(cfg):
    rng = np.random.default_rng(cfg["seed"])
    res = max(abs(comb.dhk_residual(rng.normal(size=n))) for n in range(2, 7) for _ in range(50))
    return _check("dhk", res, 1e-10)


def _verify_mcl(cfg):
    rng = np.random.default_rng(cfg["seed"])
    res = 0.0
    for n in range(2, 7):
        for _ in range(50):
            u = _random_zero_sum(rng, n)
            res = max(res, abs(comb.mcl_value(u, exact=True) - comb.mcl_target(u)))
    return _check("mcl", res, 1e-10)


def _verify_variance(cfg):
    sh = shapes.mns_shape()
    worst = 0.0
    for f in (testfn.bump(), testfn.builtin_y(0.1)):
        for tau in (0.5, 2.0):
            v = [limits.limit_variance(sh, tau, f, r) for r in limits.VARIANCE_ROUTES]
            worst = max(worst, (max(v) - min(v)) / abs(np.mean(v)))
    u = np.linspace(-20, 20, 41)
    helper = float(np.max(np.abs(limits.psi_overlap(sh, u) - limits.mns_kernel_helper(u))))
    res = max(worst / 1e-4, helper / 1e-10)
    return _check("variance", res, 1.0, {"route_spread": worst, "helper_residual": helper})


def _verify_c3(cfg):
    detail, ratio = {}, 0.0
    for sh in (shapes.mns_shape(), shapes.erfc_shape(1.0)):
        val, err = limits.c3_limit(sh, testfn.bump(), seed=cfg["seed"])
        detail[sh.name] = {"value": val, "error": err}
        ratio = max(ratio, abs(val) / (3 * err) if err > 0 else (0.0 if val == 0 else np.inf))
    return _check("c3", ratio, 1.0, detail)


def _verify_c4(cfg):
    rng = np.random.default_rng(cfg["seed"])
    worst = 0.0
    for _ in range(20):
        z = rng.uniform(0, 2.5, size=3)
        enum = 0.5 * (limits.sign_vector_sum(z) + limits.sign_vector_sum(z[::-1]))
        worst = max(worst, abs(enum - float(limits.c4_bracket(*z, symmetrize=True))))
    g = shapes.erfc_shape(1.0)
    ss, _ = limits.c4_sign_sum(g)
    full = limits.c4_of_y(g, 0.05, seed=cfg["seed"], shortcut=-ss)
    rel = abs(full["scaled"] - full["shortcut"]) / abs(full["shortcut"])
    mns_sum, mns_err = limits.c4_sign_sum(shapes.mns_shape())
    detail = {"bracket_vs_enumeration": worst, "erfc1_sign_sum": ss,
              "erfc1_full_scaled": full["scaled"], "erfc1_relative_gap": rel,
              "mns_sign_sum": mns_sum, "mns_sign_sum_error": mns_err}
    return _check("c4", max(worst / 1e-9, rel / 0.1), 1.0, detail)


VERIFY = {
    "sum_m": _verify_sum_m, "b_gf": _verify_b_gf, "B_gf": _verify_B_gf,
    "mns_delta2": _verify_mns_delta2, "dhk": _verify_dhk, "mcl": _verify_mcl,
    "variance": _verify_variance, "c3": _verify_c3, "c4": _verify_c4,
}


def cmd_verify(cfg, args):
    names = cfg["only"] or list(IDENTITIES)
    results = [VERIFY[name](cfg) for name in names]
    rows = [{k: v for k, v in r.items() if k != "detail"} for r in results]
    if cfg["format"] == "csv":
        _emit(args, cfg, rows=rows, columns=("identity", "passed", "residual", "tolerance"))
    else:
        _emit(args, cfg, payload=results)
    failed = [r["identity"] for r in results if not r["passed"]]
    if failed:
        raise ToleranceFailure("failed identities: " + ", ".join(failed))


# --- cumulant / limit / variance -------------------------------------------------------

REPORT_COLUMNS = ("order", "value", "error_estimate", "method", "f_id", "delta")


def _emit_report(args, cfg, rep):
    if cfg["format"] == "csv":
        _emit(args, cfg, rows=rep.records(), columns=REPORT_COLUMNS)
    else:
        _emit(args, cfg, payload={"records": rep.records(), "extra": rep.extra})


def _rule(cfg, geometry):
    return shapes.parse_rule(cfg["shape"], cfg["N"], cfg["alpha"], cfg["tau"], geometry)


def cmd_cumulant(cfg, args):
    f = testfn.parse_testfn(cfg["f"])
    orders = cfg["n"]
    geometry, method = cfg["geometry"], cfg["method"]
    if cfg["shape"].startswith("cue-remove"):
        geometry = cfg["geometry"] = "cue"
    if geometry.startswith("sine"):
        sh = shapes.parse_shape(cfg["shape"])
        L = kernels.SineMixtureKernel(sh, cfg["N"], cfg["alpha"], cfg["tau"],
                                      eta_rule=geometry.split("-")[1])
        vals, errs = zip(*[cumulants.sine_mixture_cumulant(L, f, n) for n in orders])
        rep = cumulants.CumulantReport(list(orders), list(vals), list(errs), "sine-mixture-fourier",
                                       L.describe(), f.name, 0.0)
    else:
        rule = _rule(cfg, geometry)
        if method == "auto":
            method = "fourier" if geometry == "cue" and f.domain == "circle" else "trace"
        if method == "fourier":
            if geometry != "cue":
                raise ConfigError("the fourier method needs the cue geometry")
            vals, errs = zip(*[cumulants.cue_cumulant_fourier(rule, f, cfg["delta"], n)
                               for n in orders])
            rep = cumulants.CumulantReport(list(orders), list(vals), list(errs), "cue-lattice",
                                           kernels.CircleKernel(rule).describe(), f.name,
                                           cfg["delta"])
        elif method == "trace":
            K = kernels.make_kernel(rule)
            kw = {} if cfg["tol"] is None else {"tol": cfg["tol"]}
            rep = cumulants.trace_cumulants(K, f, cfg["delta"], orders=tuple(orders), **kw)
        else:
            raise ConfigError(f"method {method} needs a sine geometry")
    _emit_report(args, cfg, rep)


def cmd_limit(cfg, args):
    sh = shapes.parse_shape(cfg["shape"])
    f = testfn.parse_testfn(cfg["f"])
    rows = []
    for n in cfg["n"]:
        spec = limits.LimitCumulantSpec(sh, cfg["tau"], f, n)
        p = limits.poisson_component(sh, spec.tau, f, n)
        kw = {"seed": cfg["seed"]}
        if cfg["tol"] is not None:
            kw["tol"] = cfg["tol"]
        g, err = limits.g_component(sh, spec.tau, f, n, **kw)
        rows.append({"order": n, "value": p + g, "poisson": p, "g": g, "error_estimate": err})
    _emit(args, cfg, rows=rows, columns=("order", "value", "poisson", "g", "error_estimate"),
          payload=rows)


def cmd_variance(cfg, args):
    sh = shapes.parse_shape(cfg["shape"])
    f = testfn.parse_testfn(cfg["f"])
    taus = cfg["taus"] or [cfg["tau"]]
    routes = list(limits.VARIANCE_ROUTES) if cfg["route"] == "all" else [cfg["route"]]
    if cfg["route"] == "all" and sh.name != "mns":
        routes.remove("mns_closed")
    rows = []
    for tau in taus:
        row = {"tau": tau}
        for r in routes:
            row[r] = limits.limit_variance(sh, tau, f, r)
        vals = [row[r] for r in routes]
        row["spread"] = (max(vals) - min(vals)) / abs(np.mean(vals)) if vals[0] else 0.0
        rows.append(row)
    _emit(args, cfg, rows=rows, columns=("tau", *routes, "spread"), payload=rows)
    if cfg["tol"] is not None and any(r["spread"] > cfg["tol"] for r in rows):
        raise ToleranceFailure("variance routes disagree beyond tolerance")


# --- Monte Carlo -----------------------------------------------------------------------

def cmd_phase_sweep(cfg, args):
    sh = shapes.parse_shape(cfg["shape"])
    f = testfn.parse_testfn(cfg["f"])
    grid = [(a, d) for a in cfg["alphas"] for d in cfg["deltas"]]
    rows = sampler.phase_sweep(grid, sh, cfg["N"], f, cfg["samples"], cfg["tau"], cfg["seed"])
    if cfg["format"] == "csv":
        _emit(args, cfg, rows=rows, columns=sampler.PHASE_COLUMNS)
    else:
        _emit(args, cfg, payload=rows)


def cmd_sample(cfg, args):
    if cfg["shape"].startswith("cue-remove"):
        cfg["geometry"] = "cue"
    rule = _rule(cfg, cfg["geometry"])
    win = cfg["window"]
    if isinstance(win, str) and "," in win:
        win = tuple(float(t) for t in win.split(","))
    if cfg["f"] == "none":
        # raw configurations, one JSON line each, after a config line
        dpp = sampler.discretize(rule, None if win in ("full", "support") else win)
        lines = [json.dumps({"config": _jsonable(cfg)}, sort_keys=True)]
        for i in range(cfg["samples"]):
            pts = dpp.sample(sampler._stream(cfg["seed"], i))
            lines.append(json.dumps({"sample": i, "points": [float(_fmt(x)) for x in pts]}))
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return
    f = testfn.parse_testfn(cfg["f"])
    sc = sampler.SampleConfig(rule, cfg["samples"], cfg["seed"], f, cfg["delta"], window=win)
    _emit_report(args, cfg, sampler.empirical_cumulants(sc))


COMMANDS = {
    "verify": cmd_verify, "cumulant": cmd_cumulant, "limit": cmd_limit,
    "variance": cmd_variance, "phase-sweep": cmd_phase_sweep, "sample": cmd_sample,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = resolve(args)
        args.out, args.format = cfg["out"], cfg["format"]
        COMMANDS[args.command](cfg, args)
    except ToleranceFailure as exc:
        print(f"mesokit: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except cumulants.QuadratureError as exc:
        print(f"mesokit: tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"mesokit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, sampler.SamplerError) as exc:
        print(f"mesokit: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
