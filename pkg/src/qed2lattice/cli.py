"""Command-line entry points.

Every subcommand prints a JSON report on stdout and, with ``--out DIR``,
also writes the report, CSV dumps and PNG figures into DIR.  Settings come
from a flat ``key = value`` config file overridden by flags.

Exit codes: 0 pass, 1 check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .lattice import LatticeParams, ParameterError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

PARAM_KEYS = {"N": int, "n_side": int, "M": float, "m_N": float, "r": float,
              "lam": float, "xi": float, "Z5": float}
ALIASES = {"mass": "m_N", "n-side": "n_side", "lambda": "lam", "z5": "Z5"}

# per-command lattice defaults (anything not set by config or flags)
DEFAULT_PARAMS = {
    "propagator": dict(N=4, n_side=32),
    "duality": dict(N=3, n_side=8),
    "doubling": dict(N=4, n_side=64),  # m_N defaults to 2^-N
    "grassmann-check": dict(N=1, n_side=2),
    "cumulants": dict(N=1, n_side=4, lam=0.5),
    "bubble": dict(N=3, n_side=8),
    "wi-check": dict(N=4, n_side=16),
    "anomaly-scan": dict(N=1, n_side=2),
    "gn-bound": dict(N=1, n_side=2),
}


class UsageError(Exception):
    pass


# -- config --------------------------------------------------------------------

def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise UsageError(f"config line {lineno}: empty key")
        out[_norm_key(k)] = v
    return out


def _norm_key(k: str) -> str:
    k = ALIASES.get(k, k)
    k = k.replace("-", "_")
    return ALIASES.get(k, k)


def _int_list(s) -> list:
    if isinstance(s, (list, tuple)):
        return [int(v) for v in s]
    s = str(s).strip()
    if ":" in s:
        lo, hi = s.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in s.split(",") if v.strip()]


def _float_list(s) -> list:
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).split(",") if v.strip()]


def _pairs(s) -> list:
    """'i,j;k,l' -> [(i, j), (k, l)]"""
    out = []
    for chunk in str(s).split(";"):
        if chunk.strip():
            i, j = chunk.split(",")
            out.append((int(i), int(j)))
    return out


def merged_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULT_PARAMS.get(args.command, {}))
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        settings.update(parse_config_text(text))
    for k, v in vars(args).items():
        if k in ("command", "config", "func") or v is None:
            continue
        settings[k] = v
    return settings


def build_params(settings: dict) -> LatticeParams:
    kw = {}
    for k, typ in PARAM_KEYS.items():
        if k in settings:
            try:
                v = typ(float(settings[k])) if typ is int else typ(settings[k])
            except (TypeError, ValueError):
                raise UsageError(f"bad value for {k}: {settings[k]!r}") from None
            if typ is int and float(settings[k]) != v:
                raise UsageError(f"{k} must be an integer")
            kw[k] = v
    return LatticeParams(**kw)


def pmap(fn, items, threads: int):
    """Ordered map, optionally on a thread pool; results do not depend on
    the thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- commands ------------------------------------------------------------------
# each returns (results, constants, passed, writer) where writer(outdir, figures)
# persists the command-specific files

def cmd_propagator(s, params, threads):
    from .propagators import (boson_propagator, fermion_propagator, fitted_constants,
                              norm_scan, propagator_bound_ratio)
    window = None
    if s.get("window"):
        h1, h2 = _int_list(s["window"])
        window = (h1, h2)
    gb = boson_propagator(params)
    gf = fermion_propagator(params, window)
    consts = fitted_constants(params)
    scan = norm_scan(kappa=float(s.get("kappa", 0.0)))
    ratio = propagator_bound_ratio(params)
    checks = {
        "bound_ratio": ratio <= math.sqrt(2.0) * math.pi,
        "l1_slope": abs(scan["l1_slope"] + 2.0) <= 0.1,
        "sup_affine": scan["sup_r2"] > 0.99,
    }
    res = {"bound_ratio": ratio, "bound": math.sqrt(2.0) * math.pi, "norm_scan": scan,
           "boson_origin": gb.grid[0, 0].tolist(), "window": window, "checks": checks}

    def write(out, figures):
        from . import report
        report.write_grid_csv(out / "boson_grid.csv", gb.grid)
        report.write_grid_csv(out / "fermion_grid.csv", gf.grid, spin=True)
        if figures:
            report.plot_grid(out / "boson_grid.png", gb.grid, r"$g^A_{\mu\nu}(x)$")
            report.plot_grid(out / "fermion_grid.png", gf.grid, r"$g(x)$")
            report.plot_xy(out / "norm_scan.png",
                           {r"$\|g^A\|_\infty$": (scan["N_minus_h"], scan["sup"])},
                           r"$N - h^*_M$", r"$\|g^A\|_\infty$")
    return res, consts, all(checks.values()), write


def cmd_duality(s, params, threads):
    from .propagators import precision_duality_check
    xis = _float_list(s.get("xi_values", "0,0.5,1"))
    tol = float(s.get("tol", 1e-10))
    resid = pmap(lambda xi: precision_duality_check(params.replace(xi=xi)), xis, threads)
    res = {"xi": xis, "residual": resid, "tol": tol}
    return res, {}, max(resid) < tol, None


def cmd_doubling(s, params, threads):
    from .propagators import doubling_scan
    rs = _float_list(s.get("r_values", "0,1"))
    thr = float(s.get("threshold", 3.0))
    rows = [row for r in pmap(lambda r: doubling_scan(params, (r,), thr), rs, threads) for row in r]
    checks = {}
    for row in rows:
        if row["r"] == 0.0:
            checks["r0_four_regions"] = row["regions"] == 4
        if row["r"] == 1.0:
            checks["r1_one_region"] = row["regions"] == 1
            gap = row["wilson_gap"]["(pi/a,0)"]
            checks["r1_gap"] = abs(gap - 2.0 / params.a) <= 1e-9 * (2.0 / params.a)
    res = {"rows": rows, "checks": checks}

    def write(out, figures):
        from . import report
        if figures:
            from .lattice import fermi_symbols, momentum_grid
            k0, k1 = momentum_grid(params)
            for r in rs:
                s0, s1, MN = fermi_symbols((k0, k1), params.replace(r=r))
                smin = np.sqrt(s0 ** 2 + s1 ** 2 + (params.m_N + MN) ** 2)
                report.plot_grid(out / f"doubling_r{r:g}.png", smin[..., None, None],
                                 f"smallest singular value, r = {r:g}")
    return res, {}, all(checks.values()), write


def cmd_grassmann(s, params, threads):
    from .grassmann import (gauge_invariance_suite, symmetry_suite, truncated_oracle_check,
                            wick_oracle_check)
    seed = int(s.get("seed", 0))
    draws = int(s.get("draws", 20))
    tol = float(s.get("tol", 1e-12))
    gauge = gauge_invariance_suite(draws, seed)
    wick = wick_oracle_check(4, 10, seed)
    trunc = truncated_oracle_check(4, 3, 5, seed)
    sym = symmetry_suite(params.replace(n_side=max(params.n_side, 4)))
    checks = {"gauge": gauge < tol, "wick": wick < tol,
              "truncated": max(trunc.values()) < tol, "symmetries": max(sym.values()) < tol}
    res = {"gauge_deviation": gauge, "wick_deviation": wick, "truncated_deviation": trunc,
           "symmetry_deviation": sym, "tol": tol, "checks": checks}
    return res, {}, all(checks.values()), None


def cmd_cumulants(s, params, threads):
    from .cumulants import conjugation_symmetry_check, kernel_split_scan, tree_property_check
    n = int(s.get("n", 2))
    N_values = _int_list(s.get("N_range", "4:9"))
    lam_scan = float(s.get("lam_scan", 0.01))
    pos = [(0.25, 0.25), (0.5, 0.375), (0.625, 0.5)][:n]
    scan = kernel_split_scan(n, pos, [0] * n, [1] * n, N_values, lam_scan)
    rng = np.random.default_rng(int(s.get("seed", 0)))
    tree = {}
    for k in range(2, 8):
        worst = 0.0
        for _ in range(int(s.get("draws", 100))):
            w = rng.normal(size=(k, k))
            w = w + w.T
            worst = max(worst, tree_property_check(k, w))
        tree[k] = worst
    furry = pmap(lambda p: conjugation_symmetry_check(params, p), (1, 2, 3), threads)
    checks = {"kernel_split_slope": scan["slope"] is not None and abs(scan["slope"] + 2.0) <= 0.3,
              "tree_property": max(tree.values()) < 1e-9,
              "furry_odd": max(furry[0]["contracted_max"], furry[2]["contracted_max"]) < 1e-10,
              "furry_even_control": furry[1]["contracted_max"] > 1e-6}
    res = {"kernel_split": scan, "tree_property": tree, "furry": furry, "checks": checks}

    def write(out, figures):
        from . import report
        report.write_scan_csv(out / "kernel_split.csv", scan["rows"])
        if figures:
            report.plot_xy(out / "kernel_split.png",
                           {f"n = {n}": ([r["N"] for r in scan["rows"]],
                                         [abs(r["delta"]) for r in scan["rows"]])},
                           "N", r"$|w_{n,0} - v_n|$", logy=True)
    return res, {}, all(checks.values()), write


def _momenta(s, params):
    from .lattice import index_to_momentum
    idx = _pairs(s.get("momenta", "0,0;1,0;1,1"))
    return idx, [tuple(float(index_to_momentum(i, params)) for i in p) for p in idx]


def cmd_bubble(s, params, threads):
    from .diagrams import b_hat, bubble_hat, tadpole
    from .propagators import fermion_momentum
    window = None
    if s.get("window"):
        h1, h2 = _int_list(s["window"])
        window = (h1, h2)
    ghat = fermion_momentum(params, window)
    idx, moms = _momenta(s, params)

    def one(p):
        return {"p": p,
                "Pi": bubble_hat(p, params, window, ghat=ghat).values,
                "Pi5": bubble_hat(p, params, window, chiral=True, ghat=ghat).values,
                "B": b_hat(p, params, window, ghat=ghat),
                "B5": b_hat(p, params, window, chiral=True, ghat=ghat)}
    rows = pmap(one, moms, threads)
    T = tadpole(params, window, ghat=ghat)
    P0 = bubble_hat((0.0, 0.0), params, window, ghat=ghat).values
    P50 = bubble_hat((0.0, 0.0), params, window, chiral=True, ghat=ghat).values
    scale = max(np.abs(P0).max(), np.abs(P50).max(), 1.0)
    delta_dev = max(abs(P0[0, 1]), abs(P0[1, 0]), abs(P0[0, 0] - P0[1, 1])) / scale
    eps_dev = max(abs(P50[0, 0]), abs(P50[1, 1]), abs(P50[0, 1] + P50[1, 0])) / scale
    checks = {"Pi0_delta": delta_dev < 1e-10, "Pi50_epsilon": eps_dev < 1e-10}
    res = {"tadpole": T, "rows": rows, "Pi0_delta_deviation": delta_dev,
           "Pi50_epsilon_deviation": eps_dev, "checks": checks}

    def write(out, figures):
        from . import report
        for key in ("Pi", "Pi5", "B", "B5"):
            trows = [(r["p"][0], r["p"][1], mu, nu, complex(r[key][mu, nu]))
                     for r in rows for mu in (0, 1) for nu in (0, 1)]
            report.write_tensor_csv(out / f"{key.lower()}.csv", trows, window, params.N)
        if figures:
            pabs = [float(np.hypot(*r["p"])) for r in rows]
            report.plot_xy(out / "bubble.png",
                           {r"Re $\hat\Pi_{00}$": (pabs, [r["Pi"][0, 0].real for r in rows]),
                            r"Re $\hat\Pi_{11}$": (pabs, [r["Pi"][1, 1].real for r in rows])},
                           r"$|p|$", "bubble")
    return res, {}, all(checks.values()), write


def cmd_wi(s, params, threads):
    from .anomaly import b_hat_grid, longitudinal_decoupling, ward_identity_check
    tol = float(s.get("tol", 1e-9))
    wi = ward_identity_check(params)
    B = b_hat_grid(params)
    lon = longitudinal_decoupling(params, B)
    checks = {"ward_identity": wi["vector_residual"] < tol, "longitudinal": lon["residual"] < tol}
    res = {"ward_identity": wi, "longitudinal": lon, "residual": wi["vector_residual"],
           "tol": tol, "checks": checks}

    def write(out, figures):
        from . import report
        from .lattice import momentum_grid
        k0, k1 = momentum_grid(params)
        rows = [(float(k0[i, j]), float(k1[i, j]), mu, nu, complex(B[i, j, mu, nu]))
                for i in range(params.n_side) for j in range(params.n_side)
                for mu in (0, 1) for nu in (0, 1)]
        report.write_tensor_csv(out / "b_hat.csv", rows, None, params.N)
        if figures:
            report.plot_grid(out / "b_hat.png", B, r"$|\hat B_{\mu\nu}(p)|$")
    return res, {}, all(checks.values()), write


def cmd_anomaly(s, params, threads):
    from .anomaly import anomaly_scan
    n = int(s.get("quad_n", 512))
    steps = tuple(_int_list(s.get("steps", "1,2,3,4")))
    out = anomaly_scan(n, steps)
    tol = {"one_over_8pi": 0.02, "minus_one_over_4pi": 0.01, "one_over_pi": 0.02,
           "chiral_one_over_pi": 0.02}
    checks = {k: out["residuals"][k] < t for k, t in tol.items()}
    out["checks"] = checks
    out["tolerances"] = tol

    def write(o, figures):
        from . import report
        if figures:
            rs = out["raw_series"]
            report.plot_extrapolation(
                o / "anomaly_extrapolation.png",
                {"one_over_8pi": rs["singular"], "one_over_pi": rs["transverse"],
                 "chiral_one_over_pi": rs["chiral"]},
                out["targets"])
    return out, {}, all(checks.values()), write


def cmd_gn(s, params, threads):
    from .rgtrees import cauchy_check, dimensional_sum
    h = int(s.get("h", 0))
    N_max = int(s.get("N_max", s.get("gn_N", 10)))
    ep = int(s.get("endpoints", 2))
    theta = float(s.get("theta", 0.5))
    if N_max - h > 10 or N_max <= h:
        raise UsageError("gn-bound needs 0 < N - h <= 10")
    Ns = list(range(h + 1, N_max + 1))
    sums = pmap(lambda N: dimensional_sum(h, N, ep, theta), Ns, threads)
    rows = []
    for i, (N, v) in enumerate(zip(Ns, sums)):
        rows.append({"N": N, "sum": v, "increment": None if i == 0 else v - sums[i - 1]})
    chk = cauchy_check(rows, ep, theta)
    res = {"rows": rows, "cauchy": chk, "h": h, "endpoints": ep, "theta": theta}

    def write(out, figures):
        from . import report
        report.write_gn_csv(out / "gn_bound.csv", rows)
        if figures:
            report.plot_xy(out / "gn_bound.png",
                           {f"{ep} endpoints": (Ns, sums)}, "N", "dimensional sum")
    return res, {}, bool(chk["bounded"] and chk["shrinking"]), write


COMMANDS = {
    "propagator": (cmd_propagator, "grid dumps, fitted constants and norm scans"),
    "duality": (cmd_duality, "covariance-precision duality residual"),
    "doubling": (cmd_doubling, "low-mode regions of the Wilson-Dirac operator"),
    "grassmann-check": (cmd_grassmann, "Wick, truncated-expectation and gauge-invariance suite"),
    "cumulants": (cmd_cumulants, "kernel splitting, tree property and charge-conjugation report"),
    "bubble": (cmd_bubble, "bubble, chiral bubble, tadpole and current tables"),
    "wi-check": (cmd_wi, "Ward identity and longitudinal decoupling residuals"),
    "anomaly-scan": (cmd_anomaly, "continuum extraction of the anomaly coefficients"),
    "gn-bound": (cmd_gn, "tree dimensional sums as N grows"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("lattice")
    g.add_argument("--config", help="flat key = value file; flags override it")
    g.add_argument("--out", help="directory for JSON, CSV and PNG outputs")
    g.add_argument("--threads", type=int, default=None, help="worker threads (default 1)")
    g.add_argument("--no-figures", action="store_true", default=None)
    g.add_argument("--N", type=int, dest="N")
    g.add_argument("--n-side", type=int, dest="n_side")
    g.add_argument("--M", type=float, dest="M")
    g.add_argument("--mass", type=float, dest="m_N", help="fermion mass m_N")
    g.add_argument("--r", type=float, dest="r", help="Wilson parameter")
    g.add_argument("--lam", type=float, dest="lam", help="coupling lambda = e^2")
    g.add_argument("--xi", type=float, dest="xi")
    g.add_argument("--Z5", type=float, dest="Z5")
    g.add_argument("--tol", type=float)
    g.add_argument("--seed", type=int)

    p = _Parser(prog="qed2lattice", description="Lattice QED2 checks and reports.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_)
        if name in ("propagator", "bubble"):
            sp.add_argument("--window", help="scale window h1,h2")
        if name == "propagator":
            sp.add_argument("--kappa", type=float, help="weight exponent for the 1-norm scan")
        if name == "duality":
            sp.add_argument("--xi-values", dest="xi_values")
        if name == "doubling":
            sp.add_argument("--r-values", dest="r_values")
            sp.add_argument("--threshold", type=float)
        if name == "grassmann-check":
            sp.add_argument("--draws", type=int)
        if name == "cumulants":
            sp.add_argument("--n", type=int, choices=(2, 3))
            sp.add_argument("--N-range", dest="N_range", help="lo:hi inclusive or a comma list")
            sp.add_argument("--lam-scan", dest="lam_scan", type=float)
            sp.add_argument("--draws", type=int)
        if name == "bubble":
            sp.add_argument("--momenta", help="dual-grid index pairs 'i,j;k,l'")
        if name == "anomaly-scan":
            sp.add_argument("--quad-n", dest="quad_n", type=int)
            sp.add_argument("--steps")
        if name == "gn-bound":
            # --N here is the top of the scale range
            sp.add_argument("--h", type=int)
            sp.add_argument("--endpoints", type=int)
            sp.add_argument("--theta", type=float)
    return p


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stdout)
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        settings = merged_settings(args)
        if args.command == "gn-bound" and "N" in settings:
            settings["N_max"] = settings.pop("N")
            settings["N"] = DEFAULT_PARAMS["gn-bound"]["N"]
        if args.command == "doubling" and "m_N" not in settings:
            settings["m_N"] = 2.0 ** -int(settings["N"])
        params = build_params(settings)
        threads = int(settings.get("threads", 1))
        if threads < 1:
            raise UsageError("--threads must be >= 1")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _error("usage", str(exc), EXIT_USAGE)
    except ParameterError as exc:
        return _error("config", str(exc), EXIT_USAGE)

    from . import report
    fn = COMMANDS[args.command][0]
    try:
        results, consts, passed, writer = fn(settings, params, threads)
    except (UsageError, ParameterError, ValueError) as exc:
        return _error("config", str(exc), EXIT_USAGE)
    except ArithmeticError as exc:
        return _error("numerical", str(exc), EXIT_FAIL)
    config = {k: v for k, v in sorted(settings.items()) if k not in ("out",)}
    config.update(params.as_dict())
    rep = report.make_report(args.command, config, results, consts, bool(passed))
    print(report.dumps(rep))
    if settings.get("out"):
        out = Path(settings["out"])
        out.mkdir(parents=True, exist_ok=True)
        report.write_json(out / "report.json", rep)
        if writer is not None:
            writer(out, not settings.get("no_figures"))
    return EXIT_PASS if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
