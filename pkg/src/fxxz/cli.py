"""The ``fxxz`` command line.

Exit codes: 0 success, 1 a check failed or a computation did not converge,
2 usage error (including parameters at a pole or outside the supported range).
Settings resolve as command-line flags, then the ``--config`` file (TOML, one
table per subcommand plus an optional ``[common]`` table), then built-in
defaults.  ``FXXZ_THREADS`` caps the BLAS/OpenMP thread pools.
"""

from __future__ import annotations

import os

_THREADS = os.environ.get("FXXZ_THREADS")
if _THREADS:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _THREADS)

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

COMMON = {"out": None, "format": "json", "timing": False}

DEFAULTS: dict[str, dict[str, Any]] = {
    "verify-weights": {"q": -0.3, "r": 0.4, "zeta1": "0.9+0.1j", "zeta2": "1.2-0.05j",
                       "grid": False, "product_tol": 1e-17, "threshold": 1e-12},
    "norms": {"order": 48, "i": None, "primed": None},
    "fidelity": {"delta": [-2.0], "h_min": 0.0, "h_max": 4.0, "steps": 40, "product_tol": 1e-17,
                 "exact_order": None},
    "correlate": {"i": 0, "N": 2, "eps": "+-", "mode": "fracture", "order": 24, "z": None},
    "magnetize": {"i": 0, "order": 48, "check_conjecture": False, "special_cases": False,
                  "boundary": False},
    "fig10": {"delta": -2.0, "h_min": 0.0, "h_max": 4.0, "steps": 40},
    "qkz-check": {"q": -0.3, "r": 0.4, "zeta1": "0.9", "zeta2": "1.1", "tol": 1e-12,
                  "threshold": 1e-8},
    "ed": {"sites": 12, "delta": -2.0, "h": 0.0, "observable": "mag", "sector": 0,
           "pin": 0.5, "dump": None},
    "selftest": {"order": 16},
}

CSV_HELP = {
    "fidelity": "CSV columns: delta, h, r, fidelity (plus fidelity_series with --exact-order)",
    "fig10": "CSV columns: h, r, fracture_mag, boundary_mag, spontaneous_mag",
    "verify-weights": "CSV columns (with --grid): q, zeta, yang_baxter, crossing, unitarity, boundary_yang_baxter",
}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fxxz", description="Fractured XXZ chain: exact series, numerics and ED.")
    p.add_argument("--config", help="TOML file with [common] and per-command tables")
    p.add_argument("--print-config", action="store_true", help="print the resolved settings and exit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="write the JSON report here (CSV goes beside it)")
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS,
                        help="stdout format when --out is not given")
    common.add_argument("--timing", action="store_true", default=argparse.SUPPRESS,
                        help="include wall-clock time in the report")
    common.add_argument("--print-config", dest="print_config", action="store_true", default=argparse.SUPPRESS,
                        help="print the resolved settings and exit")
    sub = p.add_subparsers(dest="command")

    def cmd(name: str, help_: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_, epilog=CSV_HELP.get(name),
                              argument_default=argparse.SUPPRESS)

    s = cmd("verify-weights", "residuals of the R/K-matrix relations")
    s.add_argument("--q", type=float)
    s.add_argument("--r", type=float)
    s.add_argument("--zeta1")
    s.add_argument("--zeta2")
    s.add_argument("--grid", action="store_true", help="scan a 5x5 (q, zeta) grid")
    s.add_argument("--product-tol", dest="product_tol", type=float)

    s = cmd("norms", "vacuum norms and the overlap: mode sums against products")
    s.add_argument("--order", type=int)
    s.add_argument("--i", type=int, choices=(0, 1), help="restrict to one sector and print its series")
    s.add_argument("--primed", choices=("yes", "no"), help="with --i: the (-q)^D bracket (yes) or the plain norm (no)")

    s = cmd("fidelity", "fidelity |<vac|vac'>|^2 against the field")
    s.add_argument("--delta", type=float, action="append")
    s.add_argument("--h-min", dest="h_min", type=float)
    s.add_argument("--h-max", dest="h_max", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--exact-order", dest="exact_order", type=int,
                   help="also evaluate the exact overlap series truncated at this order")
    s.add_argument("--product-tol", dest="product_tol", type=float)

    s = cmd("correlate", "exact series of one correlation component")
    s.add_argument("--i", type=int, choices=(0, 1))
    s.add_argument("--N", type=int)
    s.add_argument("--eps", help="signs such as '+-' or '-+-+'")
    s.add_argument("--mode", choices=("fracture", "boundary"))
    s.add_argument("--order", type=int)
    s.add_argument("--z", help="comma-separated z values from {q^-2, 1}; default: first half q^-2")

    s = cmd("magnetize", "site-1 magnetisation series")
    s.add_argument("--i", type=int, choices=(0, 1))
    s.add_argument("--order", type=int)
    s.add_argument("--check-conjecture", dest="check_conjecture", action="store_true")
    s.add_argument("--special-cases", dest="special_cases", action="store_true")
    s.add_argument("--boundary", action="store_true", help="also run the boundary-chain regression")

    s = cmd("fig10", "fracture, boundary and spontaneous magnetisation against h")
    s.add_argument("--delta", type=float)
    s.add_argument("--h-min", dest="h_min", type=float)
    s.add_argument("--h-max", dest="h_max", type=float)
    s.add_argument("--steps", type=int)

    s = cmd("qkz-check", "numerical level-2 boundary qKZ and exchange residuals")
    s.add_argument("--q", type=float)
    s.add_argument("--r", type=float)
    s.add_argument("--zeta1")
    s.add_argument("--zeta2")
    s.add_argument("--tol", type=float)

    s = cmd("ed", "finite-chain exact diagonalisation")
    s.add_argument("--sites", type=int)
    s.add_argument("--delta", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--observable", choices=("mag", "fidelity", "both"))
    s.add_argument("--sector", type=int)
    s.add_argument("--pin", type=float, help="strength of the orientation-pinning edge field")
    s.add_argument("--dump", help="write the fractured ground state (little-endian float64) here")

    s = cmd("selftest", "quick internal consistency suite")
    s.add_argument("--order", type=int)
    return p


def resolve(command: str | None, flags: dict[str, Any], config_path: str | None) -> dict[str, Any]:
    cfg = dict(COMMON)
    if command:
        cfg.update(DEFAULTS[command])
    if config_path:
        try:
            data = tomllib.loads(Path(config_path).read_text())
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise UsageError(f"cannot read config {config_path}: {exc}") from exc
        for table in ("common", command):
            for k, v in (data.get(table) or {}).items():
                k = k.replace("-", "_")
                if k not in cfg:
                    raise UsageError(f"unknown setting '{k}' in [{table}]")
                cfg[k] = v
    cfg.update(flags)
    return cfg


def _complex(x) -> complex:
    try:
        c = complex(str(x).replace(" ", ""))
    except ValueError as exc:
        raise UsageError(f"not a number: {x!r}") from exc
    return c.real if c.imag == 0 else c


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def run_verify_weights(c):
    import numpy as np

    from .model import boundary_yb_residual, crossing_residual, relation_residuals, unitarity_residual, yang_baxter_residual
    from .report import RunReport

    if not c["grid"]:
        rep = relation_residuals(c["q"], c["r"], _complex(c["zeta1"]), _complex(c["zeta2"]), c["product_tol"])
        rep.ok = bool(max(rep.results.values()) < c["threshold"])
        return rep
    tol = c["product_tol"]
    rows = []
    for q in np.linspace(-0.7, -0.15, 5):
        for zeta in np.exp(1j * np.linspace(0.2, 1.2, 5)) * np.linspace(0.8, 1.25, 5):
            z2 = 0.9 * zeta + 0.2j
            rows.append({"q": float(q), "zeta": str(complex(zeta)),
                         "yang_baxter": yang_baxter_residual(q, zeta, z2, 1.1 + 0.05j, tol),
                         "crossing": crossing_residual(q, zeta, tol),
                         "unitarity": unitarity_residual(q, zeta, tol),
                         "boundary_yang_baxter": boundary_yb_residual(q, c["r"], zeta, z2, tol)})
    worst = {k: max(row[k] for row in rows) for k in ("yang_baxter", "crossing", "unitarity", "boundary_yang_baxter")}
    return RunReport("verify-weights", {"grid": "5x5", "r": c["r"], "product_tol": tol}, worst, rows,
                     ok=max(worst.values()) < c["threshold"])


def run_norms(c):
    from .freefield import norm_bracket_closed, norm_bracket_expsum, overlap_closed, overlap_series
    from .report import RunReport, Timer

    Q = c["order"]
    if c["primed"] is not None and c["i"] is None:
        raise UsageError("--primed needs --i")
    sectors = (0, 1) if c["i"] is None else (c["i"],)
    flavours = (True, False) if c["primed"] is None else (c["primed"] in (True, "yes"),)
    res = {}
    with Timer() as t:
        if c["i"] is not None:
            for primed in flavours:
                res[f"norm_i{c['i']}_{'primed' if primed else 'unprimed'}"] = norm_bracket_expsum(c["i"], primed, Q)
        for i in sectors:
            for primed in flavours:
                a, b = norm_bracket_expsum(i, primed, Q), norm_bracket_closed(i, primed, Q)
                res[f"norm_i{i}_{'primed' if primed else 'unprimed'}_first_mismatch"] = a.first_mismatch(b)
        for i in sectors if c["primed"] is None else ():
            s = overlap_series(i, Q)
            res[f"overlap_i{i}_first_mismatch"] = s.first_mismatch(overlap_closed(i, Q))
            res[f"overlap_i{i}_even_in_r"] = s.r_parity_split()[1].is_zero()
    ok = all(v is None or v is True for k, v in res.items() if k.endswith(("mismatch", "in_r")))
    return RunReport("norms", {"order": Q, "i": c["i"], "primed": c["primed"]}, res, ok=ok, elapsed=t.elapsed)


def run_fidelity(c):
    from .freefield import fidelity_curve, h_grid, overlap_series
    from .model import q_from_delta
    from .report import RunReport

    try:
        grid = h_grid(c["h_min"], c["h_max"], c["steps"])
        qs = [q_from_delta(d) for d in c["delta"]]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    series = overlap_series(0, c["exact_order"]) if c["exact_order"] else None
    rows, res = [], {}
    for d, q in zip(c["delta"], qs):
        rep = fidelity_curve(d, grid, c["product_tol"])
        for row in rep.rows:
            row = {"delta": d, **row}
            if series is not None:
                row["fidelity_series"] = series.evaluate(q, row["r"]) ** 2
            rows.append(row)
        res[str(d)] = rep.results
    return RunReport("fidelity", {k: c[k] for k in ("delta", "h_min", "h_max", "steps", "product_tol", "exact_order")},
                     res, rows)


def run_correlate(c):
    from .correlator import extract_P
    from .report import RunReport, Timer

    eps = c["eps"]
    if len(eps) != c["N"] or set(eps) - {"+", "-"}:
        raise UsageError("--eps must be a string of N signs")
    z = c["z"].split(",") if c["z"] else None
    with Timer() as t:
        try:
            s, prov = extract_P(c["i"], c["N"], eps, c["mode"], z, c["order"], with_provenance=True)
        except (ValueError, NotImplementedError) as exc:
            raise UsageError(str(exc)) from exc
    return RunReport("correlate", {k: c[k] for k in ("i", "N", "eps", "mode", "order", "z")},
                     {"series": s, "provenance": prov}, elapsed=t.elapsed)


def run_magnetize(c):
    from .correlator import build_integrand
    from .magnet import boundary_mag_regression, magnetisation_report
    from .report import RunReport, Timer

    contour = {eps: build_integrand(c["i"], 2, (1, -1) if eps == "+-" else (-1, 1), "fracture")[1].describe()
               for eps in ("+-", "-+")}
    with Timer() as t:
        rep = magnetisation_report(c["i"], c["order"], c["check_conjecture"], c["special_cases"])
        res = {"magnetisation": rep.to_json(), "contour": contour}
        ok = rep.ok if c["check_conjecture"] or c["special_cases"] else True
        if c["boundary"]:
            b = boundary_mag_regression(c["order"])
            res["boundary"] = b.to_json()
            ok = ok and b.ok
    return RunReport("magnetize", {k: c[k] for k in ("i", "order", "check_conjecture", "special_cases", "boundary")},
                     res, ok=ok, elapsed=t.elapsed)


def run_fig10(c):
    from .freefield import h_grid
    from .magnet import fig10_data

    rep = fig10_data(c["delta"], h_grid(c["h_min"], c["h_max"], c["steps"]))
    r = rep.results
    rep.results["h0_meets_spontaneous"] = abs(r["fracture_at_h0"] - r["spontaneous"]) < 1e-10
    rep.results["h_inv_meets_boundary"] = abs(r["fracture_at_h_inv"] - r["boundary_at_h_inv"]) < 1e-10
    rep.ok = rep.results["h0_meets_spontaneous"] and rep.results["h_inv_meets_boundary"]
    rep.parameters.update({k: c[k] for k in ("h_min", "h_max", "steps")})
    return rep


def run_qkz(c):
    from .numkernel import qkz_residual

    rep = qkz_residual(_complex(c["zeta1"]), _complex(c["zeta2"]), c["q"], c["r"], c["tol"])
    rep.ok = max(rep.results[k] for k in ("qkz_j1", "qkz_j2", "exchange")) < c["threshold"]
    return rep


def run_ed(c):
    from .edlab import ed_report

    if c["sites"] < 2 or c["sites"] % 2:
        raise UsageError("--sites must be an even number >= 2")
    return ed_report(c["sites"], c["delta"], c["h"], c["observable"], c["sector"], c["pin"], c["dump"])


def run_selftest(c):
    from collections import Counter

    from .correlator import (build_integrand, cf4_specialisation, circle_integral,
                             circle_integral_expsum, residue_identity_check, specialise)
    from .exactalg import Monomial, TruncatedQSeries
    from .freefield import norm_bracket_closed, norm_bracket_expsum
    from .qprod import product_series, theta
    from .report import RunReport, Timer

    Q = c["order"]
    checks = {}
    with Timer() as t:
        # Jacobi triple product: Theta_{q^2}(-q) = sum_n q^{n^2}
        lhs = theta(Monomial(-1, 1), 2, Q)
        squares = Counter(n * n for n in range(-Q, Q + 1) if n * n <= Q)
        rhs = TruncatedQSeries.from_terms({(k, 0): c for k, c in squares.items()}, Q)
        checks["triple_product"] = lhs.first_mismatch(rhs) is None
        # Euler: (-q;q) = 1/(q;q^2)
        a = product_series([(Monomial(-1, 1), (1,), 1)], Q)
        b = product_series([(Monomial(1, 1), (2,), -1)], Q)
        checks["euler_odd_parts"] = a.first_mismatch(b) is None
        for i in (0, 1):
            for primed in (True, False):
                checks[f"norm_i{i}_{'p' if primed else 'u'}"] = (
                    norm_bracket_expsum(i, primed, Q).first_mismatch(norm_bracket_closed(i, primed, Q)) is None)
        for i in (0, 1):
            checks[f"identity_residue_i{i}"] = residue_identity_check(i, Q).ok
        lo = min(Q, 10)
        for i in (0, 1):
            for eps in ("-+", "+-"):
                x = circle_integral_expsum(i, 2, eps, True, (1,), lo, resum=False)
                y = circle_integral_expsum(i, 2, eps, True, (1,), lo, resum=True)
                fl, cs = build_integrand(i, 2, tuple(1 if s == "+" else -1 for s in eps), "fracture")
                z = circle_integral(specialise(fl, cs, cf4_specialisation(2)), (1,), lo)
                checks[f"expsum_vs_product_i{i}_{eps}"] = x.first_mismatch(z) is None and y.first_mismatch(z) is None
    return RunReport("selftest", {"order": Q}, checks, ok=all(checks.values()), elapsed=t.elapsed)


COMMANDS: dict[str, Callable] = {
    "verify-weights": run_verify_weights,
    "norms": run_norms,
    "fidelity": run_fidelity,
    "correlate": run_correlate,
    "magnetize": run_magnetize,
    "fig10": run_fig10,
    "qkz-check": run_qkz,
    "ed": run_ed,
    "selftest": run_selftest,
}


def _emit(rep, cfg) -> None:
    if _THREADS:
        rep.parameters.setdefault("threads", int(_THREADS) if _THREADS.isdigit() else _THREADS)
    text = rep.to_json(timing=cfg["timing"])
    if cfg["out"]:
        out = Path(cfg["out"])
        out.write_text(text + "\n")
        if rep.rows:
            out.with_suffix(".csv").write_text(rep.to_csv())
    elif cfg["format"] == "csv" and rep.rows:
        sys.stdout.write(rep.to_csv())
    else:
        sys.stdout.write(text + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "print_config")}
    try:
        cfg = resolve(args.command, flags, args.config)
        if args.print_config:
            if args.command:
                shown = {args.command: cfg}
            else:
                shown = {"common": COMMON, **DEFAULTS}
            sys.stdout.write(json.dumps(shown, indent=2, sort_keys=True, default=str) + "\n")
            return 0
        if not args.command:
            parser.print_usage(sys.stderr)
            return 2
        rep = COMMANDS[args.command](cfg)
    except (UsageError, ValueError) as exc:
        print(f"fxxz: error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        # pole collisions are bad inputs; anything else is a failed computation
        print(f"fxxz: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2 if type(exc).__name__ == "PoleCollision" else 1
    _emit(rep, cfg)
    return 0 if rep.ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
