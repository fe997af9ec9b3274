"""Command-line interface.

Maps are given with a small grammar, one ``--map`` flag per factor in
composition order: ``"y^2-6;a=0.3"``.  The polynomial part is in the
variable y with decimal, scientific or complex (``re+imi``) coefficients
and must be monic; the ``a=`` part is the Jacobian factor of that factor.

Subcommands write a canonical ``report.json`` (and a PPM image where a
raster is produced) into the output directory.  Exit codes: 0 on success,
2 when the verdict is Inconclusive, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .core_map import HenonMap, PointC2, make_henon
from .errors import HenonLabError
from .manifold import chart_residual, normalize_chart, solve_chart
from .periodic import SaddleOrbit, classify, find_periodic, find_saddles
from .potential import green
from .rays_solenoid import landing_stats, solenoid_coords
from .report import (canonical_json, chart_dict, component_dict, ray_dict,
                     saddle_dict, solenoid_dict, verdict_dict, write_ppm,
                     write_report)
from .slice_topology import (connectivity_verdict, label_components,
                             rasterize_slice, worker_count)


# ---------------------------------------------------------------------------
# map grammar
# ---------------------------------------------------------------------------


def _parse_scalar(text: str) -> complex:
    s = text.strip().replace(" ", "")
    sign = 1.0
    if s[:1] in "+-":
        sign = -1.0 if s[0] == "-" else 1.0
        s = s[1:]
    try:
        return sign * complex(s.replace("i", "j"))
    except ValueError:
        raise ValueError(f"bad numeric literal {text!r}") from None


def _split_terms(s: str) -> list[str]:
    terms, cur, depth = [], "", 0
    for idx, ch in enumerate(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch in "+-" and depth == 0 and idx > 0 and s[idx - 1] not in "eE(+-":
            terms.append(cur)
            cur = ""
        cur += ch
    terms.append(cur)
    return [t for t in terms if t not in ("", "+")]


def _parse_term(term: str) -> tuple[int, complex]:
    """One monomial -> (power of y, coefficient)."""
    t = term.strip()
    if "y" not in t:
        return 0, _parse_scalar(t)
    head, _, tail = t.partition("y")
    power = 1
    if tail:
        if not tail.startswith("^"):
            raise ValueError(f"bad monomial {term!r}")
        power = int(tail[1:])
    head = head.rstrip("*")
    if head in ("", "+"):
        coeff = 1.0 + 0j
    elif head == "-":
        coeff = -1.0 + 0j
    else:
        coeff = _parse_scalar(head)
    return power, coeff


def parse_factor(text: str) -> tuple[tuple[complex, ...], complex]:
    """Parse ``"poly;a=value"`` into (lower coefficients, a)."""
    if ";" not in text:
        raise ValueError(f"factor {text!r} is missing ';a=...'")
    poly_part, _, a_part = text.partition(";")
    a_part = a_part.strip()
    if not a_part.startswith("a="):
        raise ValueError(f"factor {text!r} is missing 'a='")
    a = _parse_scalar(a_part[2:])
    coeffs: dict[int, complex] = {}
    for term in _split_terms(poly_part.replace(" ", "")):
        power, c = _parse_term(term)
        coeffs[power] = coeffs.get(power, 0j) + c
    degree = max(coeffs)
    if degree < 2:
        raise ValueError(f"factor {text!r} must have degree >= 2")
    if abs(coeffs[degree] - 1.0) > 0:
        raise ValueError(f"factor {text!r} is not monic")
    lower = tuple(coeffs.get(k, 0j) for k in range(degree))
    return lower, a


def parse_map(factors: list[str]) -> HenonMap:
    return make_henon([parse_factor(t) for t in factors])


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _build_chart(hmap, period, n_series, box, direction="forward"):
    saddles = find_saddles(hmap, period, box=box)
    if not saddles:
        raise HenonLabError(f"no saddle orbit of period {period} found in box {box}")
    chart = solve_chart(hmap, saddles[0], n_series=n_series, direction=direction)
    return saddles[0], normalize_chart(chart)


def _config_echo(args) -> dict:
    skip = {"func", "out"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip or v is None:
            continue
        out[k] = v if isinstance(v, (int, float, str, bool)) else list(v)
    return out


def _emit(args, document: dict, name: str = "report.json") -> str:
    os.makedirs(args.out, exist_ok=True)
    document["version"] = __version__
    document["config"] = _config_echo(args)
    path = os.path.join(args.out, name)
    write_report(document, path)
    return path


def _write_timing(args, seconds: float) -> None:
    # wall time is run-dependent, so it stays out of the canonical report
    path = os.path.join(args.out, "timing.json")
    with open(path, "w") as fh:
        json.dump({"seconds": seconds}, fh)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_fixed_points(args) -> int:
    hmap = parse_map(args.map)
    orbits = find_periodic(hmap, args.period, box=args.box,
                           seed_grid=args.seed_grid)
    rows = []
    for pts, period in orbits:
        typed = classify(hmap, pts)
        kind = type(typed).__name__
        row = {"kind": kind, "period": period,
               "points": [{"x": complex(p.x), "y": complex(p.y)} for p in pts]}
        if isinstance(typed, SaddleOrbit):
            row.update(lam_u=complex(typed.lam_u), lam_s=complex(typed.lam_s),
                       lyapunov=float(typed.lyapunov))
        else:
            row["eigenvalues"] = [complex(v) for v in typed.eigenvalues]
        rows.append(row)
        p = pts[0]
        print(f"{kind:14s} period {period}  "
              f"({p.x.real:+.12f}{p.x.imag:+.3e}i, {p.y.real:+.12f}{p.y.imag:+.3e}i)")
    _emit(args, {"command": "fixed-points", "orbits": rows})
    return 0


def cmd_chart(args) -> int:
    hmap = parse_map(args.map)
    saddle, chart = _build_chart(hmap, args.period, args.n_series, args.box)
    res = chart_residual(chart)
    print(f"saddle period {args.period}, multiplier {chart.multiplier:.12g}")
    print(f"rho = {chart.rho_val:.6g}, alpha = {chart.alpha:.12g}, residual = {res:.3e}")
    _emit(args, {"command": "chart", "saddle": saddle_dict(saddle),
                 "chart": chart_dict(chart, res)})
    return 0


def cmd_render_slice(args) -> int:
    hmap = parse_map(args.map)
    _, chart = _build_chart(hmap, args.period, args.n_series, args.box)
    raster = rasterize_slice(chart, args.r, args.m, tol=args.tol,
                             n_max=args.n_max, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    ppm = os.path.join(args.out, "slice.ppm")
    write_ppm(raster, ppm)
    counts = {int(k): int(np.sum(raster.cls == k)) for k in (0, 1, 2)}
    print(f"wrote {ppm}: bounded {counts[0]}, escaping {counts[1]}, "
          f"undetermined {counts[2]}")
    _emit(args, {"command": "render-slice", "r": args.r, "m": args.m,
                 "cells": {"kplus": counts[0], "uplus": counts[1],
                           "undetermined": counts[2]}})
    return 0


def cmd_analyze(args) -> int:
    hmap = parse_map(args.map)
    _, chart = _build_chart(hmap, args.period, args.n_series, args.box)
    raster = rasterize_slice(chart, args.r, args.m, tol=args.tol,
                             n_max=args.n_max, threads=args.threads)
    rep = label_components(raster)
    os.makedirs(args.out, exist_ok=True)
    write_ppm(raster, os.path.join(args.out, "slice.ppm"))
    print(f"r = {rep.r}: {rep.c_count} ends meeting the ring, "
          f"{rep.g_count} growth ends, {len(rep.witnesses)} witness candidates")
    _emit(args, {"command": "analyze", "components": component_dict(rep)})
    return 0


def cmd_verdict(args) -> int:
    hmap = parse_map(args.map)
    t0 = time.time()
    rasters: list = []
    verdict = connectivity_verdict(
        hmap, period=args.period, m=args.m, n_series=args.n_series,
        tol=args.tol, n_max=args.n_max, threads=args.threads,
        seed_box=args.box, collect_rasters=rasters)
    os.makedirs(args.out, exist_ok=True)
    if rasters:
        write_ppm(rasters[-1], os.path.join(args.out, "slice.ppm"))
    print(f"{verdict.status}: {verdict.reason}")
    if verdict.j_connected is not None:
        word = "connected" if verdict.j_connected else "disconnected"
        print(f"J {word} (analysis of the {verdict.analyzed})")
    _emit(args, {"command": "verdict", "verdict": verdict_dict(verdict)})
    _write_timing(args, time.time() - t0)
    return verdict.exit_code


def cmd_rays(args) -> int:
    hmap = parse_map(args.map)
    _, chart = _build_chart(hmap, args.period, args.n_series, args.box)
    rep = landing_stats(chart, args.n_rays, args.g_stop, args.land_tol,
                        G_start=args.g_start)
    print(f"{args.n_rays} rays, landed fraction {rep.fraction_landed:.4f}")
    _emit(args, {"command": "rays",
                 "fraction_landed": rep.fraction_landed,
                 "rays": [ray_dict(t) for t in rep.traces]})
    return 0


def cmd_solenoid(args) -> int:
    hmap = parse_map(args.map)
    q = PointC2(_parse_scalar(args.x), _parse_scalar(args.y))
    window = solenoid_coords(hmap, q, j_min=args.j_min, j_max=args.j_max)
    print(f"log|z_0| = {window.entry(0).real:.12g}, "
          f"max residual {max(window.residuals):.3e}")
    _emit(args, {"command": "solenoid", "window": solenoid_dict(window)})
    return 0


def cmd_selfcheck(args) -> int:
    failures = []

    def check(name, cond):
        print(("ok   " if cond else "FAIL ") + name)
        if not cond:
            failures.append(name)

    for lower in ((0j, 0j), (-6 + 0j, 0j)):
        hmap = make_henon([(lower, 0.3)])
        rng = np.random.default_rng(3)
        worst = 0.0
        n = 0
        while n < 50:
            x, y = rng.uniform(-4, 4, 2)
            g = green(hmap, PointC2(x, y))
            if not (np.isfinite(g.value) and g.value > 1e-6):
                continue
            from .core_map import apply_map
            g2 = green(hmap, apply_map(hmap, PointC2(x, y)))
            worst = max(worst, abs(g2.value - 2.0 * g.value) / (1.0 + g.value))
            n += 1
        check(f"Green functional equation, p lower={lower}", worst < 1e-9)

        prods = [complex(s.lam_u) * complex(s.lam_s)
                 for s in find_saddles(hmap, 1, box=5.0)]
        check(f"saddle eigenvalue product = Jacobian, p lower={lower}",
              all(abs(p - hmap.jac) < 1e-9 for p in prods))

        q = PointC2(0.1, 3.5)
        window = solenoid_coords(hmap, q, -4, 4)
        check(f"solenoid residuals, p lower={lower}",
              max(window.residuals) < 1e-10)

    from .core_map import verify_radius
    check("escape radius verifier rejects R=3 for y^2-6",
          not verify_radius(make_henon([((-6 + 0j, 0j), 0.3)]), 3.0))
    check("escape radius verifier accepts R=4 for y^2-6",
          verify_radius(make_henon([((-6 + 0j, 0j), 0.3)]), 4.0))

    print(f"{'all checks passed' if not failures else f'{len(failures)} failures'}")
    return 0 if not failures else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _add_common(p, chart_opts=True):
    p.add_argument("--map", action="append", required=True,
                   metavar="POLY;a=VAL", help="one factor; repeat to compose")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker count (HENON_LAB_THREADS overrides the default)")
    if chart_opts:
        p.add_argument("--period", type=int, default=1)
        p.add_argument("--box", type=float, default=5.0,
                       help="half-width of the saddle search box")
        p.add_argument("--n-series", type=int, default=60)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="henon-lab",
                 description="connectivity analysis of complex Henon maps")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixed-points", parents=[], help="locate periodic orbits")
    _add_common(p)
    p.add_argument("--seed-grid", type=int, default=24)
    p.set_defaults(func=cmd_fixed_points)

    p = sub.add_parser("chart", help="unstable-manifold chart diagnostics")
    _add_common(p)
    p.set_defaults(func=cmd_chart)

    for name, func in (("render-slice", cmd_render_slice),
                       ("analyze", cmd_analyze)):
        p = sub.add_parser(name, help=f"{name} of the leaf potential")
        _add_common(p)
        p.add_argument("--r", type=float, default=4.0)
        p.add_argument("--m", type=int, default=512)
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--n-max", type=int, default=120)
        p.set_defaults(func=func)

    p = sub.add_parser("verdict", help="decide connectivity of J")
    _add_common(p)
    p.add_argument("--m", type=int, default=1024)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--n-max", type=int, default=120)
    p.set_defaults(func=cmd_verdict)

    p = sub.add_parser("rays", help="external-ray landing statistics")
    _add_common(p)
    p.add_argument("--n-rays", type=int, default=256)
    p.add_argument("--g-start", type=float, default=1.0)
    p.add_argument("--g-stop", type=float, default=1e-6)
    p.add_argument("--land-tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_rays)

    p = sub.add_parser("solenoid", help="truncated solenoid coordinates")
    _add_common(p, chart_opts=False)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--j-min", type=int, default=-6)
    p.add_argument("--j-max", type=int, default=6)
    p.set_defaults(func=cmd_solenoid)

    p = sub.add_parser("selfcheck", help="quick internal consistency checks")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_selfcheck)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (HenonLabError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
