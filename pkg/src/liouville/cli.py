"""Command-line entry point.

Subcommands: periods, verify, geodesic, conjugate, cut-locus.  Every
output file starts with a reproducibility header (spec hash, seed,
tolerances, version); fixed seeds give byte-identical outputs regardless
of the worker count.  Exit codes: 0 success, 1 contract violation,
2 input error, 64 usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .model import Manifold, ModelError
from .geodesic import (
    GeodesicError,
    IntegrationOptions,
    cut_time,
    integrate,
    unit_covector,
    CovectorState,
)

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_INPUT = 2
EXIT_USAGE = 64


class InputError(Exception):
    pass


def _resolve_spec(path: str) -> str:
    if os.path.exists(path):
        return path
    base = os.environ.get("LIOUVILLE_SPEC_DIR")
    if base:
        cand = os.path.join(base, path)
        if os.path.exists(cand):
            return cand
    raise InputError(f"spec file not found: {path}")


def _load_manifold(path: str) -> Manifold:
    try:
        return Manifold.from_file(_resolve_spec(path))
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(str(exc)) from exc


def _header_lines(man: Manifold, seed, opts: IntegrationOptions):
    return [
        f"# spec_hash={man.content_hash()}",
        f"# seed={seed}",
        f"# rtol={opts.rtol} atol={opts.atol} degeneracy_tol={man.tol}",
        f"# version={__version__}",
    ]


def _parse_eta(man: Manifold, text: str) -> CovectorState:
    kind = "v"
    body = text
    if ":" in text:
        kind, body = text.split(":", 1)
    vals = np.array([float(v) for v in body.split(",")])
    if len(vals) != man.n:
        raise InputError(f"eta needs {man.n} components, got {len(vals)}")
    x0 = getattr(man, "_cli_base_point")
    if kind == "v":
        return unit_covector(man, x0, vals)
    if kind == "xi":
        return CovectorState(man, x0, vals).unit()
    raise InputError(f"unknown eta form {kind!r} (use v: or xi:)")


def _parse_point(man: Manifold, text: str):
    vals = np.array([float(v) for v in text.split(",")])
    if len(vals) != man.n:
        raise InputError(f"point needs {man.n} coordinates, got {len(vals)}")
    return vals


# ---------------------------------------------------------------------------


def cmd_periods(args) -> int:
    man = _load_manifold(args.spec)
    opts = IntegrationOptions()
    rows = []
    for i in range(1, man.n + 1):
        br = man.periods.branches[i - 1]
        rows.append({
            "i": i,
            "alpha": br.alpha,
            "f_at_0": float(man.periods.value(i, 0.0)),
            "f_at_quarter": float(man.periods.value(i, br.alpha / 4.0)),
            "band": [br.lo, br.hi],
        })
    if args.json:
        out = {
            "header": {"spec_hash": man.content_hash(), "seed": args.seed,
                       "version": __version__,
                       "tolerances": {"degeneracy": man.tol}},
            "periods": rows,
        }
        print(json.dumps(out, indent=1, sort_keys=True))
    else:
        for line in _header_lines(man, args.seed, opts):
            print(line)
        print(f"{'i':>2} {'alpha_i':>20} {'f_i(0)':>12} {'f_i(alpha/4)':>14}  band")
        for r in rows:
            print(f"{r['i']:>2} {r['alpha']:>20.15g} {r['f_at_0']:>12.8g} "
                  f"{r['f_at_quarter']:>14.8g}  [{r['band'][0]:g}, {r['band'][1]:g}]")
    return EXIT_OK


def _verify_identities(man, draws, seed):
    from .quadrature import flat_identity_terms, random_admissible_roots
    rng = np.random.default_rng(seed)
    spec = man.spectrum
    worst = 0.0
    for _ in range(draws):
        b = random_admissible_roots(spec, rng)
        deg = max(spec.n - 2, 0)
        G = rng.standard_normal(deg + 1)
        terms = flat_identity_terms(G, spec.a, b)
        scale = float(np.max(np.abs(terms))) or 1.0
        worst = max(worst, abs(float(np.sum(terms))) / scale)
    passed = worst < 1e-8
    return {"suite": "identities", "draws": draws, "worst_relative_residual": worst,
            "tolerance": 1e-8, "passed": passed}


def _verify_inequalities(man, draws, seed):
    from itertools import combinations
    from .quadrature import (cond2_certify, prop_negativity,
                             prop_derivative_positivity, prop_derivative_fd,
                             random_admissible_roots)
    spec = man.spectrum
    cond = cond2_certify(man.generator, spec)
    if not cond["passed"]:
        return {"suite": "inequalities", "premise": "failed (derivative alternation)",
                "cond2": cond, "passed": True, "skipped": True}
    rng = np.random.default_rng(seed)
    n = spec.n
    subsets = [()]
    for size in range(1, max(n - 1, 1)):
        subsets += list(combinations(range(1, n), size))
    worst_neg = -np.inf
    worst_pos = np.inf
    worst_fd = 0.0
    for _ in range(draws):
        b = random_admissible_roots(spec, rng)
        for I in subsets:
            worst_neg = max(worst_neg, prop_negativity(man.generator, spec.a, b, I))
        for l in range(1, n):
            v = prop_derivative_positivity(man.generator, spec.a, b, l)
            worst_pos = min(worst_pos, v)
            fd = prop_derivative_fd(man.generator, spec.a, b, l)
            worst_fd = max(worst_fd, abs(v - fd) / max(abs(v), 1e-300))
    passed = worst_neg < 0.0 and worst_pos > 0.0 and worst_fd < 1e-4
    return {"suite": "inequalities", "draws": draws, "cond2": cond,
            "max_signed_sum": worst_neg, "min_derivative": worst_pos,
            "max_fd_mismatch": worst_fd, "passed": passed}


def cmd_verify(args) -> int:
    man = _load_manifold(args.spec)
    suites = args.suite.split(",")
    results = []
    for s in suites:
        if s == "identities":
            results.append(_verify_identities(man, args.draws, args.seed))
        elif s == "inequalities":
            results.append(_verify_inequalities(man, args.draws, args.seed))
        else:
            raise InputError(f"unknown suite {s!r}")
    out = {
        "header": {"spec_hash": man.content_hash(), "seed": args.seed,
                   "version": __version__, "tolerances": {"degeneracy": man.tol}},
        "results": results,
    }
    for line in _header_lines(man, args.seed, IntegrationOptions()):
        print(line)
    all_pass = True
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        if r.get("skipped"):
            status = "SKIP (premise failed: derivative alternation)"
        print(f"suite={r['suite']:<13} draws={r.get('draws', 0):<6} {status}")
        for key in ("worst_relative_residual", "max_signed_sum", "min_derivative",
                    "max_fd_mismatch"):
            if key in r:
                print(f"    {key} = {r[key]:.6e}")
        all_pass = all_pass and r["passed"]
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as f:
            json.dump(out, f, indent=1, sort_keys=True)
            f.write("\n")
    return EXIT_OK if all_pass else EXIT_CONTRACT


def cmd_geodesic(args) -> int:
    man = _load_manifold(args.spec)
    man._cli_base_point = (_parse_point(man, args.point) if args.point
                           else 0.125 * man.alpha)
    eta = _parse_eta(man, args.eta)
    opts = IntegrationOptions(rtol=args.rtol, atol=args.atol)
    if args.T > 0:
        trace = integrate(eta, args.T, options=opts)
        ts = np.linspace(0.0, args.T, max(args.samples, 2))
    else:
        trace = None
        ts = np.array([0.0])
    n = man.n
    cols = (["t"] + [f"x{i}" for i in range(1, n + 1)]
            + [f"xi{i}" for i in range(1, n + 1)]
            + [f"lambda{i}" for i in range(1, n + 1)]
            + [f"sigma{i}" for i in range(1, n + 1)]
            + [f"b{i}" for i in range(1, n)])
    lines = _header_lines(man, args.seed, opts)
    lines.append(",".join(cols))
    if trace is None:
        from .geodesic import b_from_covector
        b = b_from_covector(eta)
        row = np.concatenate([[0.0], eta.x, eta.xi, eta.lam,
                              np.zeros(n), b.roots])
        lines.append(",".join(f"{v:.17g}" for v in row))
    else:
        for row in trace.sample(ts):
            lines.append(",".join(f"{v:.17g}" for v in row))
        for t, i, v, kind in trace.event_log():
            lines.append(f"# event t={t:.12g} coord={i} value={v:.12g} kind={kind}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_conjugate(args) -> int:
    from .jacobi import conjugate_points
    man = _load_manifold(args.spec)
    man._cli_base_point = (_parse_point(man, args.point) if args.point
                           else 0.125 * man.alpha)
    eta = _parse_eta(man, args.eta)
    opts = IntegrationOptions(rtol=args.rtol, atol=args.atol)
    events, _ = conjugate_points(eta, args.T, options=opts)
    lines = _header_lines(man, args.seed, opts)
    lines.append("t,multiplicity,family,flags")
    for e in events:
        fam = e.family if e.family is not None else ""
        lines.append(f"{e.t:.12g},{e.multiplicity},{fam},{'|'.join(e.flags)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_cutlocus(args) -> int:
    from . import cutlocus as cl
    man = _load_manifold(args.spec)
    x0 = _parse_point(man, args.point)
    try:
        rad, ang = args.res.split("x")
        resolution = (int(rad), int(ang))
    except ValueError as exc:
        raise InputError(f"bad resolution {args.res!r}, expected RxA") from exc
    opts = IntegrationOptions(rtol=args.rtol, atol=args.atol)
    tag = man.point(cl.normalize_base_point(man, x0)).tag
    degenerate = man.n >= 3 and tag.in_corner[man.n - 1]
    if degenerate:
        mesh = cl.build_cut_locus_degenerate(man, x0, resolution=resolution,
                                             workers=args.workers, options=opts,
                                             seed=args.seed)
    else:
        mesh = cl.build_cut_locus(man, x0, resolution=resolution,
                                  workers=args.workers, options=opts,
                                  seed=args.seed)
    cl.pair_coincidence_audit(mesh)
    cl.containment_audit(mesh)
    audits = [a for a in (args.audit.split(",") if args.audit else []) if a]
    if "conjugacy" in audits and not degenerate:
        cl.boundary_conjugacy_audit(mesh, interior_stride=args.interior_stride,
                                    options=opts, workers=args.workers)
    if "minimality" in audits:
        ok = [v for v in mesh.vertices if not v.get("failed") and not v["boundary"]]
        pick = ok[:: max(len(ok) // 10, 1)][:10]
        res = cl.minimality_audit(
            man, x0, [np.asarray(v["u"], float) for v in pick],
            [v["t0"] for v in pick], shoot_resolution=args.shoot_resolution,
            workers=args.workers)
        mesh.audits["minimality"] = res
    failures = [v["idx"] for v in mesh.vertices if v.get("failed")]
    for path in args.out.split(","):
        path = path.strip()
        if path.endswith(".json"):
            cl.export_mesh_json(mesh, path)
        elif path.endswith(".ply"):
            cl.export_mesh_ply(mesh, path)
        else:
            raise InputError(f"unknown mesh format for {path!r} (.json or .ply)")
    print(f"# spec_hash={man.content_hash()} seed={args.seed} version={__version__}")
    print(f"vertices={len(mesh.vertices)} failures={len(failures)}")
    for name, audit in sorted(mesh.audits.items()):
        if name == "conjugacy":
            audit = {k: v for k, v in audit.items() if k != "rows"}
        print(f"audit {name}: {json.dumps(audit, sort_keys=True, default=str)}")
    bad = (mesh.audits.get("minimality", {}).get("verdicts", []) or [])
    if any(v == "FAIL" for v in bad):
        return EXIT_CONTRACT
    return EXIT_OK


# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liouville",
                                description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("--spec", required=True, help="manifold spec JSON")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--rtol", type=float, default=1e-10)
        sp.add_argument("--atol", type=float, default=1e-12)

    sp = sub.add_parser("periods", help="circle lengths and coordinate checks")
    common(sp)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_periods)

    sp = sub.add_parser("verify", help="identity/inequality verification suites")
    common(sp)
    sp.add_argument("--suite", default="identities",
                    help="comma list: identities,inequalities")
    sp.add_argument("--draws", type=int, default=100)
    sp.add_argument("--json-out", default=None)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("geodesic", help="integrate one geodesic to CSV")
    common(sp)
    sp.add_argument("--eta", required=True,
                    help="covector: 'v:c1,..,cn' sphere coords or 'xi:...'")
    sp.add_argument("--point", default=None, help="base angles x1,..,xn")
    sp.add_argument("--T", type=float, default=10.0)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_geodesic)

    sp = sub.add_parser("conjugate", help="conjugate events along a geodesic")
    common(sp)
    sp.add_argument("--eta", required=True)
    sp.add_argument("--point", default=None)
    sp.add_argument("--T", type=float, default=10.0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_conjugate)

    sp = sub.add_parser("cut-locus", help="build and audit a cut locus mesh")
    common(sp)
    sp.add_argument("--point", required=True)
    sp.add_argument("--res", default="16x16")
    sp.add_argument("--audit", default="")
    sp.add_argument("--out", required=True, help="comma list of .json/.ply paths")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--interior-stride", type=int, default=1)
    sp.add_argument("--shoot-resolution", type=int, default=2000)
    sp.set_defaults(func=cmd_cutlocus)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            return EXIT_USAGE
        return 0
    if not getattr(args, "command", None):
        parser.print_usage()
        return EXIT_USAGE
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GeodesicError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
