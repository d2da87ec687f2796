"""Command-line front end: config loading, dispatch, machine-readable output.

Commands: validate, band, gaps, geometry, traj-bound, verify-forward,
verify-inverse, selftest.  All outputs are deterministic given
(config, seed); floats are serialized with 17 significant digits.

Exit codes: 0 ok, 1 validation failure, 2 regime/budget error,
3 assertion failure in a verify command.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import checks
from .errors import (CombinatorialBudgetError, EpsilonTooLargeError,
                     FaithfulMaterializationError, GeometryError,
                     LadderRangeError, QPSpecError, RegimeError,
                     SiteBudgetError)
from .inverse import gap_table, verify_forward, verify_inverse
from .lattice import ball, l1_norm
from .model import (EpsilonThresholds, Frequency, Potential, Problem,
                    build_ladder, diophantine_margin)
from .mssets import GeometryBuilder
from .resonance import reset
from .spectral import band
from .trajectories import WeightProfile, closed_bound, sum_enumerate

FLOAT_FMT = "%.17g"

_BUDGET_ERRORS = (SiteBudgetError, CombinatorialBudgetError, RegimeError,
                  FaithfulMaterializationError, LadderRangeError,
                  GeometryError, EpsilonTooLargeError)


def fmt(x) -> str:
    return FLOAT_FMT % float(x)


def load_config(path):
    with open(path) as fh:
        cfg = json.load(fh)
    if "nu" in cfg and cfg["nu"] != len(cfg["omega"]):
        raise ValueError(f"nu={cfg['nu']} disagrees with omega of length {len(cfg['omega'])}")
    freq = Frequency(tuple(cfg["omega"]), cfg["a0"], cfg["b0"],
                     window_n=cfg.get("diophantine_window", 50))
    table = {}
    for item in cfg.get("coefficients", []):
        table[tuple(item["n"])] = complex(item.get("re", 0.0), item.get("im", 0.0))
    pot = Potential.from_harmonics(table, cfg["epsilon"], cfg["kappa0"])
    lad_cfg = cfg.get("ladder")
    ladder = None
    if lad_cfg:
        ladder = build_ladder(
            lad_cfg["delta0"], lad_cfg["beta1"], lad_cfg.get("u_max", 2),
            regime=lad_cfg.get("regime", "desk"), a0=cfg["a0"], kappa0=cfg["kappa0"],
            site_budget=cfg.get("site_budget", 20_000), nu=len(cfg["omega"]))
    problem = Problem(freq, pot, ladder, site_budget=cfg.get("site_budget", 20_000))
    return cfg, problem


def _error_json(kind, exc):
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")


def cmd_validate(cfg, problem, out_dir, args):
    report = problem.validate()
    margin, witness = diophantine_margin(problem.frequency,
                                         cfg.get("diophantine_window", 50))
    cert = {
        "potential_violations": report,
        "diophantine_margin": float(margin),
        "diophantine_witness": list(witness),
        "certificate_ok": margin >= problem.frequency.a0 and not report,
    }
    print(json.dumps(cert, indent=2, sort_keys=True))
    if problem.ladder is not None and problem.ladder.regime == "desk":
        thr = EpsilonThresholds.from_ladder(problem.ladder, problem.potential.kappa0,
                                            problem.nu)
        print(f"log eps0 threshold: {fmt(thr.log_eps0)}")
    return 0 if cert["certificate_ok"] else 1


def _k_grid(cfg):
    grid = cfg.get("k_grid", {"min": 0.05, "max": 0.45, "points": 81})
    return np.linspace(grid["min"], grid["max"], grid["points"])


def cmd_band(cfg, problem, out_dir, args):
    radius = cfg.get("box_radius", 8)
    host = ball(radius, problem.nu, budget=problem.site_budget)
    grid = _k_grid(cfg)
    points = band(problem, grid, lambda k: host, jobs=args.jobs)
    path = out_dir / "band.csv"
    with open(path, "w") as fh:
        fh.write("# k: quasi-momentum; E: band energy (raw units); regime: branch tag\n")
        fh.write("k,E,regime\n")
        for p in points:
            fh.write(f"{fmt(p.k)},{fmt(p.E)},{p.regime}\n")
    errors = [p for p in points if p.regime == "error"]
    print(f"wrote {path} ({len(points)} points, {len(errors)} failures)")
    return 0


def _m_window(cfg, problem):
    radius = cfg.get("gap_m_radius", 3)
    return [m for m in ball(radius, problem.nu, budget=None) if any(m)]


def cmd_gaps(cfg, problem, out_dir, args):
    ms = _m_window(cfg, problem)
    records, failures = gap_table(problem, ms, cfg.get("box_radius", 8),
                                  jobs=args.jobs)
    rows = verify_forward(records, problem.potential)
    path = out_dir / "gaps.csv"
    with open(path, "w") as fh:
        fh.write("# m: resonance label; k_m: resonance point; E_minus/E_plus: gap edges"
                 " (raw units); width: E_plus - E_minus;"
                 " theoremB_bound: 2 eps exp(-kappa0 |m|/2); pass: width <= bound\n")
        fh.write("m,k_m,E_minus,E_plus,width,theoremB_bound,pass\n")
        for row in sorted(rows, key=lambda r: (l1_norm(r.m), r.m)):
            rec = records[row.m]
            fh.write(",".join([
                '"' + " ".join(map(str, row.m)) + '"', fmt(rec.k_point),
                fmt(rec.E_minus), fmt(rec.E_plus), fmt(row.width),
                fmt(row.bound), str(row.passed).lower()]) + "\n")
    for m, msg in sorted(failures.items()):
        print(f"gap at {m} failed: {msg}")
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_geometry(cfg, problem, out_dir, args):
    ladder = problem.ladder
    gl = cfg.get("geometry_ladder")
    if gl:
        # synthetic ladder: explicit log sequences for desk geometry
        from .model import ScaleLadder
        ladder = ScaleLadder.from_sequences(gl.get("beta1", 0.5),
                                            gl["log_R"], gl["log_delta"])
    if ladder is None:
        raise RegimeError("geometry requires a ladder in the config")
    k = cfg.get("geometry_k", 0.0)
    s = cfg.get("geometry_s", 2)
    builder = GeometryBuilder(problem, ladder)
    plain = builder.lambda_plain(k, s)
    profile = reset(problem, k, min(cfg.get("diophantine_window", 50), 12), ladder)
    doc = {
        "k": k,
        "s": s,
        "lambda_plain": [list(p) for p in plain],
        "classes": {
            str(sp): [list(m) for m in mem]
            for sp, mem in builder.site_classes(k, s).members.items()
        } if s >= 2 else {},
        "reset": [list(n) for n in profile.reset],
        "principal_sets": [[list(m) for m in tier] for tier in profile.principal_sets],
        "regime": list(map(str, profile.regime)),
    }
    path = out_dir / "geometry.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    print(f"wrote {path}")
    return 0


def cmd_traj_bound(cfg, problem, out_dir, args):
    host = ball(cfg.get("traj_host_radius", 2), problem.nu, budget=None)
    ambient = ball(cfg.get("traj_host_radius", 2) + 3, problem.nu, budget=None)
    rng = np.random.default_rng(cfg.get("seed", 0))
    prof = WeightProfile(
        {s: 1.0 + 2.0 * rng.random() for s in host},
        T=8.0, kappa0=problem.potential.kappa0, host=host, ambient=ambient)
    eps0 = cfg.get("traj_eps0", 1e-25)
    zero = tuple([0] * problem.nu)
    targets = [zero, (1,) + (0,) * (problem.nu - 1)]
    print("m,n,partial,tail,closed_bound,ok")
    all_ok = True
    for n in targets:
        res = sum_enumerate(zero, n, prof, eps0, len_cap=4)
        bnd = closed_bound(zero, n, prof, eps0)
        ok = res.total <= bnd.value
        all_ok &= ok
        print(",".join(['"' + " ".join(map(str, zero)) + '"',
                        '"' + " ".join(map(str, n)) + '"',
                        fmt(res.partial), fmt(res.tail), fmt(bnd.value),
                        str(ok).lower()]))
    return 0 if all_ok else 3


def cmd_verify_forward(cfg, problem, out_dir, args):
    ms = _m_window(cfg, problem)
    records, failures = gap_table(problem, ms, cfg.get("box_radius", 8),
                                  jobs=args.jobs)
    rows = verify_forward(records, problem.potential)
    bad = [r for r in rows if not r.passed]
    for row in sorted(rows, key=lambda r: (l1_norm(r.m), r.m)):
        status = "pass" if row.passed else "FAIL"
        print(f"m={row.m} width={fmt(row.width)} bound={fmt(row.bound)} {status}")
    if failures:
        print(f"{len(failures)} gap computations failed")
        return 2
    return 0 if not bad else 3


def cmd_verify_inverse(cfg, problem, out_dir, args):
    report = verify_inverse(problem, cfg.get("box_radius", 8),
                            iterations=cfg.get("inverse_iterations", 5),
                            window_norm=cfg.get("gap_m_radius", 4))
    doc = {
        "hypothesis_ok": report.hypothesis_ok,
        "note": report.note,
        "pointwise": [
            {"n0": list(r.n0), "width": r.gap_width, "bound_desk": r.bound_desk,
             "bound_coarse": r.bound_coarse, "actual": r.actual, "holds": r.holds}
            for r in report.pointwise],
        "improvement": [
            {"eps": s.after.eps_hat, "kappa": s.after.kappa_hat, "verified": s.verified}
            for s in report.improvement],
        "final": {"eps": report.final_bound.eps_hat,
                  "kappa": report.final_bound.kappa_hat, "ok": report.final_ok},
    }
    path = out_dir / "inverse-report.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    print(f"wrote {path}")
    if not report.hypothesis_ok:
        return 2
    ok = all(r.holds for r in report.pointwise) and report.final_ok
    return 0 if ok else 3


def cmd_selftest(cfg, problem, out_dir, args):
    results = checks.run_selftest(problem, seed=cfg.get("seed", 0), jobs=args.jobs)
    failed = 0
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
        failed += 0 if r.passed else 1
    return 0 if failed == 0 else 3


COMMANDS = {
    "validate": cmd_validate,
    "band": cmd_band,
    "gaps": cmd_gaps,
    "geometry": cmd_geometry,
    "traj-bound": cmd_traj_bound,
    "verify-forward": cmd_verify_forward,
    "verify-inverse": cmd_verify_inverse,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qpspec",
        description="Quasi-periodic dual-operator spectra: bands, gaps, geometry.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--desk", dest="regime", action="store_const", const="desk")
    mode.add_argument("--faithful", dest="regime", action="store_const", const="faithful")
    args = parser.parse_args(argv)

    try:
        cfg, problem = load_config(args.config)
    except _BUDGET_ERRORS as exc:
        _error_json("regime", exc)
        return 2
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        _error_json("config", exc)
        return 1
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.regime is not None and cfg.get("ladder"):
        cfg["ladder"]["regime"] = args.regime
        try:
            _, problem = load_config(args.config)  # regime only affects the ladder
            lad = cfg["ladder"]
            ladder = build_ladder(lad["delta0"], lad["beta1"], lad.get("u_max", 2),
                                  regime=args.regime, a0=cfg["a0"], kappa0=cfg["kappa0"],
                                  site_budget=cfg.get("site_budget", 20_000),
                                  nu=problem.nu)
            problem = Problem(problem.frequency, problem.potential, ladder,
                              problem.site_budget)
        except QPSpecError as exc:
            _error_json("regime", exc)
            return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = problem.validate()
    if report and args.command != "validate":
        _error_json("validation", "; ".join(report))
        return 1
    try:
        return COMMANDS[args.command](cfg, problem, out_dir, args)
    except _BUDGET_ERRORS as exc:
        _error_json("regime", exc)
        return 2
    except QPSpecError as exc:
        _error_json("error", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
