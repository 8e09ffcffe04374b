"""Command-line experiment runner.

Exit codes: 0 success, 1 violated property or bound, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, config, kernels, verify
from .model import ModelError
from .rng import replication_seeds
from .sim_discrete import simulate

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


class DigestMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True)


def write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(_dumps(rec) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)


def read_records(paths) -> list[dict]:
    """Load JSONL records from several files; all must share one digest."""
    records, seen = [], set()
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    seen.add(rec.get("digest"))
                    records.append(rec)
    if len(seen) > 1:
        raise DigestMismatch(f"records from different scenarios: {sorted(map(str, seen))}")
    return records


def _outdir(args) -> Path:
    out = Path(args.out or os.environ.get("LATQUEUE_OUT") or "latqueue-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _prepare(args):
    doc = config.load(args.config)
    doc = config.with_overrides(doc, seed=args.seed, trace_stride=args.trace_stride)
    scenario = config.build_scenario(doc)
    return doc, config.digest(doc), scenario


def _backend(doc):
    name = doc.get("run", {}).get("backend")
    return kernels.get_backend(name) if name else None


def _pooled(runs) -> dict:
    est = analysis.estimate_moments(runs, ("x", "x2", "eta"))
    return {"mean_x": est["x"].as_dict(), "mean_x2": est["x2"].as_dict(),
            "departure_rate": est["eta"].as_dict()}


def cmd_simulate(args) -> int:
    doc, dig, sc = _prepare(args)
    t0 = time.perf_counter()
    runs = simulate(sc, jobs=args.jobs, backend=_backend(doc))
    wall = time.perf_counter() - t0
    out = _outdir(args)
    seeds = replication_seeds(sc.seed, sc.replications)
    records = []
    for k, r in enumerate(runs):
        records.append({"type": "replication", "digest": dig, "master_seed": sc.seed,
                        "replication": k, "seed": seeds[k], "statistics": r.summary()})
    summary = {"type": "summary", "digest": dig, "master_seed": sc.seed, "seeds": seeds,
               "statistics": _pooled(runs), "bound_reports": [], "wall_clock": wall,
               "version": __version__, "backend": kernels.BACKEND}
    records.append(summary)
    write_jsonl(out / f"{dig}.jsonl", records)
    if sc.trace_stride > 0:
        for k, r in enumerate(runs):
            rows = ((_fmt(i * r.trace_stride), node, int(v))
                    for i, row in enumerate(r.trace) for node, v in enumerate(row))
            write_csv(out / f"{dig}-r{k}-trace.csv", ("slot", "node", "queue_len"), rows)
    print(_dumps({"digest": dig, "out": str(out), **summary["statistics"]}))
    return EXIT_OK


def _fmt(v):
    return int(v) if float(v).is_integer() else float(v)


def _bound_reports(doc, sc, args):
    an = doc.get("analysis", {})
    names = an.get("theorems")
    if not names:
        raise config.ConfigError("analysis/theorems: name at least one theorem")
    spec = config.build_lyapunov(doc, sc.n)
    ex_sec = an.get("exact")
    use_exact = ex_sec is not None and ex_sec.get("use_for_bounds", True)
    single = not sc.routing.multihop
    reports, exact_mode = [], {}
    runs = sol = None

    def sim():
        nonlocal runs
        if runs is None:
            runs = simulate(sc, jobs=args.jobs, backend=_backend(doc))
        return runs

    def exact():
        nonlocal sol
        if sol is None:
            sol = analysis.exact_stationary(sc, ex_sec.get("cap", 20), ex_sec.get("auto_cap", False))
        return sol

    for name in names:
        if name in ("thm22", "thm23"):
            if not single or sc.time_model != "discrete":
                reports.append(analysis.inapplicable(name, "needs a single-hop slot model"))
                continue
            if name == "thm22" and spec is None:
                reports.append(analysis.inapplicable(name, "needs analysis/lyapunov"))
                continue
            if name == "thm23" and spec is None:
                reports.append(analysis.inapplicable(name, "needs analysis/lyapunov (nu, epsilon)"))
                continue
            try:
                spec.check(sc.arrivals.rates)
            except ModelError as exc:
                reports.append(analysis.inapplicable(name, str(exc)))
                continue
            if use_exact:
                s = exact()
                exact_mode[name] = True
                if name == "thm22":
                    u = spec.utility
                    rep = analysis.bound_thm22(s.expect(u.g), s.expect(u.delta), spec)
                else:
                    rep = analysis.bound_thm23(sc.arrivals, spec.nu, spec.epsilon, s.mean, s.second)
            else:
                r = sim()
                if name == "thm22":
                    u = spec.utility
                    try:
                        Eg = analysis.batch_matrix(r, u.g)
                        Ed = analysis.batch_matrix(r, u.delta)
                    except OverflowError as exc:
                        reports.append(analysis.inapplicable(name, str(exc)))
                        continue
                    rep = analysis.bound_thm22(Eg, Ed, spec)
                else:
                    rep = analysis.bound_thm23(sc.arrivals, spec.nu, spec.epsilon,
                                               analysis.batch_matrix(r, "x"),
                                               analysis.batch_matrix(r, "x2"))
            reports.append(rep)
        else:
            want = "discrete" if name == "thm41" else "continuous"
            if single or sc.time_model != want or sc.topology.kind != "torus":
                reports.append(analysis.inapplicable(name, f"needs a multi-hop {want}-time torus"))
                continue
            q = sc.routing.q
            lam = float(sc.throughput[0])
            d = sc.topology.dimension
            EX = analysis.batch_matrix(sim(), "x")
            try:
                if name == "thm41":
                    rep = analysis.bound_thm41(float(sc.arrivals.moments[1][0]), lam, q, d,
                                               sc.routing.degree, EX)
                else:
                    rep = analysis.bound_thm55(lam, q, d, EX, sc.routing.degree)
            except ModelError as exc:
                rep = analysis.inapplicable(name, str(exc))
            reports.append(rep)
    return reports, exact_mode


def cmd_bounds(args) -> int:
    doc, dig, sc = _prepare(args)
    t0 = time.perf_counter()
    reports, exact_mode = _bound_reports(doc, sc, args)
    wall = time.perf_counter() - t0
    rows, failed = [], False
    for rep in reports:
        for r in (rep, rep.secondary) if rep.secondary is not None else (rep,):
            rows.append((r.name, _num(r.rhs.value), _num(r.lhs.value), _num(r.ci), r.verdict))
            print(f"{r.name}: {r.verdict} (empirical {r.lhs.value:.6g} vs theoretical "
                  f"{r.rhs.value:.6g}, ci {r.ci:.3g})")
            failed |= r.verdict == analysis.bounds.VIOLATED
            # bounds evaluated on exact moments are hard assertions
            failed |= exact_mode.get(rep.name, False) and r.verdict != analysis.bounds.HOLDS
    out = _outdir(args)
    write_csv(out / f"{dig}-bounds.csv", ("name", "theoretical", "empirical", "ci", "verdict"), rows)
    write_jsonl(out / f"{dig}-bounds.jsonl",
                [{"type": "bounds", "digest": dig, "master_seed": sc.seed,
                  "reports": [r.as_dict() for r in reports], "wall_clock": wall,
                  "version": __version__}])
    return EXIT_VIOLATION if failed else EXIT_OK


def _num(v):
    return "" if v is None or not np.isfinite(v) else repr(float(v))


def cmd_verify(args) -> int:
    doc, dig, sc = _prepare(args)
    an = doc.get("analysis", {})
    suites = an.get("suites", ["fairness", "rates"])
    rng = np.random.default_rng(np.random.SeedSequence(sc.seed))
    spec = config.build_lyapunov(doc, sc.n)
    results = []
    for name in suites:
        try:
            results.append(_suite(name, doc, sc, spec, rng))
        except ModelError as exc:
            raise config.ConfigError(f"analysis/suites/{name}: {exc}") from None
    for r in results:
        print(f"{r.name}: {'PASS' if r.ok else 'FAIL'} {_dumps(r.details)}")
    out = _outdir(args)
    write_jsonl(out / f"{dig}-verify.jsonl",
                [{"type": "verify", "digest": dig, "master_seed": sc.seed, **r.as_dict()}
                 for r in results])
    return EXIT_OK if all(r.ok for r in results) else EXIT_VIOLATION


def _suite(name, doc, sc, spec, rng):
    an = doc.get("analysis", {})
    if name in ("fairness", "shannon_fairness"):
        f = an.get("fairness", {})
        return verify.fairness_suite(sc, rng, f.get("states", 100), f.get("trials", 1000),
                                     shannon=name == "shannon_fairness")
    if name == "drift":
        if spec is None:
            raise ModelError("drift suite needs analysis/lyapunov")
        f = an.get("drift", {})
        return verify.drift_suite(sc, spec, f.get("bruteforce_max_x", 4), f.get("scan_max_x", 60))
    if name == "coupling":
        f = an.get("coupling", {})
        return verify.coupling_suite(sc, rng, f.get("pairs", 1000), f.get("slots", 1000))
    if name == "d1_marginals":
        f = an.get("marginals", {})
        return verify.marginals_suite(sc, rng, f.get("slots", 100_000), f.get("states", 5))
    if name == "exclusion":
        return verify.exclusion_suite(sc, an.get("exclusion", {}).get("slots", 1_000_000))
    if name == "feasibility":
        if sc.topology.kernel is None:
            raise ModelError("feasibility needs a lattice kernel")
        return verify.feasibility_suite(sc.topology.kernel, an.get("feasibility", []))
    if name == "conditions":
        if spec is None:
            raise ModelError("conditions suite needs analysis/lyapunov")
        return verify.conditions_suite(spec)
    return verify.psi_bounds_suite(sc, rng)


def cmd_sweep(args) -> int:
    doc, dig, sc = _prepare(args)
    sw = doc.get("analysis", {}).get("sweep")
    if not sw:
        raise config.ConfigError("analysis/sweep: lambdas are required")
    points = analysis.stability_sweep(
        sc, sw["lambdas"], sw.get("change", analysis.sweep.STABLE_CHANGE),
        sw.get("growth", analysis.sweep.GROWTH_RATIO), jobs=args.jobs, backend=_backend(doc))
    rows = []
    for p in points:
        rows.append((repr(p.lam), p.verdict, repr(float(np.mean(p.first))),
                     repr(float(np.mean(p.second))), repr(float(np.mean(p.ratios)))))
        print(f"lambda={p.lam:g}: {p.verdict} (mean ratio {np.mean(p.ratios):.4g})")
    out = _outdir(args)
    write_csv(out / f"{dig}-sweep.csv", ("lambda", "verdict", "window1", "window2", "ratio"), rows)
    write_jsonl(out / f"{dig}-sweep.jsonl",
                [{"type": "sweep", "digest": dig, "master_seed": sc.seed, **p.as_dict()}
                 for p in points])
    return EXIT_OK


def cmd_exact(args) -> int:
    doc, dig, sc = _prepare(args)
    ex = doc.get("analysis", {}).get("exact", {})
    try:
        sol = analysis.exact_stationary(sc, ex.get("cap", 20), ex.get("auto_cap", False))
    except ModelError as exc:
        raise config.ConfigError(f"analysis/exact: {exc}") from None
    except analysis.SolveError as exc:
        print(f"exact solve failed: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    rec = {"type": "exact", "digest": dig, "cap": sol.cap, "states": sol.states,
           "method": sol.method, "residual": sol.residual, "tail_mass": sol.tail_mass,
           "mean_x": sol.mean, "mean_x2": sol.second, "mean_psi": sol.psi_mean,
           "arrival_rates": sc.arrivals.rates, "version": __version__}
    spec = config.build_lyapunov(doc, sc.n)
    if spec is not None:
        rec["mean_g"] = sol.expect(spec.utility.g)
        rec["mean_delta"] = sol.expect(spec.utility.delta)
    out = _outdir(args)
    write_jsonl(out / f"{dig}-exact.jsonl", [rec])
    print(_dumps({k: rec[k] for k in ("digest", "cap", "residual", "tail_mass", "mean_x")}))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "bounds": cmd_bounds, "verify": cmd_verify,
            "sweep": cmd_sweep, "exact": cmd_exact}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latqueue", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--seed", type=int, metavar="U64")
        s.add_argument("--jobs", type=int, default=1, metavar="N")
        s.add_argument("--out", metavar="DIR", help="output directory (default $LATQUEUE_OUT)")
        s.add_argument("--trace-stride", type=float, metavar="K")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("--seed: must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except config.ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
