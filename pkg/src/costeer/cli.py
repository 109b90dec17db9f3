"""Command-line entry point: headless runs, Monte-Carlo batches, the two
verification scenarios, report re-aggregation, and the realtime service.

Exit codes: 0 success, 1 assertion/verification failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .engine import run_scenario
from .events import EventRecord
from .metrics import aggregate
from .scenario import (PRESETS, ScenarioError, ScenarioSpec, load_scenario_file,
                       verify_scenario)

BATCH_SEEDS = 5   # trials per condition = seeds x driver sets


def _resolve_spec(args) -> ScenarioSpec:
    if args.scenario:
        return load_scenario_file(args.scenario)
    if args.preset:
        if args.preset not in PRESETS:
            raise ScenarioError(
                f"unknown preset {args.preset!r}; available: {sorted(PRESETS)}")
        return PRESETS[args.preset](mode=args.mode, seed=args.seed)
    raise ScenarioError("either --preset or --scenario is required")


def _write_run(outdir: Path, result) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "log.csv").write_text(result.csv_text())
    (outdir / "events.json").write_text(result.events_json())
    (outdir / "diagnostics.json").write_text(
        json.dumps(result.diag, indent=2, default=float))
    (outdir / "manifest.json").write_text(
        json.dumps(result.manifest(__version__), indent=2))


def cmd_run(args) -> int:
    spec = _resolve_spec(args)
    if args.driver_set is not None:
        spec.driver_set = args.driver_set
    result = run_scenario(spec)
    _write_run(Path(args.out), result)
    print(f"run complete: {len(result.rows)} ticks, "
          f"{len(result.events)} events -> {args.out}")
    return 0


def _one_trial(params):
    kind, mode, seed, driver_set = params
    spec = PRESETS[kind](mode=mode, seed=seed, driver_set=driver_set)
    result = run_scenario(spec)
    return (mode, seed, driver_set), result.events


def cmd_batch(args) -> int:
    kind = args.preset
    if kind not in PRESETS:
        raise ScenarioError(
            f"unknown preset {kind!r}; available: {sorted(PRESETS)}")
    modes = (["baseline", "shared_control"] if args.mode == "both"
             else [args.mode])
    n_sets = 8
    trials = []
    for mode in modes:
        for idx in range(args.seed, args.seed + args.trials):
            trials.append((kind, mode, idx // n_sets, idx % n_sets))
    results: dict[tuple, list] = {}
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
            for key, events in pool.map(_one_trial, trials):
                results[key] = events
    else:
        for t in trials:
            key, events = _one_trial(t)
            results[key] = events
    # deterministic merge ordered by (mode, seed, driver_set)
    by_condition: dict[str, list] = {m: [] for m in modes}
    for key in sorted(results):
        by_condition[key[0]].append(results[key])
    report = aggregate(by_condition)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "kpi_report.json").write_text(report.to_json())
    (outdir / "kpi_report.txt").write_text(report.table() + "\n")
    _write_samples_csv(outdir / "samples.csv", report)
    print(report.table())
    return 0


def _write_samples_csv(path: Path, report) -> None:
    lines = ["condition,metric,value"]
    for label, kpi in report.conditions.items():
        for metric in ("min_ttc", "min_dtc", "return_dev"):
            for v in getattr(kpi, metric):
                lines.append(f"{label},{metric},{v!r}")
    path.write_text("\n".join(lines) + "\n")


def cmd_verify(args) -> int:
    failures: list[str] = []
    checks: list[str] = []
    presets = [args.preset] if args.preset else ["corrective", "evasive"]

    def check(name, ok):
        checks.append(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    for kind in presets:
        spec = verify_scenario(kind)
        result = run_scenario(spec)
        if args.out:
            _write_run(Path(args.out) / kind, result)
        lam = np.array([d["lambda"] for d in result.diag["ticks"]])
        t_mpc = np.array([d["t_mpc"] for d in result.diag["ticks"]])
        tt = result.log.time
        kinds = [e.kind for e in result.events]
        cfg_du = 100.0 if kind == "corrective" else 400.0

        check(f"{kind}: no crash", "crash" not in kinds)
        check(f"{kind}: no road departure", not result.road_departure)
        check(f"{kind}: |T_mpc| <= lambda",
              bool(np.all(np.abs(t_mpc) <= lam + 1e-9)))
        rates = np.abs(np.diff(t_mpc)) / 0.05
        check(f"{kind}: |dT/dt| <= {cfg_du}",
              bool(np.all(rates <= cfg_du + 1e-9)))
        r = np.array([float(row[6]) for row in result.rows])
        check(f"{kind}: |yaw rate| <= 0.42", bool(np.all(np.abs(r) <= 0.42)))

        if kind == "corrective":
            pre = lam[tt < 15.0].mean()
            check("corrective: authority escalates by >= 3",
                  bool(lam.max() >= pre + 3.0))
            cleared = np.nonzero(result.log.threat_passed & (tt > 15.0))[0]
            t_clear = tt[cleared[0]]
            after = lam[(tt >= t_clear) & (tt <= t_clear + 3.0)]
            check("corrective: authority back under 4 N m within 3 s",
                  bool(np.any(after < 4.0)))
        else:
            d_min = np.array([d.get("d_pred_min", np.inf)
                              for d in result.diag["ticks"]])
            lam_steps = np.nonzero(lam >= 12.0)[0]
            crossings = np.nonzero(d_min < 50.0)[0]
            ok = (len(lam_steps) > 0 and len(crossings) > 0
                  and abs(int(lam_steps[0]) - int(crossings[0])) <= 1)
            check("evasive: lambda 3->12 when min d(k) crosses 50 m", ok)
            check("evasive: returns to lane center",
                  bool(abs(result.log.e_y[-1]) <= 0.3))

    print("\n".join(checks))
    if failures:
        print(f"{len(failures)} verification check(s) failed", file=sys.stderr)
        return 1
    print("all verification checks passed")
    return 0


def cmd_report(args) -> int:
    runs = []
    root = Path(args.out)
    for events_file in sorted(root.glob("**/events.json")):
        events = [EventRecord(**e) for e in json.loads(events_file.read_text())]
        runs.append(events)
    if not runs:
        raise ScenarioError(f"no events.json files under {root}")
    report = aggregate({"all": runs})
    print(report.table())
    (root / "kpi_report.json").write_text(report.to_json())
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    spec = _resolve_spec(args)
    host, _, port = args.serve_addr.rpartition(":")
    serve(spec, host=host or "127.0.0.1", port=int(port))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="costeer",
        description="Shared-control driving simulator and safety-KPI pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mode_choices=("baseline", "shared_control")):
        p.add_argument("--preset", help="scenario preset name")
        p.add_argument("--scenario", help="path to a scenario config document")
        p.add_argument("--mode", default="shared_control",
                       choices=mode_choices)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out")

    p_run = sub.add_parser("run", help="execute one scenario headless")
    common(p_run)
    p_run.add_argument("--driver-set", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="Monte-Carlo trials + KPI report")
    common(p_batch, mode_choices=("baseline", "shared_control", "both"))
    p_batch.set_defaults(mode="both")
    p_batch.add_argument("--trials", type=int, default=40,
                         help="trials per condition")
    p_batch.add_argument("--jobs", type=int, default=2)
    p_batch.set_defaults(func=cmd_batch)

    p_verify = sub.add_parser(
        "verify", help="run the scripted verification scenarios")
    p_verify.add_argument("--preset", choices=("corrective", "evasive"))
    p_verify.add_argument("--out", default=None)
    p_verify.set_defaults(func=cmd_verify)

    p_report = sub.add_parser("report", help="re-aggregate existing run logs")
    p_report.add_argument("--out", default="out")
    p_report.set_defaults(func=cmd_report)

    p_serve = sub.add_parser("serve", help="realtime simulation service")
    common(p_serve)
    p_serve.add_argument("--serve-addr", default="127.0.0.1:8700")
    p_serve.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
