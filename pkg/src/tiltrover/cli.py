"""Command-line entry point: run scenarios, verify guarantees, serve pilots."""

from __future__ import annotations

import argparse
import os
import sys


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tiltrover",
        description="Deterministic hybrid ground/air vehicle simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write telemetry")
    run.add_argument("scenario",
                     help="path to a scenario YAML, or the name of a "
                          "shipped scenario (e.g. step_pitch)")
    run.add_argument("--out", default=None,
                     help="telemetry CSV path (default <scenario>.csv in cwd)")
    run.add_argument("--report", action="store_true",
                     help="print the energy report and render figures "
                          "next to the CSV")

    sub.add_parser("verify", help="run every acceptance check")

    serve = sub.add_parser("serve", help="expose the simulator to pilots")
    serve.add_argument("--port", type=int,
                       default=int(os.environ.get("TILTROVER_PORT", "9000")))
    serve.add_argument("--scenario", default=None,
                       help="initial scenario name or path (default: level "
                            "ground start)")
    serve.add_argument("--time-scale", type=float, default=1.0,
                       help="wall-clock pacing multiplier (tests use >1)")
    return ap


def _resolve_scenario(arg: str) -> str:
    from .verify import scenario_path

    if os.path.exists(arg):
        return arg
    base = os.path.splitext(os.path.basename(arg))[0]
    try:
        return scenario_path(base)
    except FileNotFoundError:
        print(f"tiltrover: scenario {arg!r} is neither a file nor a shipped "
              f"scenario name", file=sys.stderr)
        raise SystemExit(2) from None


def _cmd_run(args) -> int:
    from .scenario import load_scenario, run_scenario
    from .telemetry import energy_report, format_energy_report, write_log

    path = _resolve_scenario(args.scenario)
    try:
        sc = load_scenario(path)
    except (KeyError, ValueError) as exc:
        print(f"tiltrover: bad scenario file: {exc}", file=sys.stderr)
        return 2
    log = run_scenario(sc)
    out = args.out or f"{sc.name}.csv"
    write_log(log, out)
    print(f"wrote {len(log.rows)} rows to {out}")
    if args.report:
        rep = energy_report(log)
        print(format_energy_report(rep))
        from .plots import render_report

        stem = os.path.splitext(out)[0]
        for fig in render_report(log, rep, stem):
            print(f"wrote {fig}")
    return 0


def _cmd_verify() -> int:
    from .verify import run_all

    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    failed = [n for n, ok, _ in results if not ok]
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed:",
              ", ".join(failed))
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def _cmd_serve(args) -> int:
    from .bridge import serve

    scenario = None
    if args.scenario is not None:
        scenario = _resolve_scenario(args.scenario)
    serve(port=args.port, scenario=scenario, time_scale=args.time_scale)
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)  # argparse exits 2 on usage errors
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "verify":
        return _cmd_verify()
    if args.command == "serve":
        return _cmd_serve(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
