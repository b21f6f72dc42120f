"""Command-line entry point.

Subcommands:

* ``run <scenario-file> [--out <path>] [--seed <u64>] [--threads <n>]``
* ``demo <name>`` for the packaged example scenarios
* ``report summarize <report-file>``

Exit codes: 0 on success, 1 on scenario or usage errors, 2 on internal
errors.  The QDATA_THREADS environment variable sets the ``--threads``
default.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from importlib import resources

from .harness import load_report, run_scenario, summarize_report, write_report
from .scenario import ScenarioError, parse_scenario, parse_scenario_dict

__all__ = ["DEMOS", "main"]

DEMOS = {
    "gisin": "gisin.json",
    "helstrom": "helstrom.json",
    "basis-invariance": "basis_invariance.json",
    "ancilla": "ancilla.json",
    "qrac": "qrac.json",
    "nsq-survey": "nsq_survey.json",
    "composition": "composition.json",
}


class _Parser(argparse.ArgumentParser):
    # usage problems are user errors, not internal ones
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _seed_value(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed {text!r} is not an integer")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError("value must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qdata", description="scenario-driven box-model test runner")
    sub = parser.add_subparsers(dest="command", metavar="command")

    run_p = sub.add_parser("run", help="execute a scenario file")
    run_p.add_argument("scenario", help="path to a scenario JSON file")
    run_p.add_argument("--out", help="write the report here instead of stdout")
    run_p.add_argument("--seed", type=_seed_value, default=None, help="override the master seed")
    run_p.add_argument("--threads", type=_positive_int, default=None, help="worker threads")

    demo_p = sub.add_parser("demo", help="run a packaged example scenario")
    demo_p.add_argument("name", choices=sorted(DEMOS), help="demo name")

    report_p = sub.add_parser("report", help="inspect report files")
    report_sub = report_p.add_subparsers(dest="report_command", metavar="subcommand")
    summarize_p = report_sub.add_parser("summarize", help="print a report digest")
    summarize_p.add_argument("report_file", help="path to a report JSON file")
    return parser


def _default_threads() -> int:
    raw = os.environ.get("QDATA_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
        if value < 1:
            raise ValueError
    except ValueError:
        raise ScenarioError(f"QDATA_THREADS must be a positive integer, got {raw!r}")
    return value


def _print_result_lines(report: dict) -> None:
    for cell in report["cells"]:
        bindings = ", ".join(f"{k}={v}" for k, v in sorted(cell["params"].items()))
        label = f"cell {cell['cell_index']}" + (f" ({bindings})" if bindings else "")
        for result in cell["results"]:
            if "error" in result:
                print(f"{label}: {result['detector']} error: {result['error']}")
                continue
            verdict = result["verdict"]
            print(
                "{}: {} statistic={:.6g} threshold={:.6g} verdict={}".format(
                    label,
                    result["detector"],
                    verdict["statistic"],
                    verdict["threshold"],
                    verdict["verdict"],
                )
            )


def _cmd_run(args) -> int:
    scenario = parse_scenario(args.scenario)
    threads = args.threads if args.threads is not None else _default_threads()
    report = run_scenario(scenario, threads=threads, seed=args.seed)
    if args.out:
        write_report(report, args.out)
        print(summarize_report(report))
    else:
        json.dump(report, sys.stdout, sort_keys=True, indent=2)
        print()
    return 0


def _cmd_demo(args) -> int:
    text = resources.files("qdata").joinpath("scenarios", DEMOS[args.name]).read_text("utf-8")
    scenario = parse_scenario_dict(json.loads(text), source=f"demo:{args.name}")
    report = run_scenario(scenario, threads=_default_threads())
    _print_result_lines(report)
    return 0


def _cmd_report(args) -> int:
    if args.report_command != "summarize":
        raise ScenarioError("usage: qdata report summarize <report-file>")
    try:
        report = load_report(args.report_file)
    except FileNotFoundError:
        raise ScenarioError(f"report file not found: {args.report_file}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{args.report_file}: not a report file ({exc.msg})") from None
    print(summarize_report(report))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "demo":
            return _cmd_demo(args)
        return _cmd_report(args)
    except ScenarioError as exc:
        sys.stderr.write(f"qdata: {exc}\n")
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
