"""Command-line entry point: run, sweep, validate, and graph subcommands.

Exit codes: 0 success, 1 config or input error, 2 when no feasible plan
exists (argparse usage errors also exit 2). Diagnostics go to standard
error; verbosity is controlled by the GOAGENTNET_LOG environment variable
(error, info, debug).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .intent import IntentSpec, SourceKind
from .orchestrator import NoFeasiblePlan
from .registry import to_dot
from .scenario import (
    CSV_COLUMNS,
    ConfigError,
    RunReport,
    compare,
    load_scenario,
    report_rows,
    report_to_dict,
    run_baseline,
    run_goagentnet,
    validate_config,
)

log = logging.getLogger("goagentnet")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_PLAN = 2


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("GOAGENTNET_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s")


def _load_config(path: str) -> dict:
    text = Path(path).read_text()
    return json.loads(text)


def _write_csv(path: Path, rows: list[list]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_cell(value) for value in row])


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _intent_from_args(args: argparse.Namespace) -> IntentSpec:
    if args.intent is not None:
        return IntentSpec(SourceKind.PATTERN_TEXT, args.intent)
    body = Path(args.intent_file).read_text()
    return IntentSpec(SourceKind.STRUCTURED, body)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args.config)
        intent = _intent_from_args(args)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        log.error("cannot read inputs: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    servers = []
    reports: dict[str, RunReport] = {}
    try:
        archs = ("goagentnet", "baseline") if args.arch == "both" else (args.arch,)
        for arch in archs:
            scenario = load_scenario(config)
            if args.listen:
                servers.append(_serve_bus(scenario, args.listen))
            runner = run_goagentnet if arch == "goagentnet" else run_baseline
            reports[arch] = runner(scenario, intent, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoFeasiblePlan as exc:
        print(f"no feasible plan: {exc}", file=sys.stderr)
        return EXIT_NO_PLAN
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        for server in servers:
            server.close()

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    comparison = None
    if args.arch == "both":
        comparison = compare(reports["goagentnet"], reports["baseline"])
    if args.format == "json":
        doc = {arch: report_to_dict(report) for arch, report in reports.items()}
        if comparison is not None:
            doc["comparison"] = comparison.to_dict()
        out.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    else:
        ordered = [reports[a] for a in sorted(reports)]
        _write_csv(out, report_rows(ordered))
        if comparison is not None:
            side = out.with_suffix(out.suffix + ".comparison.json")
            side.write_text(json.dumps(comparison.to_dict(), sort_keys=True, indent=2) + "\n")
    if args.plot:
        from .figures import render_sweep_figure

        render_sweep_figure(report_rows([reports[a] for a in sorted(reports)]), args.plot)
    log.info("wrote %s", out)
    return EXIT_OK


class _TcpRun:
    """Expose a scenario bus over TCP and route its invokes through loopback."""

    def __init__(self, scenario, listen: str) -> None:
        from .protocol import InvokeParams
        from .tcp import BusTcpServer, TcpBusClient

        host, _, port = listen.rpartition(":")
        self.server = BusTcpServer(scenario.bus, host or "127.0.0.1", int(port))
        self.client = TcpBusClient(*self.server.address)

        def tcp_invoke(target, capability, params=None, timeout_s=None):
            if params is None:
                params = InvokeParams(target=target, capability=capability)
            return self.client.invoke(params)

        scenario.bus.invoke = tcp_invoke  # runs now flow through the socket
        log.info("bus listening on %s:%s", *self.server.address)

    def close(self) -> None:
        self.client.close()
        self.server.close()


def _serve_bus(scenario, listen: str) -> _TcpRun:
    return _TcpRun(scenario, listen)


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args.config)
        bandwidths = [float(b) for b in args.bandwidths.split(",") if b.strip()]
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not bandwidths:
        print("usage error: --bandwidths needs at least one value", file=sys.stderr)
        return EXIT_NO_PLAN
    if "{bandwidth}" not in args.intent_template:
        print("usage error: --intent-template must contain {bandwidth}", file=sys.stderr)
        return EXIT_NO_PLAN

    archs = ("goagentnet", "baseline") if args.arch == "both" else (args.arch,)
    rows: list[list] = []
    try:
        for bandwidth in sorted(bandwidths):
            text = args.intent_template.replace("{bandwidth}", _bandwidth_text(bandwidth))
            for arch in sorted(archs):
                scenario = load_scenario(config)
                runner = run_goagentnet if arch == "goagentnet" else run_baseline
                report = runner(scenario, text, seed=args.seed)
                rows.extend(report_rows([report]))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoFeasiblePlan as exc:
        print(f"no feasible plan: {exc}", file=sys.stderr)
        return EXIT_NO_PLAN
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, rows)
    if args.plot:
        from .figures import render_sweep_figure

        render_sweep_figure(rows, args.plot)
    return EXIT_OK


def _bandwidth_text(bandwidth_hz: float) -> str:
    for scale, unit in ((1e9, "GHz"), (1e6, "MHz"), (1e3, "kHz")):
        value = bandwidth_hz / scale
        if value >= 1:
            return f"{value:g}{unit}"
    return f"{bandwidth_hz:g}Hz"


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args.config)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    findings = validate_config(config)
    for code, detail in findings:
        print(f"{code}: {detail}")
    if findings:
        return EXIT_CONFIG
    print("config is valid")
    return EXIT_OK


def cmd_graph(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args.config)
        scenario = load_scenario(config)
    except (OSError, json.JSONDecodeError, ValueError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(to_dot(scenario.graph))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="goagentnet",
        description="Goal-oriented multi-agent semantic networking simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one intent through an architecture")
    run.add_argument("--config", required=True, help="scenario config JSON")
    group = run.add_mutually_exclusive_group(required=True)
    group.add_argument("--intent", help="one-sentence intent text")
    group.add_argument("--intent-file", help="structured intent JSON file")
    run.add_argument("--arch", choices=("goagentnet", "baseline", "both"), default="both")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="report output path")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--plot", help="also render a PNG figure to this path")
    run.add_argument("--listen", help="serve the bus on HOST:PORT and run over TCP")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="compare architectures across bandwidths")
    sweep.add_argument("--config", required=True)
    sweep.add_argument(
        "--intent-template",
        required=True,
        help="intent text with a {bandwidth} placeholder",
    )
    sweep.add_argument("--bandwidths", required=True, help="comma-separated Hz values")
    sweep.add_argument("--arch", choices=("goagentnet", "baseline", "both"), default="both")
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", required=True, help="CSV output path")
    sweep.add_argument("--plot", help="also render a PNG figure to this path")
    sweep.set_defaults(func=cmd_sweep)

    validate = sub.add_parser("validate", help="check a scenario config")
    validate.add_argument("--config", required=True)
    validate.set_defaults(func=cmd_validate)

    graph = sub.add_parser("graph", help="export the knowledge graph as DOT")
    graph.add_argument("--config", required=True)
    graph.add_argument("--out", required=True, help="DOT output path")
    graph.set_defaults(func=cmd_graph)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
