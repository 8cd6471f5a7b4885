"""Thin command-line client for the simulation service.

By default the CLI mounts the FastAPI app in process (no server needed);
pass --server to talk to a remote instance instead.  Either way the CLI
only moves bytes: scenario files are inlined into the request, and response
payloads are written verbatim, so traces are identical in both modes.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class ClientError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    try:
        resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        raise ClientError(f"cannot reach service: {exc}", EXIT_IO) from None
    if resp.status_code == 400 or resp.status_code == 422:
        detail = resp.json().get("detail", resp.text)
        raise ClientError(f"validation error: {detail}", EXIT_VALIDATION)
    if resp.status_code != 200:
        raise ClientError(f"service error {resp.status_code}: {resp.text}", EXIT_IO)
    return resp.json()


def _load_scenario_doc(path: str) -> dict:
    """Read a scenario file and inline any referenced shape file."""
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ClientError(f"cannot read scenario file: {exc}", EXIT_IO) from None
    except json.JSONDecodeError as exc:
        raise ClientError(f"scenario file is not valid JSON: {exc}", EXIT_VALIDATION) from None
    shape = doc.get("shape")
    if isinstance(shape, dict) and "path" in shape and "matrix" not in shape:
        shape_path = Path(shape["path"])
        if not shape_path.is_absolute():
            shape_path = p.parent / shape_path
        try:
            doc["shape"] = {"matrix": shape_path.read_text(encoding="utf-8")}
        except OSError as exc:
            raise ClientError(f"cannot read shape file: {exc}", EXIT_IO) from None
    return doc


def _write(path: Path, content: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise ClientError(f"cannot write {path}: {exc}", EXIT_IO) from None


def cmd_run(args: argparse.Namespace) -> int:
    doc = _load_scenario_doc(args.scenario)
    payload: dict = {"scenario": doc}
    if args.seed is not None:
        payload["seed"] = args.seed
    if args.max_ticks is not None:
        payload["max_ticks"] = args.max_ticks
    with _client(args.server) as client:
        data = _post(client, "/run", payload)
    out = Path(args.out)
    _write(out / "trace.csv", data["trace_csv"])
    _write(out / "metrics.csv", data["metrics_csv"])
    _write(out / "summary.json", json.dumps(data["summary"], sort_keys=True, indent=2) + "\n")
    summary = data["summary"]
    print(
        f"run complete: ticks={summary['ticks_total']} "
        f"states={','.join(sorted(set(summary['final_states'])))} -> {out}"
    )
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    doc = _load_scenario_doc(args.scenario)
    with _client(args.server) as client:
        data = _post(client, "/validate", {"scenario": doc})
    print(f"scenario is valid: {data['bots']} bots")
    return EXIT_OK


def cmd_dump_table(args: argparse.Namespace) -> int:
    try:
        shape_text = Path(args.shape).read_text(encoding="utf-8")
    except OSError as exc:
        raise ClientError(f"cannot read shape file: {exc}", EXIT_IO) from None
    with _client(args.server) as client:
        data = _post(client, "/shape-table", {"shape_text": shape_text, "spacing": args.spacing})
    sys.stdout.write(data["table_csv"])
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    try:
        trace_csv = Path(args.trace).read_text(encoding="utf-8")
    except OSError as exc:
        raise ClientError(f"cannot read trace file: {exc}", EXIT_IO) from None
    summary = None
    summary_path = Path(args.summary) if args.summary else Path(args.trace).parent / "summary.json"
    if summary_path.exists():
        try:
            summary = json.loads(summary_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ClientError(f"cannot read summary file: {exc}", EXIT_IO) from None
    with _client(args.server) as client:
        data = _post(client, "/metrics", {"trace_csv": trace_csv, "summary": summary})
    if args.out:
        _write(Path(args.out), data["metrics_csv"])
        print(f"metrics written to {args.out}")
    else:
        sys.stdout.write(data["metrics_csv"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmform",
        description="Run and inspect decentralized shape-formation scenarios.",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="Base URL of a running service (default: run the service in process).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Run a scenario and write trace/metrics/summary.")
    p_run.add_argument("--scenario", required=True, help="Scenario JSON file.")
    p_run.add_argument("--out", required=True, help="Output directory.")
    p_run.add_argument("--seed", type=int, default=None, help="Override the scenario seed.")
    p_run.add_argument("--max-ticks", type=int, default=None, help="Override the tick budget.")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="Validate a scenario and its shape.")
    p_val.add_argument("--scenario", required=True, help="Scenario JSON file.")
    p_val.set_defaults(func=cmd_validate)

    p_dump = sub.add_parser("dump-table", help="Print the compiled shape table as CSV.")
    p_dump.add_argument("--shape", required=True, help="Shape matrix text file.")
    p_dump.add_argument("--spacing", type=float, default=1.0, help="Grid spacing in meters.")
    p_dump.set_defaults(func=cmd_dump_table)

    p_met = sub.add_parser("metrics", help="Recompute metric series from a trace file.")
    p_met.add_argument("--trace", required=True, help="trace.csv produced by run.")
    p_met.add_argument(
        "--summary",
        default=None,
        help="summary.json produced by run (default: sibling of the trace).",
    )
    p_met.add_argument("--out", default=None, help="Write CSV here instead of stdout.")
    p_met.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ClientError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
