"""Command-line client for the mftopo service.

The CLI is a thin client: every subcommand builds a request and sends it
to the service API, by default an in-process instance of the app (no
network), or a remote server given ``--server``. Exit codes: 0 success,
1 usage/configuration error, 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, InputDataError
from .pipeline import RunConfig

USAGE_EXIT, INPUT_EXIT, INTERNAL_EXIT = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse defaults to exit(2)
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="mftopo", description=__doc__)
    parser.add_argument("--server", help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p: _Parser) -> None:
        p.add_argument("--config", help="JSON or TOML config file")
        p.add_argument("--q", help="slab count, or comma list per field level")
        p.add_argument("--weights", help="w0,w1,w2 (default 1/3 each)")
        p.add_argument("--objective", choices=["minimax", "hungarian"])
        p.add_argument("--mode", choices=["clip", "vertex"], help="fragment mode")
        p.add_argument("-E", "--eigen-count", type=int, dest="eigen_count")
        p.add_argument("--workers", type=int)

    p = sub.add_parser("descriptors", help="eigenfunction descriptor CSV for a mesh")
    p.add_argument("mesh")
    p.add_argument("-E", "--count", type=int, default=12)
    p.add_argument("--out", required=True)

    p = sub.add_parser("distance", help="distance between two items")
    p.add_argument("a", help="mesh path, or ;-joined volume paths with --grid-dims")
    p.add_argument("b")
    p.add_argument("--fields-a", help=";-joined per-vertex field files for item a")
    p.add_argument("--fields-b")
    p.add_argument("--descriptors-a", help="precomputed descriptor CSV for item a")
    p.add_argument("--descriptors-b")
    p.add_argument("--grid-dims", help="treat a/b as raw volumes on this grid, e.g. 41x41x41")
    p.add_argument("--grid-spacing")
    p.add_argument("--out", help="write the JSON report here")
    add_config_flags(p)

    p = sub.add_parser("matrix", help="pairwise distance matrix over a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--resume", action="store_true")
    add_config_flags(p)

    p = sub.add_parser("evaluate", help="retrieval metrics of a distance matrix")
    p.add_argument("matrix")
    p.add_argument("labels")
    p.add_argument("--emeasure-cutoff", type=int, default=32)
    p.add_argument("--out")

    p = sub.add_parser("timeseries", help="consecutive-site distances and peaks")
    p.add_argument("manifest")
    p.add_argument("--out")
    add_config_flags(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x]


def _config_payload(args: argparse.Namespace) -> dict:
    base: dict = {}
    if getattr(args, "config", None):
        base = RunConfig.from_file(args.config).__dict__.copy()
        base["q"] = list(base["q"])
        base["weights"] = list(base["weights"])
    if getattr(args, "q", None):
        qs = [int(x) for x in args.q.split(",") if x]
        base["q"] = qs[0] if len(qs) == 1 else qs
    if getattr(args, "weights", None):
        base["weights"] = _parse_floats(args.weights)
    for key in ("objective", "mode", "eigen_count", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            base[key] = value
    return base


def _item_payload(args: argparse.Namespace, side: str) -> dict:
    path = getattr(args, side)
    fields = getattr(args, f"fields_{side}", None)
    descriptors = getattr(args, f"descriptors_{side}", None)
    item: dict = {"id": side}
    if args.grid_dims:
        dims = [int(x) for x in args.grid_dims.replace(",", "x").split("x") if x]
        item["grid_dims"] = dims
        if args.grid_spacing:
            item["grid_spacing"] = [
                float(x) for x in args.grid_spacing.replace(",", "x").split("x") if x
            ]
        item["fields"] = [p for p in path.split(";") if p]
    else:
        item["mesh"] = path
        if fields:
            item["fields"] = [p for p in fields.split(";") if p]
    if descriptors:
        item["descriptors"] = descriptors
    return item


def _client(server: str | None):
    import httpx

    if server:
        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _call(server: str | None, method: str, path: str, body: dict | None = None) -> int:
    with _client(server) as client:
        if method == "get":
            resp = client.get(path)
        else:
            resp = client.post(path, json=body)
    if resp.status_code == 200:
        _emit(resp.json())
        return 0
    try:
        detail = resp.json().get("detail", resp.text)
    except ValueError:
        detail = resp.text
    sys.stderr.write(f"error ({resp.status_code}): {detail}\n")
    if resp.status_code == 422:
        return USAGE_EXIT
    if 400 <= resp.status_code < 500:
        return INPUT_EXIT
    return INTERNAL_EXIT


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return USAGE_EXIT

    try:
        if args.command == "serve":
            import uvicorn

            from .service import app

            uvicorn.run(app, host=args.host, port=args.port)
            return 0
        if args.command == "descriptors":
            if args.count < 1:
                sys.stderr.write("usage error: --count must be >= 1\n")
                return USAGE_EXIT
            body = {"mesh_path": args.mesh, "count": args.count, "out_path": args.out}
            return _call(args.server, "post", "/descriptors", body)
        if args.command == "distance":
            body = {
                "a": _item_payload(args, "a"),
                "b": _item_payload(args, "b"),
                "config": _config_payload(args),
                "out_path": args.out,
            }
            return _call(args.server, "post", "/distance", body)
        if args.command == "matrix":
            body = {
                "manifest_path": args.manifest,
                "out_path": args.out,
                "config": _config_payload(args),
                "resume": args.resume,
            }
            return _call(args.server, "post", "/matrix", body)
        if args.command == "evaluate":
            body = {
                "matrix_path": args.matrix,
                "labels_path": args.labels,
                "emeasure_cutoff": args.emeasure_cutoff,
                "out_path": args.out,
            }
            return _call(args.server, "post", "/evaluate", body)
        if args.command == "timeseries":
            body = {
                "manifest_path": args.manifest,
                "config": _config_payload(args),
                "out_path": args.out,
            }
            return _call(args.server, "post", "/timeseries", body)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return USAGE_EXIT
    except ConfigError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return USAGE_EXIT
    except (InputDataError, OSError, ValueError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return INPUT_EXIT
    except Exception as exc:  # unexpected client-side failure
        sys.stderr.write(f"internal error: {exc}\n")
        return INTERNAL_EXIT
    sys.stderr.write("usage error: no command\n")
    return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
