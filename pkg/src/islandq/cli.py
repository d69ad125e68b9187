"""Command line surface: parse | chunk | query | eval | serve.

Commands call the HTTP service; by default an in-process application instance
answers, so no server needs to run, while --server points the same client at
a remote instance.  Results are a single JSON document on stdout, diagnostics
go to stderr.  Exit codes: 0 success, 1 load or transport errors, 2 when no
analysis (parse) or no consistent frame (query) was found.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

from .service import create_app


def _call(server: str | None, path: str, payload: dict):
    if server:
        resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=120.0)
        return resp.status_code, resp.json()

    async def go():
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://islandq") as client:
            return await client.post(path, json=payload)

    resp = asyncio.run(go())
    return resp.status_code, resp.json()


def _text_arg(value: str) -> str:
    return sys.stdin.read() if value == "-" else value


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grammar", required=True, help="grammar file path")
    p.add_argument("--threshold", type=float, default=0.0, help="minimum coverage ratio")
    p.add_argument("--max-gap", type=int, default=3, help="max skipped tokens between matches")
    p.add_argument("--server", default=None, help="base URL of a running server (default: in-process)")


def _frame_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--schema", required=True, help="frame schema JSON path")
    p.add_argument("--kb", required=True, help="knowledge base path")
    p.add_argument("--table", required=True, help="TSV table path")
    p.add_argument("--context", default=None, help="override the active context theory")
    p.add_argument("--top-k", type=int, default=5, help="hypotheses/frames to keep")
    p.add_argument("--wide-segments", action="store_true", help="chunk the whole utterance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="islandq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="best analyses of the start category")
    _common_flags(p)
    p.add_argument("--show-chart", action="store_true", help="include the full chart dump")
    p.add_argument("text", help="utterance, or - for stdin")

    p = sub.add_parser("chunk", help="markers, segments, chunks, hypotheses")
    _common_flags(p)
    p.add_argument("--top-k", type=int, default=5, help="hypotheses to keep")
    p.add_argument("--show-lattice", action="store_true", help="include the lattice dump")
    p.add_argument("--wide-segments", action="store_true", help="chunk the whole utterance")
    p.add_argument("text", help="utterance, or - for stdin")

    p = sub.add_parser("query", help="ranked frames and matching records")
    _common_flags(p)
    _frame_flags(p)
    p.add_argument("text", help="utterance, or - for stdin")

    p = sub.add_parser("eval", help="slot metrics over a gold corpus")
    _common_flags(p)
    _frame_flags(p)
    p.add_argument("--score-defaults", action="store_true", help="score defaulted slots too")
    p.add_argument("gold", help="gold corpus path (JSON lines)")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    if args.command == "parse":
        path = "/parse"
        payload = {
            "grammar": args.grammar,
            "text": _text_arg(args.text),
            "threshold": args.threshold,
            "max_gap": args.max_gap,
            "show_chart": args.show_chart,
        }
    elif args.command == "chunk":
        path = "/chunk"
        payload = {
            "grammar": args.grammar,
            "text": _text_arg(args.text),
            "threshold": args.threshold,
            "max_gap": args.max_gap,
            "top_k": args.top_k,
            "show_lattice": args.show_lattice,
            "wide_segments": args.wide_segments,
        }
    elif args.command == "query":
        path = "/query"
        payload = {
            "grammar": args.grammar,
            "schema_file": args.schema,
            "kb": args.kb,
            "table": args.table,
            "text": _text_arg(args.text),
            "context": args.context,
            "threshold": args.threshold,
            "max_gap": args.max_gap,
            "top_k": args.top_k,
            "wide_segments": args.wide_segments,
        }
    else:  # eval
        path = "/eval"
        payload = {
            "grammar": args.grammar,
            "schema_file": args.schema,
            "kb": args.kb,
            "table": args.table,
            "gold": args.gold,
            "context": args.context,
            "threshold": args.threshold,
            "max_gap": args.max_gap,
            "top_k": args.top_k,
            "wide_segments": args.wide_segments,
            "score_defaults": args.score_defaults,
        }

    try:
        status, data = _call(args.server, path, payload)
    except httpx.HTTPError as exc:
        print(f"islandq: {exc}", file=sys.stderr)
        return 1

    if status != 200:
        detail = data.get("error") or data.get("detail") or data
        print(f"islandq: {detail}", file=sys.stderr)
        return 1

    print(json.dumps(data, ensure_ascii=False, indent=2))
    if args.command == "parse" and not data.get("analyses"):
        return 2
    if args.command == "query" and data.get("best") is None:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
