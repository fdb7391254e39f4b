"""Command line interface: load, query, repl, and serve subcommands."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import FactLinkError
from .planner import BASELINE, ENHANCED
from .session import Session, bundled_data_dir, bundled_knowledge_file


class _Parser(argparse.ArgumentParser):
    # usage problems exit with 1; load/query failures exit with 2
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="factlink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    load_cmd = sub.add_parser("load", help="load data and report counts")
    load_cmd.add_argument("data_dir")
    load_cmd.add_argument("knowledge_file")

    query_cmd = sub.add_parser("query", help="answer one sentence or raw goal")
    query_cmd.add_argument("sentence", nargs="?", default=None)
    query_cmd.add_argument("--data", default=None, help="data directory")
    query_cmd.add_argument("--knowledge", default=None, help="knowledge file")
    query_cmd.add_argument("--baseline", action="store_true", help="conventional answer only")
    query_cmd.add_argument("--goal", default=None, help="raw res(...) goal conjunction")
    query_cmd.add_argument(
        "--strategy",
        default="interpretive",
        help="goal strategy: direct, indirect, or interpretive",
    )
    query_cmd.add_argument("--dump-intent", action="store_true")
    query_cmd.add_argument("--sql", action="store_true", help="print the rendered SQL")
    query_cmd.add_argument("--explain", action="store_true", help="print provenance traces")
    query_cmd.add_argument("--format", choices=("text", "json"), default="text")

    repl_cmd = sub.add_parser("repl", help="interactive query loop")
    repl_cmd.add_argument("--data", default=None)
    repl_cmd.add_argument("--knowledge", default=None)

    serve_cmd = sub.add_parser("serve", help="run the HTTP service")
    serve_cmd.add_argument("--port", type=int, default=8000)
    serve_cmd.add_argument("--host", default="127.0.0.1")
    serve_cmd.add_argument("--data", default=None)
    serve_cmd.add_argument("--knowledge", default=None)

    return parser


def _load_session(data, knowledge) -> Session:
    session = Session()
    session.load(
        data if data is not None else bundled_data_dir(),
        knowledge if knowledge is not None else bundled_knowledge_file(),
    )
    return session


def _cmd_load(args) -> int:
    session = Session()
    session.load(args.data_dir, args.knowledge_file)
    payload = session.schema_payload()
    print(
        f"loaded {payload['fact_count']} facts over "
        f"{len(payload['ontology'])} concepts; "
        f"tools: {', '.join(payload['registered_tools']) or 'none'}"
    )
    return 0


def _print_table(table, fmt: str, result_id: str, explain: bool, session: Session) -> None:
    if fmt == "json":
        payload = table.to_payload()
        payload["result_id"] = result_id
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(table.to_text())
        for warning in table.warnings:
            print(f"warning: {warning}", file=sys.stderr)
    if explain:
        for row in table.rows:
            trace = session.explain(row.provenance_id)
            print(f"-- provenance {row.provenance_id}")
            print(json.dumps(trace, sort_keys=True, indent=2))


def _cmd_query(args) -> int:
    if args.goal is None and (args.sentence is None or not args.sentence.strip()):
        print("error: provide a sentence or --goal", file=sys.stderr)
        return 1
    session = _load_session(args.data, args.knowledge)
    mode = BASELINE if args.baseline else ENHANCED
    if args.goal is not None:
        result_id, table = session.ask_goal(args.goal, strategy=args.strategy)
        _print_table(table, args.format, result_id, args.explain, session)
        return 0
    result_id, outcome = session.ask(args.sentence, mode=mode, want_sql=args.sql)
    if args.dump_intent:
        intent = outcome.intent.to_dict() if outcome.intent else None
        print(json.dumps(intent, sort_keys=True, indent=2))
    if args.sql:
        print(outcome.sql or "-- no SQL rendering available")
    _print_table(outcome.table, args.format, result_id, args.explain, session)
    return 0


def _cmd_repl(args) -> int:
    session = _load_session(args.data, args.knowledge)
    mode = ENHANCED
    print("factlink repl; :baseline / :enhanced switch modes, :quit exits")
    while True:
        try:
            line = input(f"{mode}> ").strip()
        except EOFError:
            print()
            return 0
        if not line:
            continue
        if line in (":quit", ":q", ":exit"):
            return 0
        if line == ":baseline":
            mode = BASELINE
            continue
        if line == ":enhanced":
            mode = ENHANCED
            continue
        try:
            if line.startswith("res("):
                _, table = session.ask_goal(line)
            else:
                _, outcome = session.ask(line, mode=mode)
                table = outcome.table
            print(table.to_text())
            for warning in table.warnings:
                print(f"warning: {warning}", file=sys.stderr)
        except FactLinkError as exc:
            print(f"{exc.name}: {exc}", file=sys.stderr)


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    session = _load_session(args.data, args.knowledge)
    app = create_app(session)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "load": _cmd_load,
        "query": _cmd_query,
        "repl": _cmd_repl,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except FactLinkError as exc:
        print(f"{exc.name}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
