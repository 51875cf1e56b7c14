"""Command line interface: ingest, analyze, query, serve and chat."""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .analysis import monthly_trend, symptom_document_counts, title_word_frequencies
from .config import load_config
from .corpus import filter_covid_docs, load_corpus
from .errors import MedGraphBotError
from .kg import build_graph, export_graph, import_graph
from .ner import EntityCategory, load_gazetteer

logger = logging.getLogger(__name__)


def _add_corpus_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True, help="corpus file or directory")
    parser.add_argument(
        "--corpus-format",
        choices=("jsonl", "cord19"),
        default="jsonl",
        help="corpus layout (default: jsonl)",
    )


def _add_output_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format",
        choices=("csv", "json"),
        default="csv",
        help="output format (default: csv)",
    )
    parser.add_argument("--out", help="write output to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medgraphbot",
        description="Literature knowledge graph and patient chat service.",
    )
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="build a knowledge graph from a corpus")
    _add_corpus_args(ingest)
    ingest.add_argument("--out", required=True, help="graph JSON output path")
    ingest.add_argument("--gazetteer", help="gazetteer CSV (default: bundled)")
    ingest.add_argument("--units", help="units CSV (default: bundled)")
    ingest.add_argument(
        "--covid-only",
        action="store_true",
        help="keep only coronavirus-related documents",
    )

    analyze = sub.add_parser("analyze", help="descriptive corpus statistics")
    analyze_sub = analyze.add_subparsers(dest="analysis", required=True)

    top = analyze_sub.add_parser(
        "top-symptoms", help="documents mentioning each known symptom"
    )
    _add_corpus_args(top)
    _add_output_args(top)
    top.add_argument(
        "--all-docs",
        action="store_true",
        help="count over the whole corpus, not only coronavirus documents",
    )

    trend = analyze_sub.add_parser(
        "trend", help="documents per month mentioning a term"
    )
    _add_corpus_args(trend)
    _add_output_args(trend)
    trend.add_argument("--term", required=True, help="term to track, e.g. fever")
    trend.add_argument("--all-docs", action="store_true")

    words = analyze_sub.add_parser(
        "title-words", help="most frequent content words in titles"
    )
    _add_corpus_args(words)
    _add_output_args(words)
    words.add_argument("--top", type=int, default=20)
    words.add_argument("--all-docs", action="store_true")

    query = sub.add_parser("query", help="query an exported knowledge graph")
    query_sub = query.add_subparsers(dest="query_kind", required=True)

    neighbors = query_sub.add_parser("neighbors", help="top co-occurring nodes")
    neighbors.add_argument("node")
    neighbors.add_argument("--graph", required=True, help="graph JSON path")
    neighbors.add_argument("-k", type=int, default=5)
    neighbors.add_argument("--category", choices=[c.value for c in EntityCategory])

    attribute = query_sub.add_parser(
        "attribute", help="attribute values reported for a drug"
    )
    attribute.add_argument("drug")
    attribute.add_argument("category", choices=[c.value for c in EntityCategory])
    attribute.add_argument("--graph", required=True, help="graph JSON path")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", help="JSON config file")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, help="override the configured port")

    chat = sub.add_parser("chat", help="talk to a running service")
    chat.add_argument("--patient", required=True, help="patient id")
    chat.add_argument("--server", default="http://127.0.0.1:8000")
    chat.add_argument("--message", help="send one message and exit")

    return parser


def _emit(rows: List[dict], fieldnames: List[str], args) -> None:
    """Write rows as CSV (default) or JSON to stdout or --out."""
    out = Path(args.out).open("w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        if args.format == "json":
            json.dump(rows, out, indent=2)
            out.write("\n")
        else:
            writer = csv.DictWriter(out, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
    finally:
        if args.out:
            out.close()


def _load_documents(args):
    result = load_corpus(args.corpus, fmt=args.corpus_format)
    if result.skipped:
        print(
            f"skipped {result.skipped} malformed record(s)",
            file=sys.stderr,
        )
    return result


def _cmd_ingest(args) -> int:
    result = _load_documents(args)
    documents = result.documents
    if args.covid_only:
        documents = filter_covid_docs(documents)
    gazetteer = load_gazetteer(
        path=Path(args.gazetteer) if args.gazetteer else None,
        units_path=Path(args.units) if args.units else None,
    )
    graph, report = build_graph(documents, gazetteer)
    export_graph(graph, args.out)
    print(f"documents: {report.documents}")
    print(f"skipped: {result.skipped}")
    print(f"sentences: {report.sentences}")
    print(f"entities: {report.entities}")
    print(f"nodes: {report.nodes}")
    print(f"cooccurrence edges: {report.cooccurrence_edges}")
    print(f"semantic edges: {report.semantic_edges}")
    print(f"attribute edges: {report.attribute_edges}")
    print(f"graph written to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    result = _load_documents(args)
    covid_only = not args.all_docs
    if args.analysis == "top-symptoms":
        gazetteer = load_gazetteer()
        counts = symptom_document_counts(
            result.documents, gazetteer, covid_only=covid_only
        )
        rows = [{"symptom": key, "documents": count} for key, count in counts]
        _emit(rows, ["symptom", "documents"], args)
    elif args.analysis == "trend":
        points = monthly_trend(result.documents, args.term, covid_only=covid_only)
        rows = [
            {"month": p.month, "documents": p.document_count} for p in points
        ]
        _emit(rows, ["month", "documents"], args)
    else:
        ranked = title_word_frequencies(
            result.documents, top_n=args.top, covid_only=covid_only
        )
        rows = [{"word": word, "count": count} for word, count in ranked]
        _emit(rows, ["word", "count"], args)
    return 0


def _cmd_query(args) -> int:
    graph = import_graph(args.graph)
    if args.query_kind == "neighbors":
        category = EntityCategory(args.category) if args.category else None
        ranked = graph.neighbors(args.node, k=args.k, category_filter=category)
        for key, prob in ranked:
            print(f"{key} {float(prob)}")
    else:
        rows = graph.query_attribute(args.drug, EntityCategory(args.category))
        for value, count, _ in rows:
            print(f"{value} (count {count})")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = load_config(args.config)
    if args.port is not None:
        config.port = args.port
    app = create_app(config)
    try:
        uvicorn.run(app, host=args.host, port=config.port, log_level="info")
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{config.port}: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        # the server process exits by itself when startup fails (e.g. the
        # port is taken); normalize that to this command's error exit code
        if not exc.code:
            return 0
        print(
            f"error: server failed to start on {args.host}:{config.port}",
            file=sys.stderr,
        )
        return 1
    return 0


def _cmd_chat(args) -> int:
    import httpx

    def send(message: str) -> int:
        reply = httpx.post(
            f"{args.server}/api/chat",
            json={"patient_id": args.patient, "message": message},
            timeout=30.0,
        )
        reply.raise_for_status()
        payload = reply.json()
        print(payload["reply"])
        return 0

    try:
        if args.message is not None:
            return send(args.message)
        print("Connected. Type a message, or 'quit' to leave.")
        for line in sys.stdin:
            message = line.strip()
            if not message:
                continue
            if message.lower() in ("quit", "exit"):
                break
            send(message)
        return 0
    except httpx.HTTPError as exc:
        print(f"error: chat request failed: {exc}", file=sys.stderr)
        return 1


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {
        "ingest": _cmd_ingest,
        "analyze": _cmd_analyze,
        "query": _cmd_query,
        "serve": _cmd_serve,
        "chat": _cmd_chat,
    }
    try:
        return handlers[args.command](args)
    except (MedGraphBotError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
