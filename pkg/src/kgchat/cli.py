"""Command-line entry points: one-shot questions, an interactive multi-turn
REPL, the HTTP service, and benchmark evaluation.

Without an explicit target the bundled desk-scale graph and scripted LLM
rules are used, so everything runs offline out of the box; point
``--endpoint`` plus a config file with an ``llm_backend.url`` at real
services for live runs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from kgchat import datafiles
from kgchat.evalharness import load_dialogue_benchmark, load_single_benchmark, run_benchmark
from kgchat.model import BackendSpec, EngineConfig, ModelError, load_config_file
from kgchat.orchestrator import Engine, TurnResult


def _add_target_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--endpoint", help="SPARQL endpoint URL")
    parser.add_argument("--store-file", help="N-Triples file for the embedded store")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--mode", choices=["multi_turn", "single_turn"], help="dialogue mode")
    parser.add_argument("--scripted", help="scripted LLM rules JSON file")
    parser.add_argument("--trace", help="directory for per-turn trace dumps")


def _build_config(args: argparse.Namespace) -> EngineConfig:
    config = load_config_file(args.config) if args.config else EngineConfig()
    if args.endpoint:
        config = replace(config, endpoint_url=args.endpoint, store_file="")
    elif args.store_file:
        config = replace(config, store_file=args.store_file, endpoint_url="")
    elif not config.endpoint_url and not config.store_file:
        config = replace(config, store_file=datafiles.desk_store_path())
    if args.mode:
        config = replace(config, system_mode=args.mode)
    if args.scripted:
        config = replace(
            config, llm_backend=BackendSpec(kind="scripted", rules_file=args.scripted)
        )
    elif config.llm_backend.kind == "http" and not config.llm_backend.url:
        # No live backend configured: fall back to the bundled scripted rules.
        config = replace(
            config, llm_backend=BackendSpec(kind="scripted", rules_file=datafiles.desk_rules_path())
        )
    if args.trace:
        config = replace(config, trace_dir=args.trace)
    return config


def _print_result(result: TurnResult) -> None:
    if result.error is not None:
        stage, message = result.error
        print(f"[{stage}] {message}", file=sys.stderr)
    if result.final_text:
        print(result.final_text)
    elif result.answers:
        for answer in result.answers:
            if answer.display_label:
                print(f"{answer.display_label}  ({answer.value})")
            else:
                print(answer.value)
    elif result.error is None:
        print("(no answer found in the knowledge graph)")
    if result.degraded_flags:
        print(f"flags: {', '.join(sorted(result.degraded_flags))}", file=sys.stderr)
    if result.trace_ref:
        print(f"trace: {result.trace_ref}", file=sys.stderr)


def cmd_ask(args: argparse.Namespace) -> int:
    config = _build_config(args)
    if args.reformulate:
        config = replace(config, reformulation_enabled=True)
    if args.translate:
        config = replace(config, translation_enabled=True)
    engine = Engine(config)
    state = engine.new_session()
    result = engine.process_turn(state, args.question, config)
    _print_result(result)
    return 1 if result.error is not None else 0


def cmd_repl(args: argparse.Namespace) -> int:
    config = _build_config(args)
    engine = Engine(config)
    state = engine.new_session()
    print("kgchat REPL; empty line or Ctrl-D exits.")
    while True:
        try:
            question = input("? ").strip()
        except (EOFError, KeyboardInterrupt):
            print()
            break
        if not question:
            break
        result = engine.process_turn(state, question, config)
        _print_result(result)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from kgchat.service import create_app

    config = _build_config(args)
    engine = Engine(config)
    app = create_app(engine, base_config=config, persist_dir=args.persist_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _build_config(args)
    if args.bench_mode == "dialogue":
        items = load_dialogue_benchmark(args.bench)
    else:
        items = load_single_benchmark(args.bench)
    if args.bench_mode == "single":
        config = replace(config, system_mode="single_turn")
    engine = Engine(config)
    report = run_benchmark(items, config, engine=engine, use_standalone=args.standalone)
    print(report.render_table())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(report.as_dict(), handle, indent=2)
        print(f"report written to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgchat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ask = sub.add_parser("ask", help="answer a single question")
    ask.add_argument("question")
    _add_target_args(ask)
    ask.add_argument("--reformulate", action="store_true", help="phrase the answer as a sentence")
    ask.add_argument("--translate", action="store_true", help="translate the question to English first")
    ask.set_defaults(func=cmd_ask)

    repl = sub.add_parser("repl", help="interactive multi-turn session")
    _add_target_args(repl)
    repl.set_defaults(func=cmd_repl)

    serve = sub.add_parser("serve", help="run the HTTP session API")
    _add_target_args(serve)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--persist-dir", help="append-only JSONL persistence directory")
    serve.set_defaults(func=cmd_serve)

    evaluate = sub.add_parser("eval", help="replay a benchmark and score it")
    evaluate.add_argument("--bench", required=True, help="benchmark JSON file")
    evaluate.add_argument(
        "--mode", dest="bench_mode", choices=["single", "dialogue"], default="single"
    )
    evaluate.add_argument("--out", help="write the JSON report here")
    evaluate.add_argument(
        "--standalone",
        action="store_true",
        help="ask the paired standalone questions in single-turn mode",
    )
    evaluate.add_argument("--endpoint")
    evaluate.add_argument("--store-file")
    evaluate.add_argument("--config")
    evaluate.add_argument("--scripted")
    evaluate.add_argument("--trace")
    # --mode is the benchmark shape here; the engine mode follows from it.
    evaluate.set_defaults(func=cmd_eval, mode=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
