"""Command-line entry point wiring all pipeline stages.

Subcommands: extract (page -> chunks/tables), classify (question
attributes), calc (expression evaluation), answer (dataset -> verdicts),
score (verdicts vs gold -> report), train-linear (fit the embedding
classifier). Offline mode uses the deterministic providers only; CI runs
offline exclusively.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import calculator, evalkit
from .attributes import (
    DEFAULT_EXAMPLES,
    FewShotExample,
    LinearClassifier,
    classify_icl,
    train_linear,
)
from .config import Config
from .ingest import WebPage, process_page
from .kg import EndpointRegistry, HttpKgApi
from .orchestrator import Providers, answer_question
from .providers import (
    HashedBagOfWordsEmbedder,
    RemoteEmbeddingProvider,
    RemoteGenerationProvider,
    ScriptedGenerator,
)

EXIT_OK = 0
EXIT_IO = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="hybridrag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="process one HTML page into chunks and tables")
    p.add_argument("--page", required=True, help="path to an HTML file")
    p.add_argument("--page-name", default=None, help="page name (defaults to file stem)")

    p = sub.add_parser("classify", help="predict a question attribute")
    p.add_argument("--query", required=True)
    p.add_argument("--attribute", choices=["dynamism", "domain"], default="dynamism")
    p.add_argument("--method", choices=["icl", "linear"], default="icl")
    p.add_argument("--script", help="scripted generator JSON (offline icl)")
    p.add_argument("--model", help="trained linear model JSON (linear)")
    p.add_argument("--examples", help="few-shot examples JSON [{query,label}...]")
    p.add_argument("--n-samples", type=int, default=None)

    p = sub.add_parser("calc", help="evaluate one restricted expression")
    p.add_argument("--expr", required=True)

    p = sub.add_parser("answer", help="answer a JSONL dataset into verdict JSONL")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--script", help="scripted generator JSON (offline)")
    p.add_argument("--config", help="config JSON file")
    p.add_argument("--offline", action="store_true", default=None)
    p.add_argument("--online", dest="offline", action="store_false")
    p.add_argument("--top-k", type=int, dest="top_k_chunks")
    p.add_argument("--table-budget", type=int, dest="table_budget_reasoning")
    p.add_argument("--calc-table-budget", type=int, dest="table_budget_calc")
    p.add_argument("--calc-always", action="store_true", default=None)
    p.add_argument("--no-table-rank", dest="table_rank", action="store_false", default=None)
    p.add_argument("--kg-mode", choices=["rule-based", "function-calling"])
    p.add_argument("--kg-endpoint")
    p.add_argument("--kg-registry", help="endpoint registry JSON (name/description/arity)")
    p.add_argument("--model-endpoint")
    p.add_argument("--workers", type=int, dest="worker_count")

    p = sub.add_parser("score", help="score prediction JSONL against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--report", help="write the report here (default stdout)")
    p.add_argument("--format", choices=["md", "csv"], default="md")

    p = sub.add_parser("train-linear", help="fit the linear attribute classifier")
    p.add_argument("--examples", required=True, help="JSON list of {query,label}")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    return parser


def _load_fewshot(path: str | None, attribute: str) -> list[FewShotExample]:
    if path is None:
        return list(DEFAULT_EXAMPLES[attribute])
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    return [FewShotExample(e["query"], e["label"]) for e in entries]


def _cmd_extract(args) -> int:
    path = Path(args.page)
    name = args.page_name or path.stem
    page = WebPage(page_name=name, html=path.read_text(encoding="utf-8", errors="replace"))
    chunks, tables = process_page(page)
    print(json.dumps(
        {
            "chunks": [dataclasses.asdict(c) for c in chunks],
            "tables": [dataclasses.asdict(t) for t in tables],
        },
        indent=2,
    ))
    return EXIT_OK


def _cmd_classify(args) -> int:
    config = Config()
    n_samples = args.n_samples or config.n_icl_samples
    if args.method == "linear":
        if not args.model:
            print("classify --method linear requires --model", file=sys.stderr)
            return EXIT_USAGE
        model = LinearClassifier.from_json(Path(args.model).read_text(encoding="utf-8"))
        label = model.predict(args.query, HashedBagOfWordsEmbedder())
    else:
        if args.script:
            generator = ScriptedGenerator.from_file(args.script)
        else:
            generator = RemoteGenerationProvider()
        examples = _load_fewshot(args.examples, args.attribute)
        label = classify_icl(args.query, args.attribute, examples, generator, n_samples)
    print(json.dumps({"query": args.query, "attribute": args.attribute, "label": label}))
    return EXIT_OK


def _cmd_calc(args) -> int:
    try:
        expr = calculator.parse_expr(args.expr)
        if expr is None:
            print("")
            return EXIT_OK
        result = calculator.eval_expr(expr)
    except calculator.CalcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(result.value)
    return EXIT_OK


def _make_providers(config: Config, script: str | None) -> Providers:
    if config.offline:
        if not script:
            raise ValueError("offline mode requires --script with canned completions")
        return Providers(HashedBagOfWordsEmbedder(), ScriptedGenerator.from_file(script))
    return Providers(
        RemoteEmbeddingProvider(config.model_endpoint),
        RemoteGenerationProvider(config.model_endpoint),
    )


def _cmd_answer(args) -> int:
    overrides = {
        name: getattr(args, name)
        for name in (
            "offline", "top_k_chunks", "table_budget_reasoning", "table_budget_calc",
            "calc_always", "table_rank", "kg_mode", "kg_endpoint", "model_endpoint",
            "worker_count",
        )
        if getattr(args, name, None) is not None
    }
    config = Config.load(args.config, overrides)
    providers = _make_providers(config, args.script)
    kg_api = HttpKgApi(config.kg_endpoint) if config.kg_endpoint else None
    kg_registry = EndpointRegistry.from_file(args.kg_registry) if args.kg_registry else None
    records = evalkit.load_dataset(args.dataset)

    def run_one(record):
        return answer_question(record.to_question(), providers, config, kg_api, kg_registry)

    with ThreadPoolExecutor(max_workers=config.worker_count) as pool:
        verdicts = list(pool.map(run_one, records))

    header = {
        "_header": {
            "config_digest": config.digest(),
            "embedder": providers.embedder.fingerprint,
            "generator": providers.generator.fingerprint,
        }
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for record, verdict in zip(records, verdicts):
            fh.write(json.dumps(
                {
                    "interaction_id": record.interaction_id,
                    "kind": verdict.kind,
                    "answer": verdict.answer,
                    "trace": [
                        {"stage": s.stage, "digest": s.digest} for s in verdict.trace
                    ],
                },
                sort_keys=True,
            ) + "\n")
    return EXIT_OK


def _load_predictions(path: str) -> dict[str, dict]:
    predictions = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "_header" in record:
                continue
            predictions[record["interaction_id"]] = record
    return predictions


def _cmd_score(args) -> int:
    from .orchestrator import Verdict

    records = evalkit.load_dataset(args.dataset)
    predictions = _load_predictions(args.predictions)
    judgements = []
    for record in records:
        pred = predictions.get(record.interaction_id)
        if pred is None:
            print(f"no prediction for {record.interaction_id}", file=sys.stderr)
            return EXIT_IO
        verdict = Verdict(pred["kind"], pred["answer"])
        judgements.append(evalkit.judge(verdict, record))
    report = evalkit.score(judgements, records)
    text = evalkit.render_report(report, args.format)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_train_linear(args) -> int:
    with open(args.examples, encoding="utf-8") as fh:
        entries = json.load(fh)
    examples = [FewShotExample(e["query"], e["label"]) for e in entries]
    model = train_linear(examples, HashedBagOfWordsEmbedder(), seed=args.seed)
    Path(args.out).write_text(model.to_json(), encoding="utf-8")
    print(f"wrote {args.out} ({len(model.labels)} classes)")
    return EXIT_OK


_COMMANDS = {
    "extract": _cmd_extract,
    "classify": _cmd_classify,
    "calc": _cmd_calc,
    "answer": _cmd_answer,
    "score": _cmd_score,
    "train-linear": _cmd_train_linear,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, json.JSONDecodeError, evalkit.MalformedRecordError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
