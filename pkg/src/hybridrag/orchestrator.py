"""End-to-end answer pipeline: references in, routed verdict out.

Route selection follows the system diagram: dynamic questions abstain
immediately; static ones gather chunks, tables, KG facts, calculation
results and a direct answer, then run the reasoning prompt. Parse
failures fall back to a summarization agent, and every failure path
degrades to the abstention verdict rather than raising.
"""

from __future__ import annotations

import hashlib
import logging
import re
import time
from dataclasses import dataclass
from typing import Sequence

from .attributes import (
    DEFAULT_EXAMPLES,
    FewShotExample,
    NoParsableLabelError,
    QuestionAttributes,
    TIE_FALLBACK,
    classify_icl,
)
from .calculator import CalcResult, run_calculator
from .config import Config
from .ingest import MarkdownTable, WebPage, process_page
from .kg import (
    EndpointRegistry,
    KGFact,
    KgApi,
    build_call_prompt,
    execute_plan,
    extract_entities,
    parse_call_plan,
    rule_based_plan,
)
from .knowledge import (
    DirectAnswer,
    ParsedOutput,
    StructuredParseError,
    extract_knowledge,
    parse_structured,
)
from .providers import EmbeddingProvider, GenerationProvider, GenerationRequest
from .retrieval import ScoredChunk, budget_tables, rank_tables, top_k_chunks

logger = logging.getLogger(__name__)

MISSING_ANSWER = "I don't know"
INVALID_ANSWER = "Invalid question"

KIND_ANSWERED = "answered"
KIND_MISSING = "missing"
KIND_INVALID = "invalid-question"


@dataclass(frozen=True)
class StageRecord:
    stage: str
    elapsed_ms: float
    digest: str


@dataclass(frozen=True)
class Verdict:
    kind: str
    answer: str
    trace: tuple[StageRecord, ...] = ()

    def __post_init__(self):
        if self.kind == KIND_MISSING and self.answer != MISSING_ANSWER:
            raise ValueError("missing verdicts must carry the canonical sentinel")
        if self.kind == KIND_INVALID and self.answer != INVALID_ANSWER:
            raise ValueError("invalid-question verdicts must carry the canonical sentinel")
        if self.kind == KIND_ANSWERED:
            if not self.answer or self.answer in (MISSING_ANSWER, INVALID_ANSWER):
                raise ValueError("answered verdicts need a non-sentinel answer")
        if self.kind not in (KIND_ANSWERED, KIND_MISSING, KIND_INVALID):
            raise ValueError(f"unknown verdict kind {self.kind!r}")

    def with_trace(self, trace: Sequence[StageRecord]) -> "Verdict":
        return Verdict(self.kind, self.answer, tuple(trace))


@dataclass(frozen=True)
class Question:
    interaction_id: str
    query: str
    query_time: str = ""
    pages: tuple[WebPage, ...] = ()


@dataclass
class Providers:
    embedder: EmbeddingProvider
    generator: GenerationProvider


@dataclass(frozen=True)
class ReferenceBundle:
    query: str
    query_time: str
    chunks: tuple[ScoredChunk, ...] = ()
    kg_facts: tuple[KGFact, ...] = ()
    tables: tuple[MarkdownTable, ...] = ()
    calc_results: tuple[CalcResult, ...] = ()
    direct_answer: DirectAnswer | None = None


REASONING_SYSTEM_PROMPT = """You are provided with a question and various references.
Your task is to answer the question with your reasoning process.
There are also some calculation results from another agent, which may be useful for you.
There is an answer from another agent which may be useful. It may have hallucination. You need to judge whether to trust it by yourself.
If the references do not contain the necessary information to answer the question and you can't answer it directly based on your knowledge, respond with 'I don't know'.
If you think the premise of the question is wrong, for example, the question asks information about a person's husband, but you are sure that the person doesn't have one, you should answer with "Invalid question" without any other words.
You **MUST** think if the question has a false premise, then think the final answer.
You **MUST** generate the reasoning process before the answer. You **MUST** generate your output with the following format:

===START===
## Reasoning:
- Does it have a false premise?
<YOUR REASONING>
- What is the final answer?
<YOUR REASONING>
- Can you answer it based on current knowledge?
<YOUR REASONING>
------
## Answer:
<YOUR FINAL ANSWER>
## False Premise:
<HAS_FALSE_PREMISE_OR_NOT>
===END===

**IMPORTANT RULES**:
- If the references do not contain the necessary information to answer the question and you can't answer it directly based on your knowledge, respond with 'I don't know'.
- Your generation **MUST** starts with "===START===" and ends with "===END===".
- `<YOUR FINAL ANSWER>` should be succinct, and use as few words as possible.
- `<YOUR REASONING>` should be a detailed reasoning process that explains how you arrived at your answer.
- `<HAS_FALSE_PREMISE_OR_NOT>` should be "yes" if the premise is wrong and the question is invalid, and "no" otherwise. It can **ONLY** be chosen from these two options.
- If you think the premise of the question is wrong, for example, the question asks information about a person's husband, but you are sure that the person doesn't have one, you should answer with "Invalid question" without any other words.
Let's think step by step now!"""

_REASONING_USER_RULES = """**Remember your IMPORTANT RULES**:
- If the references do not contain the necessary information to answer the question and you can't answer it directly based on your knowledge, respond with 'I don't know'.
- Your generation **MUST** starts with "===START===" and ends with "===END===".
- `<YOUR FINAL ANSWER>` should be succinct, and use as few words as possible.
- `<YOUR REASONING>` should be a detailed reasoning process that explains how you arrived at your answer.
- `<HAS_FALSE_PREMISE_OR_NOT>` should be "yes" if the question is invalid, and "no" otherwise. It can **ONLY** be chosen from these two options.
- If you think the premise of the question is wrong, for example, the question asks information about a person's husband, but you are sure that the person doesn't have one, you should answer with "Invalid question" without any other words.
"""

SUMMARIZER_SYSTEM_PROMPT = (
    "You are provided with a question and a reasoning process from another agent. "
    "Your task is to summarize the reasoning process and finally answer the "
    "question succinctly, using the fewest words possible."
)


def build_reasoning_prompt(
    bundle: ReferenceBundle,
    kg_char_cap: int = 1000,
    table_budget: int = 4000,
) -> GenerationRequest:
    """Render the reasoning prompt; sections appear only when non-empty,
    with the KG section sliced to `kg_char_cap` and the table section to
    `table_budget` characters."""
    user_message = ""
    if bundle.chunks:
        references = "# References \n"
        for scored in bundle.chunks:
            references += f"- {scored.chunk.text.strip()}\n"
        user_message += f"{references}\n------\n\n"
    if bundle.kg_facts:
        kg_references = ""
        user_message += "## Knowledge Graph references \n"
        for idx, fact in enumerate(bundle.kg_facts):
            kg_references += f"### KG Ref {idx + 1}: \n"
            kg_references += f"{fact.text}\n"
        kg_references = kg_references[:kg_char_cap]
        user_message += f"{kg_references}\n------\n\n"
    if bundle.tables:
        table_references = ""
        user_message += "## Table references \n"
        for idx, table in enumerate(bundle.tables):
            table_references += f"### Table {idx + 1}: \n"
            table_references += f"{table.markdown}\n"
        table_references = table_references[:table_budget]
        user_message += f"{table_references}\n------\n\n"
    if bundle.calc_results:
        expression_references = ""
        user_message += "## Possible useful calculation results \n"
        for idx, result in enumerate(bundle.calc_results):
            expression_references += f"### Calculation {idx + 1}: \n"
            expression_references += f"{result.source} = {result.value}\n"
        user_message += f"{expression_references}\n------\n\n"
    if bundle.direct_answer is not None and bundle.direct_answer.parse_ok:
        user_message += (
            f"# An answer from another agent:\n{bundle.direct_answer.answer}\n------\n\n"
        )
    user_message += _REASONING_USER_RULES
    user_message += "Using the references listed above, answer the following question: \n"
    user_message += f"Current Time: {bundle.query_time}\n"
    user_message += f"Question: {bundle.query}\n"
    user_message += "Let's think step by step now!\n"
    return GenerationRequest(
        system_prompt=REASONING_SYSTEM_PROMPT,
        user_prompt=user_message,
        n_samples=1,
        temperature=0.0,
        max_tokens=1024,
    )


_WHITESPACE_RE = re.compile(r"\s+")


def _collapse(text: str) -> str:
    return _WHITESPACE_RE.sub(" ", text).strip()


def normalize_answer(parsed: ParsedOutput) -> Verdict:
    """Turn a parsed reasoning output into a canonical verdict.

    False premises (flag or literal "Invalid question") route to
    invalid-question; any answer containing "I don't know" abstains with
    the byte-exact sentinel; everything else is an answered verdict with
    collapsed whitespace."""
    answer = parsed.answer.strip()
    if parsed.false_premise is True or answer.lower() == INVALID_ANSWER.lower():
        return Verdict(KIND_INVALID, INVALID_ANSWER)
    if "i don't know" in answer.lower():
        return Verdict(KIND_MISSING, MISSING_ANSWER)
    collapsed = _collapse(answer)
    if not collapsed:
        return Verdict(KIND_MISSING, MISSING_ANSWER)
    return Verdict(KIND_ANSWERED, collapsed)


def normalize_text_answer(text: str) -> Verdict:
    """Same routing rules applied to a bare (unstructured) answer text."""
    return normalize_answer(ParsedOutput(reasoning="", answer=text, false_premise=None))


def build_summarizer_prompt(query: str, reasoning_text: str) -> GenerationRequest:
    user_message = ""
    user_message += f"Question: {query}\n"
    user_message += f"# Useful Reasoning Process: \n{reasoning_text}\n-----\n\n"
    user_message += "Using the reasoning process above, answer the question."
    return GenerationRequest(
        system_prompt=SUMMARIZER_SYSTEM_PROMPT,
        user_prompt=user_message,
        n_samples=1,
        temperature=0.0,
        max_tokens=128,
    )


def summarize_fallback(
    query: str, reasoning_text: str, provider: GenerationProvider
) -> str:
    """Backup agent condensing an unparsable reasoning output into a bare
    answer. Provider failures propagate to the caller (which abstains)."""
    req = build_summarizer_prompt(query, reasoning_text)
    return provider.generate(req).completions[0].strip()


def _digest(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


class _Trace:
    def __init__(self):
        self.records: list[StageRecord] = []
        self._t0 = time.perf_counter()

    def add(self, stage: str, payload: str) -> None:
        now = time.perf_counter()
        self.records.append(StageRecord(stage, (now - self._t0) * 1000.0, _digest(payload)))
        self._t0 = now


_DIGIT_RE = re.compile(r"\d")


def _should_run_calculator(domain: str, query: str, config: Config) -> bool:
    if config.calc_always:
        return True
    return domain in ("finance", "sports") or bool(_DIGIT_RE.search(query))


def _predict_attributes(
    query: str,
    providers: Providers,
    config: Config,
    fewshot: dict[str, Sequence[FewShotExample]],
) -> QuestionAttributes:
    if config.attribute_method == "fixed":
        return QuestionAttributes(config.fixed_domain, config.fixed_dynamism, "fixed")
    labels = {}
    for attribute in ("dynamism", "domain"):
        try:
            labels[attribute] = classify_icl(
                query, attribute, fewshot[attribute], providers.generator,
                config.n_icl_samples,
            )
        except NoParsableLabelError:
            labels[attribute] = TIE_FALLBACK[attribute]
    return QuestionAttributes(labels["domain"], labels["dynamism"], "icl")


def answer_question(
    question: Question,
    providers: Providers,
    config: Config | None = None,
    kg_api: KgApi | None = None,
    kg_registry: EndpointRegistry | None = None,
    fewshot: dict[str, Sequence[FewShotExample]] | None = None,
) -> Verdict:
    """Run the full pipeline for one question.

    Never raises: attribute-prediction or retrieval failures, provider
    errors, and unparsable reasoning all degrade toward the abstention
    verdict. The returned trace has one record per executed stage.
    """
    config = config or Config()
    fewshot = fewshot or DEFAULT_EXAMPLES
    trace = _Trace()

    chunks, tables = [], []
    for page in question.pages:
        page_chunks, page_tables = process_page(
            page, config.sentence_char_cap, config.chunk_char_budget
        )
        chunks.extend(page_chunks)
        tables.extend(page_tables)
    trace.add("ingest", f"{len(chunks)} chunks|{len(tables)} tables")

    try:
        attrs = _predict_attributes(question.query, providers, config, fewshot)
    except Exception as exc:  # provider failure: abstain rather than guess
        logger.warning("attribute prediction failed: %s", exc)
        trace.add("attributes", f"error:{exc}")
        return Verdict(KIND_MISSING, MISSING_ANSWER).with_trace(trace.records)
    trace.add("attributes", f"{attrs.domain}|{attrs.dynamism}|{attrs.method}")

    if attrs.dynamism == "dynamic":
        return Verdict(KIND_MISSING, MISSING_ANSWER).with_trace(trace.records)

    try:
        scored = top_k_chunks(
            question.query, chunks, config.top_k_chunks, providers.embedder
        ) if chunks else []
        ranked_tables = (
            rank_tables(question.query, tables, providers.embedder)
            if (tables and config.table_rank)
            else list(tables)
        )
    except Exception as exc:
        logger.warning("retrieval failed: %s", exc)
        trace.add("retrieval", f"error:{exc}")
        return Verdict(KIND_MISSING, MISSING_ANSWER).with_trace(trace.records)
    bundle_tables = budget_tables(ranked_tables, config.table_budget_reasoning)
    trace.add("retrieval", "|".join(s.chunk.text for s in scored))

    kg_facts: list[KGFact] = []
    if kg_api is not None:
        registry = kg_registry or EndpointRegistry.default()
        try:
            entities = extract_entities(question.query, providers.generator)
            if config.kg_mode == "function-calling":
                req = build_call_prompt(question.query, question.query_time, registry)
                completion = providers.generator.generate(req).completions[0]
                plan = parse_call_plan(completion, registry)
            else:
                plan = rule_based_plan(
                    question.query, question.query_time, entities, attrs.domain
                )
            kg_facts = execute_plan(plan, kg_api)
        except Exception as exc:
            logger.warning("kg stage failed: %s", exc)
        trace.add("kg", "|".join(f.text for f in kg_facts))

    calc_results: list[CalcResult] = []
    if _should_run_calculator(attrs.domain, question.query, config):
        calc_tables = budget_tables(ranked_tables, config.table_budget_calc)
        try:
            calc_results = run_calculator(
                question.query, scored, calc_tables, providers.generator,
                config.table_budget_calc, config.calc_samples,
            )
        except Exception as exc:
            logger.warning("calculator failed: %s", exc)
        trace.add("calculator", "|".join(f"{r.source}={r.value}" for r in calc_results))

    direct: DirectAnswer | None = None
    try:
        direct = extract_knowledge(question.query, providers.generator)
        trace.add("direct-answer", direct.answer if direct.parse_ok else "unparsed")
    except Exception as exc:
        logger.warning("knowledge extraction failed: %s", exc)
        trace.add("direct-answer", f"error:{exc}")

    bundle = ReferenceBundle(
        query=question.query,
        query_time=question.query_time,
        chunks=tuple(scored),
        kg_facts=tuple(kg_facts),
        tables=tuple(bundle_tables),
        calc_results=tuple(calc_results),
        direct_answer=direct,
    )
    req = build_reasoning_prompt(bundle, config.kg_char_cap, config.table_budget_reasoning)
    try:
        completion = providers.generator.generate(req).completions[0]
    except Exception as exc:
        logger.warning("reasoning generation failed: %s", exc)
        trace.add("reasoning", f"error:{exc}")
        return Verdict(KIND_MISSING, MISSING_ANSWER).with_trace(trace.records)
    trace.add("reasoning", completion)

    try:
        parsed = parse_structured(completion)
        verdict = normalize_answer(parsed)
    except StructuredParseError:
        try:
            summary = summarize_fallback(question.query, completion, providers.generator)
        except Exception as exc:
            logger.warning("fallback summarizer failed: %s", exc)
            trace.add("fallback-summarizer", f"error:{exc}")
            return Verdict(KIND_MISSING, MISSING_ANSWER).with_trace(trace.records)
        trace.add("fallback-summarizer", summary)
        verdict = normalize_text_answer(summary)
    return verdict.with_trace(trace.records)
