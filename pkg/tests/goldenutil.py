"""Builds the scripted-provider fixture for the golden end-to-end run.

The script maps prompt fingerprints to canned completions, so it has to
be derived from the exact prompts the pipeline renders. This module
re-runs the deterministic reference-gathering stages (all pure) to
recover those prompts and attach the desired completions per question.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from hybridrag.attributes import DEFAULT_EXAMPLES, build_classify_prompt
from hybridrag.calculator import build_calc_prompt
from hybridrag.config import Config
from hybridrag.evalkit import DatasetRecord
from hybridrag.ingest import process_page
from hybridrag.knowledge import build_direct_prompt, render_structured
from hybridrag.orchestrator import (
    ReferenceBundle,
    build_reasoning_prompt,
    build_summarizer_prompt,
)
from hybridrag.providers import HashedBagOfWordsEmbedder, ScriptBuilder
from hybridrag.retrieval import budget_tables, rank_tables, top_k_chunks
from hybridrag.knowledge import DirectAnswer


@dataclass
class ScriptedBehavior:
    """What the scripted generator should say for one question."""

    dynamism_votes: list[str]
    domain_votes: list[str]
    direct: tuple[str, str] | None = None  # (reasoning, answer); None -> garbage
    calc_expressions: list[str] = field(default_factory=list)
    reasoning: tuple[str, str, bool] | None = None  # (reasoning, answer, false_premise)
    reasoning_raw: str | None = None  # overrides reasoning with an unparsable blob
    summary: str | None = None  # fallback summarizer completion


def _digit_or_domain(domain: str, query: str, config: Config) -> bool:
    if config.calc_always:
        return True
    return domain in ("finance", "sports") or any(ch.isdigit() for ch in query)


def build_script(
    records: list[DatasetRecord],
    behaviors: dict[str, ScriptedBehavior],
    config: Config | None = None,
) -> ScriptBuilder:
    config = config or Config()
    embedder = HashedBagOfWordsEmbedder()
    builder = ScriptBuilder()

    for record in records:
        behavior = behaviors[record.interaction_id]
        query = record.query
        builder.add_request(
            build_classify_prompt(query, "dynamism", DEFAULT_EXAMPLES["dynamism"], config.n_icl_samples),
            behavior.dynamism_votes,
        )
        builder.add_request(
            build_classify_prompt(query, "domain", DEFAULT_EXAMPLES["domain"], config.n_icl_samples),
            behavior.domain_votes,
        )

        majority = max(set(behavior.dynamism_votes), key=behavior.dynamism_votes.count)
        if majority == "dynamic":
            continue  # pipeline stops before any further generator call

        question = record.to_question()
        chunks, tables = [], []
        for page in question.pages:
            page_chunks, page_tables = process_page(
                page, config.sentence_char_cap, config.chunk_char_budget
            )
            chunks.extend(page_chunks)
            tables.extend(page_tables)
        scored = (
            top_k_chunks(query, chunks, config.top_k_chunks, embedder) if chunks else []
        )
        ranked = rank_tables(query, tables, embedder) if tables else []

        domain = max(set(behavior.domain_votes), key=behavior.domain_votes.count)
        calc_results = []
        if _digit_or_domain(domain, query, config):
            calc_tables = budget_tables(ranked, config.table_budget_calc)
            builder.add_request(
                build_calc_prompt(query, scored, calc_tables,
                                  config.table_budget_calc, config.calc_samples),
                behavior.calc_expressions or [""],
            )
            from hybridrag.calculator import CalcError, eval_expr, parse_expr

            seen = set()
            for source in behavior.calc_expressions:
                try:
                    expr = parse_expr(source)
                    if expr is None:
                        continue
                    result = eval_expr(expr)
                except CalcError:
                    continue
                key = (result.source, result.value)
                if key not in seen:
                    seen.add(key)
                    calc_results.append(result)

        if behavior.direct is not None:
            direct_completion = render_structured(*behavior.direct)
            direct = DirectAnswer(behavior.direct[0], behavior.direct[1], True)
        else:
            direct_completion = "garbled output with no sections"
            direct = DirectAnswer(direct_completion, "", False)
        builder.add_request(build_direct_prompt(query), [direct_completion])

        bundle = ReferenceBundle(
            query=query,
            query_time=record.query_time,
            chunks=tuple(scored),
            kg_facts=(),
            tables=tuple(budget_tables(ranked, config.table_budget_reasoning)),
            calc_results=tuple(calc_results),
            direct_answer=direct,
        )
        reasoning_req = build_reasoning_prompt(
            bundle, config.kg_char_cap, config.table_budget_reasoning
        )
        if behavior.reasoning_raw is not None:
            completion = behavior.reasoning_raw
        else:
            assert behavior.reasoning is not None
            reasoning, answer, false_premise = behavior.reasoning
            completion = render_structured(reasoning, answer, false_premise)
        builder.add_request(reasoning_req, [completion])

        if behavior.summary is not None:
            builder.add_request(
                build_summarizer_prompt(query, completion), [behavior.summary]
            )

    return builder
