"""Hybrid retrieval-augmented question answering pipeline.

Web pages are reduced to text chunks and Markdown tables, ranked by
cosine similarity, enriched with knowledge-graph facts, calculator
results, and a reference-free direct answer, then routed through a
reasoning prompt into a scored verdict. All model access goes through
pluggable providers; the offline ones make every run deterministic.
"""

from .attributes import (
    FewShotExample,
    LinearClassifier,
    QuestionAttributes,
    classify_icl,
    is_question,
    train_linear,
)
from .calculator import CalcExpr, CalcResult, eval_expr, parse_expr, run_calculator
from .config import Config
from .evalkit import DatasetRecord, ScoreReport, judge, load_dataset, score
from .ingest import (
    MarkdownTable,
    TextChunk,
    WebPage,
    build_chunks,
    clean_html,
    extract_tables,
    is_empty_table,
    process_page,
    split_sentences,
)
from .kg import FunctionCall, KGFact, execute_plan, parse_call_plan, rule_based_plan
from .knowledge import DirectAnswer, extract_knowledge, parse_structured, render_structured
from .orchestrator import (
    Providers,
    Question,
    ReferenceBundle,
    Verdict,
    answer_question,
    build_reasoning_prompt,
    normalize_answer,
    summarize_fallback,
)
from .providers import (
    GenerationRequest,
    GenerationResult,
    HashedBagOfWordsEmbedder,
    ScriptBuilder,
    ScriptedGenerator,
    prompt_fingerprint,
)
from .retrieval import ScoredChunk, cosine, select_tables, top_k_chunks

__version__ = "0.1.0"

__all__ = [
    "CalcExpr", "CalcResult", "Config", "DatasetRecord", "DirectAnswer",
    "FewShotExample", "FunctionCall", "GenerationRequest", "GenerationResult",
    "HashedBagOfWordsEmbedder", "KGFact", "LinearClassifier", "MarkdownTable",
    "Providers", "Question", "QuestionAttributes", "ReferenceBundle",
    "ScoreReport", "ScoredChunk", "ScriptBuilder", "ScriptedGenerator",
    "TextChunk", "Verdict", "WebPage",
    "answer_question", "build_chunks", "build_reasoning_prompt", "classify_icl",
    "clean_html", "cosine", "eval_expr", "execute_plan", "extract_knowledge",
    "extract_tables", "is_empty_table", "is_question", "judge", "load_dataset",
    "normalize_answer", "parse_call_plan", "parse_expr", "parse_structured",
    "process_page", "prompt_fingerprint", "render_structured", "rule_based_plan",
    "run_calculator", "score", "select_tables", "split_sentences",
    "summarize_fallback", "top_k_chunks", "train_linear",
]
