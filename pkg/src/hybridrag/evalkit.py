"""Dataset loading and the +1/0/-1 truthfulness scoring protocol.

An answered verdict scores +1 when the normalized gold answer appears as
a contiguous token subsequence within the first 50 tokens of the
response, -1 otherwise; abstentions score 0. Reports break the numbers
down by domain, question type, and dynamism.
"""

from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass, field
from typing import Sequence

from .ingest import WebPage
from .orchestrator import KIND_INVALID, KIND_MISSING, Question, Verdict

logger = logging.getLogger(__name__)

JUDGE_CORRECT = "correct"
JUDGE_MISSING = "missing"
JUDGE_HALLUCINATION = "hallucination"

ANSWER_TOKEN_LIMIT = 50

BREAKDOWN_ATTRIBUTES = ("domain", "question_type", "static_or_dynamic")


class MalformedRecordError(Exception):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {reason}")


@dataclass(frozen=True)
class DatasetRecord:
    interaction_id: str
    query: str
    query_time: str = ""
    search_results: tuple[dict, ...] = ()
    answer: str = ""
    alt_answers: tuple[str, ...] = ()
    domain: str = ""
    question_type: str = ""
    static_or_dynamic: str = ""
    extras: dict = field(default_factory=dict)

    def to_question(self) -> Question:
        pages = tuple(
            WebPage(
                page_name=result.get("page_name", ""),
                url=result.get("page_url", ""),
                html=result.get("page_html", ""),
            )
            for result in self.search_results
        )
        return Question(self.interaction_id, self.query, self.query_time, pages)


_KNOWN_FIELDS = {
    "interaction_id", "query", "query_time", "search_results", "answer",
    "alt_answers", "domain", "question_type", "static_or_dynamic",
}


def load_dataset(path: str) -> list[DatasetRecord]:
    """Read a JSONL dataset; malformed lines raise with their line number,
    unexpected page counts only warn."""
    records: list[DatasetRecord] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(line_number, f"invalid JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise MalformedRecordError(line_number, "record is not an object")
            for required in ("interaction_id", "query"):
                if not isinstance(raw.get(required), str) or not raw.get(required):
                    raise MalformedRecordError(line_number, f"missing field {required!r}")
            if raw["interaction_id"] in seen_ids:
                raise MalformedRecordError(
                    line_number, f"duplicate interaction_id {raw['interaction_id']!r}"
                )
            seen_ids.add(raw["interaction_id"])
            search_results = raw.get("search_results", [])
            if not isinstance(search_results, list):
                raise MalformedRecordError(line_number, "search_results must be a list")
            if search_results and len(search_results) not in (5, 50):
                logger.warning(
                    "line %d: %d search results (tasks define 5 or 50)",
                    line_number, len(search_results),
                )
            records.append(
                DatasetRecord(
                    interaction_id=raw["interaction_id"],
                    query=raw["query"],
                    query_time=raw.get("query_time", ""),
                    search_results=tuple(search_results),
                    answer=raw.get("answer", ""),
                    alt_answers=tuple(raw.get("alt_answers", [])),
                    domain=raw.get("domain", ""),
                    question_type=raw.get("question_type", ""),
                    static_or_dynamic=raw.get("static_or_dynamic", ""),
                    extras={k: v for k, v in raw.items() if k not in _KNOWN_FIELDS},
                )
            )
    return records


def normalize_tokens(text: str) -> list[str]:
    """Lowercase whitespace tokens with edge punctuation stripped."""
    tokens = []
    for token in text.lower().split():
        token = token.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def _contains_subsequence(haystack: list[str], needle: list[str]) -> bool:
    if not needle or len(needle) > len(haystack):
        return False
    for start in range(len(haystack) - len(needle) + 1):
        if haystack[start : start + len(needle)] == needle:
            return True
    return False


def judge(verdict: Verdict, record: DatasetRecord) -> str:
    """Classify one verdict as correct / missing / hallucination.

    Only the first 50 whitespace tokens of an answered verdict count;
    matching is case- and edge-punctuation-insensitive."""
    if verdict.kind == KIND_MISSING:
        return JUDGE_MISSING
    golds = [record.answer, *record.alt_answers]
    if verdict.kind == KIND_INVALID:
        for gold in golds:
            if " ".join(normalize_tokens(gold)) == "invalid question":
                return JUDGE_CORRECT
        return JUDGE_HALLUCINATION
    truncated = " ".join(verdict.answer.split()[:ANSWER_TOKEN_LIMIT])
    answer_tokens = normalize_tokens(truncated)
    for gold in golds:
        gold_tokens = normalize_tokens(gold)
        if gold_tokens and _contains_subsequence(answer_tokens, gold_tokens):
            return JUDGE_CORRECT
    return JUDGE_HALLUCINATION


@dataclass
class ScoreReport:
    n: int
    correct: float
    missing: float
    hallucination: float
    score: float
    breakdowns: dict[str, dict[str, "ScoreReport"]] = field(default_factory=dict)

    @classmethod
    def from_fractions(
        cls, correct: float, missing: float, hallucination: float, n: int = 0
    ) -> "ScoreReport":
        """Build a report directly from published fractions (no judgement
        multiset; used to reproduce reported tables)."""
        return cls(n, correct, missing, hallucination, correct - hallucination)

    @classmethod
    def from_judgements(cls, judgements: Sequence[str]) -> "ScoreReport":
        if not judgements:
            raise ValueError("cannot score an empty judgement list")
        n = len(judgements)
        counts = {JUDGE_CORRECT: 0, JUDGE_MISSING: 0, JUDGE_HALLUCINATION: 0}
        for j in judgements:
            if j not in counts:
                raise ValueError(f"unknown judgement {j!r}")
            counts[j] += 1
        correct = counts[JUDGE_CORRECT] / n
        missing = counts[JUDGE_MISSING] / n
        hallucination = counts[JUDGE_HALLUCINATION] / n
        return cls(n, correct, missing, hallucination, correct - hallucination)


def score(
    judgements: Sequence[str], records: Sequence[DatasetRecord] | None = None
) -> ScoreReport:
    """Aggregate judgements into fractions, with per-attribute breakdowns
    when the matching records are provided."""
    if records is not None and len(records) != len(judgements):
        raise ValueError("judgements and records must have equal length")
    report = ScoreReport.from_judgements(judgements)
    if records is None:
        return report
    for attribute in BREAKDOWN_ATTRIBUTES:
        groups: dict[str, list[str]] = {}
        for judgement, record in zip(judgements, records):
            label = getattr(record, attribute) or "(unlabeled)"
            groups.setdefault(label, []).append(judgement)
        report.breakdowns[attribute] = {
            label: ScoreReport.from_judgements(group)
            for label, group in sorted(groups.items())
        }
    return report


def _fmt(fraction: float) -> str:
    return f"{fraction:.3f}"


def render_markdown(report: ScoreReport) -> str:
    lines = [
        "# Score report",
        "",
        "| metric | value |",
        "| --- | --- |",
        f"| n | {report.n} |",
        f"| correct | {_fmt(report.correct)} |",
        f"| missing | {_fmt(report.missing)} |",
        f"| hallucination | {_fmt(report.hallucination)} |",
        f"| score | {_fmt(report.score)} |",
    ]
    for attribute, groups in report.breakdowns.items():
        lines += [
            "",
            f"## By {attribute}",
            "",
            "| label | n | correct | missing | hallucination | score |",
            "| --- | --- | --- | --- | --- | --- |",
        ]
        for label in sorted(groups):
            sub = groups[label]
            lines.append(
                f"| {label} | {sub.n} | {_fmt(sub.correct)} | {_fmt(sub.missing)} "
                f"| {_fmt(sub.hallucination)} | {_fmt(sub.score)} |"
            )
    return "\n".join(lines) + "\n"


def render_csv(report: ScoreReport) -> str:
    rows = ["attribute,label,n,correct,missing,hallucination,score"]
    rows.append(
        f"overall,all,{report.n},{_fmt(report.correct)},{_fmt(report.missing)},"
        f"{_fmt(report.hallucination)},{_fmt(report.score)}"
    )
    for attribute, groups in report.breakdowns.items():
        for label in sorted(groups):
            sub = groups[label]
            rows.append(
                f"{attribute},{label},{sub.n},{_fmt(sub.correct)},{_fmt(sub.missing)},"
                f"{_fmt(sub.hallucination)},{_fmt(sub.score)}"
            )
    return "\n".join(rows) + "\n"


def render_report(report: ScoreReport, format: str = "md") -> str:
    if format == "md":
        return render_markdown(report)
    if format == "csv":
        return render_csv(report)
    raise ValueError(f"unknown report format {format!r}")
