"""Reference-free answers from the generator's own knowledge.

One zero-shot chain-of-thought call, no retrieval context, structured
START/END output. The parsed answer is only ever used as one reference
among several downstream; it is never trusted on its own.
"""

from __future__ import annotations

from dataclasses import dataclass

from .providers import GenerationProvider, GenerationRequest


class StructuredParseError(Exception):
    """The completion has no recognizable answer section."""


@dataclass(frozen=True)
class ParsedOutput:
    reasoning: str
    answer: str
    false_premise: bool | None
    degraded: bool = False


@dataclass(frozen=True)
class DirectAnswer:
    reasoning: str
    answer: str
    parse_ok: bool


DIRECT_SYSTEM_PROMPT = """You are provided with a question.
Your task is to answer the question with your reasoning process.
If you can't answer it directly based on your knowledge, respond with 'I don't know'.
If you think the premise of the question is wrong, for example, the question asks information about a person's husband, but you are sure that the person doesn't have one, you should answer with "Invalid question" without any other words.
You **MUST** think if the question has a false premise, then think the final answer.
You **MUST** generate the reasoning process before the answer. You **MUST** generate your output with the following format:

===START===
## Reasoning:
- Does it have a false premise?
<YOUR REASONING>
- What is the final answer?
<YOUR REASONING>
------
## Answer:
<YOUR FINAL ANSWER>
===END===

**IMPORTANT RULES**:
- If you can't answer it directly based on your knowledge, respond with 'I don't know'.
- Your generation **MUST** starts with "===START===" and ends with "===END===".
- `<YOUR FINAL ANSWER>` should be succinct, and use as few words as possible.
- `<YOUR REASONING>` should be a detailed reasoning process that explains how you arrived at your answer.
- If you think the premise of the question is wrong, for example, the question asks information about a person's husband, but you are sure that the person doesn't have one, you should answer with "Invalid question" without any other words.
Let's think step by step now!"""


def build_direct_prompt(query: str) -> GenerationRequest:
    """Zero-shot CoT prompt; the user message is the bare query and only
    a single sample is drawn."""
    return GenerationRequest(
        system_prompt=DIRECT_SYSTEM_PROMPT,
        user_prompt=query,
        n_samples=1,
        temperature=0.0,
        max_tokens=512,
    )


_MARKER_START = "===START==="
_MARKER_END = "===END==="
_SECTION_REASONING = "## Reasoning:"
_SECTION_ANSWER = "## Answer:"
_SECTION_FALSE_PREMISE = "## False Premise:"
_RULE = "------"


def _section_bounds(lines: list[str], marker: str) -> int | None:
    for i, line in enumerate(lines):
        if line.strip().startswith(marker):
            return i
    return None


def _collect(lines: list[str], start: int, marker: str, stops: tuple[str, ...]) -> str:
    first = lines[start].strip()[len(marker):]
    body = [first] if first.strip() else []
    for line in lines[start + 1:]:
        stripped = line.strip()
        if any(stripped.startswith(s) for s in stops):
            break
        body.append(line)
    return "\n".join(body).strip()


def parse_structured(completion: str) -> ParsedOutput:
    """Extract (reasoning, answer, false-premise flag) from a completion.

    The region between the first ===START=== and the following ===END===
    is parsed; missing markers degrade to whole-text parsing. Section
    markers match case-sensitively at line starts (after trimming).
    Raises StructuredParseError when there is no answer section at all.
    """
    degraded = False
    text = completion
    start = text.find(_MARKER_START)
    if start >= 0:
        text = text[start + len(_MARKER_START):]
        end = text.find(_MARKER_END)
        if end >= 0:
            text = text[:end]
        else:
            degraded = True
    else:
        degraded = True

    lines = text.splitlines()
    answer_at = _section_bounds(lines, _SECTION_ANSWER)
    if answer_at is None:
        raise StructuredParseError("no answer section in completion")

    reasoning = ""
    reasoning_at = _section_bounds(lines, _SECTION_REASONING)
    if reasoning_at is not None:
        reasoning = _collect(
            lines, reasoning_at, _SECTION_REASONING, (_RULE, _SECTION_ANSWER)
        )

    answer = _collect(lines, answer_at, _SECTION_ANSWER, (_SECTION_FALSE_PREMISE,))

    false_premise: bool | None = None
    premise_at = _section_bounds(lines, _SECTION_FALSE_PREMISE)
    if premise_at is not None:
        token = _collect(lines, premise_at, _SECTION_FALSE_PREMISE, ())
        first = token.split()[0].lower().rstrip(".,!") if token.split() else ""
        if first == "yes":
            false_premise = True
        elif first == "no":
            false_premise = False

    return ParsedOutput(reasoning, answer, false_premise, degraded)


def render_structured(
    reasoning: str, answer: str, false_premise: bool | None = None
) -> str:
    """Inverse of parse_structured for well-formed inputs; used to build
    script fixtures."""
    parts = [_MARKER_START, _SECTION_REASONING, reasoning, _RULE, _SECTION_ANSWER, answer]
    if false_premise is not None:
        parts += [_SECTION_FALSE_PREMISE, "yes" if false_premise else "no"]
    parts.append(_MARKER_END)
    return "\n".join(parts)


def extract_knowledge(query: str, provider: GenerationProvider) -> DirectAnswer:
    """Run the direct-answer call; parse failures never raise, they come
    back as parse_ok=False with the raw completion kept for inspection."""
    req = build_direct_prompt(query)
    completion = provider.generate(req).completions[0]
    try:
        parsed = parse_structured(completion)
    except StructuredParseError:
        return DirectAnswer(reasoning=completion, answer="", parse_ok=False)
    if not parsed.answer:
        return DirectAnswer(reasoning=completion, answer="", parse_ok=False)
    return DirectAnswer(reasoning=parsed.reasoning, answer=parsed.answer, parse_ok=True)
