import pytest
from hypothesis import given, settings, strategies as st

from hybridrag.knowledge import (
    DIRECT_SYSTEM_PROMPT,
    DirectAnswer,
    StructuredParseError,
    build_direct_prompt,
    extract_knowledge,
    parse_structured,
    render_structured,
)
from hybridrag.providers import GenerationRequest, GenerationResult


class TestBuildDirectPrompt:
    def test_user_prompt_is_bare_query(self):
        req = build_direct_prompt("who founded acme corp?")
        assert req.user_prompt == "who founded acme corp?"

    def test_single_sample(self):
        assert build_direct_prompt("q").n_samples == 1

    def test_template_markers_present(self):
        assert "===START===" in DIRECT_SYSTEM_PROMPT
        assert "===END===" in DIRECT_SYSTEM_PROMPT
        assert 'answer with "Invalid question"' in DIRECT_SYSTEM_PROMPT

    def test_no_reference_sections(self):
        req = build_direct_prompt("q")
        assert "# References" not in req.system_prompt
        assert "# References" not in req.user_prompt


WELL_FORMED = (
    "===START===\n## Reasoning:\n- ...\n------\n## Answer:\nParis\n"
    "## False Premise:\nno\n===END==="
)


class TestParseStructured:
    def test_full_template(self):
        parsed = parse_structured(WELL_FORMED)
        assert parsed.reasoning == "- ..."
        assert parsed.answer == "Paris"
        assert parsed.false_premise is False
        assert not parsed.degraded

    def test_missing_end_marker_degrades(self):
        parsed = parse_structured("===START===\n## Answer:\nI don't know")
        assert parsed.answer == "I don't know"
        assert parsed.degraded

    def test_missing_both_markers_degrades(self):
        parsed = parse_structured("## Answer:\n42")
        assert parsed.answer == "42"
        assert parsed.degraded

    def test_no_answer_section_fails(self):
        with pytest.raises(StructuredParseError):
            parse_structured("no sections at all")

    def test_false_premise_yes(self):
        text = render_structured("r", "anything", True)
        assert parse_structured(text).false_premise is True

    def test_false_premise_absent(self):
        text = render_structured("r", "answer", None)
        assert parse_structured(text).false_premise is None

    def test_false_premise_garbage_token(self):
        text = "===START===\n## Answer:\nx\n## False Premise:\nmaybe\n===END==="
        assert parse_structured(text).false_premise is None

    def test_multiline_answer(self):
        text = "===START===\n## Answer:\nline one\nline two\n===END==="
        assert parse_structured(text).answer == "line one\nline two"

    def test_same_line_answer(self):
        text = "===START===\n## Answer: inline answer\n===END==="
        assert parse_structured(text).answer == "inline answer"

    def test_markers_matched_at_line_start_after_trimming(self):
        text = "===START===\n   ## Answer:\n  padded  \n===END==="
        assert parse_structured(text).answer == "padded"

    def test_text_before_start_marker_ignored(self):
        text = "preamble chatter\n" + WELL_FORMED + "\ntrailing chatter\n## Answer:\nWRONG"
        assert parse_structured(text).answer == "Paris"


# Contents must be free of section-marker characters, and of the exotic
# line separators str.splitlines honors but "\n".join cannot reproduce.
_EXCLUDED = "#=-\r\x0b\x0c\x1c\x1d\x1e\x85  "
_content = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters=_EXCLUDED),
    min_size=1,
    max_size=80,
).map(str.strip).filter(bool)


class TestRoundTrip:
    @given(_content, _content, st.sampled_from([True, False, None]))
    @settings(max_examples=200)
    def test_render_parse_identity(self, reasoning, answer, false_premise):
        parsed = parse_structured(render_structured(reasoning, answer, false_premise))
        assert parsed.reasoning == reasoning
        assert parsed.answer == answer
        assert parsed.false_premise == false_premise
        assert not parsed.degraded


class _OneShot:
    fingerprint = "oneshot"

    def __init__(self, completion):
        self.completion = completion

    def generate(self, req: GenerationRequest) -> GenerationResult:
        return GenerationResult((self.completion,) * req.n_samples)


class _Exploder:
    fingerprint = "exploder"

    def generate(self, req):
        raise RuntimeError("backend down")


class TestExtractKnowledge:
    def test_well_formed(self):
        provider = _OneShot(render_structured("- thought", "Scott Derrickson", None))
        answer = extract_knowledge("q", provider)
        assert answer == DirectAnswer("- thought", "Scott Derrickson", True)

    def test_garbage_never_raises(self):
        answer = extract_knowledge("q", _OneShot("complete garbage"))
        assert answer.parse_ok is False
        assert answer.answer == ""
        assert "complete garbage" in answer.reasoning

    def test_invalid_question_passthrough(self):
        provider = _OneShot(render_structured("- premise wrong", "Invalid question", None))
        answer = extract_knowledge("q", provider)
        assert answer.answer == "Invalid question"
        assert answer.parse_ok

    def test_empty_answer_section_marks_parse_failed(self):
        answer = extract_knowledge("q", _OneShot("===START===\n## Answer:\n\n===END==="))
        assert answer.parse_ok is False
