import json
import random

import pytest

from hybridrag.evalkit import (
    DatasetRecord,
    JUDGE_CORRECT,
    JUDGE_HALLUCINATION,
    JUDGE_MISSING,
    MalformedRecordError,
    ScoreReport,
    judge,
    load_dataset,
    normalize_tokens,
    render_csv,
    render_markdown,
    render_report,
    score,
)
from hybridrag.orchestrator import KIND_ANSWERED, KIND_INVALID, KIND_MISSING, Verdict


def _write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


def _record(**kwargs):
    defaults = dict(interaction_id="id1", query="q?")
    defaults.update(kwargs)
    return DatasetRecord(**defaults)


class TestLoadDataset:
    def test_three_lines(self, tmp_path):
        path = tmp_path / "d.jsonl"
        _write_jsonl(path, [
            {"interaction_id": f"id{i}", "query": f"q{i}"} for i in range(3)
        ])
        records = load_dataset(str(path))
        assert [r.interaction_id for r in records] == ["id0", "id1", "id2"]

    def test_missing_query_reports_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        _write_jsonl(path, [
            {"interaction_id": "id0", "query": "q"},
            {"interaction_id": "id1"},
        ])
        with pytest.raises(MalformedRecordError) as err:
            load_dataset(str(path))
        assert err.value.line_number == 2

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"interaction_id": "a", "query": "q"}\n{broken\n')
        with pytest.raises(MalformedRecordError) as err:
            load_dataset(str(path))
        assert err.value.line_number == 2

    def test_duplicate_interaction_id_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        _write_jsonl(path, [
            {"interaction_id": "same", "query": "a"},
            {"interaction_id": "same", "query": "b"},
        ])
        with pytest.raises(MalformedRecordError):
            load_dataset(str(path))

    def test_five_pages_no_warning(self, tmp_path, caplog):
        path = tmp_path / "d.jsonl"
        pages = [{"page_name": f"p{i}", "page_url": "", "page_html": ""} for i in range(5)]
        _write_jsonl(path, [
            {"interaction_id": "a", "query": "q", "search_results": pages}
        ])
        with caplog.at_level("WARNING"):
            records = load_dataset(str(path))
        assert len(records[0].search_results) == 5
        assert "search results" not in caplog.text

    def test_odd_page_count_warns(self, tmp_path, caplog):
        path = tmp_path / "d.jsonl"
        _write_jsonl(path, [
            {"interaction_id": "a", "query": "q",
             "search_results": [{"page_name": "p"}] * 3}
        ])
        with caplog.at_level("WARNING"):
            load_dataset(str(path))
        assert "search results" in caplog.text

    def test_unknown_fields_preserved_in_extras(self, tmp_path):
        path = tmp_path / "d.jsonl"
        _write_jsonl(path, [
            {"interaction_id": "a", "query": "q", "split": 7, "source": "web"}
        ])
        record = load_dataset(str(path))[0]
        assert record.extras == {"split": 7, "source": "web"}

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"interaction_id": "a", "query": "q"}\n\n\n')
        assert len(load_dataset(str(path))) == 1


class TestJudge:
    def test_missing_verdict_is_missing(self):
        verdict = Verdict(KIND_MISSING, "I don't know")
        assert judge(verdict, _record(answer="anything")) == JUDGE_MISSING

    def test_case_insensitive_match(self):
        verdict = Verdict(KIND_ANSWERED, "barack obama")
        assert judge(verdict, _record(answer="Barack Obama")) == JUDGE_CORRECT

    def test_wrong_answer_is_hallucination(self):
        verdict = Verdict(KIND_ANSWERED, "george bush")
        assert judge(verdict, _record(answer="Barack Obama")) == JUDGE_HALLUCINATION

    def test_match_beyond_50_tokens_ignored(self):
        filler = " ".join(f"word{i}" for i in range(50))
        verdict = Verdict(KIND_ANSWERED, f"{filler} Barack Obama")
        assert judge(verdict, _record(answer="Barack Obama")) == JUDGE_HALLUCINATION

    def test_match_within_50_tokens_counts(self):
        filler = " ".join(f"word{i}" for i in range(47))
        verdict = Verdict(KIND_ANSWERED, f"{filler} Barack Obama trailing")
        assert judge(verdict, _record(answer="Barack Obama")) == JUDGE_CORRECT

    def test_subsequence_must_be_contiguous(self):
        verdict = Verdict(KIND_ANSWERED, "barack hussein obama")
        assert judge(verdict, _record(answer="Barack Obama")) == JUDGE_HALLUCINATION

    def test_edge_punctuation_stripped(self):
        verdict = Verdict(KIND_ANSWERED, "It was 'Barack Obama.'")
        assert judge(verdict, _record(answer="barack obama")) == JUDGE_CORRECT

    def test_alt_answers_count(self):
        verdict = Verdict(KIND_ANSWERED, "potus 44")
        record = _record(answer="Barack Obama", alt_answers=("POTUS 44",))
        assert judge(verdict, record) == JUDGE_CORRECT

    def test_invalid_verdict_vs_invalid_gold(self):
        verdict = Verdict(KIND_INVALID, "Invalid question")
        assert judge(verdict, _record(answer="Invalid question")) == JUDGE_CORRECT
        assert judge(verdict, _record(answer="invalid question!")) == JUDGE_CORRECT

    def test_invalid_verdict_vs_real_gold(self):
        verdict = Verdict(KIND_INVALID, "Invalid question")
        assert judge(verdict, _record(answer="Barack Obama")) == JUDGE_HALLUCINATION

    def test_empty_gold_never_correct(self):
        verdict = Verdict(KIND_ANSWERED, "some answer")
        assert judge(verdict, _record(answer="...")) == JUDGE_HALLUCINATION

    def test_trichotomy_on_random_inputs(self):
        rng = random.Random(5)
        kinds = [KIND_ANSWERED, KIND_MISSING, KIND_INVALID]
        for _ in range(200):
            kind = rng.choice(kinds)
            answer = {
                KIND_ANSWERED: "word " * rng.randint(1, 60),
                KIND_MISSING: "I don't know",
                KIND_INVALID: "Invalid question",
            }[kind].strip()
            verdict = Verdict(kind, answer)
            outcome = judge(verdict, _record(answer="word word"))
            assert outcome in (JUDGE_CORRECT, JUDGE_MISSING, JUDGE_HALLUCINATION)

    def test_casing_invariance_both_sides(self):
        record_lower = _record(answer="barack obama")
        record_upper = _record(answer="BARACK OBAMA")
        verdict_a = Verdict(KIND_ANSWERED, "Barack Obama")
        verdict_b = Verdict(KIND_ANSWERED, "bArAcK oBaMa")
        outcomes = {
            judge(v, r)
            for v in (verdict_a, verdict_b)
            for r in (record_lower, record_upper)
        }
        assert outcomes == {JUDGE_CORRECT}


class TestScore:
    def test_table_main_row(self):
        report = ScoreReport.from_fractions(0.297, 0.563, 0.139)
        assert report.score == pytest.approx(0.158, abs=1e-12)

    def test_table_baseline_row(self):
        report = ScoreReport.from_fractions(0.162, 0.0, 0.838)
        assert report.score == pytest.approx(-0.676, abs=1e-12)

    def test_all_missing_scores_zero(self):
        report = ScoreReport.from_judgements([JUDGE_MISSING] * 10)
        assert report.score == 0.0
        assert report.missing == 1.0

    def test_fractions_sum_to_one(self):
        judgements = [JUDGE_CORRECT] * 3 + [JUDGE_MISSING] * 5 + [JUDGE_HALLUCINATION] * 2
        report = ScoreReport.from_judgements(judgements)
        assert report.correct + report.missing + report.hallucination == pytest.approx(1.0)
        assert report.score == pytest.approx(report.correct - report.hallucination)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            ScoreReport.from_judgements([])

    def test_brute_force_identity(self):
        rng = random.Random(11)
        labels = [JUDGE_CORRECT, JUDGE_MISSING, JUDGE_HALLUCINATION]
        for _ in range(1000):
            judgements = [rng.choice(labels) for _ in range(rng.randint(1, 50))]
            report = ScoreReport.from_judgements(judgements)
            expected = (
                judgements.count(JUDGE_CORRECT) - judgements.count(JUDGE_HALLUCINATION)
            ) / len(judgements)
            assert report.score == pytest.approx(expected, abs=1e-12)

    def test_breakdowns_by_attribute(self):
        records = [
            _record(interaction_id="a", domain="movie", question_type="simple",
                    static_or_dynamic="static"),
            _record(interaction_id="b", domain="movie", question_type="simple",
                    static_or_dynamic="dynamic"),
            _record(interaction_id="c", domain="music", question_type="set",
                    static_or_dynamic="static"),
        ]
        judgements = [JUDGE_CORRECT, JUDGE_MISSING, JUDGE_HALLUCINATION]
        report = score(judgements, records)
        assert set(report.breakdowns) == {"domain", "question_type", "static_or_dynamic"}
        movie = report.breakdowns["domain"]["movie"]
        assert movie.n == 2
        assert movie.correct == pytest.approx(0.5)
        music = report.breakdowns["domain"]["music"]
        assert music.hallucination == pytest.approx(1.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            score([JUDGE_CORRECT], [_record(), _record(interaction_id="b")])


class TestReport:
    def test_markdown_contains_score_row(self):
        report = ScoreReport.from_fractions(0.297, 0.563, 0.139, n=999)
        text = render_markdown(report)
        assert "| score | 0.158 |" in text

    def test_csv_header(self):
        report = ScoreReport.from_fractions(0.1, 0.8, 0.1, n=10)
        text = render_csv(report)
        assert text.splitlines()[0] == "attribute,label,n,correct,missing,hallucination,score"

    def test_empty_breakdowns_overall_only(self):
        report = ScoreReport.from_fractions(0.5, 0.5, 0.0, n=2)
        lines = render_csv(report).splitlines()
        assert len(lines) == 2
        assert lines[1].startswith("overall,all,2,")

    def test_markdown_breakdown_tables_sorted(self):
        records = [
            _record(interaction_id="a", domain="zebra"),
            _record(interaction_id="b", domain="aardvark"),
        ]
        report = score([JUDGE_CORRECT, JUDGE_MISSING], records)
        text = render_markdown(report)
        assert text.index("| aardvark |") < text.index("| zebra |")

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            render_report(ScoreReport.from_fractions(1, 0, 0), "xml")
