import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridrag.providers import (
    EmptyInputError,
    GenerationRequest,
    HashedBagOfWordsEmbedder,
    ScriptBuilder,
    ScriptedGenerator,
    UnscriptedPromptError,
    prompt_fingerprint,
)


class TestHashedBagOfWords:
    def test_one_vector_per_text(self, embedder):
        out = embedder.embed(["abc"])
        assert out.shape == (1, 256)

    def test_same_text_same_vector(self, embedder):
        out = embedder.embed(["abc", "abc"])
        assert np.array_equal(out[0], out[1])

    def test_self_cosine_is_one(self, embedder):
        from hybridrag.retrieval import cosine

        a = embedder.embed(["x"])[0]
        b = embedder.embed(["x"])[0]
        assert abs(cosine(a, b) - 1.0) < 1e-9

    def test_empty_batch_rejected(self, embedder):
        with pytest.raises(EmptyInputError):
            embedder.embed([])

    def test_blank_text_rejected(self, embedder):
        with pytest.raises(EmptyInputError):
            embedder.embed(["ok", "   "])

    def test_punctuation_only_text_gets_unit_fallback(self, embedder):
        vec = embedder.embed(["?!"])[0]
        assert vec[0] == 1.0 and np.count_nonzero(vec) == 1

    def test_pure_across_instances(self):
        a = HashedBagOfWordsEmbedder().embed(["the quick brown fox"])
        b = HashedBagOfWordsEmbedder().embed(["the quick brown fox"])
        assert np.array_equal(a, b)

    @given(st.text(min_size=1).filter(lambda s: s.strip()))
    def test_vectors_are_finite_unit_norm(self, text):
        vec = HashedBagOfWordsEmbedder().embed([text])[0]
        assert np.all(np.isfinite(vec))
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-9

    def test_lexical_overlap_ranks_higher(self, embedder):
        from hybridrag.retrieval import cosine

        vecs = embedder.embed(["the eagles band members", "eagles members", "stock price"])
        assert cosine(vecs[0], vecs[1]) > cosine(vecs[0], vecs[2])


class TestScriptedGenerator:
    @pytest.fixture
    def generator(self):
        builder = ScriptBuilder()
        builder.add("sys", "user", ["a", "b", "c", "d", "e"])
        return builder.build()

    def test_returns_canned_completions(self, generator):
        result = generator.generate(GenerationRequest("sys", "user", n_samples=5))
        assert result.completions == ("a", "b", "c", "d", "e")

    def test_truncates_to_n_samples(self, generator):
        result = generator.generate(GenerationRequest("sys", "user", n_samples=1))
        assert result.completions == ("a",)

    def test_cycles_when_short(self, generator):
        result = generator.generate(GenerationRequest("sys", "user", n_samples=7))
        assert result.completions == ("a", "b", "c", "d", "e", "a", "b")

    def test_unscripted_prompt_fails_loudly(self, generator):
        with pytest.raises(UnscriptedPromptError):
            generator.generate(GenerationRequest("sys", "other", n_samples=1))

    def test_reproducible_from_file(self, generator, tmp_path):
        path = tmp_path / "script.json"
        builder = ScriptBuilder()
        builder.add("sys", "user", ["a", "b", "c", "d", "e"])
        builder.dump(path)
        loaded = ScriptedGenerator.from_file(path)
        req = GenerationRequest("sys", "user", n_samples=3)
        assert loaded.generate(req) == generator.generate(req)
        assert loaded.fingerprint == generator.fingerprint

    def test_script_fixture_format_is_fingerprint_to_list(self, tmp_path):
        path = tmp_path / "script.json"
        builder = ScriptBuilder()
        key = builder.add("s", "u", ["x"])
        builder.dump(path)
        raw = json.loads(path.read_text())
        assert raw == {key: ["x"]}
        assert key == prompt_fingerprint("s", "u")

    def test_empty_script_entry_rejected(self):
        with pytest.raises(ValueError):
            ScriptedGenerator({"00": []})


class TestGenerationRequest:
    def test_rejects_zero_samples(self):
        with pytest.raises(ValueError):
            GenerationRequest("s", "u", n_samples=0)

    def test_rejects_empty_prompts(self):
        with pytest.raises(ValueError):
            GenerationRequest("", "u")

    def test_fingerprint_distinguishes_prompt_roles(self):
        assert prompt_fingerprint("ab", "c") != prompt_fingerprint("a", "bc")
