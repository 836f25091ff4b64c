"""Embedding and generation backends behind one small interface.

Two offline implementations back the whole test suite: a hashed
bag-of-words embedder and a script-keyed generator. The remote variants
speak the sidecar wire protocol (POST /embed, POST /generate).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

DEFAULT_EMBED_DIM = 256
DEFAULT_TIMEOUT_S = 30.0


class ProviderError(Exception):
    """Base class for provider failures."""


class EmptyInputError(ProviderError):
    """embed() was called with no texts, or a text that trims to nothing."""


class UnscriptedPromptError(ProviderError):
    """The scripted generator has no entry for this prompt fingerprint."""

    def __init__(self, fingerprint: str, user_prompt: str):
        self.fingerprint = fingerprint
        head = user_prompt.strip().splitlines()[0][:80] if user_prompt.strip() else ""
        super().__init__(
            f"no scripted completions for fingerprint {fingerprint} (user prompt starts: {head!r})"
        )


class ProviderUnreachableError(ProviderError):
    """The remote endpoint could not be reached or answered with an error."""


@dataclass(frozen=True)
class GenerationRequest:
    system_prompt: str
    user_prompt: str
    n_samples: int = 1
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not self.system_prompt or not self.user_prompt:
            raise ValueError("prompts must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class GenerationResult:
    completions: tuple[str, ...]

    def __post_init__(self):
        if not self.completions:
            raise ValueError("completions must be non-empty")


class EmbeddingProvider(Protocol):
    dim: int
    fingerprint: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class GenerationProvider(Protocol):
    fingerprint: str

    def generate(self, req: GenerationRequest) -> GenerationResult: ...


def _token_hash(token: str) -> int:
    # Stable across runs/platforms, unlike builtin hash().
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _tokenize(text: str) -> list[str]:
    tokens, current = [], []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


class HashedBagOfWordsEmbedder:
    """Deterministic lexical embedder.

    Tokens are lowercased alphanumeric runs, hashed into `dim` buckets
    with a +/-1 sign drawn from a second hash, and the resulting vector
    is L2-normalized. A text with no tokens maps to the unit vector e1,
    so no embedding is ever the zero vector.
    """

    def __init__(self, dim: int = DEFAULT_EMBED_DIM):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim
        self.fingerprint = f"hashed-bow/{dim}/v1"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            raise EmptyInputError("embed() requires at least one text")
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            if not text.strip():
                raise EmptyInputError(f"text at index {row} is empty after trimming")
            for token in _tokenize(text):
                h = _token_hash(token)
                bucket = h % self.dim
                sign = 1.0 if (h >> 32) & 1 else -1.0
                out[row, bucket] += sign
            norm = float(np.linalg.norm(out[row]))
            if norm == 0.0:
                out[row, 0] = 1.0
            else:
                out[row] /= norm
        return out


def prompt_fingerprint(system_prompt: str, user_prompt: str) -> str:
    """Stable 64-bit hex key for a (system, user) prompt pair."""
    h = hashlib.blake2b(digest_size=8)
    h.update(system_prompt.encode("utf-8"))
    h.update(b"\x00")
    h.update(user_prompt.encode("utf-8"))
    return h.hexdigest()


class ScriptedGenerator:
    """Generator that replays canned completions from a script.

    The script maps prompt fingerprints (see :func:`prompt_fingerprint`)
    to lists of completion strings. Fewer entries than requested samples
    cycle; more truncate. An unknown fingerprint raises
    :class:`UnscriptedPromptError` so tests fail loudly instead of
    silently improvising.
    """

    def __init__(self, script: dict[str, list[str]]):
        for key, completions in script.items():
            if not isinstance(completions, list) or not all(isinstance(c, str) for c in completions):
                raise ValueError(f"script entry {key} must be a list of strings")
            if not completions:
                raise ValueError(f"script entry {key} is empty")
        self._script = {k: tuple(v) for k, v in script.items()}
        digest = hashlib.blake2b(
            json.dumps(script, sort_keys=True).encode("utf-8"), digest_size=8
        ).hexdigest()
        self.fingerprint = f"scripted/{digest}"

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "ScriptedGenerator":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def generate(self, req: GenerationRequest) -> GenerationResult:
        key = prompt_fingerprint(req.system_prompt, req.user_prompt)
        canned = self._script.get(key)
        if canned is None:
            raise UnscriptedPromptError(key, req.user_prompt)
        completions = tuple(canned[i % len(canned)] for i in range(req.n_samples))
        return GenerationResult(completions)


class ScriptBuilder:
    """Helper for assembling script fixtures from real prompt pairs."""

    def __init__(self):
        self.entries: dict[str, list[str]] = {}

    def add(self, system_prompt: str, user_prompt: str, completions: Sequence[str]) -> str:
        key = prompt_fingerprint(system_prompt, user_prompt)
        self.entries[key] = list(completions)
        return key

    def add_request(self, req: GenerationRequest, completions: Sequence[str]) -> str:
        return self.add(req.system_prompt, req.user_prompt, completions)

    def build(self) -> ScriptedGenerator:
        return ScriptedGenerator(self.entries)

    def dump(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.entries, fh, indent=2, sort_keys=True)
            fh.write("\n")


class RemoteEmbeddingProvider:
    """Client for the sidecar /embed endpoint."""

    def __init__(self, endpoint: str | None = None, timeout: float = DEFAULT_TIMEOUT_S):
        endpoint = endpoint or os.environ.get("MODEL_ENDPOINT")
        if not endpoint:
            raise ValueError("no endpoint given and MODEL_ENDPOINT is unset")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.fingerprint = f"remote-embed/{self.endpoint}"
        self._dim: int | None = None

    @property
    def dim(self) -> int:
        if self._dim is None:
            info = self._get("/info")
            self._dim = int(info["embed_dim"])
        return self._dim

    def _get(self, path: str) -> dict:
        import requests

        try:
            resp = requests.get(self.endpoint + path, timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()
        except requests.RequestException as exc:
            raise ProviderUnreachableError(f"GET {path} failed: {exc}") from exc

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        import requests

        if len(texts) == 0:
            raise EmptyInputError("embed() requires at least one text")
        try:
            resp = requests.post(
                self.endpoint + "/embed", json={"texts": list(texts)}, timeout=self.timeout
            )
            resp.raise_for_status()
            vectors = resp.json()["vectors"]
        except requests.RequestException as exc:
            raise ProviderUnreachableError(f"POST /embed failed: {exc}") from exc
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != len(texts):
            raise ProviderError(f"expected {len(texts)} vectors, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ProviderError("embedding response contains non-finite values")
        return arr


class RemoteGenerationProvider:
    """Client for the sidecar /generate endpoint."""

    def __init__(self, endpoint: str | None = None, timeout: float = DEFAULT_TIMEOUT_S):
        endpoint = endpoint or os.environ.get("MODEL_ENDPOINT")
        if not endpoint:
            raise ValueError("no endpoint given and MODEL_ENDPOINT is unset")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.fingerprint = f"remote-generate/{self.endpoint}"

    def generate(self, req: GenerationRequest) -> GenerationResult:
        import requests

        body = {
            "system": req.system_prompt,
            "user": req.user_prompt,
            "n": req.n_samples,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        try:
            resp = requests.post(self.endpoint + "/generate", json=body, timeout=self.timeout)
            resp.raise_for_status()
            completions = resp.json()["completions"]
        except requests.RequestException as exc:
            raise ProviderUnreachableError(f"POST /generate failed: {exc}") from exc
        if len(completions) != req.n_samples:
            raise ProviderError(
                f"expected {req.n_samples} completions, got {len(completions)}"
            )
        return GenerationResult(tuple(completions))
