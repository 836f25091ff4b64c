"""Cosine ranking of chunks and budgeted table selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import MarkdownTable, TextChunk
from .providers import EmbeddingProvider


class DimensionMismatchError(ValueError):
    pass


class ZeroVectorError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredChunk:
    chunk: TextChunk
    score: float


def cosine(q: Sequence[float], c: Sequence[float]) -> float:
    qa = np.asarray(q, dtype=np.float64)
    ca = np.asarray(c, dtype=np.float64)
    if qa.shape != ca.shape:
        raise DimensionMismatchError(f"dimensions differ: {qa.shape} vs {ca.shape}")
    qn = float(np.linalg.norm(qa))
    cn = float(np.linalg.norm(ca))
    if qn == 0.0 or cn == 0.0:
        raise ZeroVectorError("cosine is undefined for the zero vector")
    return float(np.dot(qa, ca) / (qn * cn))


def rank_by_cosine(query_vec: np.ndarray, vectors: np.ndarray) -> list[tuple[int, float]]:
    """(index, score) pairs sorted by score descending, index ascending on ties."""
    scores = [cosine(query_vec, vectors[i]) for i in range(vectors.shape[0])]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return [(i, scores[i]) for i in order]


def top_k_chunks(
    query: str,
    chunks: Sequence[TextChunk],
    k: int,
    provider: EmbeddingProvider,
) -> list[ScoredChunk]:
    """Top-k chunks by cosine similarity to the query.

    Embeddings are computed in one batched call per input set; ties are
    broken toward the earlier chunk index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not chunks:
        return []
    query_vec = provider.embed([query])[0]
    chunk_vecs = provider.embed([c.text for c in chunks])
    ranked = rank_by_cosine(query_vec, chunk_vecs)
    return [ScoredChunk(chunks[i], score) for i, score in ranked[:k]]


def rank_tables(
    query: str,
    tables: Sequence[MarkdownTable],
    provider: EmbeddingProvider,
) -> list[MarkdownTable]:
    if not tables:
        return []
    query_vec = provider.embed([query])[0]
    table_vecs = provider.embed([t.markdown for t in tables])
    return [tables[i] for i, _ in rank_by_cosine(query_vec, table_vecs)]


def budget_tables(
    tables: Sequence[MarkdownTable], char_budget: int
) -> list[MarkdownTable]:
    """Greedy prefix of `tables` whose concatenated length fits the budget.

    The table that crosses the budget is truncated at it (slice
    semantics), everything after is dropped.
    """
    if char_budget < 1:
        raise ValueError("char_budget must be >= 1")
    selected: list[MarkdownTable] = []
    used = 0
    for table in tables:
        remaining = char_budget - used
        if remaining <= 0:
            break
        if len(table.markdown) <= remaining:
            selected.append(table)
            used += len(table.markdown)
        else:
            selected.append(MarkdownTable(table.markdown[:remaining], table.source_page))
            break
    return selected


def select_tables(
    query: str,
    tables: Sequence[MarkdownTable],
    char_budget: int,
    provider: EmbeddingProvider,
    rank: bool = True,
) -> list[MarkdownTable]:
    """Rank tables against the query, then take the budgeted prefix.

    With rank=False the original order is kept, matching plain
    truncate-at-budget behavior.
    """
    if not tables:
        return []
    ordered = rank_tables(query, tables, provider) if rank else list(tables)
    return budget_tables(ordered, char_budget)
