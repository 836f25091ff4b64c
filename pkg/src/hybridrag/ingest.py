"""Web page processing: raw HTML to text chunks and Markdown tables.

A page is reduced to two reference forms. Tables become pipe-delimited
Markdown prefixed with the page name; everything else becomes sentence
chunks sized for retrieval (long sentences truncated, questions grouped
with their answers, the rest grouped in threes).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .attributes import is_question
from .htmldom import Element, parse_html, visible_text

SENTENCE_CHAR_CAP = 200
CHUNK_CHAR_BUDGET = 600

CHUNK_KIND_PLAIN = "plain"
CHUNK_KIND_QUESTION = "question-led"
CHUNK_KIND_TRUNCATED = "truncated-long-sentence"


@dataclass(frozen=True)
class WebPage:
    page_name: str
    url: str = ""
    html: str = ""


@dataclass(frozen=True)
class TextChunk:
    text: str
    source_page: str
    kind: str = CHUNK_KIND_PLAIN


@dataclass(frozen=True)
class MarkdownTable:
    markdown: str
    source_page: str


_UNICODE_ESCAPE_RE = re.compile(r"\\u[0-9a-fA-F]{4}|\\U[0-9a-fA-F]{8}")


def _decode_unicode_escapes(text: str) -> str:
    if "\\u" not in text and "\\U" not in text:
        return text
    return _UNICODE_ESCAPE_RE.sub(lambda m: chr(int(m.group(0)[2:], 16)), text)


def clean_html(html: str, remove_links: bool = False) -> Element:
    """Parse and denoise a page.

    Drops script/style/meta, footer and button subtrees, optionally
    unwraps anchors, and decodes literal \\uXXXX / \\UXXXXXXXX escape
    sequences left in text nodes. Malformed HTML is repaired best-effort.
    """
    tree = parse_html(html)
    for el in tree.find_all(["script", "style", "meta"]):
        el.decompose()
    if remove_links:
        for el in tree.find_all("a"):
            el.unwrap()
    for el in tree.find_all("footer"):
        el.decompose()
    for el in tree.find_all("button"):
        el.decompose()
    tree.replace_text(_decode_unicode_escapes)
    return tree


def is_empty_table(markdown: str) -> bool:
    """True iff nothing but pipes, dashes, and whitespace remains."""
    stripped = (
        markdown.replace("|", "")
        .replace("-", "")
        .replace(" ", "")
        .replace("\n", "")
        .strip()
    )
    stripped = "".join(stripped.split())
    return stripped == ""


def extract_tables(tree: Element, page_name: str) -> list[MarkdownTable]:
    """Convert each non-empty <table> into Markdown.

    Rows are pipe-joined cell texts; a --- separator is inserted after
    the first row (assumed header); tables that are empty under
    :func:`is_empty_table` are dropped.
    """
    tables = []
    for table in tree.find_all("table"):
        rows = []
        for tr in table.find_all("tr"):
            cells = tr.find_all(["th", "td"])
            rows.append("| " + " | ".join(c.get_text(strip=True) for c in cells) + " |")
        if rows:
            separator = "| " + " | ".join("---" for _ in rows[0].split("|")[1:-1]) + " |"
            rows.insert(1, separator)
        markdown = "\n".join(rows)
        if is_empty_table(markdown):
            continue
        tables.append(MarkdownTable(f"Page name: {page_name}\n{markdown}", page_name))
    return tables


_SENTENCE_QUOTES = "\"'“”‘’«"
_ABBREVIATIONS = frozenset(
    ["Mr.", "Mrs.", "Dr.", "St.", "vs.", "etc.", "e.g.", "i.e.", "No.", "U.S."]
)
_LAST_TOKEN_RE = re.compile(r"(\S+)$")


def split_sentences(text: str) -> list[str]:
    """Deterministic sentence segmentation.

    Splits after '.', '!' or '?' when followed by whitespace and then an
    uppercase letter, digit, or quote. A period is never a boundary when
    it ends one of the guarded abbreviations (Mr., U.S., e.g., ...).
    """
    boundaries = []
    n = len(text)
    for i, ch in enumerate(text):
        if ch not in ".!?":
            continue
        j = i + 1
        while j < n and text[j].isspace():
            j += 1
        if j == i + 1 or j == n:
            continue  # no whitespace after, or nothing follows
        nxt = text[j]
        if not (nxt.isupper() or nxt.isdigit() or nxt in _SENTENCE_QUOTES):
            continue
        if ch == ".":
            m = _LAST_TOKEN_RE.search(text[: i + 1])
            if m and m.group(1) in _ABBREVIATIONS:
                continue
        boundaries.append((i + 1, j))

    sentences = []
    start = 0
    for end, nxt in boundaries:
        piece = text[start:end].strip()
        if piece:
            sentences.append(piece)
        start = nxt
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def build_chunks(
    sentences: list[str],
    page_name: str,
    sentence_char_cap: int = SENTENCE_CHAR_CAP,
    chunk_char_budget: int = CHUNK_CHAR_BUDGET,
) -> list[TextChunk]:
    """Group sentences into retrieval chunks, preserving document order.

    Overlong sentences become standalone chunks truncated to exactly
    `sentence_char_cap` characters. A question starts its own chunk and
    absorbs following non-question sentences while the chunk stays within
    `chunk_char_budget`. Remaining contiguous runs are grouped in threes
    (a question or overlong sentence flushes the current run early).
    """
    chunks: list[TextChunk] = []
    plain_run: list[str] = []

    def flush_run():
        if plain_run:
            chunks.append(TextChunk(" ".join(plain_run), page_name, CHUNK_KIND_PLAIN))
            plain_run.clear()

    i = 0
    n = len(sentences)
    while i < n:
        sentence = sentences[i]
        if len(sentence) > sentence_char_cap:
            flush_run()
            chunks.append(
                TextChunk(sentence[:sentence_char_cap], page_name, CHUNK_KIND_TRUNCATED)
            )
            i += 1
        elif is_question(sentence):
            flush_run()
            text = sentence
            i += 1
            while i < n:
                nxt = sentences[i]
                if len(nxt) > sentence_char_cap or is_question(nxt):
                    break
                if len(text) + 1 + len(nxt) > chunk_char_budget:
                    break
                text = f"{text} {nxt}"
                i += 1
            chunks.append(TextChunk(text, page_name, CHUNK_KIND_QUESTION))
        else:
            candidate = len(sentence) if not plain_run else (
                len(" ".join(plain_run)) + 1 + len(sentence)
            )
            if plain_run and candidate > chunk_char_budget:
                flush_run()
            plain_run.append(sentence)
            if len(plain_run) == 3:
                flush_run()
            i += 1
    flush_run()
    return chunks


def process_page(
    page: WebPage,
    sentence_char_cap: int = SENTENCE_CHAR_CAP,
    chunk_char_budget: int = CHUNK_CHAR_BUDGET,
) -> tuple[list[TextChunk], list[MarkdownTable]]:
    """Full page pipeline: clean, extract tables, chunk the main text.

    Main text is the visible text of the cleaned tree minus table
    subtrees; sentence splitting runs per extracted line so block
    boundaries never glue into one sentence. Degenerate pages yield
    empty outputs rather than errors.
    """
    if not page.html.strip():
        return [], []
    tree = clean_html(page.html, remove_links=True)
    tables = extract_tables(tree, page.page_name)
    try:
        main_text = visible_text(tree, skip_tables=True)
    except Exception:
        main_text = tree.get_text()  # defensive fallback, extractor is total
    sentences = []
    for line in main_text.splitlines():
        sentences.extend(split_sentences(line))
    chunks = build_chunks(sentences, page.page_name, sentence_char_cap, chunk_char_budget)
    return chunks, tables
