"""Minimal tolerant HTML DOM built on html.parser.

Just enough tree to support page cleaning and table extraction:
elements with children, recursive find-all, decompose/unwrap, and text
collection. Malformed input never raises; unclosed or stray tags are
repaired best-effort (implicit closes for p/li/table rows, ignored
unmatched end tags).
"""

from __future__ import annotations

from html.parser import HTMLParser
from typing import Iterator, Sequence, Union

VOID_ELEMENTS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)

# Opening the key closes everything in the value set sitting on top of the
# open-element stack (HTML5-style implied end tags, heavily simplified).
_IMPLIED_CLOSES = {
    "p": frozenset({"p"}),
    "li": frozenset({"li"}),
    "dt": frozenset({"dt", "dd"}),
    "dd": frozenset({"dt", "dd"}),
    "tr": frozenset({"tr", "td", "th"}),
    "td": frozenset({"td", "th"}),
    "th": frozenset({"td", "th"}),
    "thead": frozenset({"tr", "td", "th", "thead", "tbody", "tfoot"}),
    "tbody": frozenset({"tr", "td", "th", "thead", "tbody", "tfoot"}),
    "tfoot": frozenset({"tr", "td", "th", "thead", "tbody", "tfoot"}),
    "option": frozenset({"option"}),
}

Node = Union["Element", str]


class Element:
    __slots__ = ("name", "attrs", "children", "parent")

    def __init__(self, name: str, attrs: dict[str, str] | None = None):
        self.name = name
        self.attrs = attrs or {}
        self.children: list[Node] = []
        self.parent: Element | None = None

    def __repr__(self) -> str:
        return f"<Element {self.name} children={len(self.children)}>"

    def append(self, node: Node) -> None:
        if isinstance(node, Element):
            node.parent = self
        self.children.append(node)

    def iter_elements(self) -> Iterator["Element"]:
        """All descendant elements in document (preorder) order."""
        for child in self.children:
            if isinstance(child, Element):
                yield child
                yield from child.iter_elements()

    def find_all(self, names: str | Sequence[str]) -> list["Element"]:
        wanted = {names} if isinstance(names, str) else set(names)
        return [el for el in self.iter_elements() if el.name in wanted]

    def decompose(self) -> None:
        """Remove this element and its subtree from the document."""
        if self.parent is not None:
            self.parent.children.remove(self)
            self.parent = None

    def unwrap(self) -> None:
        """Replace this element with its children, preserving order."""
        if self.parent is None:
            return
        idx = self.parent.children.index(self)
        for child in self.children:
            if isinstance(child, Element):
                child.parent = self.parent
        self.parent.children[idx : idx + 1] = self.children
        self.children = []
        self.parent = None

    def iter_text(self) -> Iterator[str]:
        for child in self.children:
            if isinstance(child, Element):
                yield from child.iter_text()
            else:
                yield child

    def get_text(self, strip: bool = False) -> str:
        if strip:
            return "".join(t.strip() for t in self.iter_text() if t.strip())
        return "".join(self.iter_text())

    def replace_text(self, transform) -> None:
        """Apply `transform` to every descendant text node in place."""
        for i, child in enumerate(self.children):
            if isinstance(child, Element):
                child.replace_text(transform)
            else:
                self.children[i] = transform(child)


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = Element("[document]")
        self.stack: list[Element] = [self.root]

    def handle_starttag(self, tag, attrs):
        closes = _IMPLIED_CLOSES.get(tag)
        if closes:
            while len(self.stack) > 1 and self.stack[-1].name in closes:
                self.stack.pop()
        element = Element(tag, dict(attrs))
        self.stack[-1].append(element)
        if tag not in VOID_ELEMENTS:
            self.stack.append(element)

    def handle_startendtag(self, tag, attrs):
        self.stack[-1].append(Element(tag, dict(attrs)))

    def handle_endtag(self, tag):
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].name == tag:
                del self.stack[i:]
                return
        # Unmatched end tag: ignore.

    def handle_data(self, data):
        if data:
            self.stack[-1].append(data)


def parse_html(html: str) -> Element:
    """Parse HTML into a document tree; never raises on malformed input."""
    builder = _TreeBuilder()
    try:
        builder.feed(html)
        builder.close()
    except Exception:
        pass  # keep whatever tree was built before the parser choked
    return builder.root


_BLOCK_ELEMENTS = frozenset(
    ["p", "div", "li", "h1", "h2", "h3", "h4", "h5", "h6", "br", "tr"]
)
_INVISIBLE_ELEMENTS = frozenset(["head", "title", "noscript", "template"])


def visible_text(tree: Element, skip_tables: bool = True) -> str:
    """Visible text with block elements separated onto their own lines.

    Table subtrees are skipped by default (they are extracted separately
    as Markdown). Lines are individually trimmed and blank lines dropped.
    """
    parts: list[str] = []

    def walk(el: Element) -> None:
        if el.name in _INVISIBLE_ELEMENTS:
            return
        if skip_tables and el.name == "table":
            return
        if el.name == "br":
            parts.append("\n")
            return
        block = el.name in _BLOCK_ELEMENTS
        if block:
            parts.append("\n")
        for child in el.children:
            if isinstance(child, Element):
                walk(child)
            else:
                parts.append(child)
        if block:
            parts.append("\n")

    walk(tree)
    lines = [line.strip() for line in "".join(parts).splitlines()]
    return "\n".join(line for line in lines if line)
