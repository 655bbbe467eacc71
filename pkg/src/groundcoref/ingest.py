"""Turn raw page markup into annotation-ready documents.

The canonical ingest format is rendered HTML: anchor links carry the
entity targets (``href="/wiki/..."`` or a wikidata.org URL). QuAC-style
records arrive link-scrubbed, so their entities are harvested from the
companion Wikipedia page.

Pipeline per page: strip markup, extract the lead-section summary,
harvest entities from links, detect pronoun markables, and admit the
document only if the summary (or QuAC context) contains at least five
pronouns.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from urllib.parse import unquote

from .lexicon import PronounLexicon
from .model import Document, Entity, Markable, Section

# Content of these elements is dropped entirely (lists, tables, chrome).
_SKIPPED_ELEMENTS = {"ul", "ol", "dl", "li", "table", "script", "style", "head", "title"}
# These open/close a paragraph break in the output.
_BLOCK_ELEMENTS = {
    "p", "div", "h1", "h2", "h3", "h4", "h5", "h6",
    "section", "article", "blockquote", "tr",
}

# Bracketed citation markers left behind by reference rendering: [3], [a], [note 1].
_CITATION_RE = re.compile(r"\[(?:\d+|[a-z]|note \d+)\]", re.IGNORECASE)
# MediaWiki-style heading line (tolerated in otherwise-HTML input).
_WIKI_HEADING_RE = re.compile(r"^\s*={2,}[^=\n][^\n]*?={2,}\s*$", re.MULTILINE)
# Plain-text list bullet lines (marker plus whitespace, so "#1 seed" survives).
_BULLET_RE = re.compile(r"^[*#•]+\s")

_BREAK = "\x00"  # paragraph-break sentinel emitted at block boundaries

# Word tokens: letters/digits with at most one internal apostrophe group.
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:['’][A-Za-z0-9]+)?")

_WIKI_NAMESPACES = {
    "file", "image", "category", "special", "template", "help",
    "portal", "talk", "wikipedia", "media",
}


@dataclass(frozen=True)
class RawPage:
    page_id: str
    title: str
    markup: str
    kind: str = "wiki"  # wiki | quac


@dataclass(frozen=True)
class QuacRecord:
    """A context paragraph with ordered question/answer pairs.

    ``wiki_page_id`` names the companion page whose links supply the
    entity inventory (QuAC text itself is link-scrubbed).
    """

    record_id: str
    title: str
    context: str
    qas: tuple[tuple[str, str], ...]
    wiki_page_id: str | None = None


@dataclass
class IngestReport:
    """Structured skip/error log emitted alongside a batch ingest."""

    skipped: list[dict] = field(default_factory=list)
    malformed_links: dict[str, int] = field(default_factory=dict)

    def skip(self, page_id: str, reason: str) -> None:
        self.skipped.append({"page_id": page_id, "reason": reason})

    def malformed(self, page_id: str) -> None:
        self.malformed_links[page_id] = self.malformed_links.get(page_id, 0) + 1

    def lines(self) -> list[dict]:
        out = list(self.skipped)
        for page_id, count in sorted(self.malformed_links.items()):
            out.append({"page_id": page_id, "reason": "malformed_links", "count": count})
        return out


class _TextExtractor(HTMLParser):
    """Collects visible text, dropping list/table/script subtrees.

    Block-element boundaries emit a paragraph-break sentinel. Raw
    newlines inside a block element are ordinary whitespace; newlines in
    bare top-level text keep their paragraph-break meaning (so already
    stripped text passes through unchanged).
    """

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_stack: list[str] = []
        self._block_depth = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _SKIPPED_ELEMENTS:
            self._skip_stack.append(tag)
        elif tag == "sup" and any(k == "class" and v and "reference" in v for k, v in attrs):
            self._skip_stack.append(tag)
        elif not self._skip_stack:
            if tag == "br":
                self.parts.append(_BREAK)
            elif tag in _BLOCK_ELEMENTS:
                self.parts.append(_BREAK)
                self._block_depth += 1

    def handle_endtag(self, tag: str) -> None:
        if self._skip_stack and self._skip_stack[-1] == tag:
            self._skip_stack.pop()
        elif tag in _BLOCK_ELEMENTS and not self._skip_stack:
            self.parts.append(_BREAK)
            self._block_depth = max(0, self._block_depth - 1)

    def handle_data(self, data: str) -> None:
        if not self._skip_stack:
            if self._block_depth:
                data = data.replace("\r", " ").replace("\n", " ")
            self.parts.append(data)

    def text(self) -> str:
        return "".join(self.parts)


def _strip_once(markup: str) -> str:
    parser = _TextExtractor()
    parser.feed(markup)
    parser.close()
    text = parser.text()
    text = _CITATION_RE.sub("", text)
    paragraphs = []
    for para in re.split(r"[\x00\n]", text):
        para = para.strip()
        if not para or _BULLET_RE.match(para):
            continue
        paragraphs.append(re.sub(r"\s+", " ", para))
    return "\n".join(paragraphs)


def strip_markup(markup: str) -> str:
    """Strip tags, references, and lists; keep anchor text in place.

    Whitespace inside a paragraph collapses to single spaces and
    paragraphs are joined with newlines. Applied to a fixed point, so
    already-clean text passes through unchanged and the operation is
    idempotent even on adversarial input (entities decoding into
    tag-like text are stripped on the next round).
    """
    prev, cur = None, markup
    while cur != prev:
        prev, cur = cur, _strip_once(cur)
    return cur


def _heading_cut(markup: str) -> int:
    """Offset of the first section heading, or len(markup)."""
    cut = len(markup)
    m = re.search(r"<h[1-6][\s>]", markup, re.IGNORECASE)
    if m:
        cut = min(cut, m.start())
    m = _WIKI_HEADING_RE.search(markup)
    if m:
        cut = min(cut, m.start())
    return cut


def extract_summary(page: RawPage) -> Section | None:
    """Lead section of a wiki page: everything before the first heading.

    Returns None when the page has no lead paragraphs; callers skip the
    page and sample another.
    """
    if page.kind != "wiki":
        raise ValueError(f"extract_summary expects a wiki page, got kind={page.kind!r}")
    lead = page.markup[: _heading_cut(page.markup)]
    text = strip_markup(lead)
    if not text:
        return None
    return Section(index=0, kind="summary", text=text)


class _AnchorCollector(HTMLParser):
    """Records (href, anchor text) pairs, tolerating unbalanced tags."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.anchors: list[tuple[str, str]] = []
        self._href: str | None = None
        self._text: list[str] = []

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag == "a":
            self._flush()
            self._href = dict(attrs).get("href") or ""
            self._text = []

    def handle_endtag(self, tag: str) -> None:
        if tag == "a":
            self._flush()

    def handle_data(self, data: str) -> None:
        if self._href is not None:
            self._text.append(data)

    def _flush(self) -> None:
        if self._href is not None:
            self.anchors.append((self._href, "".join(self._text)))
        self._href = None
        self._text = []

    def close(self) -> None:
        super().close()
        self._flush()


_WIKIDATA_RE = re.compile(r"^(?:https?:)?//(?:www\.)?wikidata\.org/(?:wiki|entity)/(Q\d+)", re.IGNORECASE)
_WIKILINK_RE = re.compile(r"^(?:(?:https?:)?//[a-z]+\.wikipedia\.org)?/wiki/([^?]+)$", re.IGNORECASE)


def _normalize_wikilink(raw_path: str) -> str | None:
    """Percent-decoded page title with underscores as spaces; None if malformed."""
    path = raw_path.split("#", 1)[0]
    if not path:
        return None
    if re.search(r"%(?![0-9A-Fa-f]{2})", path):
        return None  # stray percent sign: undecodable
    title = unquote(path).replace("_", " ").strip()
    if not title:
        return None
    return title


def extract_entities(page: RawPage, report: IngestReport | None = None) -> list[Entity]:
    """Harvest one entity per distinct link target.

    The canonical name is the target page title (percent-decoded,
    underscores to spaces); every distinct anchor text becomes an alias.
    Wikipedia namespace links (File:, Category:, ...) are ignored;
    malformed targets are counted in the ingest report, never fatal.
    """
    collector = _AnchorCollector()
    collector.feed(page.markup)
    collector.close()

    order: list[tuple[str, str]] = []  # dedup keys, first-seen order
    names: dict[tuple[str, str], str] = {}
    targets: dict[tuple[str, str], str] = {}
    aliases: dict[tuple[str, str], list[str]] = {}

    for href, text in collector.anchors:
        href = href.strip()
        if not href:
            if report is not None:
                report.malformed(page.page_id)
            continue
        wd = _WIKIDATA_RE.match(href)
        if wd:
            qid = wd.group(1).upper()
            key = ("wikidata", qid)
            canonical = qid
            target = href.split("#", 1)[0]
        else:
            wl = _WIKILINK_RE.match(href)
            if not wl:
                if href.startswith("/wiki/") or "wikipedia.org" in href or "wikidata.org" in href:
                    if report is not None:
                        report.malformed(page.page_id)
                continue  # external link: not an entity target
            title = _normalize_wikilink(wl.group(1))
            if title is None:
                if report is not None:
                    report.malformed(page.page_id)
                continue
            ns = title.split(":", 1)[0].lower() if ":" in title else None
            if ns in _WIKI_NAMESPACES:
                continue
            key = ("wikilink", title.lower())
            canonical = title
            target = "/wiki/" + wl.group(1).split("#", 1)[0]
        if key not in names:
            order.append(key)
            names[key] = canonical
            targets[key] = target
            aliases[key] = []
        alias = re.sub(r"\s+", " ", text).strip()
        if alias and alias not in aliases[key] and alias != names[key]:
            aliases[key].append(alias)

    out = []
    for n, key in enumerate(order, start=1):
        out.append(
            Entity(
                id=f"e{n}",
                canonical_name=names[key],
                aliases=(names[key], *aliases[key]),
                provenance=key[0],
                target=targets[key],
            )
        )
    return out


def tokenize(text: str) -> list[tuple[int, int, str]]:
    """Word tokens as (start, end, surface); punctuation splits tokens,
    apostrophes do not."""
    return [(m.start(), m.end(), m.group()) for m in _TOKEN_RE.finditer(text)]


def detect_markables(sections: list[Section], lexicon: PronounLexicon) -> list[Markable]:
    """Find every token-bounded lexicon match, longest match first.

    Multi-word surfaces ("each other") win over their prefixes. A token
    with an apostrophe falls back to its pre-apostrophe part, so the
    pronoun inside a contraction ("it's") is still markable. Substrings
    never match: "she" is not found inside "shed".
    """
    out: list[Markable] = []
    counter = 0
    max_words = max(lexicon.max_words, 1)
    for section in sections:
        tokens = tokenize(section.text)
        i = 0
        while i < len(tokens):
            match_len = 0
            category = None
            for n in range(min(max_words, len(tokens) - i), 0, -1):
                words = " ".join(tokens[i + k][2].lower() for k in range(n))
                cat = lexicon.category(words)
                if cat is not None:
                    match_len, category = n, cat
                    break
            start = end = -1
            surface = ""
            if category is not None:
                start, end = tokens[i][0], tokens[i + match_len - 1][1]
                surface = section.text[start:end]
            else:
                token = tokens[i][2]
                if "'" in token or "’" in token:
                    head = re.split(r"['’]", token, 1)[0]
                    cat = lexicon.category(head)
                    if cat is not None:
                        category = cat
                        match_len = 1
                        start = tokens[i][0]
                        end = start + len(head)
                        surface = section.text[start:end]
            if category is not None:
                counter += 1
                out.append(
                    Markable(
                        id=f"m{counter}",
                        section_index=section.index,
                        span=(start, end),
                        surface=surface,
                        category=category,
                    )
                )
                i += match_len
            else:
                i += 1
    return out


def admit_document(doc: Document, *, minimum: int = 5) -> bool:
    """Admission filter: at least five pronouns in the summary/context.

    Markables inside question/answer sections do not count toward the
    threshold.
    """
    counted_sections = {s.index for s in doc.sections if s.kind in ("summary", "context")}
    count = sum(1 for m in doc.markables if m.section_index in counted_sections)
    return count >= minimum


def build_wiki_document(
    page: RawPage,
    lexicon: PronounLexicon,
    report: IngestReport | None = None,
) -> Document | None:
    """Summary extraction + entity harvest + markable detection.

    Returns None (and a report entry) when the page has no summary.
    Admission is the caller's final gate via admit_document.
    """
    summary = extract_summary(page)
    if summary is None:
        if report is not None:
            report.skip(page.page_id, "no_summary")
        return None
    entities = extract_entities(page, report)
    markables = detect_markables([summary], lexicon)
    return Document(
        id=page.page_id,
        source="wiki",
        title=page.title,
        sections=(summary,),
        markables=tuple(markables),
        entities=tuple(entities),
    )


_TITLE_RE = re.compile(r"<title[^>]*>(.*?)</title>", re.IGNORECASE | re.DOTALL)


def read_pages_dir(pages_dir: str | Path) -> dict[str, RawPage]:
    """Load ``*.html`` files as raw wiki pages. The page id is the file
    stem; the title comes from the <title> element when present."""
    pages = {}
    for path in sorted(Path(pages_dir).glob("*.html")):
        markup = path.read_text(encoding="utf-8")
        m = _TITLE_RE.search(markup)
        title = m.group(1).strip() if m else path.stem.replace("_", " ")
        pages[path.stem] = RawPage(page_id=path.stem, title=title, markup=markup, kind="wiki")
    return pages


def load_quac_records(path: str | Path) -> list[QuacRecord]:
    """Read QuAC-style records from a JSON list of objects with
    record_id, title, context, qas ([{question, answer}, ...]), and the
    companion wiki_page_id."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    records = []
    for item in raw:
        records.append(
            QuacRecord(
                record_id=item["record_id"],
                title=item.get("title", item["record_id"]),
                context=item["context"],
                qas=tuple((qa["question"], qa["answer"]) for qa in item.get("qas", [])),
                wiki_page_id=item.get("wiki_page_id"),
            )
        )
    return records


def build_quac_document(
    record: QuacRecord,
    wiki_page: RawPage | None,
    lexicon: PronounLexicon,
    report: IngestReport | None = None,
    *,
    markable_kinds: tuple[str, ...] = ("context", "question", "answer"),
) -> Document | None:
    """Sections are [context, q1, a1, q2, a2, ...]; entities come from the
    companion wiki page. ``markable_kinds`` is the deployment toggle for
    which section kinds are markable (all by default)."""
    if wiki_page is None:
        if report is not None:
            report.skip(record.record_id, "missing_companion_page")
        return None
    sections = [Section(index=0, kind="context", text=strip_markup(record.context))]
    for question, answer in record.qas:
        sections.append(Section(index=len(sections), kind="question", text=strip_markup(question)))
        sections.append(Section(index=len(sections), kind="answer", text=strip_markup(answer)))
    entities = extract_entities(wiki_page, report)
    markable_sections = [s for s in sections if s.kind in markable_kinds]
    markables = detect_markables(markable_sections, lexicon)
    return Document(
        id=record.record_id,
        source="quac",
        title=record.title,
        sections=tuple(sections),
        markables=tuple(markables),
        entities=tuple(entities),
    )
