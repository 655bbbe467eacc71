"""CoNLL-2012 coreference column format.

Only the coreference column is emitted faithfully; the other OntoNotes
columns are "-" placeholders. Each document section becomes one
sentence block (token indices restart per block), and cluster ids are
dense integers in order of first mention appearance. Mentions must
start and end on token boundaries of the whitespace/punctuation
tokenization; misaligned spans are a conversion error, not silently
repaired.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .clusters import MentionId
from .metrics import ClusterSet
from .model import Document

# Words (with internal apostrophes) or single punctuation marks.
_CONLL_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:['’][A-Za-z0-9]+)?|[^\sA-Za-z0-9]")

_PLACEHOLDER_COLUMNS = 7  # POS .. named-entity columns, all "-"


class ConllError(ValueError):
    pass


@dataclass(frozen=True)
class ConllToken:
    sentence_index: int
    token_index: int
    word: str
    coref: str  # "-" or bracket notation like "(3", "3)", "(3)"


@dataclass(frozen=True)
class ConllDocument:
    document_key: str
    part: int
    tokens: tuple[ConllToken, ...]

    def render(self) -> str:
        lines = [f"#begin document ({self.document_key}); part {self.part:03d}"]
        prev_sentence = 0
        for token in self.tokens:
            if token.sentence_index != prev_sentence:
                lines.append("")
                prev_sentence = token.sentence_index
            columns = [
                self.document_key,
                str(self.part),
                str(token.token_index),
                token.word,
                *(["-"] * _PLACEHOLDER_COLUMNS),
                token.coref,
            ]
            lines.append("\t".join(columns))
        lines.append("#end document")
        return "\n".join(lines) + "\n"


def conll_tokenize(text: str) -> list[tuple[int, int, str]]:
    return [(m.start(), m.end(), m.group()) for m in _CONLL_TOKEN_RE.finditer(text)]


def _token_range(
    tokens: list[tuple[int, int, str]], start: int, end: int
) -> tuple[int, int] | None:
    """Token indices [first, last] covering [start, end) exactly, or None."""
    first = last = None
    for i, (ts, te, _) in enumerate(tokens):
        if ts == start:
            first = i
        if te == end:
            last = i
    if first is None or last is None or first > last:
        return None
    return first, last


def to_conll(doc: Document, clusters: ClusterSet, *, part: int = 0) -> ConllDocument:
    """Emit the document's tokens with the coref column for the given
    mention partition. Cluster ids are assigned by first mention
    appearance in document order."""
    section_tokens = [conll_tokenize(s.text) for s in doc.sections]

    mention_clusters: list[tuple[MentionId, int]] = []
    for i, cluster in enumerate(clusters):
        for mention in cluster:
            if mention.document_id != doc.id:
                raise ConllError(f"mention {mention} does not belong to document {doc.id}")
            if mention.section_index < 0 or mention.section_index >= len(doc.sections):
                raise ConllError(f"mention {mention} points outside the document")
            mention_clusters.append((mention, i))

    mention_clusters.sort(key=lambda mc: (mc[0].section_index, mc[0].char_start, mc[0].char_end))
    dense_ids: dict[int, int] = {}
    for _, raw_id in mention_clusters:
        if raw_id not in dense_ids:
            dense_ids[raw_id] = len(dense_ids)

    opens: dict[tuple[int, int], list[tuple[int, int]]] = {}  # (sec, token) -> [(end_token, id)]
    closes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    singles: dict[tuple[int, int], list[int]] = {}
    misaligned = []
    for mention, raw_id in mention_clusters:
        tokens = section_tokens[mention.section_index]
        span = _token_range(tokens, mention.char_start, mention.char_end)
        if span is None:
            misaligned.append(mention)
            continue
        first, last = span
        cid = dense_ids[raw_id]
        if first == last:
            singles.setdefault((mention.section_index, first), []).append(cid)
        else:
            opens.setdefault((mention.section_index, first), []).append((last, cid))
            closes.setdefault((mention.section_index, last), []).append((first, cid))
    if misaligned:
        spans = ", ".join(f"({m.section_index},{m.char_start},{m.char_end})" for m in misaligned)
        raise ConllError(f"mention spans not aligned to token boundaries: {spans}")

    out: list[ConllToken] = []
    for sec_index, tokens in enumerate(section_tokens):
        for t_index, (_, _, word) in enumerate(tokens):
            parts = []
            # outermost mentions open first; closes mirror in reverse
            for last, cid in sorted(opens.get((sec_index, t_index), []), key=lambda x: (-x[0], x[1])):
                parts.append(f"({cid}")
            for cid in sorted(singles.get((sec_index, t_index), [])):
                parts.append(f"({cid})")
            for first, cid in sorted(closes.get((sec_index, t_index), []), key=lambda x: (-x[0], x[1])):
                parts.append(f"{cid})")
            coref = "|".join(parts) if parts else "-"
            out.append(ConllToken(sec_index, t_index, word, coref))
    return ConllDocument(document_key=doc.id, part=part, tokens=tuple(out))


_COREF_PART_RE = re.compile(r"^(\()?(\d+)(\))?$")


def parse_conll(data: bytes | str) -> list[ConllDocument]:
    """Parse one or more documents from column text. Unbalanced brackets
    and malformed rows raise with the offending line number."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    docs: list[ConllDocument] = []
    key: str | None = None
    part = 0
    tokens: list[ConllToken] = []
    sentence = 0
    saw_row_in_sentence = False

    for lineno, line in enumerate(data.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("#begin document"):
            if key is not None:
                raise ConllError(f"line {lineno}: nested #begin document")
            m = re.match(r"#begin document \((.*)\); part (\d+)", stripped)
            if not m:
                raise ConllError(f"line {lineno}: malformed #begin line")
            key, part = m.group(1), int(m.group(2))
            tokens, sentence, saw_row_in_sentence = [], 0, False
            continue
        if stripped == "#end document":
            if key is None:
                raise ConllError(f"line {lineno}: #end without #begin")
            docs.append(ConllDocument(document_key=key, part=part, tokens=tuple(tokens)))
            key = None
            continue
        if key is None:
            if stripped:
                raise ConllError(f"line {lineno}: row outside any document")
            continue
        if not stripped:
            if saw_row_in_sentence:
                sentence += 1
                saw_row_in_sentence = False
            continue
        columns = line.split("\t") if "\t" in line else line.split()
        if len(columns) < 5:
            raise ConllError(f"line {lineno}: expected at least 5 columns, got {len(columns)}")
        tokens.append(
            ConllToken(
                sentence_index=sentence,
                token_index=int(columns[2]),
                word=columns[3],
                coref=columns[-1],
            )
        )
        saw_row_in_sentence = True
    if key is not None:
        raise ConllError("unterminated document: missing #end document")
    return docs


def _clusters_from_tokens(
    conll_doc: ConllDocument, doc: Document | None
) -> ClusterSet:
    """Rebuild mention spans from bracket notation.

    With the original document, char offsets come from its tokenization;
    without it, sections are reconstructed as space-joined tokens and
    offsets refer to that text.
    """
    sentences: dict[int, list[ConllToken]] = {}
    for token in conll_doc.tokens:
        sentences.setdefault(token.sentence_index, []).append(token)

    doc_id = doc.id if doc is not None else conll_doc.document_key
    clusters: dict[int, set[MentionId]] = {}
    for sec_index, sent_tokens in sorted(sentences.items()):
        if doc is not None:
            if sec_index >= len(doc.sections):
                raise ConllError(f"sentence {sec_index} outside document {doc.id}")
            spans = conll_tokenize(doc.sections[sec_index].text)
            if len(spans) != len(sent_tokens):
                raise ConllError(
                    f"sentence {sec_index}: {len(sent_tokens)} rows vs {len(spans)} document tokens"
                )
            bounds = [(s, e) for s, e, _ in spans]
        else:
            bounds = []
            pos = 0
            for token in sent_tokens:
                bounds.append((pos, pos + len(token.word)))
                pos += len(token.word) + 1

        open_stacks: dict[int, list[int]] = {}
        for i, token in enumerate(sent_tokens):
            if token.coref == "-":
                continue
            for piece in token.coref.split("|"):
                m = _COREF_PART_RE.match(piece)
                if not m:
                    raise ConllError(f"malformed coref cell {token.coref!r} in sentence {sec_index}")
                opened, cid_str, closed = m.groups()
                cid = int(cid_str)
                if opened and closed:
                    clusters.setdefault(cid, set()).add(
                        MentionId(doc_id, sec_index, bounds[i][0], bounds[i][1])
                    )
                elif opened:
                    open_stacks.setdefault(cid, []).append(i)
                elif closed:
                    stack = open_stacks.get(cid)
                    if not stack:
                        raise ConllError(f"close without open for cluster {cid} in sentence {sec_index}")
                    start_token = stack.pop()
                    clusters.setdefault(cid, set()).add(
                        MentionId(doc_id, sec_index, bounds[start_token][0], bounds[i][1])
                    )
        leftover = {cid for cid, stack in open_stacks.items() if stack}
        if leftover:
            raise ConllError(
                f"unclosed mention bracket for cluster(s) {sorted(leftover)} at end of sentence {sec_index}"
            )
    return ClusterSet(clusters.values())


def from_conll(
    data: bytes | str, doc: Document | None = None
) -> tuple[list[str], ClusterSet]:
    """Inverse of to_conll on its image: returns the token words and the
    cluster set (cluster ids are not preserved, membership is)."""
    docs = parse_conll(data)
    if len(docs) != 1:
        raise ConllError(f"expected exactly one document, found {len(docs)}")
    conll_doc = docs[0]
    words = [t.word for t in conll_doc.tokens]
    return words, _clusters_from_tokens(conll_doc, doc)
