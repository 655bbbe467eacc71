"""Convert grounded annotations into mention-partition clusters.

The conversion is lossy by nature: a markable linked to several entities
cannot live in a disjoint partition and is dropped (but reported), and
entity aliases that never occur in the text leave their entity cluster
without name mentions. Each entity's candidate cluster collects the
markables linked solely to it plus every token-bounded occurrence of its
canonical name or aliases in the document text.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ingest import tokenize
from .lexicon import default_lexicon
from .metrics import ClusterSet
from .model import AnnotationRecord, Document, EntitySet, NoReference

# Lowercase aliases in this set only match case-sensitively, so an alias
# like "it" never swallows a sentence-initial "It".
_COMMON_WORDS = frozenset(
    """a an the and or but nor so yet of in on at to for from by with about
    against between into through during before after above below up down out
    off over under again further then once here there when where why how not
    no can will just is are was were be been being have has had do does did
    if because as until while more most other some such only own same than
    too very s t don now""".split()
) | frozenset(default_lexicon().entries)


@dataclass(frozen=True)
class MentionId:
    document_id: str
    section_index: int
    char_start: int
    char_end: int

    def __post_init__(self) -> None:
        if self.char_start < 0 or self.char_start >= self.char_end:
            raise ValueError(f"malformed mention span ({self.char_start}, {self.char_end})")

    def to_list(self) -> list:
        return [self.document_id, self.section_index, self.char_start, self.char_end]

    @classmethod
    def from_list(cls, quad) -> "MentionId":
        doc_id, sec, start, end = quad
        return cls(doc_id, int(sec), int(start), int(end))


@dataclass(frozen=True)
class ConversionReport:
    clusters: ClusterSet
    dropped_multi_entity: tuple[str, ...]  # markable ids linked to >= 2 entities
    unmatched_aliases: tuple[tuple[str, str], ...]  # (entity_id, alias)

    def to_dict(self) -> dict:
        return {
            "clusters": [sorted(m.to_list() for m in c) for c in self.clusters],
            "dropped_multi_entity": list(self.dropped_multi_entity),
            "unmatched_aliases": [list(pair) for pair in self.unmatched_aliases],
        }


def _alias_case_sensitive(alias: str) -> bool:
    return alias == alias.lower() and alias.lower() in _COMMON_WORDS


def _find_alias_occurrences(
    doc: Document, entity_order: list, blocked: set[tuple[int, int, int]]
) -> tuple[dict[str, list[MentionId]], set[tuple[str, str]]]:
    """Token-bounded alias matches per entity, longest match first.

    Overlap ties break to the earlier offset, then to entity inventory
    order. Spans occupied by markables are never claimed: markable
    cluster membership comes only from annotator links.
    """
    section_tokens = {s.index: tokenize(s.text) for s in doc.sections}

    candidates = []  # (-length, section, start, entity_rank, end, entity_id, alias)
    for rank, entity in enumerate(entity_order):
        for alias in entity.all_names:
            alias_tokens = [t for _, _, t in tokenize(alias)]
            if not alias_tokens:
                continue
            exact = _alias_case_sensitive(alias)
            want = alias_tokens if exact else [t.lower() for t in alias_tokens]
            for sec_index, tokens in section_tokens.items():
                for i in range(len(tokens) - len(alias_tokens) + 1):
                    got = [tokens[i + k][2] for k in range(len(alias_tokens))]
                    if not exact:
                        got = [t.lower() for t in got]
                    if got == want:
                        start = tokens[i][0]
                        end = tokens[i + len(alias_tokens) - 1][1]
                        candidates.append((-(end - start), sec_index, start, rank, end, entity.id, alias))

    occurrences: dict[str, list[MentionId]] = {e.id: [] for e in entity_order}
    matched_aliases: set[tuple[str, str]] = set()
    taken: list[tuple[int, int, int]] = sorted(blocked)

    def overlaps(sec: int, start: int, end: int) -> bool:
        return any(t[0] == sec and t[1] < end and start < t[2] for t in taken)

    for neg_len, sec, start, rank, end, entity_id, alias in sorted(candidates):
        if overlaps(sec, start, end):
            continue
        taken.append((sec, start, end))
        occurrences[entity_id].append(MentionId(doc.id, sec, start, end))
        matched_aliases.add((entity_id, alias))
    return occurrences, matched_aliases


def grounded_to_clusters(doc: Document, record: AnnotationRecord) -> ConversionReport:
    """One candidate cluster per entity: solely-linked markables plus
    name/alias occurrences. Multi-entity markables land in
    dropped_multi_entity; No-Reference markables appear nowhere;
    singleton clusters are retained."""
    if record.protocol != "grounded":
        raise ValueError(f"conversion requires a grounded record, got {record.protocol!r}")
    if record.document_id != doc.id:
        raise ValueError(f"record addresses {record.document_id}, not {doc.id}")
    if not record.is_complete(doc):
        raise ValueError("conversion requires a complete record")

    entity_order = list(doc.entities) + [
        e for e in record.added_entities if e.id not in doc.entity_ids()
    ]

    members: dict[str, list[MentionId]] = {e.id: [] for e in entity_order}
    dropped: list[str] = []
    for markable in doc.markables:
        target = record.links[markable.id]
        if isinstance(target, NoReference):
            continue
        assert isinstance(target, EntitySet)
        if len(target.entity_ids) >= 2:
            dropped.append(markable.id)
            continue
        (entity_id,) = target.entity_ids
        members[entity_id].append(
            MentionId(doc.id, markable.section_index, markable.span[0], markable.span[1])
        )

    blocked = {(m.section_index, m.span[0], m.span[1]) for m in doc.markables}
    occurrences, matched = _find_alias_occurrences(doc, entity_order, blocked)
    for entity_id, mentions in occurrences.items():
        members[entity_id].extend(mentions)

    unmatched = []
    for entity in entity_order:
        for alias in entity.all_names:
            if (entity.id, alias) not in matched:
                unmatched.append((entity.id, alias))

    clusters = ClusterSet([set(ms) for ms in members.values() if ms])
    return ConversionReport(
        clusters=clusters,
        dropped_multi_entity=tuple(dropped),
        unmatched_aliases=tuple(unmatched),
    )
