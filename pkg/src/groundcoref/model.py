"""Annotation data model shared by both protocols.

Documents carry sections (plain text), pronoun markables, and an entity
inventory. A link target is one of: a set of entity ids (grounded
protocol), a list of text spans (span protocol), or an explicit
no-reference mark. An annotation record maps every markable of one
document to a link target, with wall-clock timing.

All types serialize to plain dicts (``to_dict`` / ``from_dict``); that
dict form is the wire and storage format used by the task service and
the corpus files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

GROUNDED = "grounded"
SPAN = "span"
PROTOCOLS = (GROUNDED, SPAN)

SOURCES = ("wiki", "quac")
SECTION_KINDS = ("summary", "context", "question", "answer")
PROVENANCES = ("wikilink", "wikidata", "annotator_added")

# Wall-clock budget per task; submissions over this are rejected.
TIME_LIMIT_SECONDS = 600.0

Span = tuple[int, int, int]  # (section_index, char_start, char_end)


class ModelError(ValueError):
    """Malformed model object or serialized form."""


@dataclass(frozen=True)
class Section:
    index: int
    kind: str  # summary | context | question | answer
    text: str

    def to_dict(self) -> dict:
        return {"index": self.index, "kind": self.kind, "text": self.text}

    @classmethod
    def from_dict(cls, d: dict) -> "Section":
        if d.get("kind") not in SECTION_KINDS:
            raise ModelError(f"unknown section kind: {d.get('kind')!r}")
        return cls(index=int(d["index"]), kind=d["kind"], text=d["text"])


@dataclass(frozen=True)
class Markable:
    id: str
    section_index: int
    span: tuple[int, int]  # half-open char offsets into the section text
    surface: str
    category: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "section_index": self.section_index,
            "span": list(self.span),
            "surface": self.surface,
            "category": self.category,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Markable":
        start, end = d["span"]
        return cls(
            id=d["id"],
            section_index=int(d["section_index"]),
            span=(int(start), int(end)),
            surface=d["surface"],
            category=d["category"],
        )


@dataclass(frozen=True)
class Entity:
    id: str
    canonical_name: str
    aliases: tuple[str, ...]
    provenance: str  # wikilink | wikidata | annotator_added
    target: str | None = None

    def __post_init__(self) -> None:
        if not self.canonical_name:
            raise ModelError("entity canonical_name must be non-empty")
        if self.provenance not in PROVENANCES:
            raise ModelError(f"unknown provenance: {self.provenance!r}")
        if self.provenance in ("wikilink", "wikidata") and not self.target:
            raise ModelError(f"{self.provenance} entity {self.id} requires a target URL")

    @property
    def all_names(self) -> tuple[str, ...]:
        """Canonical name plus aliases, deduplicated, canonical first."""
        names = [self.canonical_name]
        for a in self.aliases:
            if a not in names:
                names.append(a)
        return tuple(names)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "canonical_name": self.canonical_name,
            "aliases": list(self.aliases),
            "provenance": self.provenance,
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Entity":
        return cls(
            id=d["id"],
            canonical_name=d["canonical_name"],
            aliases=tuple(d.get("aliases", ())),
            provenance=d["provenance"],
            target=d.get("target"),
        )


@dataclass(frozen=True)
class Document:
    id: str
    source: str  # wiki | quac
    title: str
    sections: tuple[Section, ...]
    markables: tuple[Markable, ...]
    entities: tuple[Entity, ...]

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ModelError(f"unknown source: {self.source!r}")
        ids = [m.id for m in self.markables]
        if len(ids) != len(set(ids)):
            raise ModelError(f"duplicate markable ids in document {self.id}")
        eids = [e.id for e in self.entities]
        if len(eids) != len(set(eids)):
            raise ModelError(f"duplicate entity ids in document {self.id}")

    def section(self, index: int) -> Section:
        return self.sections[index]

    def markable_ids(self) -> set[str]:
        return {m.id for m in self.markables}

    def entity_ids(self) -> set[str]:
        return {e.id for e in self.entities}

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source": self.source,
            "title": self.title,
            "sections": [s.to_dict() for s in self.sections],
            "markables": [m.to_dict() for m in self.markables],
            "entities": [e.to_dict() for e in self.entities],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Document":
        return cls(
            id=d["id"],
            source=d["source"],
            title=d["title"],
            sections=tuple(Section.from_dict(s) for s in d["sections"]),
            markables=tuple(Markable.from_dict(m) for m in d["markables"]),
            entities=tuple(Entity.from_dict(e) for e in d["entities"]),
        )


# --- link targets -----------------------------------------------------------


@dataclass(frozen=True)
class EntitySet:
    """Grounded link: markable refers to one or more inventory entities."""

    entity_ids: frozenset[str]

    def __post_init__(self) -> None:
        if not self.entity_ids:
            raise ModelError("EntitySet must contain at least one entity id")

    def to_dict(self) -> dict:
        return {"variant": "entity_set", "entity_ids": sorted(self.entity_ids)}


@dataclass(frozen=True)
class SpanSet:
    """Span link: markable's antecedent is one or more text spans."""

    spans: tuple[Span, ...]

    def __post_init__(self) -> None:
        if not self.spans:
            raise ModelError("SpanSet must contain at least one span")

    def to_dict(self) -> dict:
        return {"variant": "span_set", "spans": [list(s) for s in self.spans]}


@dataclass(frozen=True)
class NoReference:
    """Explicit mark that the markable has no antecedent."""

    def to_dict(self) -> dict:
        return {"variant": "no_reference"}


LinkTarget = EntitySet | SpanSet | NoReference


def link_target_from_dict(d: dict) -> LinkTarget:
    variant = d.get("variant")
    if variant == "entity_set":
        return EntitySet(frozenset(d["entity_ids"]))
    if variant == "span_set":
        return SpanSet(tuple((int(a), int(b), int(c)) for a, b, c in d["spans"]))
    if variant == "no_reference":
        return NoReference()
    raise ModelError(f"unknown link target variant: {variant!r}")


def merge_multi_span_link(partials: list[SpanSet]) -> SpanSet:
    """Merge the span sets accumulated over one linking episode.

    Spans are kept in click order and deduplicated by exact offsets.
    An empty episode is an error: no-reference is never inferred, the
    annotator must mark it explicitly.
    """
    if not partials:
        raise ModelError("empty linking episode; mark NoReference explicitly instead")
    seen: list[Span] = []
    for part in partials:
        for span in part.spans:
            if span not in seen:
                seen.append(span)
    return SpanSet(tuple(seen))


# --- annotation records -----------------------------------------------------


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's labeling of one document under one protocol."""

    annotator_id: str
    document_id: str
    protocol: str  # grounded | span
    links: dict[str, LinkTarget]  # markable_id -> target
    added_entities: tuple[Entity, ...] = ()
    started_at: float = 0.0
    finished_at: float = 0.0
    duration: float = 0.0

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ModelError(f"unknown protocol: {self.protocol!r}")

    def is_complete(self, doc: Document) -> bool:
        return set(self.links) == doc.markable_ids()

    def to_dict(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "document_id": self.document_id,
            "protocol": self.protocol,
            "links": {mid: t.to_dict() for mid, t in sorted(self.links.items())},
            "added_entities": [e.to_dict() for e in self.added_entities],
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "duration": self.duration,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationRecord":
        return cls(
            annotator_id=d["annotator_id"],
            document_id=d["document_id"],
            protocol=d["protocol"],
            links={mid: link_target_from_dict(t) for mid, t in d["links"].items()},
            added_entities=tuple(Entity.from_dict(e) for e in d.get("added_entities", ())),
            started_at=float(d.get("started_at", 0.0)),
            finished_at=float(d.get("finished_at", 0.0)),
            duration=float(d.get("duration", 0.0)),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AnnotationRecord):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash((self.annotator_id, self.document_id, self.protocol))


# --- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str

    def to_dict(self) -> dict:
        return {"code": self.code, "detail": self.detail}


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


def validate_record(
    record: AnnotationRecord,
    doc: Document,
    *,
    time_limit: float = TIME_LIMIT_SECONDS,
) -> ValidationResult:
    """Check a record against its document.

    Violations are data, not exceptions: unknown markables or entities,
    out-of-bounds spans, missing markables, overtime, protocol/variant
    mismatches, and inconsistent timing all come back in one list.
    """
    out: list[Violation] = []
    if record.document_id != doc.id:
        out.append(Violation("wrong_document", f"record addresses {record.document_id}, not {doc.id}"))
        return ValidationResult(tuple(out))

    markable_ids = doc.markable_ids()
    known_entities = doc.entity_ids() | {e.id for e in record.added_entities}

    for mid, target in record.links.items():
        if mid not in markable_ids:
            out.append(Violation("unknown_markable", mid))
        if isinstance(target, EntitySet):
            if record.protocol != GROUNDED:
                out.append(Violation("wrong_variant", f"{mid}: entity link in {record.protocol} record"))
            for eid in sorted(target.entity_ids):
                if eid not in known_entities:
                    out.append(Violation("unknown_entity", f"{mid} -> {eid}"))
        elif isinstance(target, SpanSet):
            if record.protocol != SPAN:
                out.append(Violation("wrong_variant", f"{mid}: span link in {record.protocol} record"))
            for sec, start, end in target.spans:
                if sec < 0 or sec >= len(doc.sections) or start < 0 or start >= end or end > len(doc.sections[sec].text):
                    out.append(Violation("span_out_of_bounds", f"{mid} -> ({sec},{start},{end})"))

    for mid in sorted(markable_ids - set(record.links)):
        out.append(Violation("incomplete", f"missing markable {mid}"))

    if record.added_entities and record.protocol != GROUNDED:
        out.append(Violation("wrong_variant", "added entities on a span-protocol record"))
    linked_ids: set[str] = set()
    for target in record.links.values():
        if isinstance(target, EntitySet):
            linked_ids |= target.entity_ids
    for ent in record.added_entities:
        if ent.provenance != "annotator_added":
            out.append(Violation("bad_provenance", f"added entity {ent.id} has provenance {ent.provenance}"))
        if ent.id not in linked_ids:
            out.append(Violation("orphan_added_entity", ent.id))

    if record.duration > time_limit:
        out.append(Violation("overtime", f"duration {record.duration:.0f}s exceeds {time_limit:.0f}s"))
    if abs((record.finished_at - record.started_at) - record.duration) > 1e-6:
        out.append(Violation("duration_mismatch", "duration != finished_at - started_at"))

    return ValidationResult(tuple(out))
