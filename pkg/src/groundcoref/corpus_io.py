"""Canonical corpus file: documents plus annotation records as one JSON
object with sorted keys, so identical corpora serialize byte-identically.

Reading validates referential integrity: every record must resolve its
document, every grounded link its entity, every link its markable. An
integrity failure raises a structured error naming the offending path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .model import AnnotationRecord, Document, EntitySet, SpanSet

FORMAT_VERSION = "1"


class CorpusError(ValueError):
    def __init__(self, message: str, location: str):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message


@dataclass
class CorpusFile:
    version: str = FORMAT_VERSION
    documents: list[Document] = field(default_factory=list)
    records: list[AnnotationRecord] = field(default_factory=list)
    conversion_reports: list[dict] | None = None
    annotator_flags: dict[str, bool] | None = None  # export metadata: annotator -> still active

    def document(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)

    def to_dict(self) -> dict:
        out: dict = {
            "version": self.version,
            "documents": [d.to_dict() for d in self.documents],
            "records": [r.to_dict() for r in self.records],
        }
        if self.conversion_reports is not None:
            out["conversion_reports"] = self.conversion_reports
        if self.annotator_flags is not None:
            out["annotator_flags"] = self.annotator_flags
        return out


def _check_integrity(corpus: CorpusFile) -> None:
    docs = {d.id: d for d in corpus.documents}
    for i, record in enumerate(corpus.records):
        where = f"records[{i}]"
        doc = docs.get(record.document_id)
        if doc is None:
            raise CorpusError(f"unknown document {record.document_id!r}", f"{where}.document_id")
        known_entities = doc.entity_ids() | {e.id for e in record.added_entities}
        markables = doc.markable_ids()
        for mid, target in record.links.items():
            if mid not in markables:
                raise CorpusError(f"unknown markable {mid!r}", f"{where}.links[{mid!r}]")
            if isinstance(target, EntitySet):
                for eid in sorted(target.entity_ids):
                    if eid not in known_entities:
                        raise CorpusError(f"unknown entity {eid!r}", f"{where}.links[{mid!r}]")
            elif isinstance(target, SpanSet):
                for sec, start, end in target.spans:
                    if sec < 0 or sec >= len(doc.sections) or end > len(doc.sections[sec].text):
                        raise CorpusError(
                            f"span ({sec},{start},{end}) outside document", f"{where}.links[{mid!r}]"
                        )


def write_corpus(corpus: CorpusFile) -> bytes:
    _check_integrity(corpus)
    text = json.dumps(corpus.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def read_corpus(data: bytes | str) -> CorpusFile:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"not valid JSON: {exc}", "corpus") from exc
    if not isinstance(raw, dict) or "version" not in raw:
        raise CorpusError("missing version field", "corpus.version")
    try:
        corpus = CorpusFile(
            version=raw["version"],
            documents=[Document.from_dict(d) for d in raw.get("documents", [])],
            records=[AnnotationRecord.from_dict(r) for r in raw.get("records", [])],
            conversion_reports=raw.get("conversion_reports"),
            annotator_flags=raw.get("annotator_flags"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"malformed corpus object: {exc}", "corpus") from exc
    _check_integrity(corpus)
    return corpus
