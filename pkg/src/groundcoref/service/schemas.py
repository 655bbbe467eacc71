"""Pydantic request/response models for the HTTP API.

The wire format for documents, records, and link targets is the
canonical model serialization; these schemas mirror it field for field
so payloads validate at the boundary and convert losslessly to the
domain dataclasses.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

from .. import model


class SectionSchema(BaseModel):
    index: int
    kind: Literal["summary", "context", "question", "answer"]
    text: str


class MarkableSchema(BaseModel):
    id: str
    section_index: int
    span: tuple[int, int]
    surface: str
    category: str


class EntitySchema(BaseModel):
    id: str
    canonical_name: str
    aliases: list[str] = Field(default_factory=list)
    provenance: Literal["wikilink", "wikidata", "annotator_added"]
    target: str | None = None

    def to_model(self) -> model.Entity:
        return model.Entity.from_dict(self.model_dump())


class DocumentSchema(BaseModel):
    id: str
    source: Literal["wiki", "quac"]
    title: str
    sections: list[SectionSchema]
    markables: list[MarkableSchema]
    entities: list[EntitySchema]

    def to_model(self) -> model.Document:
        return model.Document.from_dict(self.model_dump())


class LinkTargetSchema(BaseModel):
    variant: Literal["entity_set", "span_set", "no_reference"]
    entity_ids: list[str] | None = None
    spans: list[tuple[int, int, int]] | None = None

    @model_validator(mode="after")
    def _payload_matches_variant(self) -> "LinkTargetSchema":
        if self.variant == "entity_set" and not self.entity_ids:
            raise ValueError("entity_set requires entity_ids")
        if self.variant == "span_set" and not self.spans:
            raise ValueError("span_set requires spans")
        if self.variant == "no_reference" and (self.entity_ids or self.spans):
            raise ValueError("no_reference carries no payload")
        return self

    def to_model(self) -> model.LinkTarget:
        return model.link_target_from_dict(self.model_dump(exclude_none=True))


class AnnotationRecordSchema(BaseModel):
    annotator_id: str
    document_id: str
    protocol: Literal["grounded", "span"]
    links: dict[str, LinkTargetSchema]
    added_entities: list[EntitySchema] = Field(default_factory=list)
    started_at: float = 0.0
    finished_at: float = 0.0
    duration: float = 0.0

    def to_model(self) -> model.AnnotationRecord:
        return model.AnnotationRecord(
            annotator_id=self.annotator_id,
            document_id=self.document_id,
            protocol=self.protocol,
            links={mid: t.to_model() for mid, t in self.links.items()},
            added_entities=tuple(e.to_model() for e in self.added_entities),
            started_at=self.started_at,
            finished_at=self.finished_at,
            duration=self.duration,
        )


class TaskBundleSchema(BaseModel):
    document: DocumentSchema
    protocol: Literal["grounded", "span"]
    issued_at: float
    deadline: float


class TaskResponse(BaseModel):
    status: Literal["ok", "no_task", "refused"]
    reason: str | None = None
    task: TaskBundleSchema | None = None


class ViolationSchema(BaseModel):
    code: str
    detail: str


class SubmitResponse(BaseModel):
    status: Literal["accepted", "draft", "rejected", "refused"]
    duplicate: bool = False
    reason: str | None = None
    violations: list[ViolationSchema] | None = None


class AddEntityRequest(BaseModel):
    annotator_id: str
    document_id: str
    name: str


class RegisterAnnotatorRequest(BaseModel):
    annotator_id: str
    approval_rate: float = 1.0
    native_english: bool = True


class QualificationSchema(BaseModel):
    annotator_id: str
    completed_count: int
    active: bool
    test_history: list[dict]
    approval_rate: float
    native_english: bool


class CorpusLoadRequest(BaseModel):
    documents: list[DocumentSchema]
    gold_documents: list[DocumentSchema] = Field(default_factory=list)
    gold_records: list[AnnotationRecordSchema] = Field(default_factory=list)
    doubly_ids: dict[str, list[str]] | None = None


class CorpusLoadResponse(BaseModel):
    documents: int
    gold_documents: int
    plan: dict[str, dict[str, int]]


class TimingCell(BaseModel):
    source: str
    protocol: str
    n: int
    mean: float | None
    stddev: float | None


class AgreementCell(BaseModel):
    source: str
    protocol: str
    n_documents: int
    exact_match: float | None
    f1: float | None
    micro_exact_match: float | None
    micro_f1: float | None
