"""Task assignment, qualification gating, and persistence.

All assignment-state mutations run under one lock (the single logical
writer); stats and reports read immutable values and pure functions.
State is rebuilt on startup from a corpus snapshot plus an append-only
event log; accepted records are written and fsynced before the
submission is acknowledged.

Every fifth task issued to an annotator is a secret test document drawn
from a held-out gold pool; the task payload carries no marker. An
annotator stays active only while every test score strictly exceeds the
gating threshold.
"""

from __future__ import annotations

import json
import os
import statistics
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..agreement import exact_match, link_f1, match_counts, pair_totals
from ..clusters import grounded_to_clusters
from ..conll import to_conll
from ..corpus_io import CorpusFile, read_corpus, write_corpus
from ..model import GROUNDED, PROTOCOLS, AnnotationRecord, Document, Entity, validate_record
from .config import ServiceConfig


class ServiceError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass
class QualificationState:
    annotator_id: str
    completed_count: int = 0
    active: bool = True
    test_history: list[dict] = field(default_factory=list)  # {document_id, score, passed}
    approval_rate: float = 1.0
    native_english: bool = True

    def to_dict(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "completed_count": self.completed_count,
            "active": self.active,
            "test_history": list(self.test_history),
            "approval_rate": self.approval_rate,
            "native_english": self.native_english,
        }


@dataclass
class IssuedTask:
    annotator_id: str
    document_id: str
    protocol: str
    issued_at: float
    deadline: float
    is_test: bool
    session_entities: dict[str, Entity] = field(default_factory=dict)

    def bundle(self, document: Document) -> dict:
        # Schema-identical for test and regular tasks: no distinguishing field.
        return {
            "document": document.to_dict(),
            "protocol": self.protocol,
            "issued_at": self.issued_at,
            "deadline": self.deadline,
        }


@dataclass
class PlanCell:
    doubly: tuple[str, ...]
    singly: tuple[str, ...]

    def target(self, doc_id: str) -> int:
        return 2 if doc_id in self.doubly else 1


class TaskService:
    """State machine behind the HTTP API; usable directly in tests."""

    def __init__(
        self,
        data_dir: str | Path,
        *,
        config: ServiceConfig | None = None,
        clock: Callable[[], float] = time.time,
    ):
        self.config = config or ServiceConfig(data_dir=Path(data_dir))
        self.config.data_dir = Path(data_dir)
        self.clock = clock
        self._lock = threading.RLock()

        self.documents: dict[str, Document] = {}
        self.gold_documents: dict[str, Document] = {}
        self.gold_records: dict[str, AnnotationRecord] = {}
        self.plan: dict[str, PlanCell] = {}  # source -> cell (applies per protocol)
        self.records: dict[tuple[str, str, str], AnnotationRecord] = {}  # (doc, proto, annotator)
        self.drafts: dict[tuple[str, str, str], AnnotationRecord] = {}
        self.test_submissions: dict[tuple[str, str, str], AnnotationRecord] = {}
        self.qualification: dict[str, QualificationState] = {}
        self.open_tasks: dict[str, IssuedTask] = {}
        self.issued_history: set[tuple[str, str, str]] = set()  # (annotator, doc, proto)
        self._entity_counter = 0

        self.config.data_dir.mkdir(parents=True, exist_ok=True)
        self._events_path = self.config.data_dir / "events.jsonl"
        self._corpus_path = self.config.data_dir / "corpus_snapshot.json"
        self._gold_path = self.config.data_dir / "gold_snapshot.json"
        self._plan_path = self.config.data_dir / "plan.json"
        self._recover()
        if self.config.test_pool_path and not self.gold_documents:
            data = Path(self.config.test_pool_path).read_bytes()
            pool = read_corpus(data)
            self._install_gold(pool.documents, pool.records)

    # -- persistence --------------------------------------------------------

    def _append_event(self, event: dict) -> None:
        # Write-ahead: the event is durable before the caller acknowledges.
        line = json.dumps(event, sort_keys=True, ensure_ascii=False)
        with open(self._events_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _write_snapshot(self, path: Path, data: bytes) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)

    def _recover(self) -> None:
        if self._corpus_path.exists():
            corpus = read_corpus(self._corpus_path.read_bytes())
            self.documents = {d.id: d for d in corpus.documents}
        if self._gold_path.exists():
            pool = read_corpus(self._gold_path.read_bytes())
            self._install_gold(pool.documents, pool.records, persist=False)
        if self._plan_path.exists():
            raw = json.loads(self._plan_path.read_text(encoding="utf-8"))
            self.plan = {
                source: PlanCell(doubly=tuple(cell["doubly"]), singly=tuple(cell["singly"]))
                for source, cell in raw.items()
            }
        if not self._events_path.exists():
            return
        with open(self._events_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    self._replay(json.loads(line))

    def _replay(self, event: dict) -> None:
        kind = event["event"]
        if kind == "register":
            state = self._get_or_register(event["annotator"], log=False)
            state.approval_rate = event["approval_rate"]
            state.native_english = event["native_english"]
        elif kind == "issue":
            task = IssuedTask(
                annotator_id=event["annotator"],
                document_id=event["document"],
                protocol=event["protocol"],
                issued_at=event["issued_at"],
                deadline=event["deadline"],
                is_test=event["is_test"],
            )
            self.open_tasks[task.annotator_id] = task
            self.issued_history.add((task.annotator_id, task.document_id, task.protocol))
        elif kind == "entity":
            task = self.open_tasks.get(event["annotator"])
            entity = Entity.from_dict(event["entity"])
            if task is not None and task.document_id == event["document"]:
                task.session_entities[entity.id] = entity
            self._entity_counter = max(self._entity_counter, event.get("counter", 0))
        elif kind == "draft":
            record = AnnotationRecord.from_dict(event["record"])
            self.drafts[(record.document_id, record.protocol, record.annotator_id)] = record
        elif kind == "accept":
            record = AnnotationRecord.from_dict(event["record"])
            key = (record.document_id, record.protocol, record.annotator_id)
            self.records[key] = record
            self.drafts.pop(key, None)
            state = self._get_or_register(record.annotator_id, log=False)
            state.completed_count += 1
            self.open_tasks.pop(record.annotator_id, None)
        elif kind == "test_result":
            record = AnnotationRecord.from_dict(event["record"])
            key = (record.document_id, record.protocol, record.annotator_id)
            self.test_submissions[key] = record
            state = self._get_or_register(event["annotator"], log=False)
            state.test_history.append(
                {"document_id": event["document"], "score": event["score"], "passed": event["passed"]}
            )
            if not event["passed"]:
                state.active = False
            state.completed_count += 1
            self.open_tasks.pop(event["annotator"], None)

    # -- corpus and gold pool ------------------------------------------------

    def load_corpus(
        self,
        documents: list[Document],
        *,
        gold_documents: list[Document] | None = None,
        gold_records: list[AnnotationRecord] | None = None,
        doubly_ids: dict[str, list[str]] | None = None,
    ) -> dict:
        """One-shot installation of the scored corpus and assignment plan.

        The doubly/singly split per source is deterministic (sorted ids,
        first ``doubly_target`` doubly) unless explicit ids are given.
        """
        with self._lock:
            if self.documents:
                raise ServiceError("corpus_loaded", "a corpus is already loaded")
            ids = [d.id for d in documents]
            if len(ids) != len(set(ids)):
                raise ServiceError("duplicate_document", "duplicate document ids in corpus")
            self.documents = {d.id: d for d in documents}
            by_source: dict[str, list[str]] = {}
            for d in documents:
                by_source.setdefault(d.source, []).append(d.id)
            plan = {}
            for source, doc_ids in sorted(by_source.items()):
                doc_ids = sorted(doc_ids)
                if doubly_ids and source in doubly_ids:
                    doubly = tuple(sorted(doubly_ids[source]))
                    missing = set(doubly) - set(doc_ids)
                    if missing:
                        raise ServiceError("unknown_document", f"doubly ids not in corpus: {sorted(missing)}")
                else:
                    doubly = tuple(doc_ids[: self.config.doubly_target])
                singly = tuple(i for i in doc_ids if i not in doubly)
                plan[source] = PlanCell(doubly=doubly, singly=singly)
            self.plan = plan

            self._write_snapshot(self._corpus_path, write_corpus(CorpusFile(documents=documents)))
            self._write_snapshot(
                self._plan_path,
                (json.dumps(
                    {s: {"doubly": list(c.doubly), "singly": list(c.singly)} for s, c in plan.items()},
                    sort_keys=True, indent=2,
                ) + "\n").encode("utf-8"),
            )
            if gold_documents:
                self._install_gold(gold_documents, gold_records or [])
            return {
                "documents": len(self.documents),
                "gold_documents": len(self.gold_documents),
                "plan": {s: {"doubly": len(c.doubly), "singly": len(c.singly)} for s, c in plan.items()},
            }

    def _install_gold(
        self,
        documents: list[Document],
        records: list[AnnotationRecord],
        *,
        persist: bool = True,
    ) -> None:
        by_doc = {r.document_id: r for r in records}
        for doc in documents:
            record = by_doc.get(doc.id)
            if record is None:
                raise ServiceError("missing_gold", f"gold document {doc.id} has no gold record")
            check = validate_record(record, doc, time_limit=float("inf"))
            if not check.ok:
                raise ServiceError("bad_gold", f"gold record for {doc.id} invalid: {check.violations[0].detail}")
            self.gold_documents[doc.id] = doc
            self.gold_records[doc.id] = record
        if persist and documents:
            snapshot = CorpusFile(documents=list(self.gold_documents.values()),
                                  records=list(self.gold_records.values()))
            self._write_snapshot(self._gold_path, write_corpus(snapshot))

    # -- annotators ----------------------------------------------------------

    def _get_or_register(self, annotator_id: str, *, log: bool = True) -> QualificationState:
        state = self.qualification.get(annotator_id)
        if state is None:
            state = QualificationState(
                annotator_id=annotator_id,
                native_english=self.config.require_native_english,
            )
            self.qualification[annotator_id] = state
            if log:
                self._append_event({
                    "event": "register",
                    "annotator": annotator_id,
                    "approval_rate": state.approval_rate,
                    "native_english": state.native_english,
                })
        return state

    def register_annotator(self, annotator_id: str, *, approval_rate: float, native_english: bool) -> QualificationState:
        with self._lock:
            if annotator_id in self.qualification:
                raise ServiceError("exists", f"annotator {annotator_id} already registered")
            state = QualificationState(
                annotator_id=annotator_id,
                approval_rate=approval_rate,
                native_english=native_english,
            )
            self.qualification[annotator_id] = state
            self._append_event({
                "event": "register",
                "annotator": annotator_id,
                "approval_rate": approval_rate,
                "native_english": native_english,
            })
            return state

    def _eligible(self, state: QualificationState) -> bool:
        if state.approval_rate < self.config.min_approval_rate:
            return False
        if self.config.require_native_english and not state.native_english:
            return False
        return True

    # -- task issue ----------------------------------------------------------

    def _coverage_counts(self) -> dict[tuple[str, str], int]:
        """Accepted records plus unexpired open issues per (doc, protocol)."""
        counts: dict[tuple[str, str], int] = {}
        for doc_id, protocol, _annotator in self.records:
            counts[(doc_id, protocol)] = counts.get((doc_id, protocol), 0) + 1
        now = self.clock()
        for task in self.open_tasks.values():
            if now <= task.deadline:
                key = (task.document_id, task.protocol)
                counts[key] = counts.get(key, 0) + 1
        return counts

    def _pick_regular(self, annotator_id: str, protocols: list[str]) -> tuple[str, str] | None:
        coverage = self._coverage_counts()
        best: tuple[int, str, str] | None = None  # (coverage, doc_id, protocol)
        for protocol in protocols:
            for source, cell in sorted(self.plan.items()):
                for doc_id in (*cell.doubly, *cell.singly):
                    if (annotator_id, doc_id, protocol) in self.issued_history:
                        continue
                    have = coverage.get((doc_id, protocol), 0)
                    if have >= cell.target(doc_id):
                        continue
                    candidate = (have, doc_id, protocol)
                    if best is None or candidate < best:
                        best = candidate
        if best is None:
            return None
        return best[1], best[2]

    def _pick_test(self, annotator_id: str, protocols: list[str]) -> str | None:
        for doc_id in sorted(self.gold_documents):
            if (annotator_id, doc_id, self.gold_records[doc_id].protocol) in self.issued_history:
                continue
            if self.gold_records[doc_id].protocol in protocols:
                return doc_id
        return None

    def next_task(self, annotator_id: str, protocol: str | None = None) -> dict:
        """Issue (or re-serve) a task. Every fifth completed position gets
        a secret test document; otherwise the least-covered plan document.
        The payload never reveals whether the task is a test."""
        if protocol is not None and protocol not in PROTOCOLS:
            raise ServiceError("bad_protocol", f"unknown protocol {protocol!r}")
        with self._lock:
            state = self._get_or_register(annotator_id)
            if not state.active:
                return {"status": "refused", "reason": "deactivated"}
            if not self._eligible(state):
                return {"status": "refused", "reason": "ineligible"}

            now = self.clock()
            open_task = self.open_tasks.get(annotator_id)
            if open_task is not None:
                if now <= open_task.deadline:
                    doc = self._task_document(open_task)
                    return {"status": "ok", "task": open_task.bundle(doc)}
                # Past the deadline: the slot returns to the pool.
                self.open_tasks.pop(annotator_id, None)

            protocols = [protocol] if protocol else list(PROTOCOLS)
            is_test = False
            doc_id: str | None = None
            chosen_protocol: str | None = None
            if state.completed_count % self.config.test_cadence == self.config.test_cadence - 1:
                test_doc = self._pick_test(annotator_id, protocols)
                if test_doc is not None:
                    is_test = True
                    doc_id = test_doc
                    chosen_protocol = self.gold_records[test_doc].protocol
            if doc_id is None:
                picked = self._pick_regular(annotator_id, protocols)
                if picked is None:
                    return {"status": "no_task"}
                doc_id, chosen_protocol = picked

            task = IssuedTask(
                annotator_id=annotator_id,
                document_id=doc_id,
                protocol=chosen_protocol,
                issued_at=now,
                deadline=now + self.config.time_limit_seconds,
                is_test=is_test,
            )
            self._append_event({
                "event": "issue",
                "annotator": annotator_id,
                "document": doc_id,
                "protocol": chosen_protocol,
                "issued_at": task.issued_at,
                "deadline": task.deadline,
                "is_test": is_test,
            })
            self.open_tasks[annotator_id] = task
            self.issued_history.add((annotator_id, doc_id, chosen_protocol))
            return {"status": "ok", "task": task.bundle(self._task_document(task))}

    def _task_document(self, task: IssuedTask) -> Document:
        if task.is_test:
            return self.gold_documents[task.document_id]
        return self.documents[task.document_id]

    # -- submission ----------------------------------------------------------

    def submit(self, record: AnnotationRecord) -> dict:
        """Validate and durably store a submission.

        Incomplete but otherwise valid records are kept as drafts.
        Resubmitting an identical accepted record is idempotent. Secret
        tests are scored against gold; a score at or below the gating
        threshold deactivates the annotator (silently: the outcome is
        indistinguishable from a regular acceptance)."""
        with self._lock:
            key = (record.document_id, record.protocol, record.annotator_id)
            prior = self.records.get(key) or self.test_submissions.get(key)
            if prior is not None:
                if prior == record:
                    return {"status": "accepted", "duplicate": True}
                return {"status": "refused", "reason": "already_submitted"}

            task = self.open_tasks.get(record.annotator_id)
            if task is None or task.document_id != record.document_id or task.protocol != record.protocol:
                return {"status": "refused", "reason": "not_issued"}

            doc = self._task_document(task)
            if task.session_entities:
                doc = self._with_session_entities(doc, task)
            result = validate_record(record, doc, time_limit=self.config.time_limit_seconds)
            violations = [v for v in result.violations]
            incomplete_only = violations and all(v.code == "incomplete" for v in violations)
            if self.clock() > task.deadline:
                return {
                    "status": "rejected",
                    "violations": [{"code": "overtime", "detail": "submitted past the task deadline"}],
                }
            if violations and not incomplete_only:
                return {"status": "rejected", "violations": [v.to_dict() for v in violations]}

            if incomplete_only:
                self._append_event({"event": "draft", "record": record.to_dict()})
                self.drafts[key] = record
                return {"status": "draft"}

            if task.is_test:
                gold = self.gold_records[record.document_id]
                score = exact_match(record, gold)
                passed = score > self.config.gating_threshold
                self._append_event({
                    "event": "test_result",
                    "annotator": record.annotator_id,
                    "document": record.document_id,
                    "score": score,
                    "passed": passed,
                    "record": record.to_dict(),
                })
                self.test_submissions[key] = record
                state = self.qualification[record.annotator_id]
                state.test_history.append(
                    {"document_id": record.document_id, "score": score, "passed": passed}
                )
                if not passed:
                    state.active = False
                state.completed_count += 1
                self.open_tasks.pop(record.annotator_id, None)
                return {"status": "accepted"}

            self._append_event({"event": "accept", "record": record.to_dict()})
            self.records[key] = record
            self.drafts.pop(key, None)
            self.qualification[record.annotator_id].completed_count += 1
            self.open_tasks.pop(record.annotator_id, None)
            return {"status": "accepted"}

    def _with_session_entities(self, doc: Document, task: IssuedTask) -> Document:
        extra = tuple(e for e in task.session_entities.values() if e.id not in doc.entity_ids())
        return Document(
            id=doc.id,
            source=doc.source,
            title=doc.title,
            sections=doc.sections,
            markables=doc.markables,
            entities=doc.entities + extra,
        )

    def add_entity(self, annotator_id: str, document_id: str, name: str) -> Entity:
        """Create a session-scoped entity on an open grounded task. The
        shared document inventory is never mutated."""
        if not name or not name.strip():
            raise ServiceError("empty_name", "entity name must not be empty")
        with self._lock:
            task = self.open_tasks.get(annotator_id)
            if task is None or task.document_id != document_id:
                raise ServiceError("not_issued", "no open task on that document")
            if task.protocol != GROUNDED:
                raise ServiceError("wrong_protocol", "entities can only be added in the grounded protocol")
            if self.clock() > task.deadline:
                raise ServiceError("overtime", "task deadline has passed")
            self._entity_counter += 1
            entity = Entity(
                id=f"ae{self._entity_counter}",
                canonical_name=name.strip(),
                aliases=(name.strip(),),
                provenance="annotator_added",
            )
            self._append_event({
                "event": "entity",
                "annotator": annotator_id,
                "document": document_id,
                "entity": entity.to_dict(),
                "counter": self._entity_counter,
            })
            task.session_entities[entity.id] = entity
            return entity

    # -- analytics -----------------------------------------------------------

    def _record_snapshot(self) -> list[tuple[tuple[str, str, str], AnnotationRecord]]:
        with self._lock:
            return sorted(self.records.items())

    def timing_stats(self) -> list[dict]:
        """Mean and sample standard deviation of annotation durations per
        (source, protocol) cell; empty cells report n=0."""
        snapshot = self._record_snapshot()
        cells = []
        for source in ("wiki", "quac"):
            for protocol in PROTOCOLS:
                durations = [
                    r.duration
                    for (d, p, _a), r in snapshot
                    if p == protocol and d in self.documents and self.documents[d].source == source
                ]
                cell: dict = {"source": source, "protocol": protocol, "n": len(durations)}
                cell["mean"] = statistics.fmean(durations) if durations else None
                cell["stddev"] = statistics.stdev(durations) if len(durations) >= 2 else None
                cells.append(cell)
        return cells

    def agreement_stats(self) -> list[dict]:
        """Per (source, protocol): agreement over every doubly annotated
        document holding two complete records. Macro averages over
        documents plus micro-pooled values."""
        snapshot = self._record_snapshot()
        cells = []
        for source in ("wiki", "quac"):
            cell_plan = self.plan.get(source)
            for protocol in PROTOCOLS:
                ems: list[float] = []
                f1s: list[float] = []
                matched = total = 0
                tp = na = nb = 0
                if cell_plan is not None:
                    for doc_id in cell_plan.doubly:
                        pair = [r for (d, p, _a), r in snapshot
                                if d == doc_id and p == protocol]
                        if len(pair) != 2:
                            continue
                        a, b = pair
                        ems.append(exact_match(a, b))
                        f1s.append(link_f1(a, b))
                        m, t = match_counts(a, b)
                        matched, total = matched + m, total + t
                        tp_, na_, nb_ = pair_totals(a, b)
                        tp, na, nb = tp + tp_, na + na_, nb + nb_
                cells.append({
                    "source": source,
                    "protocol": protocol,
                    "n_documents": len(ems),
                    "exact_match": statistics.fmean(ems) if ems else None,
                    "f1": statistics.fmean(f1s) if f1s else None,
                    "micro_exact_match": matched / total if total else None,
                    "micro_f1": 2 * tp / (na + nb) if na + nb else None,
                })
        return cells

    # -- export ---------------------------------------------------------------

    def export_corpus(self) -> CorpusFile:
        """Scored documents plus all accepted records; annotators that were
        later deactivated are flagged, their records kept."""
        snapshot = self._record_snapshot()
        annotators = {r.annotator_id for _k, r in snapshot}
        with self._lock:
            flags = {a: self.qualification[a].active for a in sorted(annotators)}
        return CorpusFile(
            documents=list(self.documents.values()),
            records=[r for _k, r in snapshot],
            annotator_flags=flags or None,
        )

    def export_conll(self) -> tuple[dict[str, str], dict]:
        """One CoNLL document per complete grounded record, plus a sidecar
        describing mentions the lossy conversion dropped."""
        files: dict[str, str] = {}
        sidecar: dict = {}
        parts: dict[str, int] = {}
        for (doc_id, protocol, annotator), record in self._record_snapshot():
            if protocol != GROUNDED:
                continue
            doc = self.documents[doc_id]
            if not record.is_complete(doc):
                continue
            report = grounded_to_clusters(doc, record)
            part = parts.get(doc_id, 0)
            parts[doc_id] = part + 1
            key = f"{doc_id}__{annotator}"
            files[key + ".conll"] = to_conll(doc, report.clusters, part=part).render()
            sidecar[key] = {
                "annotator_id": annotator,
                "dropped_multi_entity": list(report.dropped_multi_entity),
                "unmatched_aliases": [list(p) for p in report.unmatched_aliases],
            }
        return files, sidecar
