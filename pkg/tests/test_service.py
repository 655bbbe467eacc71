from __future__ import annotations

import json

import pytest

from groundcoref.ingest import detect_markables
from groundcoref.lexicon import default_lexicon
from groundcoref.model import (
    AnnotationRecord,
    Document,
    Entity,
    EntitySet,
    NoReference,
    Section,
    SpanSet,
)
from groundcoref.service import ServiceConfig, ServiceError, TaskService

LEX = default_lexicon()


class Clock:
    def __init__(self, start: float = 1_000.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


def make_doc(doc_id: str, source: str = "wiki", text: str | None = None) -> Document:
    text = text or "He saw her and they ran to it, as everyone watched."
    kind = "summary" if source == "wiki" else "context"
    section = Section(0, kind, text)
    marks = detect_markables([section], LEX)
    entity = Entity("e1", "Landmark", ("Landmark",), "wikilink", "/wiki/Landmark")
    return Document(doc_id, source, doc_id, (section,), tuple(marks), (entity,))


def noref_record(doc: Document, annotator: str, *, start: float, duration: float = 120.0,
                 protocol: str = "grounded") -> AnnotationRecord:
    if protocol == "grounded":
        links = {m.id: NoReference() for m in doc.markables}
    else:
        links = {m.id: SpanSet(((0, 0, 2),)) for m in doc.markables}
    return AnnotationRecord(
        annotator, doc.id, protocol, links, (),
        started_at=start, finished_at=start + duration, duration=duration,
    )


@pytest.fixture
def clock():
    return Clock()


@pytest.fixture
def service(tmp_path, clock):
    config = ServiceConfig(data_dir=tmp_path, doubly_target=2)
    svc = TaskService(tmp_path, config=config, clock=clock)
    docs = [make_doc(f"w{i:02d}") for i in range(6)]
    gold_docs = [make_doc(f"g{i:02d}") for i in range(8)]
    gold_records = [noref_record(d, "curator", start=0.0) for d in gold_docs]
    svc.load_corpus(docs, gold_documents=gold_docs, gold_records=gold_records)
    return svc


def fetch_doc(service: TaskService, bundle: dict) -> Document:
    return Document.from_dict(bundle["task"]["document"])


def complete_one(service: TaskService, annotator: str, clock: Clock, *, matching_gold=True):
    out = service.next_task(annotator, "grounded")
    assert out["status"] == "ok", out
    doc = fetch_doc(service, out)
    record = noref_record(doc, annotator, start=clock.now)
    outcome = service.submit(record)
    assert outcome["status"] == "accepted"
    return doc


class TestIssueAndGating:
    def test_first_four_tasks_regular_fifth_is_test(self, service, clock):
        issued = []
        for _ in range(5):
            out = service.next_task("ann", "grounded")
            doc = fetch_doc(service, out)
            issued.append(doc.id)
            service.submit(noref_record(doc, "ann", start=clock.now))
        assert all(d.startswith("w") for d in issued[:4])
        assert issued[4].startswith("g")

    def test_payload_schema_identical_for_tests(self, service, clock):
        def shapes(payload, prefix=""):
            out = set()
            for key, value in payload.items():
                out.add(prefix + key)
                if isinstance(value, dict):
                    out |= shapes(value, prefix + key + ".")
            return out

        regular = service.next_task("ann", "grounded")
        doc = fetch_doc(service, regular)
        service.submit(noref_record(doc, "ann", start=clock.now))
        for _ in range(3):
            complete_one(service, "ann", clock)
        test_task = service.next_task("ann", "grounded")
        assert fetch_doc(service, test_task).id.startswith("g")
        assert shapes(regular) == shapes(test_task)

    def test_passing_score_keeps_annotator_active(self, service, clock):
        for _ in range(4):
            complete_one(service, "ann", clock)
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        record = noref_record(doc, "ann", start=clock.now)  # equals gold: score 1.0
        assert service.submit(record)["status"] == "accepted"
        state = service.qualification["ann"]
        assert state.active
        assert state.test_history[-1]["passed"]

    def test_failing_score_deactivates_silently(self, service, clock):
        for _ in range(4):
            complete_one(service, "ann", clock)
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        links = {m.id: EntitySet(frozenset({"e1"})) for m in doc.markables}
        wrong = AnnotationRecord("ann", doc.id, "grounded", links, (),
                                 clock.now, clock.now + 50, 50)
        outcome = service.submit(wrong)
        assert outcome == {"status": "accepted"}  # indistinguishable from a pass
        assert not service.qualification["ann"].active
        assert service.next_task("ann", "grounded") == {"status": "refused", "reason": "deactivated"}

    def test_gating_is_conjunction_over_history(self, service, clock):
        for _ in range(4):
            complete_one(service, "ann", clock)
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        service.submit(noref_record(doc, "ann", start=clock.now))
        state = service.qualification["ann"]
        assert state.active == all(t["passed"] for t in state.test_history)

    def test_ineligible_annotator_refused(self, tmp_path, clock):
        config = ServiceConfig(data_dir=tmp_path)
        svc = TaskService(tmp_path, config=config, clock=clock)
        svc.load_corpus([make_doc("w1")])
        svc.register_annotator("lowrate", approval_rate=0.5, native_english=True)
        assert svc.next_task("lowrate") == {"status": "refused", "reason": "ineligible"}

    def test_no_double_issue_same_triple(self, service, clock):
        seen = set()
        while True:
            out = service.next_task("ann", "grounded")
            if out["status"] != "ok":
                break
            doc = fetch_doc(service, out)
            key = ("ann", doc.id, "grounded")
            assert key not in seen
            seen.add(key)
            service.submit(noref_record(doc, "ann", start=clock.now))

    def test_open_task_reserved_until_deadline(self, service, clock):
        out1 = service.next_task("ann", "grounded")
        out2 = service.next_task("ann", "grounded")
        assert out1["task"]["document"]["id"] == out2["task"]["document"]["id"]
        assert out1["task"]["deadline"] == out2["task"]["deadline"]

    def test_expired_task_returns_to_pool_for_others(self, service, clock):
        out = service.next_task("ann", "grounded")
        doc_id = out["task"]["document"]["id"]
        clock.advance(601)
        next_out = service.next_task("ann", "grounded")
        assert next_out["task"]["document"]["id"] != doc_id  # never reissued to ann
        other = service.next_task("other", "grounded")
        assert other["task"]["document"]["id"] == doc_id  # least covered again


class TestSubmission:
    def test_overtime_duration_rejected(self, service, clock):
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        record = noref_record(doc, "ann", start=clock.now, duration=601.0)
        outcome = service.submit(record)
        assert outcome["status"] == "rejected"
        assert any(v["code"] == "overtime" for v in outcome["violations"])
        boundary = noref_record(doc, "ann", start=clock.now, duration=600.0)
        assert service.submit(boundary)["status"] == "accepted"

    def test_wall_clock_deadline_enforced(self, service, clock):
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        record = noref_record(doc, "ann", start=clock.now, duration=100.0)
        clock.advance(700)
        outcome = service.submit(record)
        assert outcome["status"] == "rejected"
        assert outcome["violations"][0]["code"] == "overtime"

    def test_submission_without_issue_refused(self, service, clock):
        doc = make_doc("w00")
        record = noref_record(doc, "stranger", start=clock.now)
        assert service.submit(record) == {"status": "refused", "reason": "not_issued"}

    def test_duplicate_resubmission_idempotent(self, service, clock):
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        record = noref_record(doc, "ann", start=clock.now)
        first = service.submit(record)
        again = service.submit(record)
        assert first == {"status": "accepted"}
        assert again == {"status": "accepted", "duplicate": True}
        assert len(service.records) == 1

    def test_conflicting_resubmission_refused(self, service, clock):
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        record = noref_record(doc, "ann", start=clock.now)
        service.submit(record)
        different = noref_record(doc, "ann", start=clock.now, duration=99.0)
        assert service.submit(different)["status"] == "refused"

    def test_incomplete_record_stored_as_draft(self, service, clock):
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        links = {doc.markables[0].id: NoReference()}
        draft = AnnotationRecord("ann", doc.id, "grounded", links, (),
                                 clock.now, clock.now + 10, 10)
        assert service.submit(draft) == {"status": "draft"}
        assert len(service.drafts) == 1
        assert len(service.records) == 0
        full = noref_record(doc, "ann", start=clock.now)
        assert service.submit(full)["status"] == "accepted"
        assert len(service.drafts) == 0

    def test_invalid_record_rejected_with_violations(self, service, clock):
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        links = {m.id: EntitySet(frozenset({"ghost"})) for m in doc.markables}
        record = AnnotationRecord("ann", doc.id, "grounded", links, (),
                                  clock.now, clock.now + 10, 10)
        outcome = service.submit(record)
        assert outcome["status"] == "rejected"
        assert any(v["code"] == "unknown_entity" for v in outcome["violations"])


class TestAddEntity:
    def test_add_and_link(self, service, clock):
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        entity = service.add_entity("ann", doc.id, "Room 624")
        assert entity.provenance == "annotator_added"
        links = {m.id: NoReference() for m in doc.markables}
        links[doc.markables[0].id] = EntitySet(frozenset({entity.id}))
        record = AnnotationRecord("ann", doc.id, "grounded", links, (entity,),
                                  clock.now, clock.now + 60, 60)
        assert service.submit(record)["status"] == "accepted"
        assert "Room 624" not in [e.canonical_name for e in service.documents[doc.id].entities]

    def test_empty_name_refused(self, service, clock):
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        with pytest.raises(ServiceError, match="empty"):
            service.add_entity("ann", doc.id, "   ")

    def test_without_open_task_refused(self, service):
        with pytest.raises(ServiceError, match="open task"):
            service.add_entity("ann", "w00", "X")

    def test_span_protocol_refused(self, service, clock):
        out = service.next_task("ann", "span")
        doc = fetch_doc(service, out)
        with pytest.raises(ServiceError, match="grounded"):
            service.add_entity("ann", doc.id, "X")


class TestAnalytics:
    def test_timing_cells(self, tmp_path, clock):
        config = ServiceConfig(data_dir=tmp_path, doubly_target=0)
        svc = TaskService(tmp_path, config=config, clock=clock)
        docs = [make_doc("w1"), make_doc("w2")]
        svc.load_corpus(docs)
        for annotator, duration in (("a1", 60.0), ("a2", 120.0)):
            out = svc.next_task(annotator, "grounded")
            doc = Document.from_dict(out["task"]["document"])
            svc.submit(noref_record(doc, annotator, start=clock.now, duration=duration))
        cells = {(c["source"], c["protocol"]): c for c in svc.timing_stats()}
        wiki = cells[("wiki", "grounded")]
        assert wiki["n"] == 2
        assert wiki["mean"] == 90.0
        assert wiki["stddev"] == pytest.approx(42.426, abs=1e-3)
        assert cells[("quac", "grounded")] == {
            "source": "quac", "protocol": "grounded", "n": 0, "mean": None, "stddev": None,
        }

    def test_single_record_has_no_stddev(self, service, clock):
        complete_one(service, "solo", clock)
        cells = {(c["source"], c["protocol"]): c for c in service.timing_stats()}
        assert cells[("wiki", "grounded")]["stddev"] is None

    def test_agreement_report_perfect_agreement(self, service, clock):
        # two annotators complete the same doubly annotated documents identically
        for annotator in ("a1", "a2"):
            for _ in range(4):
                out = service.next_task(annotator, "grounded")
                if out["status"] != "ok":
                    break
                doc = fetch_doc(service, out)
                service.submit(noref_record(doc, annotator, start=clock.now))
        cells = {(c["source"], c["protocol"]): c for c in service.agreement_stats()}
        wiki = cells[("wiki", "grounded")]
        assert wiki["n_documents"] == 2
        assert wiki["exact_match"] == 1.0
        assert wiki["f1"] == 1.0
        assert wiki["micro_exact_match"] == 1.0

    def test_agreement_report_empty_when_no_pairs(self, service):
        cells = service.agreement_stats()
        assert all(c["n_documents"] == 0 for c in cells)


class TestPersistence:
    def test_restart_preserves_everything(self, tmp_path, clock):
        config = ServiceConfig(data_dir=tmp_path, doubly_target=2)
        svc = TaskService(tmp_path, config=config, clock=clock)
        docs = [make_doc(f"w{i}") for i in range(4)]
        gold = [make_doc(f"g{i}") for i in range(2)]
        gold_records = [noref_record(d, "curator", start=0.0) for d in gold]
        svc.load_corpus(docs, gold_documents=gold, gold_records=gold_records)
        doc = complete_one(svc, "ann", clock)
        open_task = svc.next_task("ann", "grounded")

        again = TaskService(tmp_path, config=config, clock=clock)
        assert set(again.documents) == set(svc.documents)
        assert set(again.gold_documents) == set(svc.gold_documents)
        assert again.records == svc.records
        assert again.qualification["ann"].completed_count == 1
        assert again.open_tasks["ann"].document_id == open_task["task"]["document"]["id"]
        resumed = again.next_task("ann", "grounded")
        assert resumed["task"]["document"]["id"] == open_task["task"]["document"]["id"]

    def test_write_ahead_log_contains_accept_before_ack(self, service, clock):
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        service.submit(noref_record(doc, "ann", start=clock.now))
        lines = [json.loads(l) for l in
                 (service.config.data_dir / "events.jsonl").read_text().splitlines()]
        assert any(e["event"] == "accept" for e in lines)

    def test_corpus_reload_rejected(self, service):
        with pytest.raises(ServiceError, match="already"):
            service.load_corpus([make_doc("new")])


class TestExports:
    def test_json_export_flags_deactivated_annotators(self, service, clock):
        for _ in range(4):
            complete_one(service, "ann", clock)
        out = service.next_task("ann", "grounded")
        doc = fetch_doc(service, out)
        links = {m.id: EntitySet(frozenset({"e1"})) for m in doc.markables}
        service.submit(AnnotationRecord("ann", doc.id, "grounded", links, (),
                                        clock.now, clock.now + 50, 50))
        corpus = service.export_corpus()
        assert corpus.annotator_flags == {"ann": False}
        assert len(corpus.records) == 4  # test submissions are not records

    def test_conll_export_per_grounded_record(self, service, clock):
        complete_one(service, "ann", clock)
        files, sidecar = service.export_conll()
        assert len(files) == 1
        (name,) = files
        assert name.endswith(".conll")
        assert "#begin document" in files[name]
        key = name.removesuffix(".conll")
        assert "dropped_multi_entity" in sidecar[key]


class TestHttpApi:
    @pytest.fixture
    def client(self, service):
        from fastapi.testclient import TestClient

        from groundcoref.service.app import create_app

        return TestClient(create_app(service))

    def test_task_submit_cycle(self, client, service, clock):
        out = client.get("/api/task", params={"annotator": "ann", "protocol": "grounded"})
        assert out.status_code == 200
        body = out.json()
        assert body["status"] == "ok"
        doc = Document.from_dict(body["task"]["document"])
        record = noref_record(doc, "ann", start=clock.now)
        posted = client.post("/api/annotation", json=record.to_dict())
        assert posted.status_code == 200
        assert posted.json()["status"] == "accepted"

    def test_entity_endpoint(self, client, service):
        body = client.get("/api/task", params={"annotator": "ann", "protocol": "grounded"}).json()
        doc_id = body["task"]["document"]["id"]
        out = client.post("/api/entity", json={
            "annotator_id": "ann", "document_id": doc_id, "name": "Room 624",
        })
        assert out.status_code == 200
        assert out.json()["canonical_name"] == "Room 624"
        bad = client.post("/api/entity", json={
            "annotator_id": "ann", "document_id": doc_id, "name": " ",
        })
        assert bad.status_code == 400

    def test_stats_endpoints(self, client):
        times = client.get("/api/stats/times")
        assert times.status_code == 200
        assert len(times.json()) == 4
        agreement = client.get("/api/stats/agreement")
        assert agreement.status_code == 200

    def test_export_json(self, client):
        out = client.get("/api/export", params={"format": "json"})
        assert out.status_code == 200
        assert out.json()["version"] == "1"

    def test_export_conll(self, client, service, clock):
        complete_one(service, "ann", clock)
        out = client.get("/api/export", params={"format": "conll"})
        assert out.status_code == 200
        assert out.text.startswith("#begin document")

    def test_corpus_reload_conflict(self, client):
        out = client.post("/api/corpus", json={"documents": []})
        assert out.status_code == 409

    def test_malformed_record_rejected(self, client):
        out = client.post("/api/annotation", json={"nonsense": True})
        assert out.status_code == 422
