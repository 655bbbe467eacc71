from __future__ import annotations

import json

import pytest

from groundcoref.ingest import (
    IngestReport,
    RawPage,
    admit_document,
    build_quac_document,
    detect_markables,
    extract_entities,
    extract_summary,
)
from groundcoref.lexicon import default_lexicon
from groundcoref.model import Document, Markable, Section


def canonical(doc_dict: dict) -> bytes:
    return (json.dumps(doc_dict, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


class TestFixtureCorpus:
    def test_admitted_documents_match_expected_bytes(
        self, ingested_corpus, expected_documents, fixture_manifest
    ):
        documents, _report = ingested_corpus
        assert sorted(documents) == fixture_manifest["admitted"]
        for doc_id, doc in documents.items():
            expected = expected_documents[doc_id].read_bytes()
            assert canonical(doc.to_dict()) == expected, f"document {doc_id} diverges"

    def test_skips_reported_with_reasons(self, ingested_corpus, fixture_manifest):
        _documents, report = ingested_corpus
        got = sorted(report.skipped, key=lambda s: s["page_id"])
        assert got == fixture_manifest["skipped"]

    def test_malformed_link_counts(self, ingested_corpus, fixture_manifest):
        _documents, report = ingested_corpus
        assert report.malformed_links == fixture_manifest["malformed_links"]

    def test_offset_soundness_corpus_wide(self, ingested_corpus):
        documents, _report = ingested_corpus
        for doc in documents.values():
            for m in doc.markables:
                section = doc.sections[m.section_index]
                assert section.text[m.span[0]:m.span[1]] == m.surface

    def test_lexicon_closure(self, ingested_corpus, lexicon):
        documents, _report = ingested_corpus
        for doc in documents.values():
            for m in doc.markables:
                assert lexicon.category(m.surface.lower()) == m.category

    def test_markables_sorted_and_non_overlapping(self, ingested_corpus):
        documents, _report = ingested_corpus
        for doc in documents.values():
            by_section: dict[int, list[Markable]] = {}
            for m in doc.markables:
                by_section.setdefault(m.section_index, []).append(m)
            flat = [(m.section_index, m.span[0]) for m in doc.markables]
            assert flat == sorted(flat)
            for marks in by_section.values():
                for prev, cur in zip(marks, marks[1:]):
                    assert prev.span[1] <= cur.span[0]

    def test_entity_dedup_counts(self, ingested_corpus):
        documents, _report = ingested_corpus
        for doc in documents.values():
            targets = {(e.provenance, e.target) for e in doc.entities}
            assert len(targets) == len(doc.entities)


class TestExtractSummary:
    def test_two_paragraphs_before_heading(self, fixture_pages):
        section = extract_summary(fixture_pages["fragments"])
        assert section is not None
        assert section.text.count("\n") == 1

    def test_page_starting_with_heading_has_no_summary(self, fixture_pages):
        assert extract_summary(fixture_pages["no_summary"]) is None

    def test_single_paragraph_page(self):
        page = RawPage("p", "P", "<p>One paragraph only.</p>", "wiki")
        section = extract_summary(page)
        assert section is not None
        assert section.text == "One paragraph only."
        assert section.kind == "summary"

    def test_rejects_quac_pages(self):
        with pytest.raises(ValueError):
            extract_summary(RawPage("p", "P", "<p>x</p>", "quac"))


class TestExtractEntities:
    def test_anchor_yields_canonical_and_alias(self):
        page = RawPage("p", "P", '<p><a href="/wiki/Harry_Potter">Harry</a> won.</p>', "wiki")
        (ent,) = extract_entities(page)
        assert ent.canonical_name == "Harry Potter"
        assert set(ent.aliases) >= {"Harry Potter", "Harry"}
        assert ent.provenance == "wikilink"
        assert ent.target == "/wiki/Harry_Potter"

    def test_same_target_merges_aliases(self):
        page = RawPage(
            "p", "P",
            '<p><a href="/wiki/J._K._Rowling">Rowling</a> and '
            '<a href="/wiki/J._K._Rowling">J. K. Rowling</a>.</p>',
            "wiki",
        )
        (ent,) = extract_entities(page)
        assert list(ent.aliases) == ["J. K. Rowling", "Rowling"]

    def test_no_anchors_no_entities(self):
        assert extract_entities(RawPage("p", "P", "<p>plain</p>", "wiki")) == []

    def test_malformed_counted_not_fatal(self):
        report = IngestReport()
        page = RawPage(
            "p", "P",
            '<p><a href="/wiki/Bad%ZZ">bad</a> <a href="/wiki/Good">good</a></p>',
            "wiki",
        )
        entities = extract_entities(page, report)
        assert [e.canonical_name for e in entities] == ["Good"]
        assert report.malformed_links == {"p": 1}


class TestDetectMarkables:
    def test_direct_lookup(self, lexicon):
        marks = detect_markables([Section(0, "summary", "He saw her.")], lexicon)
        assert [(m.surface, m.span) for m in marks] == [("He", (0, 2)), ("her", (7, 10))]

    def test_token_boundary_rule(self, lexicon):
        assert detect_markables([Section(0, "summary", "The shed stood.")], lexicon) == []

    def test_all_of_whom(self, lexicon):
        marks = detect_markables([Section(0, "summary", "all of whom")], lexicon)
        assert [(m.surface, m.category) for m in marks] == [
            ("all", "indefinite"),
            ("whom", "relative"),
        ]
        assert [m.span for m in marks] == [(0, 3), (7, 11)]

    def test_categories_follow_lexicon(self, lexicon):
        marks = detect_markables([Section(0, "summary", "Which one is theirs?")], lexicon)
        assert [(m.surface, m.category) for m in marks] == [
            ("Which", "interrogative"),
            ("one", "indefinite"),
            ("theirs", "possessive"),
        ]


class TestAdmission:
    def build(self, n_pronouns: int, kind: str = "summary") -> Document:
        text = " ".join(["it"] * n_pronouns) or "nothing here"
        section = Section(0, kind, text)
        marks = detect_markables([section], default_lexicon()) if n_pronouns else ()
        return Document("d", "wiki" if kind == "summary" else "quac", "T", (section,), tuple(marks), ())

    def test_five_is_admitted(self):
        assert admit_document(self.build(5)) is True

    def test_four_is_rejected(self):
        assert admit_document(self.build(4)) is False

    def test_empty_document_rejected(self):
        doc = Document("d", "wiki", "T", (), (), ())
        assert admit_document(doc) is False

    def test_qa_markables_do_not_count(self, lexicon):
        sections = (
            Section(0, "context", "it it it it"),
            Section(1, "question", "it it"),
        )
        marks = detect_markables(list(sections), lexicon)
        doc = Document("d", "quac", "T", sections, tuple(marks), ())
        assert len(doc.markables) == 6
        assert admit_document(doc) is False

    def test_admission_monotone_under_added_pronoun(self, lexicon):
        for base in ("no pronouns at all", "it it it it it", "it " * 12):
            section = Section(0, "summary", base.strip())
            marks = detect_markables([section], lexicon)
            doc = Document("d", "wiki", "T", (section,), tuple(marks), ())
            grown = Section(0, "summary", base.strip() + " they")
            grown_marks = detect_markables([grown], lexicon)
            grown_doc = Document("d", "wiki", "T", (grown,), tuple(grown_marks), ())
            if admit_document(doc):
                assert admit_document(grown_doc)


class TestQuacBuild:
    def test_section_layout(self, ingested_corpus):
        documents, _ = ingested_corpus
        doc = documents["quac_potter"]
        assert [s.kind for s in doc.sections] == ["context", "question", "answer", "question", "answer"]
        assert len(doc.sections) == 5

    def test_entities_come_from_companion(self, ingested_corpus):
        documents, _ = ingested_corpus
        doc = documents["quac_potter"]
        assert [e.canonical_name for e in doc.entities] == ["Harry Potter"]

    def test_missing_companion_skips(self, lexicon):
        from groundcoref.ingest import QuacRecord

        report = IngestReport()
        record = QuacRecord("q", "Q", "it " * 6, (), wiki_page_id=None)
        assert build_quac_document(record, None, lexicon, report) is None
        assert report.skipped == [{"page_id": "q", "reason": "missing_companion_page"}]

    def test_markable_kind_toggle(self, fixture_pages, lexicon):
        from groundcoref.ingest import QuacRecord

        record = QuacRecord(
            "q", "Q", "it it it it it it",
            (("does it work?", "it does"),),
            wiki_page_id="harry_potter",
        )
        full = build_quac_document(record, fixture_pages["harry_potter"], lexicon)
        context_only = build_quac_document(
            record, fixture_pages["harry_potter"], lexicon, markable_kinds=("context",)
        )
        assert len(full.markables) == 8
        assert len(context_only.markables) == 6
