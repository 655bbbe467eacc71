"""Command-line interface.

File-based operations (ingest, agree, score, convert, export) run
locally against corpus files; ``serve`` starts the HTTP task service and
the ``client`` group talks to a running instance.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import agreement as agreement_mod
from .clusters import MentionId, grounded_to_clusters
from .conll import to_conll
from .corpus_io import CorpusFile, read_corpus, write_corpus
from .ingest import (
    IngestReport,
    admit_document,
    build_quac_document,
    build_wiki_document,
    load_quac_records,
    read_pages_dir,
)
from .lexicon import PronounLexicon, default_lexicon
from .metrics import ClusterSet, b_cubed, ceaf_e, macro_average, muc
from .model import AnnotationRecord, Document


def _echo_json(obj, **kwargs) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False), **kwargs)


def _load_lexicon(path: str | None) -> PronounLexicon:
    return PronounLexicon.load(path) if path else default_lexicon()


def _emit_report(report: IngestReport) -> None:
    for line in report.lines():
        click.echo(json.dumps(line, sort_keys=True), err=True)


@click.group()
def main() -> None:
    """Grounded coreference annotation platform."""


# -- ingest -------------------------------------------------------------------


@main.group()
def ingest() -> None:
    """Build annotation-ready corpora from raw pages."""


@ingest.command("wiki")
@click.option("--pages", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--lexicon", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def ingest_wiki(pages: str, lexicon: str | None, out: str) -> None:
    """Ingest rendered Wikipedia pages (lead summaries)."""
    lex = _load_lexicon(lexicon)
    report = IngestReport()
    documents = []
    for page in read_pages_dir(pages).values():
        doc = build_wiki_document(page, lex, report)
        if doc is None:
            continue
        if not admit_document(doc):
            report.skip(page.page_id, "too_few_pronouns")
            continue
        documents.append(doc)
    Path(out).write_bytes(write_corpus(CorpusFile(documents=documents)))
    _emit_report(report)
    click.echo(f"wrote {len(documents)} documents to {out}", err=True)


@ingest.command("quac")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pages", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--lexicon", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def ingest_quac(records_path: str, pages: str, lexicon: str | None, out: str) -> None:
    """Ingest QuAC-style records; entities come from companion pages."""
    lex = _load_lexicon(lexicon)
    report = IngestReport()
    companion_pages = read_pages_dir(pages)
    documents = []
    for record in load_quac_records(records_path):
        page = companion_pages.get(record.wiki_page_id) if record.wiki_page_id else None
        doc = build_quac_document(record, page, lex, report)
        if doc is None:
            continue
        if not admit_document(doc):
            report.skip(record.record_id, "too_few_pronouns")
            continue
        documents.append(doc)
    Path(out).write_bytes(write_corpus(CorpusFile(documents=documents)))
    _emit_report(report)
    click.echo(f"wrote {len(documents)} documents to {out}", err=True)


# -- agreement ----------------------------------------------------------------


def _load_record(path: str) -> AnnotationRecord:
    return AnnotationRecord.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@main.command("agree")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--doc", "doc_id", default=None, help="Score one document's record pair.")
@click.option("--a", "a_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "b_path", type=click.Path(exists=True, dir_okay=False))
def agree(corpus_path: str, doc_id: str | None, a_path: str | None, b_path: str | None) -> None:
    """Inter-annotator agreement: one record pair, or corpus-wide cells
    per (source, protocol) with micro and macro aggregates."""
    corpus = read_corpus(Path(corpus_path).read_bytes())
    if doc_id is not None:
        if not (a_path and b_path):
            raise click.UsageError("--doc mode requires --a and --b record files")
        document = corpus.document(doc_id)
        report = agreement_mod.agreement_report(_load_record(a_path), _load_record(b_path), document)
        _echo_json(report.to_dict())
        return

    docs = {d.id: d for d in corpus.documents}
    pairs: dict[tuple[str, str], list] = {}
    by_key: dict[tuple[str, str], list[AnnotationRecord]] = {}
    for record in corpus.records:
        by_key.setdefault((record.document_id, record.protocol), []).append(record)
    for (did, protocol), records in sorted(by_key.items()):
        if len(records) != 2 or did not in docs:
            continue
        a, b = records
        source = docs[did].source
        pairs.setdefault((source, protocol), []).append(
            (agreement_mod.match_counts(a, b), agreement_mod.pair_totals(a, b),
             agreement_mod.exact_match(a, b), agreement_mod.link_f1(a, b))
        )
    cells = []
    for (source, protocol), items in sorted(pairs.items()):
        matched = sum(m for (m, _t), _p, _e, _f in items)
        total = sum(t for (_m, t), _p, _e, _f in items)
        tp = sum(p[0] for _c, p, _e, _f in items)
        na = sum(p[1] for _c, p, _e, _f in items)
        nb = sum(p[2] for _c, p, _e, _f in items)
        cells.append({
            "source": source,
            "protocol": protocol,
            "n_documents": len(items),
            "micro_exact_match": matched / total if total else None,
            "micro_f1": 2 * tp / (na + nb) if na + nb else None,
            "macro_exact_match": sum(e for _c, _p, e, _f in items) / len(items),
            "macro_f1": sum(f for _c, _p, _e, f in items) / len(items),
        })
    _echo_json(cells)


# -- scoring ------------------------------------------------------------------


def _load_clusters(path: str) -> ClusterSet:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return ClusterSet(
        [{MentionId.from_list(q) for q in cluster} for cluster in raw["clusters"]]
    )


@main.command("score")
@click.option("--key", "key_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--response", "response_path", required=True, type=click.Path(exists=True, dir_okay=False))
def score(key_path: str, response_path: str) -> None:
    """MUC, B-cubed, and entity-CEAF triples plus their macro average."""
    key = _load_clusters(key_path)
    response = _load_clusters(response_path)
    triples = {
        "muc": muc(key, response),
        "b_cubed": b_cubed(key, response),
        "ceaf_e": ceaf_e(key, response),
    }
    out = {name: t.to_dict() for name, t in triples.items()}
    out["macro_average"] = macro_average(list(triples.values())).to_dict()
    _echo_json(out)


@main.command("convert")
@click.option("--doc", "doc_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--record", "record_path", required=True, type=click.Path(exists=True, dir_okay=False))
def convert(doc_path: str, record_path: str) -> None:
    """Grounded record to mention clusters (lossy; report says what dropped)."""
    document = Document.from_dict(json.loads(Path(doc_path).read_text(encoding="utf-8")))
    record = _load_record(record_path)
    _echo_json(grounded_to_clusters(document, record).to_dict())


# -- export -------------------------------------------------------------------


@main.group()
def export() -> None:
    """Write corpus artifacts in exchange formats."""


@export.command("json")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
def export_json(corpus_path: str) -> None:
    """Re-emit a corpus in canonical form on stdout."""
    corpus = read_corpus(Path(corpus_path).read_bytes())
    sys.stdout.write(write_corpus(corpus).decode("utf-8"))


@export.command("conll")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def export_conll(corpus_path: str, out_dir: str) -> None:
    """One CoNLL-2012 file per complete grounded record, with a sidecar
    for mentions dropped by the lossy conversion."""
    corpus = read_corpus(Path(corpus_path).read_bytes())
    docs = {d.id: d for d in corpus.documents}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sidecar: dict = {}
    parts: dict[str, int] = {}
    written = 0
    for record in corpus.records:
        if record.protocol != "grounded":
            continue
        document = docs[record.document_id]
        if not record.is_complete(document):
            continue
        report = grounded_to_clusters(document, record)
        part = parts.get(document.id, 0)
        parts[document.id] = part + 1
        key = f"{document.id}__{record.annotator_id}"
        (out / f"{key}.conll").write_text(
            to_conll(document, report.clusters, part=part).render(), encoding="utf-8"
        )
        sidecar[key] = {
            "dropped_multi_entity": list(report.dropped_multi_entity),
            "unmatched_aliases": [list(p) for p in report.unmatched_aliases],
        }
        written += 1
    (out / "dropped_mentions.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    click.echo(f"wrote {written} conll files to {out_dir}", err=True)


# -- service ------------------------------------------------------------------


@main.command("serve")
@click.option("--data-dir", default=None, type=click.Path(file_okay=False))
@click.option("--port", default=None, type=int)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
def serve(data_dir: str | None, port: int | None, config_path: str | None) -> None:
    """Run the annotation task service."""
    import uvicorn

    from .service import ServiceConfig, TaskService
    from .service.app import create_app

    if config_path:
        config = ServiceConfig.from_file(config_path)
    else:
        config = ServiceConfig.from_env()
    if data_dir:
        config.data_dir = Path(data_dir)
    if port:
        config.port = port
    service = TaskService(config.data_dir, config=config)
    uvicorn.run(create_app(service), host="0.0.0.0", port=config.port)


@main.group()
def client() -> None:
    """Talk to a running task service."""


@client.command("push-corpus")
@click.option("--url", required=True)
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--doubly", "doubly_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="JSON mapping source -> doubly-annotated document ids.")
def push_corpus(url: str, corpus_path: str, gold_path: str | None, doubly_path: str | None) -> None:
    """Load a corpus (and optional gold test pool) into the service."""
    import httpx

    corpus = read_corpus(Path(corpus_path).read_bytes())
    payload: dict = {
        "documents": [d.to_dict() for d in corpus.documents],
        "gold_documents": [],
        "gold_records": [],
    }
    if gold_path:
        gold = read_corpus(Path(gold_path).read_bytes())
        payload["gold_documents"] = [d.to_dict() for d in gold.documents]
        payload["gold_records"] = [r.to_dict() for r in gold.records]
    if doubly_path:
        payload["doubly_ids"] = json.loads(Path(doubly_path).read_text(encoding="utf-8"))
    response = httpx.post(url.rstrip("/") + "/api/corpus", json=payload, timeout=60.0)
    response.raise_for_status()
    _echo_json(response.json())


@client.command("export")
@click.option("--url", required=True)
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "conll"]))
def client_export(url: str, fmt: str) -> None:
    """Fetch the service's current corpus export."""
    import httpx

    response = httpx.get(url.rstrip("/") + "/api/export", params={"format": fmt}, timeout=60.0)
    response.raise_for_status()
    sys.stdout.write(response.text)


if __name__ == "__main__":
    main()
