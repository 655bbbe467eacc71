"""FastAPI wiring around the task service."""

from __future__ import annotations

import json

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware

from ..corpus_io import write_corpus
from ..model import ModelError
from .core import ServiceError, TaskService
from .schemas import (
    AddEntityRequest,
    AgreementCell,
    AnnotationRecordSchema,
    CorpusLoadRequest,
    CorpusLoadResponse,
    EntitySchema,
    QualificationSchema,
    RegisterAnnotatorRequest,
    SubmitResponse,
    TaskResponse,
    TimingCell,
)

_ERROR_STATUS = {
    "corpus_loaded": 409,
    "exists": 409,
    "duplicate_document": 400,
    "unknown_document": 400,
    "missing_gold": 400,
    "bad_gold": 400,
    "bad_protocol": 400,
    "empty_name": 400,
    "not_issued": 409,
    "wrong_protocol": 409,
    "overtime": 409,
}


def create_app(service: TaskService) -> FastAPI:
    app = FastAPI(title="groundcoref task service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def _service_error(_request, exc: ServiceError):
        from fastapi.responses import JSONResponse

        return JSONResponse(
            status_code=_ERROR_STATUS.get(exc.code, 500),
            content={"error": exc.code, "detail": exc.message},
        )

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "documents": len(service.documents)}

    @app.get("/api/task", response_model=TaskResponse, response_model_exclude_none=True)
    def next_task(
        annotator: str = Query(...),
        protocol: str | None = Query(default=None),
    ) -> TaskResponse:
        return TaskResponse(**service.next_task(annotator, protocol))

    @app.post("/api/annotation", response_model=SubmitResponse, response_model_exclude_none=True)
    def submit(record: AnnotationRecordSchema) -> SubmitResponse:
        try:
            outcome = service.submit(record.to_model())
        except ModelError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return SubmitResponse(**outcome)

    @app.post("/api/entity", response_model=EntitySchema)
    def add_entity(request: AddEntityRequest) -> EntitySchema:
        entity = service.add_entity(request.annotator_id, request.document_id, request.name)
        return EntitySchema(**entity.to_dict())

    @app.post("/api/annotator", response_model=QualificationSchema)
    def register(request: RegisterAnnotatorRequest) -> QualificationSchema:
        state = service.register_annotator(
            request.annotator_id,
            approval_rate=request.approval_rate,
            native_english=request.native_english,
        )
        return QualificationSchema(**state.to_dict())

    @app.get("/api/annotator/{annotator_id}", response_model=QualificationSchema)
    def annotator(annotator_id: str) -> QualificationSchema:
        state = service.qualification.get(annotator_id)
        if state is None:
            raise HTTPException(status_code=404, detail="unknown annotator")
        return QualificationSchema(**state.to_dict())

    @app.get("/api/stats/times", response_model=list[TimingCell])
    def stats_times() -> list[TimingCell]:
        return [TimingCell(**cell) for cell in service.timing_stats()]

    @app.get("/api/stats/agreement", response_model=list[AgreementCell])
    def stats_agreement() -> list[AgreementCell]:
        return [AgreementCell(**cell) for cell in service.agreement_stats()]

    @app.post("/api/corpus", response_model=CorpusLoadResponse)
    def load_corpus(request: CorpusLoadRequest) -> CorpusLoadResponse:
        summary = service.load_corpus(
            [d.to_model() for d in request.documents],
            gold_documents=[d.to_model() for d in request.gold_documents],
            gold_records=[r.to_model() for r in request.gold_records],
            doubly_ids=request.doubly_ids,
        )
        return CorpusLoadResponse(**summary)

    @app.get("/api/export")
    def export(format: str = Query(default="json")) -> Response:
        if format == "json":
            return Response(
                content=write_corpus(service.export_corpus()),
                media_type="application/json",
            )
        if format == "conll":
            files, sidecar = service.export_conll()
            body = "".join(files[name] for name in sorted(files))
            return Response(
                content=body,
                media_type="text/plain; charset=utf-8",
                headers={"X-Conll-Sidecar": json.dumps(sidecar, sort_keys=True)},
            )
        raise HTTPException(status_code=400, detail=f"unknown export format {format!r}")

    return app
