"""HTTP/JSON surface over the study service.

Thin adapter: every route delegates to StudyService and maps ServiceError to
a structured JSON error body {code, message, expected_state?} with the
matching status code.  State changes happen under the service lock, so the
API inherits its sequencing guarantees.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.requests import Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .service import ServiceError, StudyService


class CreateStudyBody(BaseModel):
    plan: dict
    n_sessions: int
    seed: int = 0


class CreateSessionBody(BaseModel):
    participant: str = ""


class AnswerBody(BaseModel):
    token: str
    index: int
    choice: str
    response_ms: float


def _answer_rows(answers) -> list[dict]:
    return [
        {
            "anchor": rec.triplet.anchor,
            "left": rec.triplet.left,
            "right": rec.triplet.right,
            "answer": rec.answer.value,
            "response_ms": rec.answer.response_ms,
            "source": rec.answer.source,
        }
        for rec in answers
    ]


def create_app(service: StudyService | str | Path) -> FastAPI:
    if not isinstance(service, StudyService):
        service = StudyService(service)
    app = FastAPI(title="triplab study service")
    app.state.service = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ServiceError)
    async def _service_error(_request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.http_status, content=exc.to_dict())

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/studies")
    def create_study(body: CreateStudyBody):
        study_id = service.create_study(body.plan, body.n_sessions, body.seed)
        return {"study_id": study_id}

    @app.get("/studies/{study_id}")
    def study_status(study_id: str):
        return service.study_status(study_id)

    @app.post("/studies/{study_id}/sessions")
    def create_session(study_id: str, body: CreateSessionBody):
        return service.create_session(study_id, body.participant)

    @app.get("/sessions/{session_id}")
    def session_status(session_id: str):
        return service.session_status(session_id)

    @app.get("/sessions/{session_id}/next")
    def next_question(session_id: str, token: str):
        return service.next_question(session_id, token)

    @app.post("/sessions/{session_id}/answers")
    def submit_answer(session_id: str, body: AnswerBody):
        return service.submit_answer(session_id, body.token, body.index, body.choice, body.response_ms)

    @app.get("/sessions/{session_id}/validation")
    def validation(session_id: str):
        return service.validate_session(session_id).to_dict()

    @app.get("/studies/{study_id}/export")
    def export(study_id: str, which: str = "accepted"):
        experimental, test = service.export_answers(study_id, which)
        return {
            "study_id": study_id,
            "which": which,
            "experimental": _answer_rows(experimental),
            "test": _answer_rows(test),
        }

    return app
