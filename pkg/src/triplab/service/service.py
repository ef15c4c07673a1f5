"""Session orchestration over the durable store.

One service instance owns a storage root.  All mutating calls persist their
event before acknowledging, so a process crash between ack and anything else
loses nothing; a fresh instance on the same root resumes every session at the
exact question it was on.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from uuid import uuid4

from ..core import AnswerSet, write_answer_set
from .model import (
    CHOICES,
    SessionTemplate,
    StudyPlan,
    ValidationReport,
    answers_from_session,
    gold_error_count,
    plan_sessions,
)
from .store import StudyStore

SESSION_STATES = ("created", "active", "completed", "expired")
EXPORT_FILTERS = ("accepted", "all")


class ServiceError(Exception):
    """A request the service refuses; carries a structured error payload."""

    def __init__(self, code: str, message: str, *, http_status: int = 400, expected_state: dict | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.http_status = http_status
        self.expected_state = expected_state or {}

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.expected_state:
            out["expected_state"] = self.expected_state
        return out


@dataclass
class _Study:
    plan: StudyPlan
    templates: list[SessionTemplate]
    session_ids: list[str] = field(default_factory=list)
    claimed: set[int] = field(default_factory=set)


@dataclass
class _Session:
    session_id: str
    study_id: str
    template_index: int
    token: str
    participant: str
    submissions: list[dict] = field(default_factory=list)
    state: str = "active"


class StudyService:
    def __init__(self, root: str | Path):
        self.store = StudyStore(root)
        self._lock = threading.RLock()
        self._studies: dict[str, _Study] = {}
        self._sessions: dict[str, _Session] = {}
        self._rebuild()

    # -- recovery -----------------------------------------------------------

    def _rebuild(self) -> None:
        for study_id, doc in self.store.load_studies().items():
            self._studies[study_id] = _Study(
                plan=StudyPlan.from_dict(doc["plan"]),
                templates=[SessionTemplate.from_dict(t) for t in doc["templates"]],
            )
        for session_id, events in self.store.load_session_events().items():
            head = events[0]
            if head.get("type") != "created":
                continue
            study = self._studies.get(head["study_id"])
            if study is None:
                continue
            sess = _Session(
                session_id=session_id,
                study_id=head["study_id"],
                template_index=int(head["template_index"]),
                token=head["token"],
                participant=head.get("participant", ""),
            )
            for ev in events[1:]:
                if ev.get("type") == "answer":
                    sess.submissions.append(
                        {"choice": ev["choice"], "response_ms": float(ev["response_ms"])}
                    )
            total = len(study.templates[sess.template_index].questions)
            if len(sess.submissions) >= total:
                sess.state = "completed"
            study.session_ids.append(session_id)
            study.claimed.add(sess.template_index)
            self._sessions[session_id] = sess

    # -- lookups ------------------------------------------------------------

    def _study(self, study_id: str) -> _Study:
        study = self._studies.get(study_id)
        if study is None:
            raise ServiceError("not_found", f"unknown study {study_id!r}", http_status=404)
        return study

    def _session(self, session_id: str, token: str | None = None) -> _Session:
        sess = self._sessions.get(session_id)
        if sess is None:
            raise ServiceError("not_found", f"unknown session {session_id!r}", http_status=404)
        if token is not None and not secrets.compare_digest(token, sess.token):
            raise ServiceError("bad_token", "token does not match this session", http_status=403)
        return sess

    def _template(self, sess: _Session) -> SessionTemplate:
        return self._studies[sess.study_id].templates[sess.template_index]

    # -- study lifecycle ----------------------------------------------------

    def create_study(self, plan: StudyPlan | dict, n_sessions: int, seed: int = 0) -> str:
        if isinstance(plan, dict):
            try:
                plan = StudyPlan.from_dict(plan)
            except (KeyError, TypeError, ValueError) as exc:
                raise ServiceError("bad_plan", str(exc), http_status=422) from exc
        try:
            templates = plan_sessions(plan, n_sessions, seed)
        except ValueError as exc:
            raise ServiceError("planning_error", str(exc), http_status=422) from exc
        study_id = "study-" + uuid4().hex[:12]
        document = {
            "plan": plan.to_dict(),
            "templates": [t.to_dict() for t in templates],
            "n_sessions": n_sessions,
            "seed": seed,
            "created_at": time.time(),
        }
        with self._lock:
            self.store.write_study(study_id, document)
            self._studies[study_id] = _Study(plan=plan, templates=templates)
        return study_id

    def study_status(self, study_id: str) -> dict:
        with self._lock:
            study = self._study(study_id)
            return {
                "study_id": study_id,
                "n_sessions": len(study.templates),
                "sessions": [self.session_status(sid) for sid in study.session_ids],
                "open_slots": len(study.templates) - len(study.claimed),
            }

    # -- session lifecycle --------------------------------------------------

    def create_session(self, study_id: str, participant: str = "") -> dict:
        with self._lock:
            study = self._study(study_id)
            free = next((i for i in range(len(study.templates)) if i not in study.claimed), None)
            if free is None:
                raise ServiceError(
                    "exhausted",
                    "every session slot of this study is already claimed",
                    http_status=409,
                )
            session_id = "sess-" + uuid4().hex[:12]
            token = secrets.token_hex(16)
            self.store.append_event(
                session_id,
                {
                    "type": "created",
                    "study_id": study_id,
                    "template_index": free,
                    "token": token,
                    "participant": participant,
                    "created_at": time.time(),
                },
            )
            sess = _Session(session_id, study_id, free, token, participant)
            self._sessions[session_id] = sess
            study.session_ids.append(session_id)
            study.claimed.add(free)
            timing = study.plan.timing
            return {
                "session_id": session_id,
                "token": token,
                "study_id": study_id,
                "total_questions": len(study.templates[free].questions),
                "timing": timing.to_dict(),
            }

    def session_status(self, session_id: str, token: str | None = None) -> dict:
        with self._lock:
            sess = self._session(session_id, token)
            total = len(self._template(sess).questions)
            return {
                "session_id": session_id,
                "study_id": sess.study_id,
                "state": sess.state,
                "answered": len(sess.submissions),
                "total_questions": total,
            }

    # -- the question loop --------------------------------------------------

    def next_question(self, session_id: str, token: str) -> dict:
        with self._lock:
            sess = self._session(session_id, token)
            template = self._template(sess)
            study = self._studies[sess.study_id]
            timing = study.plan.timing
            total = len(template.questions)
            answered = len(sess.submissions)
            if answered >= total:
                return {
                    "session_id": session_id,
                    "completed": True,
                    "answered": answered,
                    "total": total,
                }
            q = template.questions[answered]
            index = answered + 1
            items = study.plan.items

            def item(i: int) -> dict:
                return {"id": i, "label": items.label_of(i)}

            return {
                "session_id": session_id,
                "completed": False,
                "index": index,
                "total": total,
                "anchor": item(q.anchor),
                "left": item(q.left),
                "right": item(q.right),
                "break": index % timing.break_interval == 0,
                "fixation_ms": timing.fixation_ms,
                "answer_timeout_ms": timing.answer_timeout_ms,
            }

    def submit_answer(
        self, session_id: str, token: str, index: int, choice: str, response_ms: float
    ) -> dict:
        with self._lock:
            sess = self._session(session_id, token)
            template = self._template(sess)
            timing = self._studies[sess.study_id].plan.timing
            total = len(template.questions)
            answered = len(sess.submissions)

            if 1 <= index == answered:  # retry of the latest submission
                prev = sess.submissions[index - 1]
                if prev["choice"] == choice and prev["response_ms"] == float(response_ms):
                    return self._ack(session_id, index, total)
                raise ServiceError(
                    "conflict",
                    f"question {index} was already answered differently",
                    http_status=409,
                )
            if sess.state == "completed":
                raise ServiceError(
                    "state_error",
                    "session is already completed",
                    http_status=409,
                    expected_state={"state": "completed"},
                )
            if index != answered + 1:
                raise ServiceError(
                    "sequence_error",
                    f"expected question {answered + 1}, got {index}",
                    http_status=409,
                    expected_state={"expected_index": answered + 1},
                )
            if choice not in CHOICES:
                raise ServiceError(
                    "protocol_violation",
                    f"choice must be one of {CHOICES}, got {choice!r}",
                    http_status=422,
                )
            response_ms = float(response_ms)
            if not response_ms >= 0:
                raise ServiceError("protocol_violation", "response_ms must be >= 0", http_status=422)
            if response_ms > timing.answer_timeout_ms + timing.grace_ms:
                raise ServiceError(
                    "protocol_violation",
                    f"response_ms {response_ms} exceeds the timeout plus {timing.grace_ms} ms grace",
                    http_status=422,
                )
            if choice == "timeout" and response_ms < timing.answer_timeout_ms:
                raise ServiceError(
                    "protocol_violation",
                    f"timeout reported at {response_ms} ms, before the {timing.answer_timeout_ms} ms deadline",
                    http_status=422,
                )

            self.store.append_event(
                session_id,
                {"type": "answer", "index": index, "choice": choice, "response_ms": response_ms},
            )
            sess.submissions.append({"choice": choice, "response_ms": response_ms})
            if len(sess.submissions) >= total:
                sess.state = "completed"
            return self._ack(session_id, index, total)

    @staticmethod
    def _ack(session_id: str, index: int, total: int) -> dict:
        # a pure function of the stored record, so retries reproduce it
        return {
            "recorded": True,
            "session_id": session_id,
            "index": index,
            "next_index": None if index >= total else index + 1,
            "session_completed": index >= total,
        }

    # -- screening and export ----------------------------------------------

    def validate_session(self, session_id: str) -> ValidationReport:
        with self._lock:
            sess = self._session(session_id)
            if sess.state != "completed":
                total = len(self._template(sess).questions)
                raise ServiceError(
                    "state_error",
                    f"session has answered {len(sess.submissions)} of {total} questions",
                    http_status=409,
                    expected_state={"state": "completed"},
                )
            errors, total_gold = gold_error_count(self._template(sess).questions, sess.submissions)
            return ValidationReport(session_id, total_gold, errors)

    def export_answers(self, study_id: str, which: str = "accepted") -> tuple[AnswerSet, AnswerSet]:
        """(experimental, test) answer sets over completed sessions.

        Gold questions and timed-out questions never appear in exports; with
        `which="accepted"` only sessions passing the gold screen contribute.
        """
        if which not in EXPORT_FILTERS:
            raise ServiceError(
                "protocol_violation",
                f"export filter must be one of {EXPORT_FILTERS}, got {which!r}",
                http_status=422,
            )
        with self._lock:
            study = self._study(study_id)
            experimental = []
            test = []
            for session_id in study.session_ids:
                sess = self._sessions[session_id]
                if sess.state != "completed":
                    continue
                if which == "accepted" and not self.validate_session(session_id).accepted:
                    continue
                questions = self._template(sess).questions
                experimental.extend(
                    answers_from_session(study.plan.items, questions, sess.submissions, "experimental", session_id)
                )
                test.extend(
                    answers_from_session(study.plan.items, questions, sess.submissions, "test", session_id)
                )
            tag = f"study:{study_id}:{which}"
            return (
                AnswerSet(study.plan.items, tuple(experimental), f"{tag}:experimental"),
                AnswerSet(study.plan.items, tuple(test), f"{tag}:test"),
            )

    def write_exports(self, study_id: str, out_dir: str | Path, which: str = "accepted") -> dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        experimental, test = self.export_answers(study_id, which)
        paths = {
            "experimental": out_dir / "experimental.csv",
            "test": out_dir / "test.csv",
        }
        write_answer_set(paths["experimental"], experimental)
        write_answer_set(paths["test"], test)
        return paths
