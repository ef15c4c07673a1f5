"""Study planning: session templates, gold checks, timing parameters.

A study realizes a sampling plan into per-session question sequences.  Each
session gets its share of experimental (and optionally held-out test)
questions plus a fixed set of gold questions with known answers inserted at
uniform random positions.  Templates are pure data and serialize to JSON so
the service can persist them and rebuild its state from disk.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import Answer, AnsweredTriplet, ItemSet, Triplet
from ..rng import substream
from ..sampling import SamplingPlan, draw_questions, realize_plan

QUESTION_KINDS = ("experimental", "test", "gold")
CHOICES = ("left", "right", "timeout")

DEFAULT_GOLD_THRESHOLD = 0.20


@dataclass(frozen=True)
class Timing:
    """Per-question timing contract shared by server and client."""

    answer_timeout_ms: int = 4500
    fixation_ms: int = 300
    break_interval: int = 200
    grace_ms: int = 1000

    def __post_init__(self):
        if self.answer_timeout_ms < 1 or self.fixation_ms < 0:
            raise ValueError("timeout must be positive and fixation non-negative")
        if self.break_interval < 1:
            raise ValueError("break_interval must be >= 1")
        if self.grace_ms < 0:
            raise ValueError("grace_ms must be non-negative")

    def to_dict(self) -> dict:
        return {
            "answer_timeout_ms": self.answer_timeout_ms,
            "fixation_ms": self.fixation_ms,
            "break_interval": self.break_interval,
            "grace_ms": self.grace_ms,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Timing":
        unknown = set(doc) - {"answer_timeout_ms", "fixation_ms", "break_interval", "grace_ms"}
        if unknown:
            raise ValueError(f"unknown timing keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class GoldQuestion:
    """A question with a known correct answer, used to screen participants.

    `answer` refers to the sides as stored here; planning may swap the sides
    for presentation, flipping the recorded correct value accordingly.
    """

    triplet: Triplet
    answer: int

    def __post_init__(self):
        if self.answer not in (0, 1):
            raise ValueError(f"gold answer must be 0 or 1, got {self.answer!r}")


@dataclass(frozen=True)
class StudyPlan:
    """Declarative description of one study.

    `session_length` counts experimental plus test questions per session; gold
    questions are added on top.  Gold questions must be disjoint from the
    realized experimental and test questions by canonical question identity,
    checked when sessions are planned.
    """

    items: ItemSet
    strategy: SamplingPlan
    session_length: int = 2000
    gold: tuple[GoldQuestion, ...] = ()
    timing: Timing = field(default_factory=Timing)
    test_plan: SamplingPlan | None = None
    test_per_session: int = 0

    def __post_init__(self):
        if self.session_length < 1:
            raise ValueError(f"session_length must be >= 1, got {self.session_length}")
        if len(self.gold) > self.session_length:
            raise ValueError(
                f"{len(self.gold)} gold questions exceed session_length {self.session_length}"
            )
        if not (0 <= self.test_per_session < self.session_length):
            raise ValueError("test_per_session must be >= 0 and below session_length")
        if self.test_per_session > 0 and self.test_plan is None:
            raise ValueError("test_per_session > 0 needs a test_plan")
        keys = [g.triplet.question_key() for g in self.gold]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate gold questions by canonical identity")

    @property
    def gold_count(self) -> int:
        return len(self.gold)

    @property
    def questions_per_session(self) -> int:
        return self.session_length + self.gold_count

    def to_dict(self) -> dict:
        doc: dict = {
            "items": {"n": self.items.n},
            "strategy": self.strategy.to_dict(),
            "session_length": self.session_length,
            "gold": [
                {"anchor": g.triplet.anchor, "left": g.triplet.left, "right": g.triplet.right, "answer": g.answer}
                for g in self.gold
            ],
            "timing": self.timing.to_dict(),
        }
        if self.items.labels is not None:
            doc["items"]["labels"] = list(self.items.labels)
        if self.test_plan is not None:
            doc["test"] = {"plan": self.test_plan.to_dict(), "per_session": self.test_per_session}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "StudyPlan":
        unknown = set(doc) - {"items", "strategy", "session_length", "gold", "timing", "test"}
        if unknown:
            raise ValueError(f"unknown study plan keys: {sorted(unknown)}")
        items_doc = doc["items"]
        labels = items_doc.get("labels")
        items = ItemSet(int(items_doc["n"]), tuple(labels) if labels is not None else None)
        gold = tuple(
            GoldQuestion(Triplet(int(g["anchor"]), int(g["left"]), int(g["right"])), int(g["answer"]))
            for g in doc.get("gold", [])
        )
        test_doc = doc.get("test")
        test_plan = None
        test_per_session = 0
        if test_doc is not None:
            test_plan = SamplingPlan.from_dict(test_doc["plan"])
            test_per_session = int(test_doc["per_session"])
        return cls(
            items=items,
            strategy=SamplingPlan.from_dict(doc["strategy"]),
            session_length=int(doc.get("session_length", 2000)),
            gold=gold,
            timing=Timing.from_dict(doc.get("timing", {})),
            test_plan=test_plan,
            test_per_session=test_per_session,
        )


@dataclass(frozen=True, slots=True)
class PlannedQuestion:
    """One question as it will be presented, sides already fixed.

    `answer` is the correct presented value for gold questions and None
    otherwise.
    """

    kind: str
    anchor: int
    left: int
    right: int
    answer: int | None = None

    def __post_init__(self):
        if self.kind not in QUESTION_KINDS:
            raise ValueError(f"unknown question kind {self.kind!r}")
        if (self.kind == "gold") != (self.answer is not None):
            raise ValueError("exactly the gold questions carry a correct answer")

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "anchor": self.anchor, "left": self.left, "right": self.right}
        if self.answer is not None:
            doc["answer"] = self.answer
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PlannedQuestion":
        return cls(
            kind=doc["kind"],
            anchor=int(doc["anchor"]),
            left=int(doc["left"]),
            right=int(doc["right"]),
            answer=int(doc["answer"]) if "answer" in doc else None,
        )


@dataclass(frozen=True)
class SessionTemplate:
    """The full planned question sequence for one session slot."""

    index: int
    questions: tuple[PlannedQuestion, ...]

    def to_dict(self) -> dict:
        return {"index": self.index, "questions": [q.to_dict() for q in self.questions]}

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionTemplate":
        return cls(int(doc["index"]), tuple(PlannedQuestion.from_dict(q) for q in doc["questions"]))


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the gold-question screen for one completed session.

    A session is accepted when the gold error rate is at or below the
    threshold; timeouts on gold questions count as errors.
    """

    session_id: str
    gold_total: int
    gold_errors: int
    threshold: float = DEFAULT_GOLD_THRESHOLD

    @property
    def error_rate(self) -> float:
        if self.gold_total == 0:
            return 0.0
        return self.gold_errors / self.gold_total

    @property
    def accepted(self) -> bool:
        return self.error_rate <= self.threshold

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "gold_total": self.gold_total,
            "gold_errors": self.gold_errors,
            "error_rate": self.error_rate,
            "threshold": self.threshold,
            "accepted": self.accepted,
        }


def _planned_from_triplets(triplets: Sequence[Triplet], kind: str) -> list[PlannedQuestion]:
    return [PlannedQuestion(kind, t.anchor, t.left, t.right) for t in triplets]


def _check_gold_disjoint(plan: StudyPlan, shown: Sequence[PlannedQuestion]) -> None:
    gold_keys = {g.triplet.question_key() for g in plan.gold}
    if not gold_keys:
        return
    clashes = sorted(
        gold_keys & {Triplet(q.anchor, q.left, q.right).question_key() for q in shown}
    )
    if clashes:
        raise ValueError(f"gold questions overlap planned questions: {clashes[:5]}")


def _insert_gold(
    questions: list[PlannedQuestion], plan: StudyPlan, rng: np.random.Generator
) -> tuple[PlannedQuestion, ...]:
    if not plan.gold:
        return tuple(questions)
    total = len(questions) + plan.gold_count
    positions = np.sort(rng.choice(total, size=plan.gold_count, replace=False))
    order = rng.permutation(plan.gold_count)
    swaps = rng.random(plan.gold_count) < 0.5
    out: list[PlannedQuestion] = []
    cursor = 0
    gold_at = {int(p): k for k, p in enumerate(positions)}
    for pos in range(total):
        k = gold_at.get(pos)
        if k is None:
            out.append(questions[cursor])
            cursor += 1
            continue
        g = plan.gold[order[k]]
        t, ans = g.triplet, g.answer
        if swaps[k]:
            out.append(PlannedQuestion("gold", t.anchor, t.right, t.left, 1 - ans))
        else:
            out.append(PlannedQuestion("gold", t.anchor, t.left, t.right, ans))
    return tuple(out)


def _repeated_session_chunks(
    plan: StudyPlan, n_sessions: int, exp_per_session: int, seed: int
) -> list[list[PlannedQuestion]]:
    """One session per repetition: the same base questions, freshly shuffled."""
    strat = plan.strategy
    if n_sessions != strat.l:
        raise ValueError(
            f"a repeated design with l={strat.l} plans exactly {strat.l} sessions, got {n_sessions}"
        )
    base_m = strat.m // strat.l
    if exp_per_session != base_m:
        raise ValueError(
            f"session capacity {exp_per_session} does not match the {base_m} base questions"
        )
    anchors, lo, hi = draw_questions(plan.items.n, base_m, substream(strat.seed, "triplets"))
    chunks = []
    for i in range(n_sessions):
        rng = substream(seed, "session", i, "repeat")
        order = rng.permutation(base_m)
        swap = rng.random(base_m) < 0.5
        chunk = []
        for j, s in zip(order, swap):
            a, x, y = int(anchors[j]), int(lo[j]), int(hi[j])
            left, right = (y, x) if s else (x, y)
            chunk.append(PlannedQuestion("experimental", a, left, right))
        chunks.append(chunk)
    return chunks


def plan_sessions(plan: StudyPlan, n_sessions: int, seed: int = 0) -> list[SessionTemplate]:
    """Split the realized plan into per-session question sequences.

    Experimental and test questions are partitioned deterministically in plan
    order (too few realized questions is a planning error); a repeated design
    instead re-presents the same base questions each session in fresh order.
    Gold questions go to uniform random positions with randomized sides.
    """
    if n_sessions < 1:
        raise ValueError(f"n_sessions must be >= 1, got {n_sessions}")
    exp_per_session = plan.session_length - plan.test_per_session

    if plan.strategy.strategy == "repeated":
        exp_chunks = _repeated_session_chunks(plan, n_sessions, exp_per_session, seed)
    else:
        realized = realize_plan(plan.items, plan.strategy)
        needed = exp_per_session * n_sessions
        if len(realized) < needed:
            raise ValueError(
                f"plan realizes {len(realized)} questions, {needed} needed "
                f"({n_sessions} sessions x {exp_per_session}); short by {needed - len(realized)}"
            )
        exp_chunks = [
            _planned_from_triplets(realized[i * exp_per_session : (i + 1) * exp_per_session], "experimental")
            for i in range(n_sessions)
        ]

    test_chunks: list[list[PlannedQuestion]] = [[] for _ in range(n_sessions)]
    if plan.test_per_session > 0:
        test_realized = realize_plan(plan.items, plan.test_plan)
        needed = plan.test_per_session * n_sessions
        if len(test_realized) < needed:
            raise ValueError(
                f"test plan realizes {len(test_realized)} questions, {needed} needed; "
                f"short by {needed - len(test_realized)}"
            )
        test_chunks = [
            _planned_from_triplets(
                test_realized[i * plan.test_per_session : (i + 1) * plan.test_per_session], "test"
            )
            for i in range(n_sessions)
        ]

    templates = []
    for i in range(n_sessions):
        body = exp_chunks[i] + test_chunks[i]
        _check_gold_disjoint(plan, body)
        if test_chunks[i]:
            mix = substream(seed, "session", i, "mix")
            body = [body[j] for j in mix.permutation(len(body))]
        questions = _insert_gold(body, plan, substream(seed, "session", i, "gold"))
        templates.append(SessionTemplate(i, questions))
    return templates


def answers_from_session(
    items: ItemSet,
    questions: Sequence[PlannedQuestion],
    submissions: Sequence[dict],
    kind: str,
    source: str,
) -> list[AnsweredTriplet]:
    """Recover answered-triplet records of one kind from a session's log.

    Timeouts are unanswered and skipped; submissions align with the question
    sequence by index.
    """
    out = []
    for q, sub in zip(questions, submissions):
        if q.kind != kind or sub["choice"] == "timeout":
            continue
        value = 1 if sub["choice"] == "left" else 0
        out.append(
            AnsweredTriplet(
                Triplet(q.anchor, q.left, q.right),
                Answer(value, float(sub["response_ms"]), source),
            )
        )
    return out


def gold_error_count(questions: Sequence[PlannedQuestion], submissions: Sequence[dict]) -> tuple[int, int]:
    """(errors, total) over the gold questions answered so far; timeouts err."""
    errors = 0
    total = 0
    for q, sub in zip(questions, submissions):
        if q.kind != "gold":
            continue
        total += 1
        if sub["choice"] == "timeout":
            errors += 1
            continue
        value = 1 if sub["choice"] == "left" else 0
        if value != q.answer:
            errors += 1
    return errors, total
