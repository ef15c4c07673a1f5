"""Data-collection backend: session planning, durable answer storage, HTTP API."""

from .model import GoldQuestion, SessionTemplate, StudyPlan, Timing, ValidationReport, plan_sessions
from .service import ServiceError, StudyService

__all__ = [
    "GoldQuestion",
    "SessionTemplate",
    "StudyPlan",
    "Timing",
    "ValidationReport",
    "plan_sessions",
    "ServiceError",
    "StudyService",
]
