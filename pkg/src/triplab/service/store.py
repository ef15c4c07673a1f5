"""Durable study and session storage.

Study documents are JSON files written atomically; session activity is an
append-only JSONL event log, fsynced before any acknowledgement so an acked
answer survives a crash.  Startup rebuilds all in-memory state by replaying
the logs; a partial trailing line (crash mid-append) is discarded because it
was never acked.
"""

from __future__ import annotations

import json
import os
from pathlib import Path


class StudyStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.studies_dir = self.root / "studies"
        self.sessions_dir = self.root / "sessions"
        self.studies_dir.mkdir(parents=True, exist_ok=True)
        self.sessions_dir.mkdir(parents=True, exist_ok=True)

    # -- studies ------------------------------------------------------------

    def write_study(self, study_id: str, document: dict) -> None:
        path = self.studies_dir / f"{study_id}.json"
        tmp = path.with_name(path.name + ".tmp")
        with tmp.open("w") as fh:
            json.dump(document, fh, sort_keys=True)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        self._fsync_dir(self.studies_dir)

    def load_studies(self) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for path in sorted(self.studies_dir.glob("*.json")):
            with path.open() as fh:
                out[path.stem] = json.load(fh)
        return out

    # -- session event logs -------------------------------------------------

    def append_event(self, session_id: str, event: dict) -> None:
        path = self.sessions_dir / f"{session_id}.jsonl"
        line = json.dumps(event, sort_keys=True) + "\n"
        with path.open("a") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    def load_session_events(self) -> dict[str, list[dict]]:
        out: dict[str, list[dict]] = {}
        for path in sorted(self.sessions_dir.glob("*.jsonl")):
            events: list[dict] = []
            with path.open() as fh:
                lines = fh.readlines()
            for i, line in enumerate(lines):
                line = line.strip()
                if not line:
                    continue
                try:
                    events.append(json.loads(line))
                except json.JSONDecodeError:
                    if i == len(lines) - 1:
                        break  # torn final append, never acked
                    raise
            if events:
                out[path.stem] = events
        return out

    @staticmethod
    def _fsync_dir(path: Path) -> None:
        fd = os.open(path, os.O_RDONLY)
        try:
            os.fsync(fd)
        finally:
            os.close(fd)
