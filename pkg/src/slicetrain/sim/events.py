"""Append-only structured event log.

Events from concurrently running tasks are buffered per task and flushed
at the job barrier in ascending task order, so the log's byte content is
independent of thread interleaving.  Records hold no wall-clock fields;
virtual-clock values are fine because they are model outputs.
"""

from __future__ import annotations

import json
from pathlib import Path


class EventLog:
    def __init__(self):
        self._records: list[dict] = []

    def append(self, event: str, **fields) -> None:
        """Driver-side append (single control thread)."""
        self._records.append({"event": event, **fields})

    def extend(self, records: list[dict]) -> None:
        self._records.extend(records)

    @property
    def records(self) -> list[dict]:
        return self._records

    def of_kind(self, event: str) -> list[dict]:
        return [r for r in self._records if r["event"] == event]

    def dump(self, path: str | Path) -> None:
        """Write line-delimited JSON with sorted keys (byte-stable)."""
        with open(path, "w") as fh:
            for record in self._records:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def __len__(self) -> int:
        return len(self._records)
