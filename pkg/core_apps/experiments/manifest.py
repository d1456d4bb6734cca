"""Append-only JSONL log of what a command produced, used to resume interrupted grids."""
from __future__ import annotations

import json
from pathlib import Path

from django.utils import timezone

MANIFEST_FILENAME = "manifest.jsonl"


class RunManifest:
    def __init__(self, out_dir):
        self.path = Path(out_dir) / MANIFEST_FILENAME

    def append(self, event: str, **fields) -> dict:
        record = {"event": event, "time": timezone.now().isoformat(), **fields}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, sort_keys=True, default=str) + "\n")
            handle.flush()
        return record

    def events(self, event: str | None = None) -> list[dict]:
        if not self.path.exists():
            return []
        with open(self.path, encoding="utf-8") as handle:
            records = [json.loads(line) for line in handle if line.strip()]
        return [record for record in records if event is None or record["event"] == event]

    def completed_cells(self, config_hash: str) -> dict[str, dict]:
        """Latest ``cell_done`` event per cell key written under ``config_hash``."""
        return {
            record["cell"]: record
            for record in self.events("cell_done")
            if record.get("config_hash") == config_hash
        }

    def artifacts(self) -> list[Path]:
        base = self.path.parent
        paths = []
        for record in self.events():
            for key in ("path", "report", "predictions", "checkpoint"):
                if record.get(key):
                    paths.append(base / record[key])
            paths.extend(base / item for item in record.get("paths", []))
        return paths
