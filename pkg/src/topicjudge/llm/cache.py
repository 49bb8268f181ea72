"""Content-addressed judgment transcripts.

One JSON file per request, named by a collision-resistant key over
(model_id, template_id, rendered prompt). The directory is simultaneously a
response cache, an audit trail of raw request/response bodies, and the
fixture source for offline replay.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path


class TranscriptCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model_id: str, template_id: str, prompt: str) -> str:
        digest = hashlib.sha256()
        for part in (model_id, template_id, prompt):
            digest.update(part.encode("utf-8"))
            digest.update(b"\x1f")
        return digest.hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, record: dict) -> None:
        path = self._path(key)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(record, sort_keys=True, indent=2), encoding="utf-8")
        os.replace(tmp, path)

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*.json"))
