"""Content-addressed response cache: in-process map plus optional directory."""

from __future__ import annotations

import json
import os
import tempfile
import threading
import time
from pathlib import Path


class ResponseCache:
    """Thread-safe cache keyed by prompt digest.

    Disk entries are one JSON file per key, written atomically
    (temp file + rename) so concurrent writers can never corrupt an entry.
    """

    def __init__(self, directory: str | Path | None = None):
        self._dir = Path(directory) if directory else None
        if self._dir:
            self._dir.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, str] = {}
        self._lock = threading.Lock()

    def get(self, key: str) -> str | None:
        with self._lock:
            if key in self._mem:
                return self._mem[key]
        if self._dir:
            path = self._dir / f"{key}.json"
            if path.exists():
                entry = json.loads(path.read_text(encoding="utf-8"))
                response = entry["response"]
                with self._lock:
                    self._mem[key] = response
                return response
        return None

    def put(self, key: str, response: str) -> None:
        with self._lock:
            self._mem[key] = response
        if self._dir:
            entry = {"key": key, "response": response, "timestamp": time.time()}
            fd, tmp = tempfile.mkstemp(dir=self._dir, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    json.dump(entry, fh, ensure_ascii=False)
                os.replace(tmp, self._dir / f"{key}.json")
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
