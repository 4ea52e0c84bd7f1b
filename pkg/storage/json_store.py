# storage/json_store.py
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Optional


def _ensure_parent(p: str) -> None:
    Path(p).parent.mkdir(parents=True, exist_ok=True)


def load_json(path: str, default: Optional[Any] = None) -> Any:
    """
    Read a JSON file.
    - default: returned when the file is missing or empty
    Parse errors are raised, never swallowed.
    """
    p = Path(path)
    if not p.exists():
        return default
    text = p.read_text(encoding="utf-8").strip()
    if not text:
        return default
    return json.loads(text)


def dumps_stable(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def save_json(path: str, data: Any) -> None:
    """Atomic write: temp file in the same directory, then os.replace."""
    path = str(path)
    _ensure_parent(path)
    target = Path(path)
    text = dumps_stable(data)
    fd, tmp_name = tempfile.mkstemp(prefix=f"{target.name}.", suffix=".tmp", dir=str(target.parent))
    tmp_path = Path(tmp_name)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        try:
            os.replace(str(tmp_path), str(target))
        except PermissionError:
            # Some Windows environments may deny atomic replace; fallback to direct write.
            target.write_text(text, encoding="utf-8")
    finally:
        if tmp_path.exists():
            try:
                tmp_path.unlink(missing_ok=True)
            except OSError:
                pass
