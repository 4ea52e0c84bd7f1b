from __future__ import annotations

import string
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List

from config.constants import PROMPT_LEARNING, PROMPT_SIMULATION, PROMPT_SUMMARIZATION
from domain.errors import SchemaError
from domain.simulation import EventSchedule
from storage import paths
from storage.json_store import load_json


PROMPT_NAMES = (PROMPT_SUMMARIZATION, PROMPT_LEARNING, PROMPT_SIMULATION)


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    if name not in PROMPT_NAMES:
        raise SchemaError(f"load_template: unknown template {name!r}")
    p = paths.assets_dir() / "prompts" / f"{name}.txt"
    return p.read_text(encoding="utf-8").strip()


def template_fields(name: str) -> List[str]:
    return [f for _, f, _, _ in string.Formatter().parse(load_template(name)) if f]


def render_template(name: str, /, **fields: Any) -> str:
    """Fill a prompt template; every placeholder must be supplied."""
    missing = [f for f in template_fields(name) if f not in fields]
    if missing:
        raise SchemaError(f"render_template: {name} is missing {', '.join(missing)}")
    return load_template(name).format(**{k: str(v) for k, v in fields.items()})


def load_schedule(name_or_path: str) -> EventSchedule:
    """Built-in schedule name (covid, ru_ua) or a path to a JSON schedule file."""
    p = Path(name_or_path)
    if not p.suffix:
        p = paths.assets_dir() / "events" / f"{name_or_path}.json"
    data = load_json(str(p))
    if not isinstance(data, dict) or "events" not in data:
        raise SchemaError(f"load_schedule: {p} is not a schedule file")
    return EventSchedule.from_dict(data)


@lru_cache(maxsize=None)
def load_lexicon() -> Dict[str, Any]:
    data = load_json(str(paths.assets_dir() / "lexicon" / "sentiment.json"))
    return {"negators": frozenset(data["negators"]), "valence": dict(data["valence"])}
