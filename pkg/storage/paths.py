from __future__ import annotations

import re
from pathlib import Path


def bundle_root() -> Path:
    return Path(__file__).resolve().parent.parent


def project_root() -> Path:
    return bundle_root()


def assets_dir() -> Path:
    return project_root() / "assets"


def _safe_filename(key: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_.-]+", "_", str(key or "").strip())
    return s or "run"


def ensure_dir(path: str | Path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def run_dir(output_root: str | Path, name: str = "") -> Path:
    """Output directory of one subcommand run; `name` is sanitized."""
    root = Path(output_root)
    return ensure_dir(root / _safe_filename(name) if name else root)


def round_dir(run: str | Path, k: int) -> Path:
    return ensure_dir(Path(run) / f"round_{int(k):02d}")


def dataset_dir(run: str | Path, tag: str = "dataset") -> Path:
    return ensure_dir(Path(run) / _safe_filename(tag))


def file_manifest(run: str | Path) -> Path:
    return Path(run) / "manifest.json"
