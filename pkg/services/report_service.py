"""
Run manifest: what was run, on which inputs, with which config and seed,
and which files came out. No timestamps, so identical runs give identical
manifests; the endpoint key never appears (EndpointConfig.to_dict omits it).
"""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any, Dict, List, Sequence

from storage.json_store import save_json
from storage.paths import file_manifest
from utils.digest import sha256_of
from utils.logger import get_logger


log = get_logger(__name__)

MANIFEST_VERSION = 1


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def emitted_files(run: str | Path) -> List[Dict[str, str]]:
    """Every file under the run directory except the manifest, sorted by path."""
    root = Path(run)
    manifest = file_manifest(root).resolve()
    out = []
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.resolve() != manifest:
            out.append({"path": p.relative_to(root).as_posix(), "sha256": file_digest(p)})
    return out


def write_manifest(
    run: str | Path,
    subcommand: str,
    inputs: Sequence[str],
    config: Dict[str, Any],
    seed: int,
) -> Path:
    data = {
        "version": MANIFEST_VERSION,
        "subcommand": subcommand,
        "inputs": [str(i) for i in inputs],
        "config": config,
        "config_hash": sha256_of(config),
        "seed": int(seed),
        "files": emitted_files(run),
    }
    path = file_manifest(run)
    save_json(str(path), data)
    log.info("manifest_written subcommand=%s files=%d hash=%s", subcommand, len(data["files"]), data["config_hash"][:12])
    return path
