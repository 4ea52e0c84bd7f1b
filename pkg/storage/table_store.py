"""CSV tables through pandas; fixed column order, '\n' line endings."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from storage.paths import ensure_dir


FLOAT_FORMAT = "%.10g"


def write_table(path: str | Path, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> Path:
    p = Path(path)
    ensure_dir(p.parent)
    df = pd.DataFrame(list(rows), columns=columns)
    df.to_csv(p, index=False, lineterminator="\n", float_format=FLOAT_FORMAT)
    return p


def read_table(path: str | Path, required: Sequence[str] = ()) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise ValueError(f"read_table: {path} lacks columns {missing}")
    return df
