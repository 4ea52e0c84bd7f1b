from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from domain.errors import SchemaError


@dataclass
class FeatureSchema:
    """Population statistics a feature matrix is built from (fit on training users)."""

    embed_dim: int
    tweet_cap: int
    numeric_names: List[str] = field(default_factory=list)
    numeric_mean: List[float] = field(default_factory=list)
    numeric_scale: List[float] = field(default_factory=list)
    # property -> ordered domain; dict order is the block order
    categorical_domains: Dict[str, List[str]] = field(default_factory=dict)

    @property
    def numeric_dim(self) -> int:
        return len(self.numeric_names)

    @property
    def categorical_dim(self) -> int:
        return sum(len(v) for v in self.categorical_domains.values())

    def dims(self) -> Dict[str, int]:
        return {
            "desc": self.embed_dim,
            "tweet": self.embed_dim,
            "numeric": self.numeric_dim,
            "categorical": self.categorical_dim,
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "embed_dim": self.embed_dim,
            "tweet_cap": self.tweet_cap,
            "numeric_names": list(self.numeric_names),
            "numeric_mean": [float(x) for x in self.numeric_mean],
            "numeric_scale": [float(x) for x in self.numeric_scale],
            "categorical_domains": {k: list(v) for k, v in self.categorical_domains.items()},
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "FeatureSchema":
        return cls(
            embed_dim=int(d["embed_dim"]),
            tweet_cap=int(d["tweet_cap"]),
            numeric_names=list(d.get("numeric_names", [])),
            numeric_mean=[float(x) for x in d.get("numeric_mean", [])],
            numeric_scale=[float(x) for x in d.get("numeric_scale", [])],
            categorical_domains={k: list(v) for k, v in d.get("categorical_domains", {}).items()},
        )

    def check_compatible(self, other: "FeatureSchema") -> None:
        if self.dims() != other.dims() or self.numeric_names != other.numeric_names:
            raise SchemaError(f"FeatureSchema: dims {self.dims()} vs {other.dims()}")
        if list(self.categorical_domains) != list(other.categorical_domains):
            raise SchemaError("FeatureSchema: categorical properties differ")


@dataclass
class FeatureMatrix:
    """One row per user, in dataset order; the four detector input groups."""

    user_ids: List[str]
    desc: np.ndarray
    tweet: np.ndarray
    numeric: np.ndarray
    categorical: np.ndarray

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    def validate_basic(self) -> None:
        n = self.n_users
        for name in ("desc", "tweet", "numeric", "categorical"):
            arr = getattr(self, name)
            if arr.ndim != 2 or arr.shape[0] != n:
                raise SchemaError(f"FeatureMatrix: {name} has shape {arr.shape} for {n} users")
            if not np.all(np.isfinite(arr)):
                raise SchemaError(f"FeatureMatrix: {name} has non-finite entries")

    def rows(self, idx) -> "FeatureMatrix":
        idx = list(idx)
        return FeatureMatrix(
            user_ids=[self.user_ids[i] for i in idx],
            desc=self.desc[idx],
            tweet=self.tweet[idx],
            numeric=self.numeric[idx],
            categorical=self.categorical[idx],
        )
