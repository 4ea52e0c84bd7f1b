from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from config import settings
from config.constants import CLASSIFIER_CHECKPOINT_VERSION, RELATIONS, WEIGHT_UNIFORM
from domain.errors import SchemaError, ShapeError
from domain.features import FeatureSchema


@dataclass
class DetectorHyper:
    hidden: int = settings.DETECTOR_HIDDEN
    dropout: float = settings.DETECTOR_DROPOUT
    lr: float = settings.DETECTOR_LR
    weight_decay: float = settings.DETECTOR_WEIGHT_DECAY
    epochs: int = settings.DETECTOR_EPOCHS
    leaky_slope: float = settings.LEAKY_SLOPE
    decoupled: bool = settings.DECOUPLED_WEIGHT_DECAY

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def param_shapes(schema: FeatureSchema, hidden: int) -> Dict[str, tuple]:
    """Parameter names and shapes, in a fixed order."""
    d = schema.dims()
    h = hidden
    shapes: Dict[str, tuple] = {}
    for group in ("desc", "tweet", "numeric", "categorical"):
        shapes[f"in_{group}_w"] = (d[group], h)
        shapes[f"in_{group}_b"] = (h,)
    shapes["fuse_w"] = (4 * h, h)
    shapes["fuse_b"] = (h,)
    for layer in (1, 2):
        shapes[f"rgcn{layer}_self"] = (h, h)
        for r in range(len(RELATIONS)):
            shapes[f"rgcn{layer}_rel{r}"] = (h, h)
        shapes[f"rgcn{layer}_b"] = (h,)
    shapes["head_w"] = (h, h)
    shapes["head_b"] = (h,)
    shapes["out_w"] = (h, 2)
    shapes["out_b"] = (2,)
    return shapes


@dataclass
class RgcnClassifier:
    """Weights of one per-round classifier; output column 1 is the human class."""

    schema: FeatureSchema
    hidden: int
    leaky_slope: float
    dropout: float
    params: Dict[str, np.ndarray] = field(default_factory=dict)

    def validate_basic(self) -> None:
        expected = param_shapes(self.schema, self.hidden)
        if list(self.params) != list(expected):
            raise ShapeError("RgcnClassifier: parameter set does not match the architecture")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ShapeError(f"RgcnClassifier: {name} has shape {self.params[name].shape}, expected {shape}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": CLASSIFIER_CHECKPOINT_VERSION,
            "architecture": {
                "hidden": self.hidden,
                "relations": list(RELATIONS),
                "leaky_slope": self.leaky_slope,
                "dropout": self.dropout,
                "dims": self.schema.dims(),
            },
            "schema": self.schema.to_dict(),
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RgcnClassifier":
        if int(d.get("version", -1)) != CLASSIFIER_CHECKPOINT_VERSION:
            raise SchemaError(f"RgcnClassifier.from_dict: unsupported checkpoint version {d.get('version')!r}")
        arch = d["architecture"]
        if list(arch.get("relations", [])) != list(RELATIONS):
            raise SchemaError("RgcnClassifier.from_dict: relation set differs")
        schema = FeatureSchema.from_dict(d["schema"])
        if schema.dims() != arch["dims"]:
            raise ShapeError(f"RgcnClassifier.from_dict: schema dims {schema.dims()} != recorded {arch['dims']}")
        hidden = int(arch["hidden"])
        raw = d["params"]
        expected = param_shapes(schema, hidden)
        if set(raw) != set(expected):
            raise ShapeError("RgcnClassifier.from_dict: parameter names do not match the architecture")
        params: Dict[str, np.ndarray] = {}
        for name, shape in expected.items():
            arr = np.asarray(raw[name], dtype=np.float64)
            if arr.size == 0:
                arr = arr.reshape(shape)
            if arr.shape != shape:
                raise ShapeError(f"RgcnClassifier.from_dict: {name} has shape {arr.shape}, expected {shape}")
            params[name] = arr
        model = cls(
            schema=schema,
            hidden=hidden,
            leaky_slope=float(arch["leaky_slope"]),
            dropout=float(arch["dropout"]),
            params=params,
        )
        model.validate_basic()
        return model


@dataclass
class EnsembleDetector:
    members: List[RgcnClassifier]
    weights: List[float]
    strategy: str = WEIGHT_UNIFORM
    alpha: float = settings.EXP_WEIGHT_ALPHA

    def validate_basic(self) -> None:
        if not self.members:
            raise ShapeError("EnsembleDetector: no members")
        if len(self.weights) != len(self.members):
            raise ShapeError(f"EnsembleDetector: {len(self.weights)} weights for {len(self.members)} members")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ShapeError("EnsembleDetector: weights must be non-negative and sum to 1")
        first = self.members[0]
        for m in self.members[1:]:
            if m.hidden != first.hidden:
                raise ShapeError("EnsembleDetector: members differ in hidden size")
            first.schema.check_compatible(m.schema)

    def to_dict(self) -> Dict[str, Any]:
        return {"strategy": self.strategy, "alpha": self.alpha, "weights": list(self.weights)}
