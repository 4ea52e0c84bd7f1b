"""Versioned JSON checkpoints for classifiers and policies."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List

from domain.detector import RgcnClassifier
from domain.errors import SchemaError
from domain.policy import PolicyModel
from storage.json_store import load_json, save_json


CLASSIFIER_FILE = "classifier.json"
POLICY_FILE = "policy.json"
WEIGHTS_FILE = "weights.json"


def _load(path: str | Path, what: str) -> Dict[str, Any]:
    data = load_json(str(path), default=None)
    if not isinstance(data, dict):
        raise SchemaError(f"{what}: no checkpoint at {path}")
    return data


def save_classifier(path: str | Path, model: RgcnClassifier) -> None:
    save_json(str(path), model.to_dict())


def load_classifier(path: str | Path) -> RgcnClassifier:
    return RgcnClassifier.from_dict(_load(path, "load_classifier"))


def save_policy(path: str | Path, model: PolicyModel) -> None:
    save_json(str(path), model.to_dict())


def load_policy(path: str | Path) -> PolicyModel:
    return PolicyModel.from_dict(_load(path, "load_policy"))


def save_weights(path: str | Path, strategy: str, alpha: float, weights: List[float]) -> None:
    save_json(str(path), {"strategy": strategy, "alpha": alpha, "weights": list(weights)})


def load_weights(path: str | Path) -> Dict[str, Any]:
    data = _load(path, "load_weights")
    if "weights" not in data:
        raise SchemaError(f"load_weights: {path} has no weights")
    return data
