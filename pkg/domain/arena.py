from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

import numpy as np

from config import settings
from config.constants import (
    ABLATION_NO_ADV,
    ABLATIONS,
    ABLATION_NONE,
    F1_SIDE_BOT,
    F1_SIDES,
    ROW_MODE_ENSEMBLE,
    ROW_MODES,
    WEIGHT_STRATEGIES,
    WEIGHT_UNIFORM,
)
from domain.detector import DetectorHyper, RgcnClassifier
from domain.policy import GenerationParams, PolicyModel


@dataclass
class ArenaConfig:
    rounds: int = settings.ARENA_ROUNDS  # K
    pairs: int = settings.ARENA_PAIRS  # N per round
    candidates: int = settings.ARENA_CANDIDATES  # C per bot
    beta: float = settings.DPO_BETA
    strategy: str = WEIGHT_UNIFORM
    alpha: float = settings.EXP_WEIGHT_ALPHA
    ablation: str = ABLATION_NONE
    row_mode: str = ROW_MODE_ENSEMBLE
    f1_side: str = F1_SIDE_BOT
    seed: int = 0
    detector: DetectorHyper = field(default_factory=DetectorHyper)
    generation: GenerationParams = field(default_factory=lambda: GenerationParams(temperature=1.0))
    pretrain_epochs: int = settings.PRETRAIN_EPOCHS
    sft_epochs: int = settings.SFT_EPOCHS
    dpo_epochs: int = settings.DPO_EPOCHS
    dpo_lr: float = settings.DPO_LR

    def issues(self) -> List[str]:
        out: List[str] = []
        if self.rounds < 1:
            out.append(f"arena.rounds must be >= 1, got {self.rounds}")
        if self.pairs < 1:
            out.append(f"arena.pairs must be >= 1, got {self.pairs}")
        if self.candidates < 2:
            out.append(f"arena.candidates must be >= 2, got {self.candidates}")
        if not self.beta > 0:
            out.append(f"arena.beta must be > 0, got {self.beta}")
        if self.strategy not in WEIGHT_STRATEGIES:
            out.append(f"arena.strategy must be one of {list(WEIGHT_STRATEGIES)}, got {self.strategy!r}")
        if self.ablation not in ABLATIONS:
            out.append(f"arena.ablation must be one of {list(ABLATIONS)}, got {self.ablation!r}")
        if self.row_mode not in ROW_MODES:
            out.append(f"arena.row_mode must be one of {list(ROW_MODES)}, got {self.row_mode!r}")
        if self.f1_side not in F1_SIDES:
            out.append(f"arena.f1_side must be one of {list(F1_SIDES)}, got {self.f1_side!r}")
        try:
            self.generation.validate_basic()
        except ValueError as e:
            out.append(str(e))
        return out

    def validate_basic(self) -> None:
        issues = self.issues()
        if issues:
            raise ValueError("ArenaConfig: " + "; ".join(issues))

    def effective(self) -> "ArenaConfig":
        """The w/o Adv ablation collapses K rounds of N pairs into one round of K*N."""
        if self.ablation != ABLATION_NO_ADV:
            return self
        return replace(self, rounds=1, pairs=self.rounds * self.pairs)

    def to_dict(self) -> Dict[str, Any]:
        d = {k: v for k, v in self.__dict__.items() if k not in ("detector", "generation")}
        d["detector"] = self.detector.to_dict()
        d["generation"] = self.generation.to_dict()
        return d


@dataclass
class PairStats:
    drawn: int
    pairs: int
    ties: int
    chosen_mean: float
    rejected_mean: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class RoundRecord:
    k: int
    policy: PolicyModel  # pi^k
    classifier: RgcnClassifier  # f^k
    weights: List[float]  # ensemble weights of F^k
    dataset_digest: str  # digest of D^k (empty for k = 0)
    pair_stats: Optional[PairStats] = None
    dpo_losses: List[float] = field(default_factory=list)


@dataclass
class RoundArtifacts:
    config: ArenaConfig
    rounds: List[RoundRecord] = field(default_factory=list)

    @property
    def policies(self) -> List[PolicyModel]:
        return [r.policy for r in self.rounds]

    @property
    def classifiers(self) -> List[RgcnClassifier]:
        return [r.classifier for r in self.rounds]

    def validate_basic(self) -> None:
        ks = [r.k for r in self.rounds]
        if ks != list(range(len(ks))) or len(ks) < 2:
            raise ValueError(f"RoundArtifacts: rounds must be 0..K with K >= 1, got {ks}")


@dataclass
class EvalMatrix:
    """Rows: detector versions F^0..F^K; columns: policy versions pi^0..pi^K."""

    row_mode: str
    f1: np.ndarray
    accuracy: np.ndarray
    column_digests: List[str]

    @property
    def size(self) -> int:
        return int(self.f1.shape[0])

    def to_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for i in range(self.size):
            for j in range(self.size):
                rows.append({
                    "detector": i,
                    "policy": j,
                    "f1": float(self.f1[i, j]),
                    "accuracy": float(self.accuracy[i, j]),
                    "dataset_digest": self.column_digests[j],
                })
        return rows


@dataclass
class GeneralizationMatrix:
    community_ids: List[int]
    final_f1: np.ndarray  # trained on row community, tested on column community
    base_f1: np.ndarray

    def to_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for a, ca in enumerate(self.community_ids):
            for b, cb in enumerate(self.community_ids):
                rows.append({
                    "train_community": ca,
                    "test_community": cb,
                    "final_f1": float(self.final_f1[a, b]),
                    "base_f1": float(self.base_f1[a, b]),
                })
        return rows
