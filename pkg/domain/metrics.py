from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict


@dataclass(frozen=True)
class ConfusionCounts:
    """Human is the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> Dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    f1: float  # the side selected by the caller
    f1_human: float
    f1_bot: float
    counts: ConfusionCounts

    def to_dict(self) -> Dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "f1": self.f1,
            "f1_human": self.f1_human,
            "f1_bot": self.f1_bot,
            **self.counts.to_dict(),
        }


@dataclass(frozen=True)
class StyleStats:
    emoji_rate: float
    hashtag_rate: float
    mention_rate: float
    mean_chars: float
    mean_words: float

    def to_dict(self) -> Dict[str, float]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    exact: bool

    # not a pytest class
    __test__ = False

    def to_dict(self) -> Dict[str, Any]:
        return {"statistic": self.statistic, "p_value": self.p_value, "exact": self.exact}
