from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.special import expit, softmax

from domain.errors import ShapeError


ROW_TOL = 1e-12


def _check_stochastic(name: str, m: np.ndarray) -> None:
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError(f"{name}: entries must be finite and non-negative")
    if np.any(np.abs(m.sum(axis=-1) - 1.0) > ROW_TOL):
        raise ValueError(f"{name}: rows must sum to 1")


@dataclass
class TabularWorld:
    """Context distribution q(x), human policy pi_H(y|x), optional shifted contexts q'(x)."""

    q: np.ndarray
    pi_h: np.ndarray
    q_shift: Optional[np.ndarray] = None

    @property
    def n_x(self) -> int:
        return int(self.pi_h.shape[0])

    @property
    def n_y(self) -> int:
        return int(self.pi_h.shape[1])

    @property
    def q_gen(self) -> np.ndarray:
        """Contexts the generator is evaluated on (q' when shifted, else q)."""
        return self.q if self.q_shift is None else self.q_shift

    @property
    def shifted(self) -> bool:
        return self.q_shift is not None and not np.array_equal(self.q_shift, self.q)

    def validate_basic(self) -> None:
        if self.pi_h.ndim != 2 or self.q.shape != (self.n_x,):
            raise ShapeError(f"TabularWorld: q {self.q.shape} vs pi_H {self.pi_h.shape}")
        _check_stochastic("TabularWorld.q", self.q)
        _check_stochastic("TabularWorld.pi_h", self.pi_h)
        if self.q_shift is not None:
            if self.q_shift.shape != self.q.shape:
                raise ShapeError("TabularWorld: q' shape differs from q")
            _check_stochastic("TabularWorld.q_shift", self.q_shift)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q.tolist(),
            "pi_h": self.pi_h.tolist(),
            "q_shift": None if self.q_shift is None else self.q_shift.tolist(),
        }


@dataclass
class TabularPolicy:
    logits: np.ndarray

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits, axis=1)

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "TabularPolicy":
        with np.errstate(divide="ignore"):
            return cls(logits=np.log(np.asarray(probs, dtype=np.float64)))


@dataclass
class TabularDetector:
    values: np.ndarray  # F(x, y)

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "TabularDetector":
        return cls(values=expit(np.asarray(logits, dtype=np.float64)))

    def validate_basic(self) -> None:
        if np.any(self.values < 0) or np.any(self.values > 1) or not np.all(np.isfinite(self.values)):
            raise ValueError("TabularDetector: values must lie in [0, 1]")


@dataclass
class TheoryStep:
    step: int
    avg_tv: float
    max_f_dev: float
    detector_objective: float
    generator_objective: float
    lr: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class TheoryTrajectory:
    steps: List[TheoryStep] = field(default_factory=list)
    aborted: bool = False
    policy: Optional[TabularPolicy] = None

    @property
    def final(self) -> TheoryStep:
        if not self.steps:
            raise ValueError("TheoryTrajectory: empty")
        return self.steps[-1]

    def to_rows(self) -> List[Dict[str, Any]]:
        return [s.to_dict() for s in self.steps]
