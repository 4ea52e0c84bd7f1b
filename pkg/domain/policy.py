from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from config import settings
from config.constants import POLICY_CHECKPOINT_VERSION, TOKEN_EOT
from domain.errors import SchemaError, ShapeError


Response = List[List[int]]  # l tweets, each a token-id list without the end marker


def policy_param_shapes(vocab_size: int, context_dim: int, hidden: int, token_dim: int) -> Dict[str, tuple]:
    v, h, e = vocab_size, hidden, token_dim
    return {
        "ctx_w": (context_dim, h),
        "ctx_b": (h,),
        "tok_emb": (v + 1, e),  # last row is the begin-of-tweet input
        "mix_w": (h + e, h),
        "mix_b": (h,),
        "out_w": (h, v),
        "out_b": (v,),
    }


@dataclass
class PolicyModel:
    """
    Conditional token model. Each tweet is generated token by token from the
    encoded context and the previous token; a response is `tweets_per_response`
    independent tweets. Token 0 is the end-of-tweet marker. After `max_tokens`
    tokens the end marker is forced and contributes nothing to the log-prob.
    """

    vocab: List[str]
    context_dim: int
    hidden: int = settings.POLICY_HIDDEN
    token_dim: int = settings.POLICY_TOKEN_DIM
    max_tokens: int = settings.POLICY_MAX_TOKENS
    tweets_per_response: int = settings.TWEETS_PER_RESPONSE
    params: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def bos_index(self) -> int:
        return len(self.vocab)

    def validate_basic(self) -> None:
        if not self.vocab or self.vocab[0] != TOKEN_EOT:
            raise SchemaError("PolicyModel: vocabulary must start with the end-of-tweet token")
        if len(set(self.vocab)) != len(self.vocab):
            raise SchemaError("PolicyModel: duplicate vocabulary entries")
        if self.max_tokens < 1 or self.tweets_per_response < 1:
            raise ValueError("PolicyModel: max_tokens and tweets_per_response must be >= 1")
        expected = policy_param_shapes(self.vocab_size, self.context_dim, self.hidden, self.token_dim)
        if set(self.params) != set(expected):
            raise ShapeError("PolicyModel: parameter set does not match the architecture")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ShapeError(f"PolicyModel: {name} has shape {self.params[name].shape}, expected {shape}")

    def copy(self) -> "PolicyModel":
        return PolicyModel(
            vocab=list(self.vocab),
            context_dim=self.context_dim,
            hidden=self.hidden,
            token_dim=self.token_dim,
            max_tokens=self.max_tokens,
            tweets_per_response=self.tweets_per_response,
            params={k: v.copy() for k, v in self.params.items()},
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": POLICY_CHECKPOINT_VERSION,
            "architecture": {
                "context_dim": self.context_dim,
                "hidden": self.hidden,
                "token_dim": self.token_dim,
                "max_tokens": self.max_tokens,
                "tweets_per_response": self.tweets_per_response,
                "vocab_size": self.vocab_size,
            },
            "vocab": list(self.vocab),
            "params": {k: self.params[k].tolist() for k in policy_param_shapes(
                self.vocab_size, self.context_dim, self.hidden, self.token_dim)},
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "PolicyModel":
        if int(d.get("version", -1)) != POLICY_CHECKPOINT_VERSION:
            raise SchemaError(f"PolicyModel.from_dict: unsupported checkpoint version {d.get('version')!r}")
        arch = d["architecture"]
        vocab = [str(t) for t in d["vocab"]]
        if len(vocab) != int(arch["vocab_size"]):
            raise ShapeError(f"PolicyModel.from_dict: {len(vocab)} vocab entries, architecture says {arch['vocab_size']}")
        model = cls(
            vocab=vocab,
            context_dim=int(arch["context_dim"]),
            hidden=int(arch["hidden"]),
            token_dim=int(arch["token_dim"]),
            max_tokens=int(arch["max_tokens"]),
            tweets_per_response=int(arch["tweets_per_response"]),
        )
        expected = policy_param_shapes(model.vocab_size, model.context_dim, model.hidden, model.token_dim)
        raw = d["params"]
        if set(raw) != set(expected):
            raise ShapeError("PolicyModel.from_dict: parameter names do not match the architecture")
        for name, shape in expected.items():
            arr = np.asarray(raw[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeError(f"PolicyModel.from_dict: {name} has shape {arr.shape}, expected {shape}")
            model.params[name] = arr
        model.validate_basic()
        return model


@dataclass
class GenerationParams:
    temperature: float = settings.GEN_TEMPERATURE
    top_k: int = settings.GEN_TOP_K
    top_p: float = settings.GEN_TOP_P
    repetition_penalty: float = settings.GEN_REPETITION_PENALTY
    max_length: int = settings.GEN_MAX_LENGTH
    sample: bool = True

    def validate_basic(self) -> None:
        issues = []
        if not self.temperature > 0:
            issues.append(f"temperature must be > 0, got {self.temperature}")
        if not (0.0 < self.top_p <= 1.0):
            issues.append(f"top_p must be in (0, 1], got {self.top_p}")
        if self.top_k < 0:
            issues.append(f"top_k must be >= 0, got {self.top_k}")
        if self.max_length < 1:
            issues.append(f"max_length must be >= 1, got {self.max_length}")
        if issues:
            raise ValueError("GenerationParams: " + "; ".join(issues))

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class Candidate:
    tokens: Response
    texts: List[str]
    logprob: float  # untempered model log-probability of the whole response


@dataclass
class SftExample:
    user_id: str
    context: np.ndarray
    response: Response


@dataclass
class PreferencePair:
    user_id: str
    context: np.ndarray
    chosen: Response
    rejected: Response
    chosen_score: float
    rejected_score: float

    def validate_basic(self) -> None:
        if self.chosen_score < self.rejected_score:
            raise ValueError(f"PreferencePair({self.user_id}): chosen score below rejected score")

    def to_row(self) -> Dict[str, Any]:
        return {
            "user_id": self.user_id,
            "chosen_score": self.chosen_score,
            "rejected_score": self.rejected_score,
            "margin": self.chosen_score - self.rejected_score,
        }
