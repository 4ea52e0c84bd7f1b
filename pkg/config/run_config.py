"""
Run configuration: a TOML file with one table per concern, then flag
overrides on top (flags win). Validation reports every problem at once.

    seed = 7
    threads = 4
    [corpus]      path | users bot_frac edge_density, community resolution
    [features]    strip_markers
    [detector]    hidden dropout lr weight_decay epochs leaky_slope decoupled
    [generator]   backend temperature top_k top_p repetition_penalty max_length
    [endpoint]    base_url model timeout_sec max_concurrency
    [arena]       rounds pairs candidates beta strategy alpha ablation row_mode f1_side ...
    [simulation]  model steps schedule seeds keywords ... real_trace policy
    [output]      dir
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import toml

from config import settings
from config.constants import (
    ABLATION_NONE,
    BACKEND_ENDPOINT,
    BACKEND_TOY,
    BACKENDS,
    F1_SIDE_BOT,
    ROW_MODE_ENSEMBLE,
    SIM_BC,
    SIM_LORENZ,
    SIM_MODELS,
    WEIGHT_UNIFORM,
)
from domain.arena import ArenaConfig
from domain.detector import DetectorHyper
from domain.errors import ConfigError
from domain.policy import GenerationParams
from datasources.endpoint_client import EndpointConfig


MARKER_KINDS = ("emoji", "hashtag", "mention")


@dataclass
class CorpusSection:
    path: str = ""  # dataset directory; empty means a synthetic fixture
    users: int = settings.FIXTURE_USERS
    bot_frac: float = settings.FIXTURE_BOT_FRACTION
    edge_density: float = settings.FIXTURE_EDGE_DENSITY
    community: int = -1  # restrict to one Louvain community; -1 keeps everyone
    resolution: float = settings.LOUVAIN_RESOLUTION


@dataclass
class FeaturesSection:
    # stylistic markers removed from tweets before the detector sees them
    strip_markers: List[str] = field(default_factory=list)


@dataclass
class DetectorSection:
    hidden: int = settings.DETECTOR_HIDDEN
    dropout: float = settings.DETECTOR_DROPOUT
    lr: float = settings.DETECTOR_LR
    weight_decay: float = settings.DETECTOR_WEIGHT_DECAY
    epochs: int = settings.DETECTOR_EPOCHS
    leaky_slope: float = settings.LEAKY_SLOPE
    decoupled: bool = settings.DECOUPLED_WEIGHT_DECAY

    def hyper(self) -> DetectorHyper:
        return DetectorHyper(**dataclasses.asdict(self))


@dataclass
class GeneratorSection:
    backend: str = BACKEND_TOY
    temperature: float = 1.0
    top_k: int = settings.GEN_TOP_K
    top_p: float = settings.GEN_TOP_P
    repetition_penalty: float = settings.GEN_REPETITION_PENALTY
    max_length: int = settings.GEN_MAX_LENGTH

    def params(self) -> GenerationParams:
        return GenerationParams(
            temperature=self.temperature,
            top_k=self.top_k,
            top_p=self.top_p,
            repetition_penalty=self.repetition_penalty,
            max_length=self.max_length,
        )


@dataclass
class EndpointSection:
    base_url: str = ""
    model: str = ""
    timeout_sec: float = settings.HTTP_TIMEOUT_SEC
    max_concurrency: int = settings.ENDPOINT_MAX_CONCURRENCY


@dataclass
class ArenaSection:
    rounds: int = settings.ARENA_ROUNDS
    pairs: int = settings.ARENA_PAIRS
    candidates: int = settings.ARENA_CANDIDATES
    beta: float = settings.DPO_BETA
    strategy: str = WEIGHT_UNIFORM
    alpha: float = settings.EXP_WEIGHT_ALPHA
    ablation: str = ABLATION_NONE
    row_mode: str = ROW_MODE_ENSEMBLE
    f1_side: str = F1_SIDE_BOT
    pretrain_epochs: int = settings.PRETRAIN_EPOCHS
    sft_epochs: int = settings.SFT_EPOCHS
    dpo_epochs: int = settings.DPO_EPOCHS
    dpo_lr: float = settings.DPO_LR


@dataclass
class SimulationSection:
    model: str = SIM_BC
    steps: int = 0  # 0 = schedule horizon
    schedule: str = "covid"
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    keywords: List[str] = field(default_factory=list)
    seed_count: int = settings.SPREAD_SEED_COUNT
    post_probability: float = settings.SPREAD_POST_PROBABILITY
    mu: float = settings.BC_MU
    epsilon: float = settings.BC_EPSILON
    alpha: float = settings.LORENZ_ALPHA
    lam: float = settings.LORENZ_LAMBDA
    k: float = settings.LORENZ_K
    theta: float = settings.LORENZ_THETA
    big_m: float = settings.LORENZ_M
    real_trace: str = ""
    policy: str = ""  # toy policy checkpoint for generative agents

    def abm_params(self) -> Dict[str, float]:
        if self.model == SIM_BC:
            return {"mu": self.mu, "eps": self.epsilon}
        if self.model == SIM_LORENZ:
            return {"alpha": self.alpha, "lam": self.lam, "k": self.k, "theta": self.theta, "big_m": self.big_m}
        return {}


@dataclass
class OutputSection:
    dir: str = "runs"


@dataclass
class RunConfig:
    seed: int = 0
    threads: int = 1
    corpus: CorpusSection = field(default_factory=CorpusSection)
    features: FeaturesSection = field(default_factory=FeaturesSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    generator: GeneratorSection = field(default_factory=GeneratorSection)
    endpoint: EndpointSection = field(default_factory=EndpointSection)
    arena: ArenaSection = field(default_factory=ArenaSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    output: OutputSection = field(default_factory=OutputSection)

    def arena_config(self) -> ArenaConfig:
        return ArenaConfig(
            seed=self.seed,
            detector=self.detector.hyper(),
            generation=self.generator.params(),
            **dataclasses.asdict(self.arena),
        )

    def endpoint_config(self) -> EndpointConfig:
        return EndpointConfig(
            base_url=self.endpoint.base_url,
            model=self.endpoint.model,
            timeout_sec=self.endpoint.timeout_sec,
            max_concurrency=max(1, min(self.endpoint.max_concurrency, self.threads)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _section_names() -> List[str]:
    return [f.name for f in dataclasses.fields(RunConfig) if f.name not in ("seed", "threads")]


def _coerce(owner: str, name: str, current: Any, value: Any) -> Tuple[Any, Optional[str]]:
    """Casts `value` to the type of the default; returns (value, issue)."""
    where = f"{owner}.{name}" if owner else name
    try:
        if isinstance(current, bool):
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "y", "t"), None
            return bool(value), None
        if isinstance(current, int):
            if isinstance(value, float) and not value.is_integer():
                return current, f"{where} must be an integer, got {value!r}"
            return int(value), None
        if isinstance(current, float):
            return float(value), None
        if isinstance(current, list):
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            items = list(value)
            if name == "seeds":
                return [int(v) for v in items], None
            return [str(v) for v in items], None
        return str(value), None
    except (TypeError, ValueError):
        return current, f"{where}: cannot read {value!r} as {type(current).__name__}"


def _apply(cfg: RunConfig, data: Dict[str, Any], issues: List[str]) -> None:
    sections = _section_names()
    for key, value in data.items():
        if key in ("seed", "threads"):
            v, issue = _coerce("", key, getattr(cfg, key), value)
            if issue:
                issues.append(issue)
            else:
                setattr(cfg, key, v)
            continue
        if key not in sections:
            issues.append(f"unknown section {key!r}")
            continue
        if not isinstance(value, dict):
            issues.append(f"[{key}] must be a table")
            continue
        section = getattr(cfg, key)
        known = {f.name for f in dataclasses.fields(section)}
        for name, raw in value.items():
            if name not in known:
                issues.append(f"unknown key {key}.{name}")
                continue
            v, issue = _coerce(key, name, getattr(section, name), raw)
            if issue:
                issues.append(issue)
            else:
                setattr(section, name, v)


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    File values, then dotted-key overrides ("arena.rounds": 3, "seed": 1).
    Unknown keys and type errors are reported together as a ConfigError.
    """
    cfg = RunConfig()
    issues: List[str] = []
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError([f"config file not found: {path}"])
        try:
            data = toml.load(str(p))
        except toml.TomlDecodeError as e:
            raise ConfigError([f"{path}: {e}"]) from e
        _apply(cfg, data, issues)
    nested: Dict[str, Any] = {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:
            section, name = key.split(".", 1)
            nested.setdefault(section, {})[name] = value
        else:
            nested[key] = value
    _apply(cfg, nested, issues)
    if issues:
        raise ConfigError(issues)
    return cfg


def run_config_issues(cfg: RunConfig, check_paths: bool = True) -> List[str]:
    out: List[str] = []
    if cfg.threads < 1:
        out.append(f"threads must be >= 1, got {cfg.threads}")
    c = cfg.corpus
    if not c.path:
        if c.users < 2:
            out.append(f"corpus.users must be >= 2, got {c.users}")
        if not 0.0 < c.bot_frac < 1.0:
            out.append(f"corpus.bot_frac must lie in (0, 1), got {c.bot_frac}")
    elif check_paths and not Path(c.path).is_dir():
        out.append(f"corpus.path does not exist: {c.path}")
    if not c.resolution > 0:
        out.append(f"corpus.resolution must be > 0, got {c.resolution}")
    bad = [m for m in cfg.features.strip_markers if m not in MARKER_KINDS]
    if bad:
        out.append(f"features.strip_markers must be among {list(MARKER_KINDS)}, got {bad}")

    d = cfg.detector
    if d.hidden < 1 or d.epochs < 1:
        out.append("detector.hidden and detector.epochs must be >= 1")
    if not 0.0 <= d.dropout < 1.0:
        out.append(f"detector.dropout must lie in [0, 1), got {d.dropout}")
    if not d.lr > 0:
        out.append(f"detector.lr must be > 0, got {d.lr}")

    if cfg.generator.backend not in BACKENDS:
        out.append(f"generator.backend must be exactly one of {list(BACKENDS)}, got {cfg.generator.backend!r}")
    elif cfg.generator.backend == BACKEND_ENDPOINT:
        out.extend(cfg.endpoint_config().issues())
    out.extend(cfg.arena_config().issues())

    s = cfg.simulation
    if s.model not in SIM_MODELS:
        out.append(f"simulation.model must be one of {list(SIM_MODELS)}, got {s.model!r}")
    if s.steps < 0:
        out.append(f"simulation.steps must be >= 0, got {s.steps}")
    if not s.seeds:
        out.append("simulation.seeds must not be empty")
    if s.seed_count < 0:
        out.append(f"simulation.seed_count must be >= 0, got {s.seed_count}")
    if not 0.0 <= s.post_probability <= 1.0:
        out.append(f"simulation.post_probability must lie in [0, 1], got {s.post_probability}")
    if not s.big_m > 0:
        out.append(f"simulation.big_m must be > 0, got {s.big_m}")
    if check_paths:
        if s.real_trace and not Path(s.real_trace).is_file():
            out.append(f"simulation.real_trace does not exist: {s.real_trace}")
        if s.policy and not Path(s.policy).exists():
            out.append(f"simulation.policy does not exist: {s.policy}")
        if Path(s.schedule).suffix and not Path(s.schedule).is_file():
            out.append(f"simulation.schedule does not exist: {s.schedule}")
    if not cfg.output.dir:
        out.append("output.dir must be set")
    return out


def validate_run_config(cfg: RunConfig, check_paths: bool = True) -> RunConfig:
    issues = run_config_issues(cfg, check_paths)
    if issues:
        raise ConfigError(issues)
    return cfg
