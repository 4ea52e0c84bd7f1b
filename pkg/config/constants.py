from __future__ import annotations

from typing import Final, Tuple


# user labels (human is the positive class)
LABEL_HUMAN: Final[str] = "human"
LABEL_BOT: Final[str] = "bot"
LABELS: Final[Tuple[str, ...]] = (LABEL_HUMAN, LABEL_BOT)

# relation types; the order is the RGCN relation index
RELATION_FOLLOW: Final[str] = "follow"
RELATION_FRIEND: Final[str] = "friend"
RELATIONS: Final[Tuple[str, ...]] = (RELATION_FOLLOW, RELATION_FRIEND)

# Ensemble weighting strategies
WEIGHT_UNIFORM: Final[str] = "uniform"
WEIGHT_GREEDY: Final[str] = "greedy"
WEIGHT_EXP: Final[str] = "exp"
WEIGHT_STRATEGIES: Final[Tuple[str, ...]] = (WEIGHT_UNIFORM, WEIGHT_GREEDY, WEIGHT_EXP)

# Which class's F1 gets reported
F1_SIDE_HUMAN: Final[str] = "human"
F1_SIDE_BOT: Final[str] = "bot"
F1_SIDES: Final[Tuple[str, ...]] = (F1_SIDE_HUMAN, F1_SIDE_BOT)

# Eval matrix rows
ROW_MODE_ENSEMBLE: Final[str] = "ensemble"
ROW_MODE_BARE: Final[str] = "bare"
ROW_MODES: Final[Tuple[str, ...]] = (ROW_MODE_ENSEMBLE, ROW_MODE_BARE)

# Arena ablations
ABLATION_NONE: Final[str] = "none"
ABLATION_NO_ADV: Final[str] = "no_adv"
ABLATION_NO_SFT: Final[str] = "no_sft"
ABLATIONS: Final[Tuple[str, ...]] = (ABLATION_NONE, ABLATION_NO_ADV, ABLATION_NO_SFT)

# Generator backends
BACKEND_TOY: Final[str] = "toy"
BACKEND_ENDPOINT: Final[str] = "endpoint"
BACKENDS: Final[Tuple[str, ...]] = (BACKEND_TOY, BACKEND_ENDPOINT)

# Opinion simulation models
SIM_GENERATIVE: Final[str] = "generative"
SIM_BC: Final[str] = "bc"
SIM_LORENZ: Final[str] = "lorenz"
SIM_MODELS: Final[Tuple[str, ...]] = (SIM_GENERATIVE, SIM_BC, SIM_LORENZ)

# Prompt template names
PROMPT_SUMMARIZATION: Final[str] = "summarization"
PROMPT_LEARNING: Final[str] = "learning"
PROMPT_SIMULATION: Final[str] = "simulation"

# Policy special tokens
TOKEN_EOT: Final[str] = "<eot>"

# Checkpoint format versions
CLASSIFIER_CHECKPOINT_VERSION: Final[int] = 1
POLICY_CHECKPOINT_VERSION: Final[int] = 1
