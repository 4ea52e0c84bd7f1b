from __future__ import annotations

# ---- corpus ----
# Louvain resolution (gamma in the modularity objective)
LOUVAIN_RESOLUTION = 1.0
# Louvain level threshold: a new level must raise modularity by more than this
LOUVAIN_THRESHOLD = 1e-7
# train/val/test ratios
SPLIT_RATIOS = (8, 1, 1)

# synthetic community defaults (stands in for a real crawl)
FIXTURE_USERS = 300
FIXTURE_BOT_FRACTION = 0.2
FIXTURE_EDGE_DENSITY = 4.0  # expected follow edges created per new user
FIXTURE_TOPIC_WORDS = 150
FIXTURE_TWEETS_MIN = 8
FIXTURE_TWEETS_MAX = 16

# ---- text features ----
EMBED_DIM = 64
TWEET_CAP = 20  # most recent tweets pooled into the tweet embedding
SUMMARY_CAP_CHARS = 600
SUMMARY_TOP_TWEETS = 3
NEIGHBOR_SUMMARY_MAX = 5

# ---- detector (training parameters of the detector) ----
DETECTOR_HIDDEN = 256
DETECTOR_DROPOUT = 0.1
DETECTOR_LR = 1e-3
DETECTOR_WEIGHT_DECAY = 0.1
DETECTOR_EPOCHS = 120
LEAKY_SLOPE = 0.01
# decoupled weight decay (AdamW style) by default
DECOUPLED_WEIGHT_DECAY = True
EXP_WEIGHT_ALPHA = 0.5

# ---- generator ----
POLICY_HIDDEN = 64
POLICY_TOKEN_DIM = 32
POLICY_VOCAB_MAX = 512
POLICY_MAX_TOKENS = 24
TWEETS_PER_RESPONSE = 3
# base-model warm start on every training user (stands in for a pretrained LM)
PRETRAIN_EPOCHS = 30
PRETRAIN_LR = 1e-2
PRETRAIN_BATCH = 256
SFT_EPOCHS = 60
SFT_LR = 5e-3
SFT_BATCH = 64
DPO_EPOCHS = 8
DPO_LR = 1e-2
DPO_BETA = 0.2
DPO_BATCH = 32

# external endpoint generation parameters
GEN_TEMPERATURE = 0.7
GEN_TOP_K = 50
GEN_TOP_P = 0.6
GEN_REPETITION_PENALTY = 1.3
GEN_MAX_LENGTH = 2048

# ---- endpoint ----
ENDPOINT_API_KEY_ENV = "ARENA_ENDPOINT_API_KEY"
HTTP_TIMEOUT_SEC = 60
HTTP_RETRIES = 3
HTTP_BACKOFF = 0.4
ENDPOINT_MAX_CONCURRENCY = 4

# ---- arena ----
ARENA_ROUNDS = 4
ARENA_PAIRS = 256  # desk scale; full-size runs use 1024
ARENA_CANDIDATES = 2

# ---- theory harness ----
THEORY_OUTER_STEPS = 5000
THEORY_INNER_STEPS = 1
THEORY_LR = 1.0
THEORY_DETECTOR_NEWTON_STEPS = 60

# ---- simulation (ABM parameters) ----
BC_MU = 0.8
BC_EPSILON = 0.3
LORENZ_ALPHA = 0.1
LORENZ_LAMBDA = 2.0
LORENZ_K = 2.0
LORENZ_THETA = 0.5
LORENZ_M = 1.0
RECENT_POSTS_MAX = 5
PAST_EVENTS_WINDOW = 3
SPREAD_SEED_COUNT = 30
SPREAD_POST_PROBABILITY = 0.3
NEGATION_WINDOW = 2

# ---- logging ----
LOG_LEVEL_ENV = "ARENA_LOG_LEVEL"
LOG_LEVEL_DEFAULT = "INFO"
