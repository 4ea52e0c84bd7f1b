"""
The adversarial loop between the generator policy and the detector.

Round 0 trains pi^0 (pretraining on every training account, then SFT on
training humans) and f^0 on the original data. Round k = 1..K:
  1. pairs from pi^{k-1} scored by F^{k-1}
  2. D^k = original data with every bot's tweets sampled from pi^{k-1}
  3. f^k trained on D^k; F^k = weighted sum of f^0..f^k
  4. pi^k = DPO(pi^{k-1}, pairs)
Round k reads only pi^{k-1}, f^0..f^{k-1} and the original data, so it can be
replayed from persisted checkpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.constants import ABLATION_NO_SFT, F1_SIDE_BOT, ROW_MODE_BARE, ROW_MODE_ENSEMBLE, WEIGHT_UNIFORM
from domain.arena import ArenaConfig, EvalMatrix, GeneralizationMatrix, PairStats, RoundArtifacts, RoundRecord
from domain.corpus import Dataset, Split, Tweet
from domain.detector import EnsembleDetector, RgcnClassifier
from domain.errors import ArenaError, TrainingError
from domain.features import FeatureSchema
from domain.policy import GenerationParams, PolicyModel, PreferencePair
from services import community_service, detector_service, metrics_service, policy_service, preference_service
from services.feature_service import Featurizer, categorical_domains
from storage import checkpoint_store, paths
from storage.json_store import load_json, save_json
from storage.table_store import write_table
from utils.digest import sha256_of
from utils.logger import get_logger
from utils.rng import derive_seed


log = get_logger(__name__)

REPLACEMENT_EPOCH = "2023-01-01T00:00:00+00:00"
PAIR_COLUMNS = ["user_id", "chosen_score", "rejected_score", "margin"]
MATRIX_COLUMNS = ["detector", "policy", "f1", "accuracy", "dataset_digest"]


# ---- datasets ----


def dataset_digest(dataset: Dataset) -> str:
    return sha256_of({
        "users": [{**u.to_dict(), "tweets": [t.to_dict() for t in u.tweets]} for u in dataset.users],
        "edges": sorted(list(e.to_tuple()) for e in dataset.edges),
    })


def replace_bot_tweets(
    dataset: Dataset,
    policy: PolicyModel,
    contexts: Dict[str, np.ndarray],
    seed: int,
    params: Optional[GenerationParams] = None,
) -> Dataset:
    """
    Every bot's tweet list becomes one sampled response (l tweets), stamped
    with the account's latest original timestamp. Humans and edges are kept.
    """
    users = []
    for u in dataset.users:
        if not u.is_bot:
            users.append(u)
            continue
        texts = policy_service.generate_texts(policy, contexts[u.id], params, seed=derive_seed(seed, "replace", u.id))
        stamp = u.tweets[-1].timestamp if u.tweets else REPLACEMENT_EPOCH
        users.append(u.replace_tweets([Tweet(timestamp=stamp, text=t) for t in texts]))
    return dataset.with_users(users)


# ---- setup ----


@dataclass
class ArenaSetup:
    dataset: Dataset
    split: Split
    contexts: Dict[str, np.ndarray]
    train_bots: List[str]
    train_humans: List[str]
    schema: Optional[FeatureSchema] = None


def prepare(dataset: Dataset, config: ArenaConfig, schema: Optional[FeatureSchema] = None) -> ArenaSetup:
    dataset.validate()
    split = community_service.split_dataset(dataset, seed=derive_seed(config.seed, "split"))
    train = [dataset.users[i] for i in split.train]
    return ArenaSetup(
        dataset=dataset,
        split=split,
        contexts=policy_service.context_vectors(dataset, dataset.user_ids),
        train_bots=[u.id for u in train if u.is_bot],
        train_humans=[u.id for u in train if not u.is_bot],
        schema=schema,
    )


def initial_policy(setup: ArenaSetup, config: ArenaConfig) -> PolicyModel:
    ds = setup.dataset
    train_ids = [ds.users[i].id for i in setup.split.train]
    vocab = policy_service.build_vocabulary([t.text for uid in train_ids for t in ds.user(uid).tweets])
    context_dim = len(next(iter(setup.contexts.values())))
    policy = policy_service.init_policy(vocab, context_dim, seed=derive_seed(config.seed, "policy"))
    policy_service.pretrain_policy(
        policy, ds, train_ids, setup.contexts, epochs=config.pretrain_epochs, seed=derive_seed(config.seed, "pretrain")
    )
    if config.ablation == ABLATION_NO_SFT:
        log.info("sft_skipped ablation=%s", config.ablation)
        return policy
    examples = policy_service.sft_examples(policy, ds, setup.train_humans, setup.contexts)
    return policy_service.sft_train(policy, examples, epochs=config.sft_epochs, seed=derive_seed(config.seed, "sft"))


def initial_round(setup: ArenaSetup, config: ArenaConfig) -> RoundRecord:
    policy = initial_policy(setup, config)
    f0 = detector_service.train_classifier(
        setup.dataset, setup.split, config.detector, seed=derive_seed(config.seed, "detector", 0), schema=setup.schema
    )
    return RoundRecord(k=0, policy=policy, classifier=f0, weights=[1.0], dataset_digest=dataset_digest(setup.dataset))


def run_round(
    setup: ArenaSetup,
    config: ArenaConfig,
    k: int,
    prev_policy: PolicyModel,
    members: Sequence[RgcnClassifier],
) -> Tuple[RoundRecord, List[PreferencePair]]:
    """Round k from pi^{k-1} and f^0..f^{k-1}; failures carry the round index."""
    if len(members) != k:
        raise TrainingError(f"expected {k} earlier classifiers, got {len(members)}", round_index=k)
    try:
        ens_prev = detector_service.build_ensemble(members, config.strategy, config.alpha)
        pairs, stats = preference_service.build_preference_pairs(
            prev_policy,
            ens_prev,
            setup.dataset,
            config.pairs,
            config.candidates,
            seed=derive_seed(config.seed, "pairs", k),
            contexts=setup.contexts,
            params=config.generation,
            bot_ids=setup.train_bots,
        )
        replaced = replace_bot_tweets(
            setup.dataset, prev_policy, setup.contexts, derive_seed(config.seed, "replace", k), config.generation
        )
        fk = detector_service.train_classifier(
            replaced, setup.split, config.detector, seed=derive_seed(config.seed, "detector", k), schema=setup.schema
        )
        weights = detector_service.make_weights(config.strategy, k, config.alpha)
        policy, losses = policy_service.dpo_train(
            prev_policy,
            pairs,
            beta=config.beta,
            epochs=config.dpo_epochs,
            seed=derive_seed(config.seed, "dpo", k),
            lr=config.dpo_lr,
        )
    except TrainingError as e:
        if e.round_index is not None:
            raise
        raise TrainingError(str(e), round_index=k) from e
    except (ArenaError, ValueError, FloatingPointError) as e:
        raise TrainingError(f"{type(e).__name__}: {e}", round_index=k) from e

    record = RoundRecord(
        k=k,
        policy=policy,
        classifier=fk,
        weights=weights,
        dataset_digest=dataset_digest(replaced),
        pair_stats=stats,
        dpo_losses=losses,
    )
    log.info("round_done round=%d pairs=%d ties=%d chosen_mean=%.4f rejected_mean=%.4f", k, stats.pairs, stats.ties, stats.chosen_mean, stats.rejected_mean)
    return record, pairs


# ---- persistence ----


def save_round(run: str | Path, record: RoundRecord, config: ArenaConfig, pairs: Sequence[PreferencePair] = ()) -> Path:
    d = paths.round_dir(run, record.k)
    checkpoint_store.save_policy(d / checkpoint_store.POLICY_FILE, record.policy)
    checkpoint_store.save_classifier(d / checkpoint_store.CLASSIFIER_FILE, record.classifier)
    checkpoint_store.save_weights(d / checkpoint_store.WEIGHTS_FILE, config.strategy, config.alpha, record.weights)
    write_table(d / "pairs.csv", [p.to_row() for p in pairs], columns=PAIR_COLUMNS)
    save_json(str(d / "round.json"), {
        "round": record.k,
        "dataset_digest": record.dataset_digest,
        "pair_stats": record.pair_stats.to_dict() if record.pair_stats else None,
        "dpo_losses": list(record.dpo_losses),
    })
    return d


def load_round(run: str | Path, k: int) -> RoundRecord:
    d = Path(run) / f"round_{int(k):02d}"
    meta = load_json(str(d / "round.json"), default=None)
    if not isinstance(meta, dict):
        raise TrainingError(f"no persisted artifacts under {d}", round_index=k)
    stats = meta.get("pair_stats")
    return RoundRecord(
        k=k,
        policy=checkpoint_store.load_policy(d / checkpoint_store.POLICY_FILE),
        classifier=checkpoint_store.load_classifier(d / checkpoint_store.CLASSIFIER_FILE),
        weights=[float(w) for w in checkpoint_store.load_weights(d / checkpoint_store.WEIGHTS_FILE)["weights"]],
        dataset_digest=str(meta.get("dataset_digest", "")),
        pair_stats=PairStats(**stats) if stats else None,
        dpo_losses=[float(x) for x in meta.get("dpo_losses", [])],
    )


def load_artifacts(run: str | Path, config: ArenaConfig) -> RoundArtifacts:
    run = Path(run)
    ks = sorted(int(p.name.split("_")[1]) for p in run.glob("round_*") if (p / "round.json").exists())
    arts = RoundArtifacts(config=config, rounds=[load_round(run, k) for k in ks])
    arts.validate_basic()
    return arts


def replay_round(setup: ArenaSetup, config: ArenaConfig, run: str | Path, k: int) -> RoundRecord:
    """Recompute round k from the persisted rounds 0..k-1."""
    if k < 1:
        raise ValueError("replay_round: k must be >= 1")
    earlier = [load_round(run, j) for j in range(k)]
    record, _ = run_round(setup, config, k, earlier[-1].policy, [r.classifier for r in earlier])
    return record


# ---- the loop ----


def run_adversarial(
    config: ArenaConfig,
    dataset: Dataset,
    out_dir: Optional[str | Path] = None,
    schema: Optional[FeatureSchema] = None,
    setup: Optional[ArenaSetup] = None,
) -> RoundArtifacts:
    config.validate_basic()
    eff = config.effective()
    setup = setup or prepare(dataset, eff, schema)
    if not setup.train_bots:
        raise TrainingError("training split has no bots to generate for")

    record = initial_round(setup, eff)
    artifacts = RoundArtifacts(config=eff, rounds=[record])
    if out_dir is not None:
        save_round(out_dir, record, eff)
    for k in range(1, eff.rounds + 1):
        record, pairs = run_round(setup, eff, k, artifacts.rounds[-1].policy, artifacts.classifiers)
        artifacts.rounds.append(record)
        if out_dir is not None:
            save_round(out_dir, record, eff, pairs)
    artifacts.validate_basic()
    log.info("arena_done rounds=%d ablation=%s strategy=%s", eff.rounds, eff.ablation, eff.strategy)
    return artifacts


# ---- evaluation ----


def detector_at(artifacts: RoundArtifacts, i: int, row_mode: str = ROW_MODE_ENSEMBLE) -> EnsembleDetector:
    """F^i (ensemble through round i) or the bare f^i."""
    cfg = artifacts.config
    if row_mode == ROW_MODE_BARE:
        return detector_service.build_ensemble([artifacts.classifiers[i]], cfg.strategy, cfg.alpha)
    if row_mode != ROW_MODE_ENSEMBLE:
        raise ValueError(f"detector_at: unknown row mode {row_mode!r}")
    return detector_service.build_ensemble(artifacts.classifiers[: i + 1], cfg.strategy, cfg.alpha)


def column_dataset(setup: ArenaSetup, artifacts: RoundArtifacts, j: int, seed: int) -> Dataset:
    """Bots replaced by pi^j outputs; one fixed seed per column."""
    return replace_bot_tweets(
        setup.dataset, artifacts.policies[j], setup.contexts, derive_seed(seed, "eval", j), artifacts.config.generation
    )


def eval_matrix(
    artifacts: RoundArtifacts,
    setup: ArenaSetup,
    row_mode: Optional[str] = None,
    side: Optional[str] = None,
    seed: Optional[int] = None,
) -> EvalMatrix:
    """Cell (i, j): detector i on the test split of the data whose bots speak with pi^j."""
    cfg = artifacts.config
    row_mode = row_mode or cfg.row_mode
    side = side or cfg.f1_side
    seed = cfg.seed if seed is None else seed
    size = len(artifacts.rounds)
    f1 = np.zeros((size, size), dtype=np.float64)
    acc = np.zeros((size, size), dtype=np.float64)
    digests: List[str] = []
    detectors = [detector_at(artifacts, i, row_mode) for i in range(size)]
    for j in range(size):
        data_j = column_dataset(setup, artifacts, j, seed)
        digests.append(dataset_digest(data_j))
        for i, det in enumerate(detectors):
            probs = detector_service.ensemble_probability(det, data_j)
            rep = detector_service.evaluate(probs, data_j, setup.split.test, side=side)
            f1[i, j] = rep.f1
            acc[i, j] = rep.accuracy
            log.debug("eval_cell detector=%d policy=%d f1=%.4f acc=%.4f", i, j, rep.f1, rep.accuracy)
    return EvalMatrix(row_mode=row_mode, f1=f1, accuracy=acc, column_digests=digests)


def save_eval_matrix(path: str | Path, matrix: EvalMatrix) -> Path:
    return write_table(path, matrix.to_rows(), columns=MATRIX_COLUMNS)


# ---- cross-community ----


Trainer = Callable[[Dataset, Split, FeatureSchema, int], Tuple[EnsembleDetector, RgcnClassifier]]


def base_trainer(hyper=None) -> Trainer:
    """Trains one classifier and uses it as both the final and the base detector."""

    def train(dataset: Dataset, split: Split, schema: FeatureSchema, seed: int):
        f0 = detector_service.train_classifier(dataset, split, hyper, seed=seed, schema=schema)
        ens = detector_service.build_ensemble([f0], WEIGHT_UNIFORM)
        return ens, f0

    return train


def arena_trainer(config: ArenaConfig) -> Trainer:
    """Runs the adversarial loop per community; returns (F^K, f^0)."""

    def train(dataset: Dataset, split: Split, schema: FeatureSchema, seed: int):
        cfg = replace(config, seed=seed)
        setup = ArenaSetup(
            dataset=dataset,
            split=split,
            contexts=policy_service.context_vectors(dataset, dataset.user_ids),
            train_bots=[dataset.users[i].id for i in split.train if dataset.users[i].is_bot],
            train_humans=[dataset.users[i].id for i in split.train if not dataset.users[i].is_bot],
            schema=schema,
        )
        arts = run_adversarial(cfg, dataset, schema=schema, setup=setup)
        return detector_at(arts, len(arts.rounds) - 1), arts.classifiers[0]

    return train


def cross_community_generalization(
    communities: Dict[int, Dataset],
    trainer: Trainer,
    seed: int = 0,
    side: str = F1_SIDE_BOT,
) -> GeneralizationMatrix:
    """
    Train on each community, test on every community's test split. Categorical
    domains are shared across communities; numeric statistics come from the
    training community.
    """
    if len(communities) < 2:
        raise ValueError("cross_community_generalization: need at least 2 communities")
    ids = sorted(communities)
    all_users = [u for c in ids for u in communities[c].users]
    domains = categorical_domains(all_users)
    splits = {c: community_service.split_dataset(communities[c], seed=derive_seed(seed, "split", c)) for c in ids}

    n = len(ids)
    final_f1 = np.zeros((n, n), dtype=np.float64)
    base_f1 = np.zeros((n, n), dtype=np.float64)
    for a, ca in enumerate(ids):
        ds_a = communities[ca]
        schema = replace(Featurizer().fit(ds_a, splits[ca].train), categorical_domains=domains)
        final, base = trainer(ds_a, splits[ca], schema, derive_seed(seed, "community", ca))
        base_ens = detector_service.build_ensemble([base], WEIGHT_UNIFORM)
        for b, cb in enumerate(ids):
            ds_b = communities[cb]
            test = splits[cb].test
            final_f1[a, b] = detector_service.evaluate(detector_service.ensemble_probability(final, ds_b), ds_b, test, side=side).f1
            base_f1[a, b] = detector_service.evaluate(detector_service.ensemble_probability(base_ens, ds_b), ds_b, test, side=side).f1
        log.info("community_trained community=%d diag_f1=%.4f", ca, final_f1[a, a])
    return GeneralizationMatrix(community_ids=ids, final_f1=final_f1, base_f1=base_f1)


# ---- diversity across policy versions ----


def diversity_report(
    artifacts: RoundArtifacts,
    setup: ArenaSetup,
    bot_ids: Optional[Sequence[str]] = None,
    seed: int = 0,
) -> Tuple[List[dict], dict]:
    """
    Dist-1/2/3 and unigram entropy of each policy version's outputs on the
    same bots, plus a paired Wilcoxon test (first vs last version) over
    per-bot Dist-1 with Cohen's d.
    """
    bots = list(bot_ids) if bot_ids is not None else [setup.dataset.users[i].id for i in setup.dataset.bot_indices()]
    if not bots:
        raise ValueError("diversity_report: no bots")
    per_version: List[List[List[str]]] = []
    rows: List[dict] = []
    for j, policy in enumerate(artifacts.policies):
        outputs = [
            policy_service.generate_texts(policy, setup.contexts[b], artifacts.config.generation, seed=derive_seed(seed, "diversity", j, b))
            for b in bots
        ]
        per_version.append(outputs)
        corpus = [t for texts in outputs for t in texts]
        row = {"policy": j, "entropy": metrics_service.shannon_entropy(corpus)}
        for n in (1, 2, 3):
            row[f"dist_{n}"] = metrics_service.dist_n(corpus, n)
        style = metrics_service.stylistic_usage(corpus).to_dict()
        rows.append({**row, **style})

    def _bot_dist(texts: List[str]) -> float:
        return metrics_service.dist_n(texts, 1) if sum(len(t.split()) for t in texts) >= 1 else 0.0

    first = [_bot_dist(t) for t in per_version[0]]
    last = [_bot_dist(t) for t in per_version[-1]]
    test: dict = {"n_bots": len(bots)}
    try:
        res = metrics_service.wilcoxon_signed_rank(last, first)
        test.update(res.to_dict())
    except ValueError as e:
        log.warning("diversity_test_skipped reason=%s", e)
    if len(bots) >= 2:
        test["cohens_d"] = metrics_service.cohens_d(last, first)
    return rows, test
