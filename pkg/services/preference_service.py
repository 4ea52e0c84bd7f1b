"""
Preference pairs for DPO: for each sampled bot, generate C candidate
responses, score them with the current detector ensemble and keep the most
and least human-looking ones.
"""
from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from domain.arena import PairStats
from domain.corpus import Dataset
from domain.detector import EnsembleDetector
from domain.errors import ShapeError
from domain.policy import GenerationParams, PolicyModel, PreferencePair
from services import policy_service
from services.detector_service import CandidateScorer
from utils.logger import get_logger
from utils.rng import derive_seed, substream


log = get_logger(__name__)


def draw_bots(bot_ids: Sequence[str], n: int, seed: int) -> List[str]:
    """n draws with replacement, uniform over bot_ids."""
    if not bot_ids:
        raise ShapeError("draw_bots: no bots to draw from")
    picks = substream(seed, "pair-draw").integers(0, len(bot_ids), size=n)
    return [bot_ids[int(i)] for i in picks]


def choose_pair(scores: Sequence[float]) -> Optional[Tuple[int, int]]:
    """(argmax, argmin) with the lower index winning ties; None when all scores are equal."""
    arr = np.asarray(scores, dtype=np.float64)
    best, worst = int(np.argmax(arr)), int(np.argmin(arr))
    if arr[best] == arr[worst]:
        return None
    return best, worst


def build_preference_pairs(
    policy: PolicyModel,
    ensemble: EnsembleDetector,
    dataset: Dataset,
    n_pairs: int,
    candidates: int,
    seed: int,
    contexts: Dict[str, np.ndarray],
    params: Optional[GenerationParams] = None,
    bot_ids: Optional[Sequence[str]] = None,
) -> Tuple[List[PreferencePair], PairStats]:
    """
    Pairs (y_w, y_l) where y_w has the highest ensemble human probability.
    Draw k uses the sampling seed derive_seed(seed, "pair", k). Tied draws
    are dropped and counted.
    """
    if candidates < 2:
        raise ValueError(f"build_preference_pairs: need at least 2 candidates, got {candidates}")
    if n_pairs < 1:
        raise ValueError("build_preference_pairs: n_pairs must be >= 1")
    pool = list(bot_ids) if bot_ids is not None else [dataset.users[i].id for i in dataset.bot_indices()]
    drawn = draw_bots(pool, n_pairs, seed)

    scorer = CandidateScorer(ensemble, dataset)
    pairs: List[PreferencePair] = []
    ties = 0
    for k, uid in enumerate(drawn):
        cands = policy_service.sample_tweets(policy, contexts[uid], params, count=candidates, seed=derive_seed(seed, "pair", k))
        scores = [scorer.score(uid, c.texts) for c in cands]
        chosen = choose_pair(scores)
        if chosen is None:
            ties += 1
            continue
        w, l_ = chosen
        pair = PreferencePair(
            user_id=uid,
            context=contexts[uid],
            chosen=cands[w].tokens,
            rejected=cands[l_].tokens,
            chosen_score=scores[w],
            rejected_score=scores[l_],
        )
        pair.validate_basic()
        pairs.append(pair)

    stats = PairStats(
        drawn=len(drawn),
        pairs=len(pairs),
        ties=ties,
        chosen_mean=float(np.mean([p.chosen_score for p in pairs])) if pairs else float("nan"),
        rejected_mean=float(np.mean([p.rejected_score for p in pairs])) if pairs else float("nan"),
    )
    if ties:
        log.warning("pair_ties dropped=%d drawn=%d", ties, len(drawn))
    log.info("pairs_built pairs=%d ties=%d chosen_mean=%.4f rejected_mean=%.4f", stats.pairs, ties, stats.chosen_mean, stats.rejected_mean)
    return pairs, stats
