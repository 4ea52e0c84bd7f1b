"""
The toy generator policy: vocabulary, context encoding, exact sequence
log-probabilities, pretraining / SFT / DPO and ancestral sampling.

Per token: s = tanh(x W_ctx + b_ctx); z = tanh([s, E[prev]] W_mix + b_mix);
logits = z W_out + b_out. A response log-prob is the sum over its tweets of
the per-token log-softmax values picked at the target tokens.
"""
from __future__ import annotations

from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.special import log_softmax as _log_softmax

from config import settings
from config.constants import TOKEN_EOT
from domain.corpus import Dataset
from domain.errors import TrainingError
from domain.policy import Candidate, GenerationParams, PolicyModel, PreferencePair, Response, SftExample, policy_param_shapes
from services import feature_service, summary_service
from utils import autodiff as ad
from utils.autodiff import Tensor
from utils.logger import get_logger
from utils.optim import AdamState, adam_step
from utils.rng import substream


log = get_logger(__name__)

EOT_ID = 0


# ---- vocabulary / text ----


def tokenize(text: str) -> List[str]:
    return text.split()


def build_vocabulary(texts: Sequence[str], max_size: int = settings.POLICY_VOCAB_MAX) -> List[str]:
    """End marker first, then the most frequent tokens (ties by token)."""
    if max_size < 2:
        raise ValueError("build_vocabulary: max_size must leave room for at least one word")
    counts = Counter(tok for t in texts for tok in tokenize(t))
    counts.pop(TOKEN_EOT, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [TOKEN_EOT] + [tok for tok, _ in ranked[: max_size - 1]]


def encode_tweet(model: PolicyModel, text: str) -> List[int]:
    """Token ids of a tweet; out-of-vocabulary tokens are dropped, length capped at max_tokens."""
    index = {tok: i for i, tok in enumerate(model.vocab)}
    ids = [index[tok] for tok in tokenize(text) if tok in index and index[tok] != EOT_ID]
    return ids[: model.max_tokens]


def decode_tweet(model: PolicyModel, ids: Sequence[int]) -> str:
    return " ".join(model.vocab[i] for i in ids if i != EOT_ID)


def context_vector(
    dataset: Dataset,
    user_id: str,
    dim: int = settings.EMBED_DIM,
    summarizer: Optional[summary_service.Summarizer] = None,
) -> np.ndarray:
    """Encoded (S_v, S_N): hashed embeddings of the two summaries, concatenated."""
    s_v, s_n = summary_service.user_context(dataset, user_id, summarizer)
    return np.concatenate([feature_service.embed_text(s_v, dim), feature_service.embed_text(s_n, dim)])


def context_vectors(
    dataset: Dataset,
    user_ids: Sequence[str],
    dim: int = settings.EMBED_DIM,
    summarizer: Optional[summary_service.Summarizer] = None,
) -> Dict[str, np.ndarray]:
    return {uid: context_vector(dataset, uid, dim, summarizer) for uid in user_ids}


# ---- parameters ----


def init_policy(
    vocab: Sequence[str],
    context_dim: int,
    seed: int,
    hidden: int = settings.POLICY_HIDDEN,
    token_dim: int = settings.POLICY_TOKEN_DIM,
    max_tokens: int = settings.POLICY_MAX_TOKENS,
    tweets_per_response: int = settings.TWEETS_PER_RESPONSE,
) -> PolicyModel:
    rng = substream(seed, "policy-init")
    params: Dict[str, np.ndarray] = {}
    for name, shape in policy_param_shapes(len(vocab), context_dim, hidden, token_dim).items():
        if len(shape) == 1:
            params[name] = np.zeros(shape, dtype=np.float64)
        elif name == "tok_emb":
            params[name] = rng.normal(0.0, 0.1, size=shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
    model = PolicyModel(
        vocab=list(vocab),
        context_dim=context_dim,
        hidden=hidden,
        token_dim=token_dim,
        max_tokens=max_tokens,
        tweets_per_response=tweets_per_response,
        params=params,
    )
    model.validate_basic()
    return model


def policy_tensors(model: PolicyModel) -> Dict[str, Tensor]:
    """Trainable views sharing memory with model.params."""
    out = {}
    for k, v in model.params.items():
        t = ad.Tensor(v, requires_grad=True, name=k)
        t.data = v
        out[k] = t
    return out


def _frozen_tensors(model: PolicyModel) -> Dict[str, Tensor]:
    return {k: ad.constant(v) for k, v in model.params.items()}


# ---- batches ----


class TokenBatch:
    """
    Flattened positions of a set of responses.

    ctx_row[i], prev[i], target[i] describe position i; `segments` sums
    per-position log-probs into per-response totals. Forced end markers at
    position max_tokens are left out of the sums.
    """

    def __init__(self, model: PolicyModel, contexts: np.ndarray, responses: Sequence[Tuple[int, Response]]):
        ctx_row: List[int] = []
        prev: List[int] = []
        target: List[int] = []
        seg_rows: List[int] = []
        seg_cols: List[int] = []
        for r, (c, tweets) in enumerate(responses):
            for ids in tweets:
                ids = list(ids)[: model.max_tokens]
                inputs = [model.bos_index] + ids
                outputs = ids + [EOT_ID]
                for t, (a, b) in enumerate(zip(inputs, outputs)):
                    if t < model.max_tokens:
                        seg_rows.append(r)
                        seg_cols.append(len(target))
                    ctx_row.append(c)
                    prev.append(a)
                    target.append(b)
        self.contexts = np.asarray(contexts, dtype=np.float64)
        self.ctx_row = np.asarray(ctx_row, dtype=np.int64)
        self.prev = np.asarray(prev, dtype=np.int64)
        self.target = np.asarray(target, dtype=np.int64)
        self.n_responses = len(responses)
        self.segments = sparse.csr_matrix(
            (np.ones(len(seg_rows), dtype=np.float64), (seg_rows, seg_cols)),
            shape=(self.n_responses, len(target)),
        )

    @property
    def n_positions(self) -> int:
        return int(self.target.size)


def response_logps_graph(p: Dict[str, Tensor], batch: TokenBatch) -> Tensor:
    """(R, 1) tensor of response log-probabilities."""
    s = ad.tanh(ad.add(ad.matmul(ad.constant(batch.contexts), p["ctx_w"]), p["ctx_b"]))
    s_rows = ad.take_rows(s, batch.ctx_row)
    e_rows = ad.take_rows(p["tok_emb"], batch.prev)
    z = ad.tanh(ad.add(ad.matmul(ad.concat([s_rows, e_rows], axis=1), p["mix_w"]), p["mix_b"]))
    logits = ad.add(ad.matmul(z, p["out_w"]), p["out_b"])
    picked = ad.pick(ad.log_softmax(logits), batch.target)
    return ad.spmm(batch.segments, ad.reshape(picked, (batch.n_positions, 1)))


def sequence_logprob(model: PolicyModel, context: np.ndarray, response: Response) -> float:
    batch = TokenBatch(model, np.asarray(context, dtype=np.float64).reshape(1, -1), [(0, response)])
    with ad.no_grad():
        return float(response_logps_graph(_frozen_tensors(model), batch).data[0, 0])


def _examples_batch(model: PolicyModel, examples: Sequence[SftExample]) -> TokenBatch:
    contexts = np.stack([ex.context for ex in examples])
    return TokenBatch(model, contexts, [(i, ex.response) for i, ex in enumerate(examples)])


def nll_graph(p: Dict[str, Tensor], batch: TokenBatch) -> Tensor:
    """Mean negative log-likelihood per response."""
    return ad.neg(ad.mean(response_logps_graph(p, batch)))


def mean_nll(model: PolicyModel, examples: Sequence[SftExample]) -> float:
    if not examples:
        raise ValueError("mean_nll: no examples")
    with ad.no_grad():
        return nll_graph(_frozen_tensors(model), _examples_batch(model, examples)).item()


# ---- pretraining / SFT ----


def _fit_nll(
    model: PolicyModel, examples: Sequence[SftExample], epochs: int, lr: float, batch_size: int, seed: int, stage: str
) -> PolicyModel:
    p = policy_tensors(model)
    names = list(p)
    tensors = [p[k] for k in names]
    state = AdamState(lr=lr)
    n = len(examples)
    for epoch in range(epochs):
        order = substream(seed, stage, epoch).permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            chunk = [examples[int(i)] for i in order[lo:lo + batch_size]]
            loss = nll_graph(p, _examples_batch(model, chunk))
            for t in tensors:
                t.zero_grad()
            ad.backward(loss)
            adam_step(tensors, [t.grad for t in tensors], state)
            total += loss.item() * len(chunk)
        log.debug("%s_epoch epoch=%d nll=%.6f", stage, epoch, total / n)
    for k in names:
        model.params[k] = p[k].data
    return model


def pretrain_examples(model: PolicyModel, dataset: Dataset, user_ids: Sequence[str], contexts: Dict[str, np.ndarray]) -> List[SftExample]:
    """One single-tweet example per tweet of every listed user."""
    out: List[SftExample] = []
    for uid in user_ids:
        for tw in dataset.user(uid).tweets[-settings.TWEET_CAP:]:
            out.append(SftExample(user_id=uid, context=contexts[uid], response=[encode_tweet(model, tw.text)]))
    return out


def pretrain_policy(
    model: PolicyModel,
    dataset: Dataset,
    user_ids: Sequence[str],
    contexts: Dict[str, np.ndarray],
    epochs: int = settings.PRETRAIN_EPOCHS,
    seed: int = 0,
    lr: float = settings.PRETRAIN_LR,
    batch_size: int = settings.PRETRAIN_BATCH,
) -> PolicyModel:
    """Warm start on every listed account's own tweets, humans and bots alike."""
    examples = pretrain_examples(model, dataset, user_ids, contexts)
    if not examples:
        raise TrainingError("pretrain_policy: no tweets to learn from")
    _fit_nll(model, examples, epochs, lr, batch_size, seed, "pretrain")
    log.info("policy_pretrained users=%d tweets=%d epochs=%d", len(user_ids), len(examples), epochs)
    return model


def sft_examples(model: PolicyModel, dataset: Dataset, human_ids: Sequence[str], contexts: Dict[str, np.ndarray]) -> List[SftExample]:
    """The l most recent tweets of each human; users with fewer than l tweets are skipped."""
    n_tweets = model.tweets_per_response
    out: List[SftExample] = []
    skipped = 0
    for uid in human_ids:
        tweets = dataset.user(uid).tweets
        if len(tweets) < n_tweets:
            skipped += 1
            continue
        out.append(SftExample(user_id=uid, context=contexts[uid], response=[encode_tweet(model, t.text) for t in tweets[-n_tweets:]]))
    if skipped:
        log.warning("sft_skipped users=%d reason=fewer_than_%d_tweets", skipped, n_tweets)
    return out


def sft_train(
    model: PolicyModel,
    examples: Sequence[SftExample],
    epochs: int = settings.SFT_EPOCHS,
    seed: int = 0,
    lr: float = settings.SFT_LR,
    batch_size: int = settings.SFT_BATCH,
) -> PolicyModel:
    if not examples:
        raise TrainingError("sft_train: no usable human examples")
    before = mean_nll(model, examples)
    _fit_nll(model, examples, epochs, lr, batch_size, seed, "sft")
    log.info("policy_sft examples=%d epochs=%d nll_before=%.4f nll_after=%.4f", len(examples), epochs, before, mean_nll(model, examples))
    return model


# ---- sampling ----


def _step_logits(model: PolicyModel, s: np.ndarray, prev: np.ndarray) -> np.ndarray:
    prm = model.params
    z = np.tanh(np.concatenate([s, prm["tok_emb"][prev]], axis=1) @ prm["mix_w"] + prm["mix_b"])
    return z @ prm["out_w"] + prm["out_b"]


def _sampling_distribution(logits: np.ndarray, params: GenerationParams) -> np.ndarray:
    scaled = logits / params.temperature
    if 0 < params.top_k < scaled.shape[1]:
        kth = np.partition(scaled, -params.top_k, axis=1)[:, -params.top_k][:, None]
        scaled = np.where(scaled >= kth, scaled, -np.inf)
    return np.exp(_log_softmax(scaled, axis=1))


def sample_tweets(
    model: PolicyModel,
    context: np.ndarray,
    params: Optional[GenerationParams] = None,
    count: int = 1,
    seed: int = 0,
) -> List[Candidate]:
    """
    `count` candidates of l tweets each by temperature / top-k ancestral
    sampling (argmax when params.sample is False). Each candidate carries
    its untempered log-probability under the model.
    """
    params = params or GenerationParams()
    params.validate_basic()
    if count < 1:
        raise ValueError("sample_tweets: count must be >= 1")
    n_tweets = model.tweets_per_response
    n = count * n_tweets
    rng = substream(seed, "sample")
    prm = model.params
    s_one = np.tanh(np.asarray(context, dtype=np.float64).reshape(1, -1) @ prm["ctx_w"] + prm["ctx_b"])
    s = np.repeat(s_one, n, axis=0)

    prev = np.full(n, model.bos_index, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    seqs: List[List[int]] = [[] for _ in range(n)]
    logp = np.zeros(n, dtype=np.float64)
    rows = np.arange(n)
    for _ in range(model.max_tokens):
        logits = _step_logits(model, s, prev)
        lsm = _log_softmax(logits, axis=1)
        u = rng.random(n)
        if params.sample:
            cdf = np.cumsum(_sampling_distribution(logits, params), axis=1)
            nxt = np.minimum((cdf < (u * cdf[:, -1])[:, None]).sum(axis=1), model.vocab_size - 1)
        else:
            nxt = np.argmax(logits, axis=1)
        logp = logp + np.where(alive, lsm[rows, nxt], 0.0)
        for i in np.flatnonzero(alive & (nxt != EOT_ID)):
            seqs[i].append(int(nxt[i]))
        alive = alive & (nxt != EOT_ID)
        prev = nxt
        if not alive.any():
            break

    out: List[Candidate] = []
    for c in range(count):
        tweets = seqs[c * n_tweets:(c + 1) * n_tweets]
        out.append(Candidate(
            tokens=tweets,
            texts=[decode_tweet(model, ids) for ids in tweets],
            logprob=float(logp[c * n_tweets:(c + 1) * n_tweets].sum()),
        ))
    return out


def generate_texts(model: PolicyModel, context: np.ndarray, params: Optional[GenerationParams] = None, seed: int = 0) -> List[str]:
    return sample_tweets(model, context, params, count=1, seed=seed)[0].texts


# ---- DPO ----


def _pairs_batch(model: PolicyModel, pairs: Sequence[PreferencePair]) -> TokenBatch:
    """Responses ordered chosen_0, rejected_0, chosen_1, ..."""
    contexts = np.stack([pr.context for pr in pairs])
    responses: List[Tuple[int, Response]] = []
    for i, pr in enumerate(pairs):
        responses.append((i, pr.chosen))
        responses.append((i, pr.rejected))
    return TokenBatch(model, contexts, responses)


def reference_logps(ref: PolicyModel, batch: TokenBatch) -> np.ndarray:
    with ad.no_grad():
        return response_logps_graph(_frozen_tensors(ref), batch).data.copy()


def dpo_graph(p: Dict[str, Tensor], batch: TokenBatch, ref_logps: np.ndarray, beta: float) -> Tensor:
    """-mean log sigma(beta * [(lw - rw) - (ll - rl)])."""
    lp = ad.sub(response_logps_graph(p, batch), ad.constant(ref_logps))
    n = batch.n_responses // 2
    flat = ad.reshape(lp, (n, 2))
    margin = ad.reshape(ad.matmul(flat, ad.constant(np.array([[1.0], [-1.0]]))), (n,))
    return ad.neg(ad.mean(ad.log_sigmoid(ad.scale(margin, beta))))


def dpo_loss(
    model: PolicyModel, ref: PolicyModel, pairs: Sequence[PreferencePair], beta: float = settings.DPO_BETA
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Loss value and gradients w.r.t. every policy parameter."""
    if not pairs:
        raise ValueError("dpo_loss: no pairs")
    batch = _pairs_batch(model, pairs)
    p = {k: ad.parameter(v, name=k) for k, v in model.params.items()}
    loss = dpo_graph(p, batch, reference_logps(ref, batch), beta)
    value = loss.item()
    ad.backward(loss)
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in p.items()}
    return value, grads


def dpo_margin(model: PolicyModel, pairs: Sequence[PreferencePair]) -> float:
    """Mean log pi(y_w|x) - log pi(y_l|x)."""
    lp = reference_logps(model, _pairs_batch(model, pairs)).reshape(-1, 2)
    return float(np.mean(lp[:, 0] - lp[:, 1]))


def dpo_train(
    model: PolicyModel,
    pairs: Sequence[PreferencePair],
    beta: float = settings.DPO_BETA,
    epochs: int = settings.DPO_EPOCHS,
    seed: int = 0,
    lr: float = settings.DPO_LR,
    batch_size: int = settings.DPO_BATCH,
) -> Tuple[PolicyModel, List[float]]:
    """
    Adam on the DPO loss against a frozen snapshot of the incoming policy.
    Returns the trained copy and the mean loss per epoch.
    """
    if not pairs:
        raise TrainingError("dpo_train: empty pair list")
    ref = model.copy()
    out = model.copy()
    p = policy_tensors(out)
    tensors = list(p.values())
    state = AdamState(lr=lr)
    n = len(pairs)
    history: List[float] = []
    for epoch in range(epochs):
        order = substream(seed, "dpo", epoch).permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            chunk = [pairs[int(i)] for i in order[lo:lo + batch_size]]
            batch = _pairs_batch(out, chunk)
            loss = dpo_graph(p, batch, reference_logps(ref, batch), beta)
            for t in tensors:
                t.zero_grad()
            ad.backward(loss)
            adam_step(tensors, [t.grad for t in tensors], state)
            total += loss.item() * len(chunk)
        history.append(total / n)
        log.debug("dpo_epoch epoch=%d loss=%.6f", epoch, history[-1])
    for k, t in p.items():
        out.params[k] = t.data
    log.info("policy_dpo pairs=%d epochs=%d loss_first=%.4f loss_last=%.4f", n, epochs, history[0], history[-1])
    return out, history
