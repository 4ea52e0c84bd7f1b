"""
Per-round RGCN classifier, its training loop, the weighted ensemble and
per-candidate scoring.

Architecture:
  four input linears (desc/tweet/numeric/categorical -> H) + LeakyReLU
  fusion linear (4H -> H) + LeakyReLU, dropout
  RGCN layer: h' = LeakyReLU(h W_self + sum_r A_r h W_r + b), dropout, second layer
  head linear (H -> H) + LeakyReLU, output linear (H -> 2)
A_r is the row-normalized adjacency of relation r: row v averages over the
accounts v points to with that relation.
"""
from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.special import softmax as _softmax

from config import settings
from config.constants import F1_SIDE_BOT, RELATIONS, WEIGHT_EXP, WEIGHT_GREEDY, WEIGHT_UNIFORM
from domain.corpus import Dataset, Split
from domain.detector import DetectorHyper, EnsembleDetector, RgcnClassifier, param_shapes
from domain.errors import ReferentialIntegrityError, ShapeError, TrainingError
from domain.features import FeatureMatrix, FeatureSchema
from services import feature_service
from services.metrics_service import classification_metrics
from utils import autodiff as ad
from utils.autodiff import Tensor
from utils.logger import get_logger
from utils.optim import AdamState, adam_step
from utils.rng import substream


log = get_logger(__name__)

GROUPS = ("desc", "tweet", "numeric", "categorical")
HUMAN_COLUMN = 1


# ---- graph ----


def build_adjacency(dataset: Dataset) -> List[sparse.csr_matrix]:
    """One mean-normalized (n, n) matrix per relation, in RELATIONS order."""
    n = len(dataset.users)
    idx = dataset.index
    out: List[sparse.csr_matrix] = []
    for rel in RELATIONS:
        pairs = sorted({(idx[e.src], idx[e.dst]) for e in dataset.edges if e.relation == rel})
        if not pairs:
            out.append(sparse.csr_matrix((n, n), dtype=np.float64))
            continue
        rows = np.array([p[0] for p in pairs], dtype=np.int64)
        cols = np.array([p[1] for p in pairs], dtype=np.int64)
        deg = np.bincount(rows, minlength=n).astype(np.float64)
        data = 1.0 / deg[rows]
        out.append(sparse.csr_matrix((data, (rows, cols)), shape=(n, n)))
    return out


# ---- parameters ----


def init_classifier(schema: FeatureSchema, hidden: int, leaky_slope: float, dropout: float, seed: int) -> RgcnClassifier:
    """Glorot-uniform weights, zero biases."""
    rng = substream(seed, "detector-init")
    params: Dict[str, np.ndarray] = {}
    for name, shape in param_shapes(schema, hidden).items():
        if len(shape) == 1:
            params[name] = np.zeros(shape, dtype=np.float64)
        else:
            fan_in, fan_out = shape
            limit = math.sqrt(6.0 / max(1, fan_in + fan_out))
            params[name] = rng.uniform(-limit, limit, size=shape)
    return RgcnClassifier(schema=schema, hidden=hidden, leaky_slope=leaky_slope, dropout=dropout, params=params)


def as_tensors(model: RgcnClassifier) -> Dict[str, Tensor]:
    return {k: ad.parameter(v, name=k) for k, v in model.params.items()}


def _check_inputs(model: RgcnClassifier, fm: FeatureMatrix, adjs: Sequence[sparse.spmatrix]) -> None:
    n = fm.n_users
    dims = model.schema.dims()
    for g in GROUPS:
        arr = getattr(fm, g)
        if arr.shape != (n, dims[g]):
            raise ShapeError(f"forward: {g} features have shape {arr.shape}, expected ({n}, {dims[g]})")
    if len(adjs) != len(RELATIONS) or any(a.shape != (n, n) for a in adjs):
        raise ShapeError(f"forward: adjacency does not cover the {n} users with features")


# ---- differentiable forward ----


def _rgcn_layer(p: Dict[str, Tensor], layer: int, h: Tensor, adjs, slope: float) -> Tensor:
    acc = ad.matmul(h, p[f"rgcn{layer}_self"])
    for r, a in enumerate(adjs):
        acc = ad.add(acc, ad.matmul(ad.spmm(a, h), p[f"rgcn{layer}_rel{r}"]))
    return ad.leaky_relu(ad.add(acc, p[f"rgcn{layer}_b"]), slope)


def logits_graph(
    p: Dict[str, Tensor],
    fm: FeatureMatrix,
    adjs: Sequence[sparse.spmatrix],
    slope: float,
    masks: Optional[Sequence[np.ndarray]] = None,
    drop: float = 0.0,
) -> Tensor:
    parts = [
        ad.leaky_relu(ad.add(ad.matmul(ad.constant(getattr(fm, g)), p[f"in_{g}_w"]), p[f"in_{g}_b"]), slope)
        for g in GROUPS
    ]
    h = ad.leaky_relu(ad.add(ad.matmul(ad.concat(parts, axis=1), p["fuse_w"]), p["fuse_b"]), slope)
    h = ad.dropout(h, masks[0] if masks else None, drop)
    h = _rgcn_layer(p, 1, h, adjs, slope)
    h = ad.dropout(h, masks[1] if masks else None, drop)
    h = _rgcn_layer(p, 2, h, adjs, slope)
    h = ad.leaky_relu(ad.add(ad.matmul(h, p["head_w"]), p["head_b"]), slope)
    return ad.add(ad.matmul(h, p["out_w"]), p["out_b"])


def cross_entropy(logits: Tensor, idx: Sequence[int], labels: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    lp = ad.log_softmax(ad.take_rows(logits, idx))
    return ad.neg(ad.mean(ad.pick(lp, labels[idx])))


def class_probabilities(model: RgcnClassifier, fm: FeatureMatrix, adjs: Sequence[sparse.spmatrix]) -> np.ndarray:
    """(n, 2) softmax output; column 1 is human."""
    _check_inputs(model, fm, adjs)
    with ad.no_grad():
        logits = logits_graph(as_tensors(model), fm, adjs, model.leaky_slope)
    return _softmax(logits.data, axis=1)


def forward(model: RgcnClassifier, fm: FeatureMatrix, adjs: Sequence[sparse.spmatrix]) -> np.ndarray:
    """Per-user probability of the human class."""
    return class_probabilities(model, fm, adjs)[:, HUMAN_COLUMN]


def predict_dataset(model: RgcnClassifier, dataset: Dataset) -> np.ndarray:
    _, fm = feature_service.build_features(dataset, schema=model.schema)
    return forward(model, fm, build_adjacency(dataset))


# ---- training ----


def _selection_f1(probs: np.ndarray, labels: np.ndarray) -> float:
    rep = classification_metrics(probs, labels)
    return 0.5 * (rep.f1_human + rep.f1_bot)


def train_classifier(
    dataset: Dataset,
    split: Split,
    hyper: Optional[DetectorHyper] = None,
    seed: int = 0,
    schema: Optional[FeatureSchema] = None,
) -> RgcnClassifier:
    """
    Full-batch cross-entropy on split.train with Adam; keeps the weights of the
    epoch with the best validation macro F1 (first one on ties).
    """
    hyper = hyper or DetectorHyper()
    labels = dataset.human_labels()
    train_idx = np.asarray(split.train, dtype=np.int64)
    if train_idx.size == 0 or len(set(labels[train_idx].tolist())) < 2:
        raise TrainingError("train_classifier: training split must contain both classes")
    val_idx = np.asarray(split.val if split.val else split.train, dtype=np.int64)

    schema, fm = feature_service.build_features(dataset, fit_indices=split.train, schema=schema)
    adjs = build_adjacency(dataset)
    model = init_classifier(schema, hyper.hidden, hyper.leaky_slope, hyper.dropout, seed)
    _check_inputs(model, fm, adjs)

    p = as_tensors(model)
    names = list(p)
    tensors = [p[k] for k in names]
    state = AdamState(lr=hyper.lr, weight_decay=hyper.weight_decay, decoupled=hyper.decoupled)
    n, h = fm.n_users, hyper.hidden

    best_f1 = -1.0
    best_params = {k: v.data.copy() for k, v in p.items()}
    best_epoch = -1
    for epoch in range(hyper.epochs):
        masks = None
        if hyper.dropout > 0:
            rng = substream(seed, "detector-dropout", epoch)
            masks = [(rng.random((n, h)) >= hyper.dropout).astype(np.float64) for _ in range(2)]
        logits = logits_graph(p, fm, adjs, hyper.leaky_slope, masks, hyper.dropout)
        loss = cross_entropy(logits, train_idx, labels)
        for t in tensors:
            t.zero_grad()
        ad.backward(loss)
        adam_step(tensors, [t.grad for t in tensors], state)

        with ad.no_grad():
            probs = _softmax(logits_graph(p, fm, adjs, hyper.leaky_slope).data, axis=1)[:, HUMAN_COLUMN]
        f1 = _selection_f1(probs[val_idx], labels[val_idx])
        if f1 > best_f1:
            best_f1, best_epoch = f1, epoch
            best_params = {k: v.data.copy() for k, v in p.items()}
        log.debug("detector_epoch epoch=%d loss=%.6f val_f1=%.4f", epoch, loss.item(), f1)

    model.params = best_params
    log.info("detector_trained epochs=%d best_epoch=%d val_f1=%.4f", hyper.epochs, best_epoch, best_f1)
    return model


def evaluate(
    probs: np.ndarray, dataset: Dataset, idx: Sequence[int], side: str = F1_SIDE_BOT, threshold: float = 0.5
):
    labels = dataset.human_labels()
    idx = np.asarray(idx, dtype=np.int64)
    return classification_metrics(probs[idx], labels[idx], threshold=threshold, side=side)


# ---- ensemble ----


def make_weights(strategy: str, k: int, alpha: float = settings.EXP_WEIGHT_ALPHA) -> List[float]:
    """Normalized weights w^0..w^k."""
    if k < 0:
        raise ValueError("make_weights: k must be >= 0")
    if strategy == WEIGHT_UNIFORM:
        raw = [1.0] * (k + 1)
    elif strategy == WEIGHT_GREEDY:
        raw = [0.0] * k + [1.0]
    elif strategy == WEIGHT_EXP:
        raw = [math.exp(-alpha * (k - j)) for j in range(k + 1)]
    else:
        raise ValueError(f"make_weights: unknown strategy {strategy!r}")
    total = sum(raw)
    return [w / total for w in raw]


def build_ensemble(members: Sequence[RgcnClassifier], strategy: str, alpha: float = settings.EXP_WEIGHT_ALPHA) -> EnsembleDetector:
    ens = EnsembleDetector(
        members=list(members), weights=make_weights(strategy, len(members) - 1, alpha), strategy=strategy, alpha=alpha
    )
    ens.validate_basic()
    return ens


def _mix(weights: Sequence[float], outputs: Sequence[np.ndarray]) -> np.ndarray:
    acc = np.zeros_like(outputs[0])
    for w, out in zip(weights, outputs):
        acc = acc + w * out
    return acc


class _MemberCache:
    """Features (shared across members with one schema) and fused input rows per member."""

    def __init__(self, ensemble: EnsembleDetector, dataset: Dataset):
        ensemble.validate_basic()
        self.ensemble = ensemble
        self.dataset = dataset
        self.adjs = build_adjacency(dataset)
        self.features: List[FeatureMatrix] = []
        by_schema: Dict[str, FeatureMatrix] = {}
        for m in ensemble.members:
            key = repr(m.schema.to_dict())
            if key not in by_schema:
                by_schema[key] = feature_service.build_features(dataset, schema=m.schema)[1]
            self.features.append(by_schema[key])
        self._fused: Dict[int, np.ndarray] = {}

    def fused(self, j: int) -> np.ndarray:
        if j not in self._fused:
            m = self.ensemble.members[j]
            self._fused[j] = _fuse_np(m, self.features[j])
        return self._fused[j]


def _leaky(x: np.ndarray, slope: float) -> np.ndarray:
    return x * np.where(x > 0, 1.0, slope)


def _fuse_np(m: RgcnClassifier, fm: FeatureMatrix, rows: Optional[Dict[str, np.ndarray]] = None) -> np.ndarray:
    src = rows or {g: getattr(fm, g) for g in GROUPS}
    parts = [_leaky(src[g] @ m.params[f"in_{g}_w"] + m.params[f"in_{g}_b"], m.leaky_slope) for g in GROUPS]
    return _leaky(np.concatenate(parts, axis=1) @ m.params["fuse_w"] + m.params["fuse_b"], m.leaky_slope)


def _layer_np(m: RgcnClassifier, layer: int, h_rows: np.ndarray, a_rows: Sequence[sparse.spmatrix], h_all: np.ndarray) -> np.ndarray:
    acc = h_rows @ m.params[f"rgcn{layer}_self"]
    for r, a in enumerate(a_rows):
        acc = acc + np.asarray(a @ h_all) @ m.params[f"rgcn{layer}_rel{r}"]
    return _leaky(acc + m.params[f"rgcn{layer}_b"], m.leaky_slope)


def _member_probability_at(m: RgcnClassifier, adjs: Sequence[sparse.csr_matrix], h0: np.ndarray, i: int) -> float:
    """Human probability of node i from fused rows h0, propagating only through its two-hop field."""
    near = {i}
    for a in adjs:
        near.update(int(c) for c in a[i].indices)
    s1 = np.array(sorted(near), dtype=np.int64)
    h1 = _layer_np(m, 1, h0[s1], [a[s1] for a in adjs], h0)
    pos = int(np.searchsorted(s1, i))
    h2 = _layer_np(m, 2, h1[pos:pos + 1], [a[i][:, s1] for a in adjs], h1)
    head = _leaky(h2 @ m.params["head_w"] + m.params["head_b"], m.leaky_slope)
    logits = head @ m.params["out_w"] + m.params["out_b"]
    return float(_softmax(logits, axis=1)[0, HUMAN_COLUMN])


def ensemble_probability(ensemble: EnsembleDetector, dataset: Dataset) -> np.ndarray:
    """p = sum_j w^j p_j, accumulated in member order."""
    cache = _MemberCache(ensemble, dataset)
    outs = [forward(m, cache.features[j], cache.adjs) for j, m in enumerate(ensemble.members)]
    return _mix(ensemble.weights, outs)


class CandidateScorer:
    """
    Scores replacement tweet sets for one user at a time. Only the target's
    tweet embedding changes; every other row and all edges stay as loaded.
    """

    def __init__(self, ensemble: EnsembleDetector, dataset: Dataset):
        self.cache = _MemberCache(ensemble, dataset)
        self.ensemble = ensemble
        self.dataset = dataset

    def baseline(self) -> np.ndarray:
        outs = [forward(m, self.cache.features[j], self.cache.adjs) for j, m in enumerate(self.ensemble.members)]
        return _mix(self.ensemble.weights, outs)

    def score(self, user_id: str, candidate_tweets: Sequence[str]) -> float:
        i = self.dataset.index.get(user_id)
        if i is None:
            raise ReferentialIntegrityError(user_id)
        outs: List[float] = []
        for j, m in enumerate(self.ensemble.members):
            fm = self.cache.features[j]
            tweet_row = feature_service.tweet_embedding(candidate_tweets, m.schema.embed_dim, m.schema.tweet_cap)
            rows = {g: getattr(fm, g)[i:i + 1] for g in GROUPS}
            rows["tweet"] = tweet_row.reshape(1, -1)
            h0 = self.cache.fused(j).copy()
            h0[i] = _fuse_np(m, fm, rows)[0]
            outs.append(_member_probability_at(m, self.cache.adjs, h0, i))
        acc = 0.0
        for w, o in zip(self.ensemble.weights, outs):
            acc = acc + w * o
        return float(acc)


def score_candidate(ensemble: EnsembleDetector, dataset: Dataset, user_id: str, candidate_tweets: Sequence[str]) -> float:
    return CandidateScorer(ensemble, dataset).score(user_id, candidate_tweets)


