"""
Classification, diversity, style and significance metrics.

Significance tests use exact enumeration for small samples and a normal
approximation (tie-corrected, with continuity correction) otherwise.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from itertools import combinations, product
from typing import Iterable, List, Sequence

import numpy as np
from scipy import stats
from sklearn.metrics import confusion_matrix

from config.constants import F1_SIDE_BOT, F1_SIDE_HUMAN
from domain.metrics import ClassificationReport, ConfusionCounts, StyleStats, TestResult


EXACT_MAX_TOTAL = 12
_P_TOL = 1e-9

_EMOJI = re.compile(
    "["
    "\U0001F300-\U0001F5FF"
    "\U0001F600-\U0001F64F"
    "\U0001F680-\U0001F6FF"
    "\U0001F700-\U0001F77F"
    "\U0001F900-\U0001F9FF"
    "\U0001FA70-\U0001FAFF"
    "\U00002600-\U000026FF"
    "\U00002700-\U000027BF"
    "\U0001F1E6-\U0001F1FF"
    "]"
)
_HASHTAG = re.compile(r"#\w")
_MENTION = re.compile(r"@\w")
_STRIP = {
    "emoji": re.compile(_EMOJI.pattern + "+"),
    "hashtag": re.compile(r"#\w+"),
    "mention": re.compile(r"@\w+"),
}


# ---- classification ----


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2.0 * tp / denom


def classification_metrics(
    pred_probs: Sequence[float], labels: Sequence[int], threshold: float = 0.5, side: str = F1_SIDE_HUMAN
) -> ClassificationReport:
    """labels: 1 = human, 0 = bot; predict human when p >= threshold."""
    probs = np.asarray(pred_probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if probs.size == 0:
        raise ValueError("classification_metrics: empty input")
    if probs.shape != y.shape:
        raise ValueError(f"classification_metrics: {probs.shape} predictions vs {y.shape} labels")
    if side not in (F1_SIDE_HUMAN, F1_SIDE_BOT):
        raise ValueError(f"classification_metrics: unknown F1 side {side!r}")
    pred = (probs >= threshold).astype(np.int64)
    tn, fp, fn, tp = (int(x) for x in confusion_matrix(y, pred, labels=[0, 1]).ravel())
    counts = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
    f1_h = _f1(tp, fp, fn)
    f1_b = _f1(tn, fn, fp)
    return ClassificationReport(
        accuracy=(tp + tn) / counts.total,
        f1=f1_h if side == F1_SIDE_HUMAN else f1_b,
        f1_human=f1_h,
        f1_bot=f1_b,
        counts=counts,
    )


# ---- diversity ----


def _tokens(texts: Iterable[str]) -> List[str]:
    return " ".join(texts).split()


def dist_n(texts: Sequence[str], n: int) -> float:
    """Distinct n-grams / total n-grams over the concatenated, whitespace-split corpus."""
    if n < 1:
        raise ValueError("dist_n: n must be >= 1")
    toks = _tokens(texts)
    if len(toks) < n:
        raise ValueError(f"dist_n: corpus has {len(toks)} tokens, fewer than n={n}")
    grams = [tuple(toks[i:i + n]) for i in range(len(toks) - n + 1)]
    return len(set(grams)) / len(grams)


def shannon_entropy(texts: Sequence[str]) -> float:
    """Unigram entropy in bits."""
    counts = Counter(_tokens(texts))
    if not counts:
        raise ValueError("shannon_entropy: empty corpus")
    return float(stats.entropy(np.array(list(counts.values()), dtype=np.float64), base=2))


# ---- style ----


def stylistic_usage(texts: Sequence[str]) -> StyleStats:
    if not texts:
        return StyleStats(0.0, 0.0, 0.0, 0.0, 0.0)
    n = float(len(texts))
    return StyleStats(
        emoji_rate=sum(1 for t in texts if _EMOJI.search(t)) / n,
        hashtag_rate=sum(1 for t in texts if _HASHTAG.search(t)) / n,
        mention_rate=sum(1 for t in texts if _MENTION.search(t)) / n,
        mean_chars=sum(len(t) for t in texts) / n,
        mean_words=sum(len(t.split()) for t in texts) / n,
    )


def strip_markers(text: str, kinds: Sequence[str] = ("emoji", "hashtag", "mention")) -> str:
    """Remove emoji / hashtag / mention markers and collapse whitespace."""
    for kind in kinds:
        if kind not in _STRIP:
            raise ValueError(f"strip_markers: unknown marker kind {kind!r}")
        text = _STRIP[kind].sub(" ", text)
    return " ".join(text.split())


# ---- significance ----


def _tie_term(values: np.ndarray) -> float:
    _, t = np.unique(values, return_counts=True)
    return float(np.sum(t.astype(np.float64) ** 3 - t))


def _normal_two_sided(deviation: float, sigma: float) -> float:
    if sigma <= 0.0:
        return 1.0
    z = max(0.0, abs(deviation) - 0.5) / sigma
    return float(min(1.0, 2.0 * stats.norm.sf(z)))


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """U of the first sample with average ranks for ties; two-sided p."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    n1, n2 = x.size, y.size
    if n1 == 0 or n2 == 0:
        raise ValueError("mann_whitney_u: empty sample")
    pooled = np.concatenate([x, y])
    ranks = stats.rankdata(pooled)
    offset = n1 * (n1 + 1) / 2.0
    u = float(ranks[:n1].sum() - offset)
    center = n1 * n2 / 2.0

    if n1 + n2 <= EXACT_MAX_TOTAL:
        observed = abs(u - center)
        hits = 0
        total = 0
        for comb in combinations(range(n1 + n2), n1):
            total += 1
            if abs(float(ranks[list(comb)].sum()) - offset - center) >= observed - _P_TOL:
                hits += 1
        return TestResult(statistic=u, p_value=hits / total, exact=True)

    n = n1 + n2
    var = n1 * n2 / 12.0 * ((n + 1) - _tie_term(pooled) / (n * (n - 1)))
    return TestResult(statistic=u, p_value=_normal_two_sided(u - center, math.sqrt(max(var, 0.0))), exact=False)


def wilcoxon_signed_rank(paired_a: Sequence[float], paired_b: Sequence[float]) -> TestResult:
    """W+ over non-zero differences (zeros dropped); two-sided p."""
    a = np.asarray(paired_a, dtype=np.float64)
    b = np.asarray(paired_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("wilcoxon_signed_rank: samples must be paired")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise ValueError("wilcoxon_signed_rank: all differences are zero")
    ranks = stats.rankdata(np.abs(d))
    w = float(ranks[d > 0].sum())
    center = float(ranks.sum()) / 2.0

    if n <= EXACT_MAX_TOTAL:
        observed = abs(w - center)
        hits = 0
        for signs in product((0, 1), repeat=n):
            if abs(float(np.dot(signs, ranks)) - center) >= observed - _P_TOL:
                hits += 1
        return TestResult(statistic=w, p_value=hits / 2 ** n, exact=True)

    sigma = math.sqrt(float(np.sum(ranks ** 2)) / 4.0)
    return TestResult(statistic=w, p_value=_normal_two_sided(w - center, sigma), exact=False)


def cohens_d(paired_a: Sequence[float], paired_b: Sequence[float]) -> float:
    """Effect size of paired differences: mean(d) / sd(d)."""
    d = np.asarray(paired_a, dtype=np.float64) - np.asarray(paired_b, dtype=np.float64)
    if d.size < 2:
        raise ValueError("cohens_d: need at least 2 pairs")
    sd = float(np.std(d, ddof=1))
    m = float(np.mean(d))
    if sd == 0.0:
        return 0.0 if m == 0.0 else math.copysign(math.inf, m)
    return m / sd


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    res = stats.pearsonr(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    return float(res.statistic)
