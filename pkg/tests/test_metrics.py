from __future__ import annotations

import math
from collections import Counter
from itertools import combinations, product

import numpy as np
import pytest

from config.constants import F1_SIDE_BOT, F1_SIDE_HUMAN
from services import metrics_service as ms

N_INSTANCES = 1000


def _midranks(values):
    return [sum(1 for w in values if w < v) + (sum(1 for w in values if w == v) + 1) / 2.0 for v in values]


def _u_pairwise(x, y):
    return sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in x for b in y)


def _mwu_oracle(x, y):
    pooled = list(x) + list(y)
    n1 = len(x)
    center = n1 * len(y) / 2.0
    observed = abs(_u_pairwise(x, y) - center)
    hits = total = 0
    for idx in combinations(range(len(pooled)), n1):
        gx = [pooled[i] for i in idx]
        gy = [pooled[i] for i in range(len(pooled)) if i not in idx]
        total += 1
        hits += abs(_u_pairwise(gx, gy) - center) >= observed
    return hits / total


def _wilcoxon_oracle(a, b):
    d = [p - q for p, q in zip(a, b) if p != q]
    r = _midranks([abs(v) for v in d])
    w = sum(ri for ri, v in zip(r, d) if v > 0)
    center = sum(r) / 2.0
    hits = sum(abs(sum(ri for ri, s in zip(r, signs) if s) - center) >= abs(w - center) for signs in product((0, 1), repeat=len(d)))
    return w, hits / 2 ** len(d)


def test_f1_of_two_hits_one_miss_one_false_alarm():
    # humans are the positive class: TP=2, FP=1, FN=1, TN=1
    rep = ms.classification_metrics([0.9, 0.8, 0.7, 0.2, 0.1], [1, 1, 0, 1, 0])
    assert rep.f1_human == pytest.approx(2.0 / 3.0)
    assert rep.accuracy == pytest.approx(0.6)
    assert rep.counts.to_dict() == {"tp": 2, "fp": 1, "tn": 1, "fn": 1}


def test_threshold_is_inclusive_and_side_selects_f1():
    rep = ms.classification_metrics([0.5, 0.49], [1, 0], side=F1_SIDE_BOT)
    assert rep.accuracy == 1.0 and rep.f1 == rep.f1_bot == 1.0


def test_classification_matches_counting():
    rng = np.random.default_rng(0)
    for _ in range(N_INSTANCES):
        n = int(rng.integers(1, 9))
        probs = rng.integers(0, 5, n) / 4.0
        labels = rng.integers(0, 2, n)
        tp = sum(1 for p, y in zip(probs, labels) if p >= 0.5 and y == 1)
        fp = sum(1 for p, y in zip(probs, labels) if p >= 0.5 and y == 0)
        tn = sum(1 for p, y in zip(probs, labels) if p < 0.5 and y == 0)
        fn = n - tp - fp - tn
        rep = ms.classification_metrics(probs, labels, side=F1_SIDE_HUMAN)
        assert rep.accuracy == (tp + tn) / n
        assert rep.f1_human == (0.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn))
        assert rep.f1_bot == (0.0 if 2 * tn + fn + fp == 0 else 2 * tn / (2 * tn + fn + fp))


def test_classification_input_errors():
    with pytest.raises(ValueError):
        ms.classification_metrics([], [])
    with pytest.raises(ValueError):
        ms.classification_metrics([0.1, 0.2], [1])


def test_dist_and_entropy_match_counting():
    rng = np.random.default_rng(1)
    words = ["a", "b", "c", "d"]
    for _ in range(N_INSTANCES):
        n_texts = int(rng.integers(1, 4))
        texts = [" ".join(rng.choice(words, size=int(rng.integers(1, 4)))) for _ in range(n_texts)]
        toks = " ".join(texts).split()
        for n in (1, 2, 3):
            if len(toks) < n:
                with pytest.raises(ValueError):
                    ms.dist_n(texts, n)
                continue
            grams = [tuple(toks[i:i + n]) for i in range(len(toks) - n + 1)]
            assert ms.dist_n(texts, n) == len(set(grams)) / len(grams)
        counts = Counter(toks)
        expected = -sum(c / len(toks) * math.log2(c / len(toks)) for c in counts.values())
        assert ms.shannon_entropy(texts) == pytest.approx(expected, abs=1e-12)


def test_dist_counts_ngrams_across_tweet_boundaries():
    assert ms.dist_n(["a b", "a b"], 2) == pytest.approx(2 / 3)


def test_mann_whitney_exact_matches_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(N_INSTANCES):
        n1 = int(rng.integers(1, 5))
        n2 = int(rng.integers(1, 9 - n1))
        x = rng.integers(0, 5, n1).astype(float).tolist()
        y = rng.integers(0, 5, n2).astype(float).tolist()
        res = ms.mann_whitney_u(x, y)
        assert res.exact
        assert res.statistic == _u_pairwise(x, y)
        assert res.p_value == _mwu_oracle(x, y)


def test_mann_whitney_large_samples_use_the_normal_tail():
    x = np.arange(20, dtype=float)
    res = ms.mann_whitney_u(x, x + 30)
    assert not res.exact and res.p_value < 1e-6


def test_wilcoxon_exact_matches_enumeration():
    rng = np.random.default_rng(3)
    done = 0
    while done < N_INSTANCES:
        n = int(rng.integers(1, 9))
        a = rng.integers(0, 4, n).astype(float).tolist()
        b = rng.integers(0, 4, n).astype(float).tolist()
        if all(p == q for p, q in zip(a, b)):
            with pytest.raises(ValueError):
                ms.wilcoxon_signed_rank(a, b)
            continue
        w, p = _wilcoxon_oracle(a, b)
        res = ms.wilcoxon_signed_rank(a, b)
        assert res.exact and res.statistic == w and res.p_value == p
        done += 1


def test_cohens_d():
    assert ms.cohens_d([2.0, 3.0, 4.0], [1.0, 1.0, 1.0]) == pytest.approx(2.0)
    assert ms.cohens_d([1.0, 2.0], [1.0, 2.0]) == 0.0
    with pytest.raises(ValueError):
        ms.cohens_d([1.0], [0.0])


def test_style_rates_and_marker_stripping():
    texts = ["hi #covid @bob", "plain text", "wow \U0001F600"]
    style = ms.stylistic_usage(texts)
    assert (style.hashtag_rate, style.mention_rate, style.emoji_rate) == (pytest.approx(1 / 3),) * 3
    assert ms.strip_markers("hi #covid @bob \U0001F600\U0001F600 there") == "hi there"
    assert ms.strip_markers("hi #covid", ["mention"]) == "hi #covid"
    with pytest.raises(ValueError):
        ms.strip_markers("x", ["links"])


def test_pearson_of_a_line():
    assert ms.pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
