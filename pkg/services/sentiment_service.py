"""
Lexicon sentiment in [-1, 1]: mean valence of matched terms, a term's sign
flipped when a negator occurs within the preceding `window` tokens.
"""
from __future__ import annotations

import re
from typing import Callable, Dict, List, Optional

import numpy as np

from config import settings
from datasources import assets
from domain.corpus import Dataset


SentimentFn = Callable[[str], float]

_TOKEN = re.compile(r"[a-z]+")


def tokens(text: str) -> List[str]:
    return _TOKEN.findall((text or "").lower())


def sentiment_score(text: str, lexicon: Optional[Dict] = None, window: int = settings.NEGATION_WINDOW) -> float:
    lex = lexicon or assets.load_lexicon()
    negators, valence = lex["negators"], lex["valence"]
    toks = tokens(text)
    total = 0.0
    matched = 0
    for i, tok in enumerate(toks):
        v = valence.get(tok)
        if v is None:
            continue
        if any(t in negators for t in toks[max(0, i - window):i]):
            v = -v
        total += float(v)
        matched += 1
    if matched == 0:
        return 0.0
    return float(np.clip(total / matched, -1.0, 1.0))


class LexiconScorer:
    def __init__(self, lexicon: Optional[Dict] = None, window: int = settings.NEGATION_WINDOW):
        self.lexicon = lexicon or assets.load_lexicon()
        self.window = window

    def __call__(self, text: str) -> float:
        return sentiment_score(text, self.lexicon, self.window)


def user_opinions(dataset: Dataset, scorer: Optional[SentimentFn] = None) -> np.ndarray:
    """Mean tweet sentiment per user (0 for users without tweets)."""
    scorer = scorer or LexiconScorer()
    out = np.zeros(len(dataset.users), dtype=np.float64)
    for i, u in enumerate(dataset.users):
        if u.tweets:
            out[i] = float(np.mean([scorer(t.text) for t in u.tweets]))
    return out
