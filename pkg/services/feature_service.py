"""
User featurization for the detector and the policy context.

embed_text: hashed word uni/bigrams, signed buckets, L2 norm.
Numeric properties are z-scored with population statistics of the fitting
users; categorical properties are one-hot encoded over declared domains.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Dict, List, Optional, Sequence

import numpy as np
from sklearn.feature_extraction.text import HashingVectorizer
from sklearn.preprocessing import OneHotEncoder, StandardScaler

from config import settings
from domain.corpus import Dataset, UserRecord
from domain.errors import SchemaError
from domain.features import FeatureMatrix, FeatureSchema


@lru_cache(maxsize=8)
def _vectorizer(dim: int) -> HashingVectorizer:
    return HashingVectorizer(
        n_features=int(dim),
        ngram_range=(1, 2),
        alternate_sign=True,
        norm="l2",
        lowercase=True,
        token_pattern=r"(?u)\b\w+\b",
    )


def embed_texts(texts: Sequence[str], dim: int = settings.EMBED_DIM) -> np.ndarray:
    if not texts:
        return np.zeros((0, dim), dtype=np.float64)
    return np.asarray(_vectorizer(dim).transform(list(texts)).toarray(), dtype=np.float64)


def embed_text(text: str, dim: int = settings.EMBED_DIM) -> np.ndarray:
    """Deterministic hashing embedding; zero vector for text without tokens."""
    return embed_texts([text or ""], dim)[0]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def tweet_embedding(texts: Sequence[str], dim: int = settings.EMBED_DIM, cap: int = settings.TWEET_CAP) -> np.ndarray:
    """Mean over the `cap` most recent tweet embeddings (texts ordered oldest first)."""
    recent = list(texts)[-cap:] if cap > 0 else list(texts)
    if not recent:
        return np.zeros(dim, dtype=np.float64)
    return embed_texts(recent, dim).mean(axis=0)


# ---- numeric ----


def _numeric_names(users: Sequence[UserRecord]) -> List[str]:
    return sorted({k for u in users for k in u.numeric_props})


def _numeric_table(users: Sequence[UserRecord], names: Sequence[str]) -> np.ndarray:
    out = np.zeros((len(users), len(names)), dtype=np.float64)
    for i, u in enumerate(users):
        for j, name in enumerate(names):
            if name not in u.numeric_props:
                raise SchemaError(f"numeric property {name!r} missing for user {u.id!r}")
            out[i, j] = float(u.numeric_props[name])
    return out


def normalize_numeric(
    all_users: Sequence[UserRecord], names: Optional[Sequence[str]] = None
) -> Dict[str, np.ndarray]:
    """Per-property z-score over `all_users`; zero-variance properties map to 0."""
    if len(all_users) < 2:
        raise ValueError("normalize_numeric: need at least 2 users")
    names = list(names) if names is not None else _numeric_names(all_users)
    table = _numeric_table(all_users, names)
    z = StandardScaler().fit_transform(table) if names else table
    return {u.id: z[i] for i, u in enumerate(all_users)}


# ---- categorical ----


def categorical_domains(users: Sequence[UserRecord]) -> Dict[str, List[str]]:
    props = sorted({k for u in users for k in u.categorical_props})
    return {p: sorted({u.categorical_props[p] for u in users if p in u.categorical_props}) for p in props}


def _check_categories(users: Sequence[UserRecord], domains: Dict[str, List[str]]) -> None:
    for u in users:
        for prop, domain in domains.items():
            value = u.categorical_props.get(prop)
            if value is None:
                raise SchemaError(f"categorical property {prop!r} missing for user {u.id!r}")
            if value not in domain:
                raise SchemaError(f"categorical property {prop!r}: unseen value {value!r} for user {u.id!r}")


def _one_hot(users: Sequence[UserRecord], domains: Dict[str, List[str]]) -> np.ndarray:
    if not domains:
        return np.zeros((len(users), 0), dtype=np.float64)
    _check_categories(users, domains)
    props = list(domains)
    enc = OneHotEncoder(categories=[list(domains[p]) for p in props], sparse_output=False, handle_unknown="error")
    table = np.array([[u.categorical_props[p] for p in props] for u in users], dtype=object).reshape(len(users), len(props))
    enc.fit(table)
    return np.asarray(enc.transform(table), dtype=np.float64)


def encode_categorical(
    all_users: Sequence[UserRecord], domains: Optional[Dict[str, List[str]]] = None
) -> Dict[str, np.ndarray]:
    """Concatenated one-hot blocks in declared property order."""
    domains = domains if domains is not None else categorical_domains(all_users)
    onehot = _one_hot(all_users, domains)
    return {u.id: onehot[i] for i, u in enumerate(all_users)}


# ---- feature matrix ----


class Featurizer:
    """Fits population statistics on a set of users, then builds FeatureMatrix rows for any dataset."""

    def __init__(self, embed_dim: int = settings.EMBED_DIM, tweet_cap: int = settings.TWEET_CAP):
        self.embed_dim = int(embed_dim)
        self.tweet_cap = int(tweet_cap)

    def fit(self, dataset: Dataset, indices: Optional[Sequence[int]] = None) -> FeatureSchema:
        users = [dataset.users[i] for i in indices] if indices is not None else list(dataset.users)
        if len(users) < 2:
            raise ValueError("Featurizer.fit: need at least 2 users")
        names = _numeric_names(users)
        mean: List[float] = []
        scale: List[float] = []
        if names:
            scaler = StandardScaler().fit(_numeric_table(users, names))
            mean = [float(x) for x in scaler.mean_]
            scale = [float(x) for x in scaler.scale_]
        return FeatureSchema(
            embed_dim=self.embed_dim,
            tweet_cap=self.tweet_cap,
            numeric_names=names,
            numeric_mean=mean,
            numeric_scale=scale,
            # domains over every user; only numeric stats are train-only
            categorical_domains=categorical_domains(dataset.users),
        )

    @staticmethod
    def transform(dataset: Dataset, schema: FeatureSchema) -> FeatureMatrix:
        users = dataset.users
        numeric = _numeric_table(users, schema.numeric_names)
        if schema.numeric_names:
            numeric = (numeric - np.asarray(schema.numeric_mean)) / np.asarray(schema.numeric_scale)
        fm = FeatureMatrix(
            user_ids=dataset.user_ids,
            desc=embed_texts([u.description for u in users], schema.embed_dim),
            tweet=np.stack([tweet_embedding([t.text for t in u.tweets], schema.embed_dim, schema.tweet_cap) for u in users])
            if users
            else np.zeros((0, schema.embed_dim)),
            numeric=numeric,
            categorical=_one_hot(users, schema.categorical_domains),
        )
        fm.validate_basic()
        return fm


def build_features(
    dataset: Dataset,
    fit_indices: Optional[Sequence[int]] = None,
    schema: Optional[FeatureSchema] = None,
    embed_dim: int = settings.EMBED_DIM,
):
    """(schema, matrix); the schema is fitted on `fit_indices` unless given."""
    schema = schema or Featurizer(embed_dim=embed_dim).fit(dataset, fit_indices)
    return schema, Featurizer.transform(dataset, schema)
