from __future__ import annotations

import math

import numpy as np
import pytest

from config.constants import TOKEN_EOT
from domain.errors import TrainingError
from domain.policy import GenerationParams, PreferencePair, SftExample
from services import policy_service
from storage.checkpoint_store import load_policy, save_policy
from utils import autodiff as ad

TEXTS = ["good morning all", "morning coffee is good", "free crypto now", "crypto crypto moon", "all good here"]


def _model(seed: int = 0, max_tokens: int = 5):
    vocab = policy_service.build_vocabulary(TEXTS, max_size=32)
    return policy_service.init_policy(vocab, context_dim=8, seed=seed, hidden=6, token_dim=4, max_tokens=max_tokens, tweets_per_response=2)


def _context(seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).normal(size=8)


def _pairs(model, n=3):
    enc = lambda t: policy_service.encode_tweet(model, t)  # noqa: E731
    return [
        PreferencePair(
            user_id=f"u{i}",
            context=_context(i),
            chosen=[enc("good morning all"), enc("all good here")],
            rejected=[enc("free crypto now"), enc("crypto crypto moon")],
            chosen_score=0.9,
            rejected_score=0.1,
        )
        for i in range(n)
    ]


def test_vocabulary_puts_the_end_marker_first_and_ranks_by_count():
    vocab = policy_service.build_vocabulary(TEXTS, max_size=4)
    assert vocab == [TOKEN_EOT, "crypto", "good", "all"]


def test_encode_drops_unknown_tokens_and_caps_length():
    model = _model(max_tokens=3)
    ids = policy_service.encode_tweet(model, "good unknown morning all good")
    assert policy_service.decode_tweet(model, ids) == "good morning all"


def test_nll_gradient_check():
    model = _model()
    p = {k: ad.parameter(v.copy(), name=k) for k, v in model.params.items()}
    examples = [
        SftExample(user_id="a", context=_context(1), response=[policy_service.encode_tweet(model, t) for t in TEXTS[:2]]),
        SftExample(user_id="b", context=_context(2), response=[[], policy_service.encode_tweet(model, TEXTS[2])]),
    ]
    batch = policy_service._examples_batch(model, examples)
    assert ad.gradient_check(lambda: policy_service.nll_graph(p, batch), list(p.values()), n_samples=100) < 1e-4


def test_dpo_gradient_check():
    model = _model()
    ref = _model(seed=1)
    pairs = _pairs(model)
    batch = policy_service._pairs_batch(model, pairs)
    ref_lp = policy_service.reference_logps(ref, batch)
    p = {k: ad.parameter(v.copy(), name=k) for k, v in model.params.items()}
    assert ad.gradient_check(lambda: policy_service.dpo_graph(p, batch, ref_lp, 0.2), list(p.values()), n_samples=100) < 1e-4


def test_dpo_loss_is_ln2_at_the_reference():
    model = _model()
    loss, grads = policy_service.dpo_loss(model, model.copy(), _pairs(model), beta=0.2)
    assert loss == pytest.approx(math.log(2.0), abs=1e-9)
    assert set(grads) == set(model.params)


def test_dpo_training_raises_the_chosen_margin():
    model = _model()
    pairs = _pairs(model, n=4)
    before = policy_service.dpo_margin(model, pairs)
    trained, history = policy_service.dpo_train(model, pairs, beta=0.5, epochs=20, lr=5e-2, batch_size=4)
    assert history[0] == pytest.approx(math.log(2.0), abs=1e-9)
    assert policy_service.dpo_margin(trained, pairs) > before
    # the incoming policy is left untouched
    assert policy_service.dpo_margin(model, pairs) == pytest.approx(before)


def test_dpo_needs_pairs():
    with pytest.raises(TrainingError):
        policy_service.dpo_train(_model(), [])


def test_sampled_logprob_matches_sequence_logprob():
    model = _model(max_tokens=4)
    ctx = _context(3)
    for cand in policy_service.sample_tweets(model, ctx, GenerationParams(temperature=1.3, top_k=0), count=4, seed=5):
        assert len(cand.tokens) == 2
        assert cand.logprob == pytest.approx(policy_service.sequence_logprob(model, ctx, cand.tokens), abs=1e-9)


def test_sampling_is_seeded():
    model = _model()
    ctx = _context()
    a = policy_service.sample_tweets(model, ctx, count=3, seed=11)
    b = policy_service.sample_tweets(model, ctx, count=3, seed=11)
    assert [c.texts for c in a] == [c.texts for c in b]


def test_greedy_sampling_ignores_the_seed():
    model = _model()
    params = GenerationParams(sample=False)
    a = policy_service.generate_texts(model, _context(), params, seed=1)
    b = policy_service.generate_texts(model, _context(), params, seed=2)
    assert a == b


def test_bad_generation_params():
    with pytest.raises(ValueError):
        policy_service.sample_tweets(_model(), _context(), GenerationParams(temperature=0.0))


def test_sft_lowers_nll():
    model = _model()
    examples = [
        SftExample(user_id="a", context=_context(1), response=[policy_service.encode_tweet(model, t) for t in TEXTS[:2]])
    ]
    before = policy_service.mean_nll(model, examples)
    policy_service.sft_train(model, examples, epochs=30, lr=5e-2, batch_size=1)
    assert policy_service.mean_nll(model, examples) < before


def test_sft_skips_users_with_too_few_tweets(two_user_dataset):
    vocab = policy_service.build_vocabulary(["good day", "bad day"])
    model = policy_service.init_policy(vocab, context_dim=128, seed=0, hidden=4, token_dim=2)
    contexts = policy_service.context_vectors(two_user_dataset, ["a"])
    assert policy_service.sft_examples(model, two_user_dataset, ["a"], contexts) == []
    with pytest.raises(TrainingError):
        policy_service.sft_train(model, [])


def test_context_vector_concatenates_both_summaries(two_user_dataset):
    vec = policy_service.context_vector(two_user_dataset, "a", dim=16)
    assert vec.shape == (32,)
    assert np.linalg.norm(vec[:16]) == pytest.approx(1.0)
    assert np.linalg.norm(vec[16:]) == pytest.approx(1.0)


def test_policy_checkpoint_reloads(tmp_path):
    model = _model()
    save_policy(tmp_path / "policy.json", model)
    back = load_policy(tmp_path / "policy.json")
    ctx = _context()
    resp = [policy_service.encode_tweet(model, t) for t in TEXTS[:2]]
    assert policy_service.sequence_logprob(back, ctx, resp) == policy_service.sequence_logprob(model, ctx, resp)


def test_sampler_applies_temperature_and_top_k_only():
    logits = np.log(np.array([[0.1, 0.2, 0.3, 0.4], [0.4, 0.3, 0.2, 0.1]]))
    probs = policy_service._sampling_distribution(logits, GenerationParams(temperature=1.0, top_k=2))
    assert ((probs > 0).sum(axis=1) == 2).all()
    np.testing.assert_allclose(probs[0], [0.0, 0.0, 3 / 7, 4 / 7])
    # top_p only reaches the external endpoint; repetition_penalty is unused locally
    other = GenerationParams(temperature=1.0, top_k=2, top_p=0.5, repetition_penalty=1.5)
    np.testing.assert_allclose(policy_service._sampling_distribution(logits, other), probs)
