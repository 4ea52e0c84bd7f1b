from __future__ import annotations

import numpy as np
import pytest

from config.constants import F1_SIDE_BOT, LABEL_HUMAN, WEIGHT_EXP, WEIGHT_GREEDY, WEIGHT_UNIFORM
from domain.corpus import Split
from domain.detector import DetectorHyper
from domain.errors import ShapeError, TrainingError
from services import community_service, detector_service, feature_service
from storage.checkpoint_store import load_classifier, save_classifier
from utils import autodiff as ad


def _untrained(dataset, hidden=6, seed=0):
    schema, fm = feature_service.build_features(dataset)
    model = detector_service.init_classifier(schema, hidden, 0.01, 0.0, seed)
    return model, fm, detector_service.build_adjacency(dataset)


def test_exp_weights_for_three_rounds():
    w = detector_service.make_weights(WEIGHT_EXP, 2, alpha=0.5)
    np.testing.assert_allclose(w, [0.1863, 0.3072, 0.5065], atol=1e-4)


def test_greedy_and_uniform_weights():
    assert detector_service.make_weights(WEIGHT_GREEDY, 3) == [0.0, 0.0, 0.0, 1.0]
    assert detector_service.make_weights(WEIGHT_UNIFORM, 3) == [0.25] * 4
    assert detector_service.make_weights(WEIGHT_EXP, 0) == [1.0]


def test_unknown_weighting_strategy():
    with pytest.raises(ValueError):
        detector_service.make_weights("median", 2)


def test_adjacency_rows_average_over_followees(two_user_dataset):
    follow, friend = detector_service.build_adjacency(two_user_dataset)
    np.testing.assert_allclose(follow.toarray(), [[0, 1], [1, 0]])
    assert friend.nnz == 0


def test_forward_gradients_match_finite_differences(tiny_dataset):
    model, fm, adjs = _untrained(tiny_dataset)
    p = detector_service.as_tensors(model)
    labels = tiny_dataset.human_labels()
    idx = np.arange(0, len(labels), 2)

    def loss():
        return detector_service.cross_entropy(detector_service.logits_graph(p, fm, adjs, 0.01), idx, labels)

    assert ad.gradient_check(loss, list(p.values()), n_samples=100, seed=1) < 1e-4


def test_forward_is_a_probability(tiny_dataset):
    model, fm, adjs = _untrained(tiny_dataset)
    probs = detector_service.forward(model, fm, adjs)
    assert probs.shape == (len(tiny_dataset.users),)
    assert np.all((probs > 0) & (probs < 1))


def test_forward_rejects_wrong_feature_rows(tiny_dataset):
    model, fm, adjs = _untrained(tiny_dataset)
    with pytest.raises(ShapeError):
        detector_service.forward(model, fm.rows(range(5)), adjs)


def test_training_needs_both_classes(tiny_dataset, small_hyper):
    humans = [i for i, u in enumerate(tiny_dataset.users) if u.label == LABEL_HUMAN]
    with pytest.raises(TrainingError):
        detector_service.train_classifier(tiny_dataset, Split(train=humans, val=[], test=[]), small_hyper)


def test_training_is_deterministic(tiny_dataset, small_hyper):
    split = community_service.split_dataset(tiny_dataset, seed=0)
    a = detector_service.train_classifier(tiny_dataset, split, small_hyper, seed=3)
    b = detector_service.train_classifier(tiny_dataset, split, small_hyper, seed=3)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])


@pytest.mark.slow
def test_trained_detector_finds_bots(small_dataset):
    split = community_service.split_dataset(small_dataset, seed=0)
    hyper = DetectorHyper(hidden=16, dropout=0.0, lr=1e-2, weight_decay=0.0, epochs=60)
    model = detector_service.train_classifier(small_dataset, split, hyper, seed=0)
    probs = detector_service.predict_dataset(model, small_dataset)
    report = detector_service.evaluate(probs, small_dataset, split.train + split.val + split.test, side=F1_SIDE_BOT)
    assert report.f1 > 0.7


def test_greedy_ensemble_is_the_latest_member(tiny_dataset):
    members = [_untrained(tiny_dataset, seed=s)[0] for s in range(3)]
    ens = detector_service.build_ensemble(members, WEIGHT_GREEDY)
    latest = detector_service.predict_dataset(members[-1], tiny_dataset)
    np.testing.assert_allclose(detector_service.ensemble_probability(ens, tiny_dataset), latest, atol=1e-12)


def test_uniform_ensemble_of_copies_is_the_single_model(tiny_dataset):
    model = _untrained(tiny_dataset)[0]
    ens = detector_service.build_ensemble([model, model, model], WEIGHT_UNIFORM)
    single = detector_service.predict_dataset(model, tiny_dataset)
    np.testing.assert_allclose(detector_service.ensemble_probability(ens, tiny_dataset), single, atol=1e-12)


def test_candidate_with_own_tweets_scores_the_baseline(tiny_dataset):
    members = [_untrained(tiny_dataset, seed=s)[0] for s in range(2)]
    ens = detector_service.build_ensemble(members, WEIGHT_EXP)
    scorer = detector_service.CandidateScorer(ens, tiny_dataset)
    base = scorer.baseline()
    for i in (0, 7, 21):
        user = tiny_dataset.users[i]
        assert scorer.score(user.id, [t.text for t in user.tweets]) == pytest.approx(base[i], abs=1e-9)


def test_candidate_text_changes_only_the_target_score(tiny_dataset):
    model = _untrained(tiny_dataset)[0]
    ens = detector_service.build_ensemble([model], WEIGHT_UNIFORM)
    uid = tiny_dataset.users[4].id
    a = detector_service.score_candidate(ens, tiny_dataset, uid, ["free crypto giveaway now"])
    b = detector_service.score_candidate(ens, tiny_dataset, uid, ["walked the dog by the river"])
    assert a != b


def test_classifier_checkpoint_reloads_exactly(tmp_path, tiny_dataset):
    model = _untrained(tiny_dataset)[0]
    save_classifier(tmp_path / "classifier.json", model)
    back = load_classifier(tmp_path / "classifier.json")
    np.testing.assert_array_equal(
        detector_service.predict_dataset(model, tiny_dataset), detector_service.predict_dataset(back, tiny_dataset)
    )
