from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from config.constants import ABLATION_NO_ADV, ROW_MODE_BARE, WEIGHT_EXP, WEIGHT_GREEDY
from domain.arena import ArenaConfig
from domain.corpus import CommunityPartition
from domain.detector import DetectorHyper
from domain.errors import TrainingError
from services import arena_service, community_service, fixture_service
from services.arena_service import base_trainer


def _config(**kw) -> ArenaConfig:
    base = ArenaConfig(
        rounds=2,
        pairs=6,
        candidates=2,
        seed=1,
        strategy=WEIGHT_EXP,
        detector=DetectorHyper(hidden=8, dropout=0.0, lr=1e-2, weight_decay=0.0, epochs=6),
        pretrain_epochs=1,
        sft_epochs=2,
        dpo_epochs=2,
    )
    return replace(base, **kw)


@pytest.fixture(scope="module")
def arena_run(tmp_path_factory):
    dataset = fixture_service.synth_fixture(n_users=40, bot_fraction=0.25, seed=3, tweets_min=4, tweets_max=6)
    cfg = _config()
    setup = arena_service.prepare(dataset, cfg)
    out = tmp_path_factory.mktemp("arena")
    arts = arena_service.run_adversarial(cfg, dataset, out_dir=out, setup=setup)
    return setup, cfg, arts, out


def test_one_checkpoint_per_round(arena_run):
    _, _, arts, out = arena_run
    assert [r.k for r in arts.rounds] == [0, 1, 2]
    assert len(arts.policies) == len(arts.classifiers) == 3
    np.testing.assert_allclose(arts.rounds[2].weights, [0.1863, 0.3072, 0.5065], atol=5e-4)
    for k in range(3):
        assert (out / f"round_{k:02d}" / "round.json").exists()


def test_round_zero_trains_on_the_original_data(arena_run):
    setup, _, arts, _ = arena_run
    assert arts.rounds[0].dataset_digest == arena_service.dataset_digest(setup.dataset)
    assert arts.rounds[1].dataset_digest != arts.rounds[0].dataset_digest


def test_pair_stats_are_recorded(arena_run):
    _, cfg, arts, _ = arena_run
    for record in arts.rounds[1:]:
        assert record.pair_stats.drawn == cfg.pairs
        assert record.pair_stats.pairs + record.pair_stats.ties == cfg.pairs
        assert len(record.dpo_losses) == cfg.dpo_epochs


def test_replace_bot_tweets_touches_only_bots(arena_run):
    setup, _, arts, _ = arena_run
    replaced = arena_service.replace_bot_tweets(setup.dataset, arts.policies[0], setup.contexts, seed=5)
    for before, after in zip(setup.dataset.users, replaced.users):
        if before.is_bot:
            assert len(after.tweets) == arts.policies[0].tweets_per_response
            assert {t.timestamp for t in after.tweets} == {before.tweets[-1].timestamp}
        else:
            assert after is before
    assert replaced.edges == setup.dataset.edges


def test_replayed_round_matches_the_persisted_one(arena_run):
    setup, cfg, arts, out = arena_run
    replayed = arena_service.replay_round(setup, cfg.effective(), out, 2)
    assert replayed.dataset_digest == arts.rounds[2].dataset_digest
    for name, value in arts.rounds[2].classifier.params.items():
        np.testing.assert_array_equal(replayed.classifier.params[name], value)
    for name, value in arts.rounds[2].policy.params.items():
        np.testing.assert_array_equal(replayed.policy.params[name], value)


def test_loaded_artifacts_match_the_run(arena_run):
    _, cfg, arts, out = arena_run
    loaded = arena_service.load_artifacts(out, cfg)
    assert [r.dataset_digest for r in loaded.rounds] == [r.dataset_digest for r in arts.rounds]
    assert loaded.rounds[1].pair_stats == arts.rounds[1].pair_stats


def test_round_needs_every_earlier_classifier(arena_run):
    setup, cfg, arts, _ = arena_run
    with pytest.raises(TrainingError) as err:
        arena_service.run_round(setup, cfg, 2, arts.policies[1], arts.classifiers[:1])
    assert err.value.round_index == 2


def test_eval_matrix_cells_and_digests(arena_run):
    setup, _, arts, _ = arena_run
    matrix = arena_service.eval_matrix(arts, setup)
    assert matrix.f1.shape == (3, 3)
    assert np.all((matrix.f1 >= 0) & (matrix.f1 <= 1))
    assert len(set(matrix.column_digests)) == 3
    again = arena_service.eval_matrix(arts, setup)
    np.testing.assert_array_equal(matrix.f1, again.f1)
    assert len(matrix.to_rows()) == 9


def test_bare_rows_use_single_classifiers(arena_run):
    setup, _, arts, _ = arena_run
    bare = arena_service.eval_matrix(arts, setup, row_mode=ROW_MODE_BARE)
    ens = arena_service.eval_matrix(arts, setup)
    # F^0 is f^0 in both modes
    np.testing.assert_array_equal(bare.f1[0], ens.f1[0])


def test_diversity_report_has_a_row_per_policy(arena_run):
    setup, _, arts, _ = arena_run
    rows, test = arena_service.diversity_report(arts, setup, seed=2)
    assert [r["policy"] for r in rows] == [0, 1, 2]
    assert all(0.0 <= r["dist_1"] <= 1.0 for r in rows)
    assert test["n_bots"] == len(setup.dataset.bot_indices())


def test_no_adv_collapses_rounds():
    eff = _config(ablation=ABLATION_NO_ADV, rounds=3, pairs=5).effective()
    assert (eff.rounds, eff.pairs) == (1, 15)


def test_config_issues_are_collected():
    cfg = _config(rounds=0, candidates=1, strategy="median")
    assert len(cfg.issues()) == 3
    with pytest.raises(ValueError):
        cfg.validate_basic()


def test_cross_community_matrix_shape():
    ds = fixture_service.synth_fixture(n_users=60, bot_fraction=0.3, seed=8, tweets_min=3, tweets_max=4)
    half = {u.id: (0 if i < 30 else 1) for i, u in enumerate(ds.users)}
    comms = community_service.subset_by_community(ds, CommunityPartition(assignment=half, modularity=0.0))
    hyper = DetectorHyper(hidden=8, dropout=0.0, lr=1e-2, weight_decay=0.0, epochs=5)
    gen = arena_service.cross_community_generalization(comms, base_trainer(hyper), seed=0)
    assert gen.final_f1.shape == (2, 2)
    # the base trainer uses one classifier as both detectors
    np.testing.assert_array_equal(gen.final_f1, gen.base_f1)
    with pytest.raises(ValueError):
        arena_service.cross_community_generalization({0: comms[0]}, base_trainer(hyper))


@pytest.mark.slow
def test_generator_evades_and_detector_adapts():
    """Three rounds on the default fixture, averaged over three seeds."""
    f0_vs_pi0, f0_vs_pik, fk_vs_pik = [], [], []
    for seed in range(3):
        dataset = fixture_service.synth_fixture(n_users=300, bot_fraction=0.2, seed=seed)
        cfg = ArenaConfig(rounds=3, pairs=256, candidates=2, seed=seed, strategy=WEIGHT_GREEDY)
        setup = arena_service.prepare(dataset, cfg)
        arts = arena_service.run_adversarial(cfg, dataset, setup=setup)
        m = arena_service.eval_matrix(arts, setup)
        f0_vs_pi0.append(m.f1[0, 0])
        f0_vs_pik.append(m.f1[0, 3])
        fk_vs_pik.append(m.f1[3, 3])
    assert np.mean(f0_vs_pik) <= np.mean(f0_vs_pi0) - 0.05
    assert np.mean(fk_vs_pik) >= np.mean(f0_vs_pik) + 0.05
