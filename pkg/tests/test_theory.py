from __future__ import annotations

import math

import numpy as np
import pytest

from domain.errors import ShapeError
from domain.theory import TabularDetector, TabularPolicy
from services import theory_service


def _random_policy(world, seed):
    return TabularPolicy(logits=np.random.default_rng(seed).normal(size=world.pi_h.shape))


def test_objective_at_the_symmetric_point_is_minus_two_ln2():
    world = theory_service.random_world(4, 8, seed=0)
    policy = TabularPolicy.from_probs(world.pi_h)
    half = TabularDetector(values=np.full(world.pi_h.shape, 0.5))
    assert theory_service.detector_objective(world, policy, half) == pytest.approx(-2.0 * math.log(2.0), abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_numeric_detector_matches_the_closed_form(seed):
    world = theory_service.random_world(4, 8, seed=seed, shifted=seed % 2 == 1)
    policy = _random_policy(world, seed + 100)
    numeric = theory_service.fit_detector_numeric(world, policy)
    closed = theory_service.optimal_detector(world, policy)
    assert np.max(np.abs(numeric.values - closed.values)) < 1e-6


def test_closed_form_beats_perturbed_detectors():
    world = theory_service.random_world(3, 5, seed=4)
    policy = _random_policy(world, 1)
    best = theory_service.optimal_detector(world, policy)
    top = theory_service.detector_objective(world, policy, best)
    rng = np.random.default_rng(0)
    for _ in range(20):
        noisy = TabularDetector(values=np.clip(best.values + rng.normal(0, 0.05, best.values.shape), 1e-6, 1 - 1e-6))
        assert theory_service.detector_objective(world, policy, noisy) <= top + 1e-12


def test_optimal_detector_is_half_at_pi_h():
    world = theory_service.random_world(4, 8, seed=2)
    f = theory_service.optimal_detector(world, TabularPolicy.from_probs(world.pi_h))
    np.testing.assert_allclose(f.values, 0.5, atol=1e-12)


def test_missing_support_makes_the_generator_objective_infinite():
    world = theory_service.random_world(2, 3, seed=1)
    probs = world.pi_h.copy()
    probs[0] = [1.0, 0.0, 0.0]
    policy = TabularPolicy.from_probs(probs)
    detector = theory_service.optimal_detector(world, policy)
    assert theory_service.generator_objective(world, policy, detector, beta=0.2) == math.inf
    assert theory_service.generator_objective(world, policy, detector, beta=0.0) < math.inf


def test_generator_step_never_increases_the_objective():
    world = theory_service.random_world(4, 8, seed=3)
    policy = _random_policy(world, 3)
    detector = theory_service.optimal_detector(world, policy)
    before = theory_service.generator_objective(world, policy, detector, 0.2)
    _, used, after = theory_service.generator_step(world, policy, detector, 0.2, lr=5.0)
    assert after <= before
    assert 0.0 <= used <= 5.0


def test_generator_direction_is_a_descent_direction():
    # preconditioned, not the plain logit gradient, but G still falls along it
    world = theory_service.random_world(4, 8, seed=5)
    policy = _random_policy(world, 2)
    detector = theory_service.optimal_detector(world, policy)
    d = theory_service.generator_direction(world, policy, detector, 0.2)
    g0 = theory_service.generator_objective(world, policy, detector, 0.2)
    h = 1e-5
    moved = TabularPolicy(logits=policy.logits - h * d)
    assert theory_service.generator_objective(world, moved, detector, 0.2) < g0


def test_shape_mismatch():
    world = theory_service.random_world(2, 3, seed=0)
    with pytest.raises(ShapeError):
        theory_service.optimal_detector(world, TabularPolicy(logits=np.zeros((3, 3))))


def test_world_needs_two_outputs():
    with pytest.raises(ValueError):
        theory_service.random_world(3, 1, seed=0)


def test_trajectory_records_each_outer_step():
    world = theory_service.random_world(4, 8, seed=5)
    traj = theory_service.alternate_optimize(world, outer_steps=50, seed=5)
    assert [s.step for s in traj.steps] == list(range(50))
    assert traj.final.avg_tv < traj.steps[0].avg_tv
    assert not traj.aborted


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_alternating_play_reaches_the_fixed_point(seed):
    world = theory_service.random_world(4, 8, seed=seed)
    traj = theory_service.alternate_optimize(world, beta=0.2, outer_steps=5000, seed=seed)
    assert traj.final.avg_tv < 0.01
    assert traj.final.max_f_dev < 0.01
