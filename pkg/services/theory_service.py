"""
Tabular check of the adversarial objectives.

detector objective  D(F)  = sum_x q(x)  sum_y pi_H log F + sum_x q'(x) sum_y pi log(1 - F)
generator objective G(pi) = sum_x q'(x) sum_y pi (1 - log F) + beta sum_x q(x) KL(pi_H(.|x) || pi(.|x))

The maximizer of D is F* = q pi_H / (q pi_H + q' pi), which is pi_H / (pi_H + pi)
when q = q'. Alternating F <- F* with generator steps should drive pi to pi_H
and F to 1/2.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.special import expit, softmax

from config import settings
from domain.theory import TabularDetector, TabularPolicy, TabularWorld, TheoryStep, TheoryTrajectory
from domain.errors import ShapeError
from utils.logger import get_logger
from utils.rng import substream


log = get_logger(__name__)

NEWTON_CLIP = 30.0
_MAX_HALVINGS = 40


def random_world(n_x: int, n_y: int, seed: int, shifted: bool = False) -> TabularWorld:
    """q and every pi_H row are softmaxes of standard normal logits."""
    if n_x < 1 or n_y < 2:
        raise ValueError("random_world: need |X| >= 1 and |Y| >= 2")
    rng = substream(seed, "theory-world")
    q = softmax(rng.normal(size=n_x))
    pi_h = softmax(rng.normal(size=(n_x, n_y)), axis=1)
    q_shift = softmax(rng.normal(size=n_x)) if shifted else None
    world = TabularWorld(q=q, pi_h=pi_h, q_shift=q_shift)
    world.validate_basic()
    return world


def _check(world: TabularWorld, pi: np.ndarray, f: Optional[np.ndarray] = None) -> None:
    if pi.shape != world.pi_h.shape or (f is not None and f.shape != world.pi_h.shape):
        raise ShapeError(f"theory: policy/detector shape does not match world {world.pi_h.shape}")


def _xlogy(weight: np.ndarray, value: np.ndarray) -> np.ndarray:
    """weight * log(value) with 0 * log(anything) = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = weight * np.log(value)
    return np.where(weight > 0, out, 0.0)


def detector_objective(world: TabularWorld, policy: TabularPolicy, detector: TabularDetector) -> float:
    pi, f = policy.probs, detector.values
    _check(world, pi, f)
    real = world.q[:, None] * world.pi_h
    fake = world.q_gen[:, None] * pi
    return float(np.sum(_xlogy(real, f)) + np.sum(_xlogy(fake, 1.0 - f)))


def optimal_detector(world: TabularWorld, policy: TabularPolicy) -> TabularDetector:
    """Closed-form maximizer of the detector objective; 0.5 where both densities vanish."""
    pi = policy.probs
    _check(world, pi)
    real = world.q[:, None] * world.pi_h
    fake = world.q_gen[:, None] * pi
    total = real + fake
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(total > 0, real / total, 0.5)
    return TabularDetector(values=f)


def fit_detector_numeric(
    world: TabularWorld, policy: TabularPolicy, iters: int = settings.THEORY_DETECTOR_NEWTON_STEPS
) -> TabularDetector:
    """
    Maximizes the detector objective over a sigmoid logit table by damped
    Newton steps per cell; each cell is a concave problem a log s(u) + b log(1 - s(u)).
    """
    pi = policy.probs
    _check(world, pi)
    a = world.q[:, None] * world.pi_h
    b = world.q_gen[:, None] * pi
    u = np.zeros_like(a)
    active = (a + b) > 0
    for _ in range(iters):
        s = expit(u)
        grad = a * (1.0 - s) - b * s
        curv = (a + b) * s * (1.0 - s)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(active & (curv > 0), grad / curv, 0.0)
        u = np.clip(u + np.clip(step, -2.0, 2.0), -NEWTON_CLIP, NEWTON_CLIP)
    return TabularDetector.from_logits(np.where(active, u, 0.0))


def kl_rows(world: TabularWorld, pi: np.ndarray) -> np.ndarray:
    """KL(pi_H(.|x) || pi(.|x)) per context; +inf where pi misses pi_H's support."""
    ph = world.pi_h
    if np.any((ph > 0) & (pi <= 0)):
        out = np.full(ph.shape[0], math.inf)
        ok = ~np.any((ph > 0) & (pi <= 0), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[ok] = np.sum(_xlogy(ph[ok], ph[ok] / pi[ok]), axis=1)
        return out
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sum(_xlogy(ph, ph / np.where(pi > 0, pi, 1.0)), axis=1)


def generator_objective(world: TabularWorld, policy: TabularPolicy, detector: TabularDetector, beta: float) -> float:
    """Adversarial term plus beta times the q-weighted KL; +inf when the KL is infinite."""
    pi, f = policy.probs, detector.values
    _check(world, pi, f)
    fake = world.q_gen[:, None] * pi
    if np.any((fake > 0) & (f <= 0)):
        return math.inf
    adv = float(np.sum(fake) - np.sum(_xlogy(fake, f)))
    if beta == 0:
        return adv
    kl = kl_rows(world, pi)
    weighted = np.where(world.q > 0, world.q * kl, 0.0)
    if np.any(np.isinf(weighted)):
        return math.inf
    return adv + beta * float(np.sum(weighted))


def avg_tv(world: TabularWorld, policy: TabularPolicy) -> float:
    """Total variation to pi_H, averaged over q."""
    return float(np.sum(world.q * 0.5 * np.abs(policy.probs - world.pi_h).sum(axis=1)))


def max_f_deviation(detector: TabularDetector) -> float:
    return float(np.max(np.abs(detector.values - 0.5)))


def generator_direction(world: TabularWorld, policy: TabularPolicy, detector: TabularDetector, beta: float) -> np.ndarray:
    """
    Mirror-descent direction on the logits: the gradient of G w.r.t. pi,
    centered under pi and normalized by the context weight. With q = q' it is
    (c - E_pi c) + beta (1 - pi_H / pi) with c = 1 - log F.
    """
    pi, f = policy.probs, detector.values
    c = 1.0 - np.log(f)
    c_centered = c - np.sum(pi * c, axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        kl_part = 1.0 - world.pi_h / pi
    qg, q = world.q_gen[:, None], world.q[:, None]
    norm = 0.5 * (qg + q)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = (qg * c_centered + beta * q * kl_part) / norm
    return np.where(norm > 0, d, 0.0)


def generator_step(
    world: TabularWorld, policy: TabularPolicy, detector: TabularDetector, beta: float, lr: float
) -> tuple:
    """One backtracking step on G with F fixed; returns (policy, lr used, G after)."""
    g0 = generator_objective(world, policy, detector, beta)
    d = generator_direction(world, policy, detector, beta)
    step = lr
    for _ in range(_MAX_HALVINGS):
        cand = TabularPolicy(logits=policy.logits - step * d)
        g1 = generator_objective(world, cand, detector, beta)
        if g1 <= g0:
            return cand, step, g1
        step *= 0.5
    return policy, 0.0, g0


def alternate_optimize(
    world: TabularWorld,
    beta: float = settings.DPO_BETA,
    outer_steps: int = settings.THEORY_OUTER_STEPS,
    inner_steps: int = settings.THEORY_INNER_STEPS,
    seed: int = 0,
    lr: float = settings.THEORY_LR,
    init: Optional[TabularPolicy] = None,
) -> TheoryTrajectory:
    """
    F <- optimal_detector(pi), then `inner_steps` generator steps; one row per
    outer step. A non-finite objective stops the run with what was recorded.
    """
    world.validate_basic()
    if outer_steps < 1 or inner_steps < 1:
        raise ValueError("alternate_optimize: step counts must be >= 1")
    policy = init or TabularPolicy(logits=substream(seed, "theory-init").normal(size=world.pi_h.shape))
    traj = TheoryTrajectory()
    for step in range(outer_steps):
        detector = optimal_detector(world, policy)
        used = lr
        for _ in range(inner_steps):
            policy, used, _ = generator_step(world, policy, detector, beta, lr)
        detector = optimal_detector(world, policy)
        d_obj = detector_objective(world, policy, detector)
        g_obj = generator_objective(world, policy, detector, beta)
        if not (math.isfinite(d_obj) and math.isfinite(g_obj)) or not np.all(np.isfinite(policy.logits)):
            log.warning("theory_diverged step=%d", step)
            traj.aborted = True
            break
        traj.steps.append(TheoryStep(
            step=step,
            avg_tv=avg_tv(world, policy),
            max_f_dev=max_f_deviation(detector),
            detector_objective=d_obj,
            generator_objective=g_obj,
            lr=used,
        ))
    traj.policy = policy
    if traj.steps:
        last = traj.steps[-1]
        log.info("theory_done steps=%d avg_tv=%.3e max_f_dev=%.3e shifted=%s", len(traj.steps), last.avg_tv, last.max_f_dev, world.shifted)
    return traj
