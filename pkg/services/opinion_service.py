"""
Group-opinion simulation.

Three step kernels share one contract: every agent reads the previous-step
snapshot, so a step is a pure function of its input.

  bc          x_i += mu (x_j - x_i)      iff |x_i - x_j| <= eps
  lorenz      a   += alpha pol(a) sim(a, m) [theta (m - a) + (1 - theta) m]
  generative  post = generator(prompt); opinion = sentiment(post)

j (and m = a_j) is one followee sampled per agent per step; agents without
followees keep their opinion. Opinions are clamped to [-1, 1].
"""
from __future__ import annotations

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import settings
from config.constants import SIM_BC, SIM_LORENZ, SIM_MODELS
from datasources import endpoint_client
from domain.corpus import Dataset
from domain.errors import ArenaError, ShapeError
from domain.metrics import TestResult
from domain.policy import GenerationParams, PolicyModel
from domain.simulation import AgentState, EventSchedule, OpinionMetrics, OpinionTrajectory
from services import feature_service, metrics_service, policy_service, sentiment_service, summary_service
from services.sentiment_service import SentimentFn
from storage.table_store import read_table, write_table
from utils.logger import get_logger
from utils.rng import derive_seed, substream


log = get_logger(__name__)

# (user_id, prompt, seed) -> post text
AgentGenerator = Callable[[str, str, int], str]

TRACE_COLUMNS = ["step", "user", "opinion"]
SUMMARY_COLUMNS = ["step", "mean", "std"]
NO_EVENT = "nothing new today"
NO_PAST = "none"

OPINION_MAX = 1.0


def _clamp(x: np.ndarray, bound: float = OPINION_MAX) -> np.ndarray:
    b = min(float(bound), OPINION_MAX)
    return np.clip(x, -b, b)


def sample_followees(followees: Sequence[Sequence[int]], rng: np.random.Generator) -> np.ndarray:
    """One followee index per agent, -1 for agents that follow nobody."""
    out = np.full(len(followees), -1, dtype=np.int64)
    for i, f in enumerate(followees):
        if f:
            out[i] = f[int(rng.integers(len(f)))]
    return out


# ---- agent-based baselines ----


def step_bc(
    opinions: np.ndarray,
    followees: Sequence[Sequence[int]],
    mu: float = settings.BC_MU,
    eps: float = settings.BC_EPSILON,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    x = np.asarray(opinions, dtype=np.float64)
    j = sample_followees(followees, rng if rng is not None else np.random.default_rng(0))
    has = j >= 0
    other = np.where(has, x[np.where(has, j, 0)], x)
    diff = other - x
    move = has & (np.abs(diff) <= eps)
    return _clamp(np.where(move, x + mu * diff, x))


def lorenz_delta(
    a: np.ndarray,
    m: np.ndarray,
    alpha: float = settings.LORENZ_ALPHA,
    lam: float = settings.LORENZ_LAMBDA,
    k: float = settings.LORENZ_K,
    theta: float = settings.LORENZ_THETA,
    big_m: float = settings.LORENZ_M,
) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    pol = (big_m ** 2 - a ** 2) / big_m ** 2
    lk = lam ** k
    sim = lk / (lk + np.abs(m - a) ** k)
    return alpha * pol * sim * (theta * (m - a) + (1.0 - theta) * m)


def step_lorenz(
    opinions: np.ndarray,
    followees: Sequence[Sequence[int]],
    alpha: float = settings.LORENZ_ALPHA,
    lam: float = settings.LORENZ_LAMBDA,
    k: float = settings.LORENZ_K,
    theta: float = settings.LORENZ_THETA,
    big_m: float = settings.LORENZ_M,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    a = np.asarray(opinions, dtype=np.float64)
    j = sample_followees(followees, rng if rng is not None else np.random.default_rng(0))
    has = j >= 0
    m = np.where(has, a[np.where(has, j, 0)], a)
    delta = np.where(has, lorenz_delta(a, m, alpha, lam, k, theta, big_m), 0.0)
    return _clamp(a + delta, big_m)


def run_abm(
    model: str,
    initial: np.ndarray,
    followees: Sequence[Sequence[int]],
    steps: int,
    seed: int,
    **params: float,
) -> np.ndarray:
    """(steps + 1, n) opinions; step t draws its followees from substream(seed, model, t)."""
    if model not in (SIM_BC, SIM_LORENZ):
        raise ValueError(f"run_abm: unknown model {model!r}")
    if steps < 0:
        raise ValueError("run_abm: steps must be >= 0")
    x = _clamp(np.asarray(initial, dtype=np.float64))
    out = np.empty((steps + 1, x.shape[0]), dtype=np.float64)
    out[0] = x
    kernel = step_bc if model == SIM_BC else step_lorenz
    for t in range(steps):
        x = kernel(x, followees, rng=substream(seed, model, t), **params)
        out[t + 1] = x
    return out


def count_clusters(opinions: np.ndarray, eps: float) -> int:
    """Maximal groups whose sorted neighbours lie within eps of each other."""
    x = np.sort(np.asarray(opinions, dtype=np.float64))
    if x.size == 0:
        return 0
    return int(1 + np.sum(np.diff(x) > eps))


# ---- generative agents ----


def initial_states(dataset: Dataset, scorer: Optional[SentimentFn] = None) -> List[AgentState]:
    """Agents start at their mean tweet sentiment."""
    ops = sentiment_service.user_opinions(dataset, scorer)
    return [AgentState(user_id=u.id, opinion=float(o)) for u, o in zip(dataset.users, ops)]


def tweet_page(states: Sequence[AgentState], followees: Sequence[int], limit: int = settings.RECENT_POSTS_MAX) -> str:
    """Latest post of each followee, newest first, at most `limit` lines."""
    posts = []
    for j in followees:
        if states[j].recent_posts:
            step, text = states[j].recent_posts[-1]
            posts.append((step, states[j].user_id, text))
    posts.sort(key=lambda p: (-p[0], p[1]))
    return "\n".join(f"@{uid}: {text}" for _, uid, text in posts[:limit])


def agent_prompt(
    state: AgentState,
    role_description: str,
    schedule: EventSchedule,
    t: int,
    page: str,
    window: int = settings.PAST_EVENTS_WINDOW,
) -> str:
    event = schedule.event_at(t)
    past = schedule.past(t, window)
    return endpoint_client.render_simulation(
        agent_name=state.user_id,
        role_description=role_description,
        current_time=event.date if event is not None and event.date else f"step {t}",
        trigger_news=event.text if event is not None else NO_EVENT,
        past_event="; ".join(e.text for e in past) or NO_PAST,
        tweet_page=page,
    )


def step_generative(
    states: Sequence[AgentState],
    followees: Sequence[Sequence[int]],
    generator_fn: AgentGenerator,
    sentiment_fn: SentimentFn,
    schedule: EventSchedule,
    t: int,
    seed: int,
    descriptions: Optional[Dict[str, str]] = None,
) -> Tuple[List[AgentState], int]:
    """
    One step over all agents from the same snapshot. A generator failure
    leaves that agent's opinion and posts unchanged and is counted.
    """
    descriptions = descriptions or {}
    out: List[AgentState] = []
    failures = 0
    for i, st in enumerate(states):
        page = tweet_page(states, followees[i])
        prompt = agent_prompt(st, descriptions.get(st.user_id, ""), schedule, t, page)
        nxt = AgentState(user_id=st.user_id, opinion=st.opinion, recent_posts=list(st.recent_posts), informed=st.informed)
        try:
            text = generator_fn(st.user_id, prompt, derive_seed(seed, "agent", t, i))
        except (ArenaError, ValueError, RuntimeError, ConnectionError) as e:
            failures += 1
            log.debug("agent_generation_failed user=%s step=%d err=%s", st.user_id, t, type(e).__name__)
            out.append(nxt)
            continue
        nxt.remember(t, text, settings.RECENT_POSTS_MAX)
        nxt.opinion = float(_clamp(np.array(sentiment_fn(text))))
        out.append(nxt)
    return out, failures


def run_generative(
    dataset: Dataset,
    schedule: EventSchedule,
    generator_fn: AgentGenerator,
    sentiment_fn: Optional[SentimentFn] = None,
    seed: int = 0,
    steps: Optional[int] = None,
    descriptions: Optional[Dict[str, str]] = None,
) -> Tuple[OpinionTrajectory, int]:
    """Runs `steps` (default: the schedule horizon) generative steps; returns (trajectory, failures)."""
    sentiment_fn = sentiment_fn or sentiment_service.LexiconScorer()
    n_steps = schedule.horizon if steps is None else steps
    if descriptions is None:
        summarizer = summary_service.TemplateSummarizer()
        descriptions = {u.id: summarizer.summarize(u, ()) for u in dataset.users}
    followees = dataset.followee_lists()
    states = initial_states(dataset, sentiment_fn)
    rows = [[s.opinion for s in states]]
    failures = 0
    for t in range(n_steps):
        states, f = step_generative(states, followees, generator_fn, sentiment_fn, schedule, t, seed, descriptions)
        failures += f
        rows.append([s.opinion for s in states])
    if failures:
        log.warning("generation_failures count=%d agents=%d steps=%d", failures, len(states), n_steps)
    return OpinionTrajectory(user_ids=dataset.user_ids, opinions=np.array(rows)), failures


def simulate_abm(
    dataset: Dataset,
    model: str,
    steps: int,
    seed: int = 0,
    sentiment_fn: Optional[SentimentFn] = None,
    **params: float,
) -> OpinionTrajectory:
    init = sentiment_service.user_opinions(dataset, sentiment_fn)
    ops = run_abm(model, init, dataset.followee_lists(), steps, seed, **params)
    return OpinionTrajectory(user_ids=dataset.user_ids, opinions=ops)


class PolicyAgentGenerator:
    """
    Toy-policy agent: the second half of the context (the neighbour slot) is
    replaced by an embedding of the prompt, so what the agent sees shapes
    what it writes.
    """

    def __init__(self, policy: PolicyModel, dataset: Dataset, params: Optional[GenerationParams] = None):
        self.policy = policy
        self.params = params or GenerationParams(temperature=1.0)
        half = policy.context_dim // 2
        summarizer = summary_service.TemplateSummarizer()
        self.half = half
        self.profile = {u.id: feature_service.embed_text(summarizer.summarize(u, ()), half) for u in dataset.users}

    def __call__(self, user_id: str, prompt: str, seed: int) -> str:
        ctx = np.concatenate([self.profile[user_id], feature_service.embed_text(prompt, self.half)])
        cand = policy_service.sample_tweets(self.policy, ctx, self.params, count=1, seed=seed)[0]
        return cand.texts[0] if cand.texts else ""


def endpoint_agent(generate: Callable[[str], str]) -> AgentGenerator:
    """Adapts a prompt -> text callable (e.g. EndpointGenerator) to the agent signature."""
    return lambda user_id, prompt, seed: generate(prompt)


# ---- metrics ----


def level_series(traj: OpinionTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    """Per-step population mean and std over the T post-update states."""
    ops = traj.updates
    return ops.mean(axis=1), ops.std(axis=1, ddof=0)


def opinion_metrics(sim: OpinionTrajectory, real: OpinionTrajectory) -> OpinionMetrics:
    """Averages over steps 1..T; the initial state is not part of any metric."""
    if sim.steps != real.steps:
        raise ShapeError(f"opinion_metrics: {sim.steps} simulated steps vs {real.steps} real steps")
    if sim.steps == 0:
        raise ShapeError("opinion_metrics: no steps to average")
    sm, ss = level_series(sim)
    rm, rs = level_series(real)
    return OpinionMetrics(
        mean=float(np.mean(sm)),
        std=float(np.mean(ss)),
        delta_bias=float(np.mean(np.abs(sm - rm))),
        delta_div=float(np.mean(np.abs(ss - rs))),
    )


def stability_summary(metrics: Sequence[OpinionMetrics]) -> Dict[str, float]:
    """Mean and population std of each metric across seeds."""
    if not metrics:
        raise ValueError("stability_summary: no runs")
    out: Dict[str, float] = {}
    for key in ("mean", "std", "delta_bias", "delta_div"):
        vals = np.array([getattr(m, key) for m in metrics])
        out[f"{key}_mean"] = float(vals.mean())
        out[f"{key}_std"] = float(vals.std(ddof=0))
    return out


def compare_models(a: Sequence[OpinionMetrics], b: Sequence[OpinionMetrics]) -> Dict[str, TestResult]:
    """Mann-Whitney U on per-seed ΔBias and ΔDiv of two simulation models."""
    return {
        "delta_bias": metrics_service.mann_whitney_u([m.delta_bias for m in a], [m.delta_bias for m in b]),
        "delta_div": metrics_service.mann_whitney_u([m.delta_div for m in a], [m.delta_div for m in b]),
    }


# ---- trace files ----


def save_trace(path: str, traj: OpinionTrajectory) -> None:
    rows = [{"step": t, "user": uid, "opinion": o} for t, uid, o in traj.to_rows()]
    write_table(path, rows, TRACE_COLUMNS)


def save_summary(path: str, traj: OpinionTrajectory) -> None:
    rows = [{"step": t, "mean": float(m), "std": float(s)} for t, m, s in zip(traj.step_numbers, traj.means, traj.stds)]
    write_table(path, rows, SUMMARY_COLUMNS)


def load_trace(path: str) -> OpinionTrajectory:
    """CSV step,user,opinion with T post-update rows per user (steps 0..T-1, no initial state)."""
    df = read_table(path, TRACE_COLUMNS)
    df["user"] = df["user"].astype(str)
    wide = df.pivot_table(index="step", columns="user", values="opinion", aggfunc="mean").sort_index()
    steps = wide.index.to_numpy()
    if steps.size == 0 or not np.array_equal(steps, np.arange(steps.size)):
        raise ShapeError(f"load_trace: {path} steps must run 0..T-1 without gaps")
    if wide.isna().any().any():
        raise ShapeError(f"load_trace: {path} has users missing at some steps")
    users = [str(c) for c in wide.columns]
    return OpinionTrajectory(user_ids=users, opinions=wide.to_numpy(dtype=np.float64), with_initial=False)


def simulate(
    dataset: Dataset,
    model: str,
    seed: int,
    steps: int,
    schedule: Optional[EventSchedule] = None,
    generator_fn: Optional[AgentGenerator] = None,
    sentiment_fn: Optional[SentimentFn] = None,
    **params: float,
) -> Tuple[OpinionTrajectory, int]:
    """Dispatch on the configured model; returns (trajectory, generation failures)."""
    if model not in SIM_MODELS:
        raise ValueError(f"simulate: unknown model {model!r}")
    if model in (SIM_BC, SIM_LORENZ):
        return simulate_abm(dataset, model, steps, seed, sentiment_fn, **params), 0
    if schedule is None or generator_fn is None:
        raise ValueError("simulate: the generative model needs a schedule and a generator")
    return run_generative(dataset, schedule, generator_fn, sentiment_fn, seed, steps)
