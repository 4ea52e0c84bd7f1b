# scripts/arena_cli.py
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config import settings
from config.constants import BACKEND_ENDPOINT, LABEL_BOT, LABEL_HUMAN, ROW_MODES, SIM_GENERATIVE, SIM_MODELS
from config.run_config import RunConfig, load_run_config, validate_run_config
from datasources import assets
from datasources.dataset_files import load_dataset_dir, save_dataset
from datasources.endpoint_client import EndpointGenerator
from domain.corpus import Dataset, Tweet
from domain.errors import ArenaError, ConfigError
from services import (
    arena_service,
    chart_service,
    community_service,
    detector_service,
    fixture_service,
    metrics_service,
    opinion_service,
    report_service,
    spread_service,
    theory_service,
)
from storage import checkpoint_store, paths
from storage.json_store import save_json
from storage.table_store import read_table, write_table
from utils.logger import get_logger
from utils.rng import derive_seed


log = get_logger(__name__)

EXIT_ERROR = 2
# smallest community (per class) kept for cross-community training
MIN_CLASS_PER_COMMUNITY = 5


# ---- shared plumbing ----


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default="", help="TOML run config")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--threads", type=int, default=None, help="concurrency cap")
    p.add_argument("--out", dest="out", type=str, default=None, help="output directory")


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", type=str, default=None, help="dataset directory (users.jsonl, tweets.jsonl, edges.csv)")
    p.add_argument("--community", type=int, default=None, help="keep one Louvain community")


# argparse dest -> dotted config key
_OVERRIDES = {
    "seed": "seed",
    "threads": "threads",
    "out": "output.dir",
    "data": "corpus.path",
    "community": "corpus.community",
    "users": "corpus.users",
    "bot_frac": "corpus.bot_frac",
    "strip_markers": "features.strip_markers",
    "epochs": "detector.epochs",
    "hidden": "detector.hidden",
    "backend": "generator.backend",
    "rounds": "arena.rounds",
    "pairs": "arena.pairs",
    "candidates": "arena.candidates",
    "beta_dpo": "arena.beta",
    "strategy": "arena.strategy",
    "ablation": "arena.ablation",
    "row_mode": "arena.row_mode",
    "f1_side": "arena.f1_side",
    "model": "simulation.model",
    "steps": "simulation.steps",
    "schedule": "simulation.schedule",
    "sim_seeds": "simulation.seeds",
    "keywords": "simulation.keywords",
    "seed_count": "simulation.seed_count",
    "post_probability": "simulation.post_probability",
    "real_trace": "simulation.real_trace",
    "policy": "simulation.policy",
}


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, dest) for dest, key in _OVERRIDES.items() if getattr(args, dest, None) is not None}
    return validate_run_config(load_run_config(args.config or None, overrides))


def _out(cfg: RunConfig) -> Path:
    return paths.run_dir(cfg.output.dir)


def _load_dataset(cfg: RunConfig) -> Dataset:
    c = cfg.corpus
    if c.path:
        ds = load_dataset_dir(c.path)
    else:
        ds = fixture_service.synth_fixture(n_users=c.users, bot_fraction=c.bot_frac, edge_density=c.edge_density, seed=cfg.seed)
    if c.community >= 0:
        part = community_service.detect_communities(ds, seed=cfg.seed, resolution=cfg.corpus.resolution)
        subsets = community_service.subset_by_community(ds, part)
        if c.community not in subsets:
            raise ConfigError([f"corpus.community {c.community} not found ({part.n_communities} communities)"])
        ds = subsets[c.community]
    if cfg.features.strip_markers:
        kinds = cfg.features.strip_markers
        ds = ds.with_users([
            u.replace_tweets([Tweet(timestamp=t.timestamp, text=metrics_service.strip_markers(t.text, kinds)) for t in u.tweets])
            for u in ds.users
        ])
    return ds


def _inputs(cfg: RunConfig, *extra: str) -> List[str]:
    out = [cfg.corpus.path] if cfg.corpus.path else []
    return out + [e for e in extra if e]


def _finish(cfg: RunConfig, out: Path, cmd: str, inputs: Sequence[str], extra: Optional[Dict[str, Any]] = None) -> None:
    config = cfg.to_dict()
    if extra:
        config["args"] = extra
    report_service.write_manifest(out, cmd, inputs, config, cfg.seed)
    print(f"OK: {cmd} -> {out}")


# ---- subcommands ----


def cmd_ingest(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    if not cfg.corpus.path:
        raise ConfigError(["ingest needs --data or corpus.path"])
    ds = _load_dataset(cfg)
    out = _out(cfg)
    save_dataset(ds, str(paths.dataset_dir(out)))
    followees = ds.followee_lists()
    rows = [
        {"user": u.id, "label": u.label, "tweets": len(u.tweets), "followees": len(followees[i])}
        for i, u in enumerate(ds.users)
    ]
    write_table(out / "users.csv", rows, ["user", "label", "tweets", "followees"])
    _finish(cfg, out, "ingest", _inputs(cfg))


def cmd_fixture(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    c = cfg.corpus
    ds = fixture_service.synth_fixture(n_users=c.users, bot_fraction=c.bot_frac, edge_density=c.edge_density, seed=cfg.seed)
    out = _out(cfg)
    save_dataset(ds, str(paths.dataset_dir(out)))
    _finish(cfg, out, "fixture", [])


def cmd_communities(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    ds = _load_dataset(cfg)
    part = community_service.detect_communities(ds, seed=cfg.seed, resolution=cfg.corpus.resolution)
    out = _out(cfg)
    write_table(out / "communities.csv", [{"user": u, "community": c} for u, c in sorted(part.assignment.items())], ["user", "community"])
    summary = []
    for c, members in part.members().items():
        labels = [ds.user(m).label for m in members]
        summary.append({"community": c, "users": len(members), "humans": labels.count(LABEL_HUMAN), "bots": labels.count(LABEL_BOT)})
    write_table(out / "community_summary.csv", summary, ["community", "users", "humans", "bots"])
    write_table(out / "modularity.csv", [{"level": i, "modularity": q} for i, q in enumerate(part.level_modularity)], ["level", "modularity"])
    if args.split_out:
        for c, sub in community_service.subset_by_community(ds, part).items():
            save_dataset(sub, str(paths.dataset_dir(out, f"community_{c:03d}")))
    print(f"communities={part.n_communities} modularity={part.modularity:.6f}")
    _finish(cfg, out, "communities", _inputs(cfg))


def cmd_train_detector(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    ds = _load_dataset(cfg)
    split = community_service.split_dataset(ds, seed=derive_seed(cfg.seed, "split"))
    model = detector_service.train_classifier(ds, split, cfg.detector.hyper(), seed=derive_seed(cfg.seed, "detector", 0))
    out = _out(cfg)
    checkpoint_store.save_classifier(out / checkpoint_store.CLASSIFIER_FILE, model)
    probs = detector_service.predict_dataset(model, ds)
    rows = []
    for name, idx in (("train", split.train), ("val", split.val), ("test", split.test)):
        if not idx:
            continue
        rep = detector_service.evaluate(probs, ds, idx, side=cfg.arena.f1_side)
        rows.append({"split": name, **rep.to_dict()})
    write_table(out / "detector_metrics.csv", rows, ["split", "accuracy", "f1", "f1_human", "f1_bot", "tp", "fp", "tn", "fn"])
    write_table(out / "predictions.csv", [{"user": u.id, "prob": float(p), "label": u.label} for u, p in zip(ds.users, probs)], ["user", "prob", "label"])
    _finish(cfg, out, "train-detector", _inputs(cfg))


def cmd_run_arena(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    ds = _load_dataset(cfg)
    arena_cfg = cfg.arena_config()
    arena_cfg.validate_basic()
    setup = arena_service.prepare(ds, arena_cfg.effective())
    out = _out(cfg)
    arts = arena_service.run_adversarial(arena_cfg, ds, out_dir=out, setup=setup)
    matrix = arena_service.eval_matrix(arts, setup)
    arena_service.save_eval_matrix(out / f"eval_matrix_{matrix.row_mode}.csv", matrix)
    chart_service.eval_heatmap(matrix, out / f"eval_matrix_{matrix.row_mode}.html")
    train_bots = setup.train_bots
    rows, test = arena_service.diversity_report(arts, setup, train_bots, seed=cfg.seed)
    write_table(out / "diversity.csv", rows)
    save_json(str(out / "diversity_test.json"), test)
    diag = " ".join(f"{v:.3f}" for v in np.diag(matrix.f1))
    print(f"rounds={len(arts.rounds) - 1} diag_f1={diag}")
    _finish(cfg, out, "run-arena", _inputs(cfg))


def cmd_eval_matrix(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    if not Path(args.run).is_dir():
        raise ConfigError([f"--run does not exist: {args.run}"])
    ds = _load_dataset(cfg)
    arena_cfg = cfg.arena_config().effective()
    arts = arena_service.load_artifacts(args.run, arena_cfg)
    setup = arena_service.prepare(ds, arena_cfg)
    out = _out(cfg)
    for mode in ([args.row_mode] if args.row_mode else list(ROW_MODES)):
        matrix = arena_service.eval_matrix(arts, setup, row_mode=mode)
        arena_service.save_eval_matrix(out / f"eval_matrix_{mode}.csv", matrix)
        chart_service.eval_heatmap(matrix, out / f"eval_matrix_{mode}.html")
    _finish(cfg, out, "eval-matrix", _inputs(cfg, args.run), {"run": args.run})


def cmd_generalization(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    ds = _load_dataset(cfg)
    part = community_service.detect_communities(ds, seed=cfg.seed, resolution=cfg.corpus.resolution)
    communities = {}
    for c, sub in community_service.subset_by_community(ds, part).items():
        bots = len(sub.bot_indices())
        if bots >= MIN_CLASS_PER_COMMUNITY and len(sub.users) - bots >= MIN_CLASS_PER_COMMUNITY:
            communities[c] = sub
    dropped = part.n_communities - len(communities)
    if dropped:
        log.warning("communities_dropped count=%d min_per_class=%d", dropped, MIN_CLASS_PER_COMMUNITY)
    if args.trainer == "arena":
        trainer = arena_service.arena_trainer(cfg.arena_config())
    else:
        trainer = arena_service.base_trainer(cfg.detector.hyper())
    gen = arena_service.cross_community_generalization(communities, trainer, seed=cfg.seed, side=cfg.arena.f1_side)
    out = _out(cfg)
    write_table(out / "generalization.csv", gen.to_rows(), ["train_community", "test_community", "final_f1", "base_f1"])
    _finish(cfg, out, "generalization", _inputs(cfg), {"trainer": args.trainer})


def cmd_theory_check(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    world = theory_service.random_world(args.x, args.y, seed=cfg.seed, shifted=args.shifted)
    traj = theory_service.alternate_optimize(
        world, beta=args.beta, outer_steps=args.outer_steps, inner_steps=args.inner_steps, seed=cfg.seed, lr=args.lr
    )
    out = _out(cfg)
    write_table(out / "theory.csv", traj.to_rows(), ["step", "avg_tv", "max_f_dev", "detector_objective", "generator_objective", "lr"])
    save_json(str(out / "world.json"), world.to_dict())
    if traj.steps:
        chart_service.theory_lines(traj, out / "theory.html")
        last = traj.final
        print(f"steps={len(traj.steps)} avg_tv={last.avg_tv:.6e} max_f_dev={last.max_f_dev:.6e} aborted={traj.aborted}")
    else:
        print(f"steps=0 aborted={traj.aborted}")
    extra = {"x": args.x, "y": args.y, "beta": args.beta, "outer_steps": args.outer_steps, "inner_steps": args.inner_steps, "lr": args.lr, "shifted": args.shifted}
    _finish(cfg, out, "theory-check", [], extra)


def _agent_generator(cfg: RunConfig, ds: Dataset):
    if cfg.generator.backend == BACKEND_ENDPOINT:
        return opinion_service.endpoint_agent(EndpointGenerator(cfg.endpoint_config(), cfg.generator.params()))
    if cfg.simulation.policy:
        policy = checkpoint_store.load_policy(cfg.simulation.policy)
    else:
        arena_cfg = cfg.arena_config()
        policy = arena_service.initial_policy(arena_service.prepare(ds, arena_cfg), arena_cfg)
    return opinion_service.PolicyAgentGenerator(policy, ds, cfg.generator.params())


def cmd_simulate_opinion(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    sim = cfg.simulation
    ds = _load_dataset(cfg)
    schedule = assets.load_schedule(sim.schedule)
    steps = sim.steps or schedule.horizon
    real = opinion_service.load_trace(sim.real_trace) if sim.real_trace else None
    generator = _agent_generator(cfg, ds) if sim.model == SIM_GENERATIVE else None
    out = _out(cfg)

    metrics, rows, trajs = [], [], []
    for s in sim.seeds:
        traj, failures = opinion_service.simulate(
            ds, sim.model, seed=s, steps=steps, schedule=schedule, generator_fn=generator, **sim.abm_params()
        )
        trajs.append(traj)
        opinion_service.save_trace(str(out / f"trace_seed{s}.csv"), traj)
        opinion_service.save_summary(str(out / f"summary_seed{s}.csv"), traj)
        level, spread = opinion_service.level_series(traj)
        row: Dict[str, Any] = {"seed": s, "mean": float(np.mean(level)), "std": float(np.mean(spread)), "failures": failures}
        if real is not None:
            m = opinion_service.opinion_metrics(traj, real)
            metrics.append(m)
            row.update(m.to_dict())
        rows.append(row)
    write_table(out / "opinion_metrics.csv", rows, ["seed", "mean", "std", "delta_bias", "delta_div", "failures"])
    if metrics:
        write_table(out / "stability.csv", [opinion_service.stability_summary(metrics)])
    if args.compare_model:
        if real is None:
            raise ConfigError(["--compare-model needs simulation.real_trace"])
        other = dataclasses.replace(sim, model=args.compare_model)
        other_gen = generator if generator is not None else (_agent_generator(cfg, ds) if other.model == SIM_GENERATIVE else None)
        other_metrics = []
        for s in sim.seeds:
            traj, _ = opinion_service.simulate(
                ds, other.model, seed=s, steps=steps, schedule=schedule, generator_fn=other_gen, **other.abm_params()
            )
            other_metrics.append(opinion_service.opinion_metrics(traj, real))
        tests = opinion_service.compare_models(metrics, other_metrics)
        write_table(
            out / "model_comparison.csv",
            [{"metric": k, "model_a": sim.model, "model_b": other.model, **r.to_dict()} for k, r in tests.items()],
            ["metric", "model_a", "model_b", "statistic", "p_value", "exact"],
        )
    names = [f"{sim.model} seed {sim.seeds[0]}"]
    shown = [trajs[0]]
    if real is not None:
        names.append("real")
        shown.append(real)
    chart_service.opinion_lines(shown, names, out / "opinion.html")
    _finish(cfg, out, "simulate-opinion", _inputs(cfg, sim.real_trace))


def cmd_simulate_spread(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    sim = cfg.simulation
    if not sim.keywords:
        raise ConfigError(["simulation.keywords must name at least one event keyword"])
    ds = _load_dataset(cfg)
    steps = sim.steps or assets.load_schedule(sim.schedule).horizon
    base = None
    if cfg.generator.backend == BACKEND_ENDPOINT:
        base = opinion_service.endpoint_agent(EndpointGenerator(cfg.endpoint_config(), cfg.generator.params()))
    generator = base if base is not None else spread_service.KeywordEchoAgent(sim.keywords)
    state = spread_service.run_spread(
        ds, sim.keywords, generator, steps=steps, seed=cfg.seed, seed_count=sim.seed_count, post_probability=sim.post_probability
    )
    out = _out(cfg)
    spread_service.save_spread(str(out / "spread.csv"), state)
    write_table(out / "authors.csv", [{"user": u, "first_step": t} for u, t in sorted(state.first_post_step.items())], ["user", "first_step"])
    chart_service.spread_curve(state, out / "spread.html")
    print(f"steps={steps} seeds={state.counts[0]} authors={state.counts[-1]}")
    _finish(cfg, out, "simulate-spread", _inputs(cfg))


def _label_value(v: Any) -> int:
    s = str(v).strip().lower()
    if s in (LABEL_HUMAN, "1"):
        return 1
    if s in (LABEL_BOT, "0"):
        return 0
    raise ValueError(f"metrics: unknown label {v!r}")


def cmd_metrics(args: argparse.Namespace) -> None:
    cfg = _run_config(args)
    if not (args.predictions or args.texts):
        raise ConfigError(["metrics needs --predictions and/or --texts"])
    out = _out(cfg)
    inputs = []
    if args.predictions:
        df = read_table(args.predictions, ["prob", "label"])
        rep = metrics_service.classification_metrics(
            df["prob"].astype(float).tolist(), [_label_value(v) for v in df["label"]], threshold=args.threshold, side=cfg.arena.f1_side
        )
        write_table(out / "classification.csv", [rep.to_dict()], ["accuracy", "f1", "f1_human", "f1_bot", "tp", "fp", "tn", "fn"])
        print(f"accuracy={rep.accuracy:.4f} f1={rep.f1:.4f}")
        inputs.append(args.predictions)
    if args.texts:
        texts = [ln for ln in Path(args.texts).read_text(encoding="utf-8").splitlines() if ln.strip()]
        row = {f"dist_{n}": metrics_service.dist_n(texts, n) for n in (1, 2, 3)}
        row["entropy"] = metrics_service.shannon_entropy(texts)
        row.update(metrics_service.stylistic_usage(texts).to_dict())
        write_table(out / "diversity.csv", [row])
        inputs.append(args.texts)
    _finish(cfg, out, "metrics", inputs, {"threshold": args.threshold})


# ---- parser ----


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Adversarial bot-generation / detection arena and social simulators")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("ingest", help="load, validate and normalize a dataset directory")
    _add_common(p)
    _add_data(p)

    p = sub.add_parser("fixture", help="write a synthetic community")
    _add_common(p)
    p.add_argument("--users", type=int, default=None)
    p.add_argument("--bot-frac", dest="bot_frac", type=float, default=None)

    p = sub.add_parser("communities", help="Louvain partition of the follow graph")
    _add_common(p)
    _add_data(p)
    p.add_argument("--split-out", dest="split_out", action="store_true", help="also write one dataset per community")

    p = sub.add_parser("train-detector", help="train one RGCN classifier")
    _add_common(p)
    _add_data(p)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--strip-markers", dest="strip_markers", type=str, default=None, help="comma list: emoji,hashtag,mention")
    p.add_argument("--f1-side", dest="f1_side", type=str, default=None)

    for name, help_text in (("run-arena", "adversarial co-training rounds"), ("eval-matrix", "detector x policy F1 matrix from a run")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        _add_data(p)
        p.add_argument("--rounds", type=int, default=None)
        p.add_argument("--pairs", type=int, default=None)
        p.add_argument("--candidates", type=int, default=None)
        p.add_argument("--beta", dest="beta_dpo", type=float, default=None)
        p.add_argument("--strategy", type=str, default=None)
        p.add_argument("--ablation", type=str, default=None)
        p.add_argument("--f1-side", dest="f1_side", type=str, default=None)
        p.add_argument("--epochs", type=int, default=None)
        if name == "eval-matrix":
            p.add_argument("--run", type=str, required=True, help="run-arena output directory")
            p.add_argument("--row-mode", dest="row_mode", type=str, default=None, choices=list(ROW_MODES))

    p = sub.add_parser("generalization", help="train on one community, test on every community")
    _add_common(p)
    _add_data(p)
    p.add_argument("--trainer", type=str, default="base", choices=["base", "arena"])
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--pairs", type=int, default=None)

    p = sub.add_parser("theory-check", help="tabular alternating optimization")
    _add_common(p)
    p.add_argument("--x", type=int, default=4)
    p.add_argument("--y", type=int, default=8)
    p.add_argument("--beta", type=float, default=settings.DPO_BETA)
    p.add_argument("--outer-steps", dest="outer_steps", type=int, default=settings.THEORY_OUTER_STEPS)
    p.add_argument("--inner-steps", dest="inner_steps", type=int, default=settings.THEORY_INNER_STEPS)
    p.add_argument("--lr", type=float, default=settings.THEORY_LR)
    p.add_argument("--shifted", action="store_true", help="draw a separate generator context distribution")

    for name, help_text in (("simulate-opinion", "group-opinion simulation"), ("simulate-spread", "information cascade")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        _add_data(p)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--schedule", type=str, default=None)
        p.add_argument("--backend", type=str, default=None)
        if name == "simulate-opinion":
            p.add_argument("--model", type=str, default=None)
            p.add_argument("--seeds", dest="sim_seeds", type=str, default=None, help="comma list")
            p.add_argument("--real-trace", dest="real_trace", type=str, default=None)
            p.add_argument("--policy", type=str, default=None, help="toy policy checkpoint")
            p.add_argument("--compare-model", dest="compare_model", type=str, default=None, choices=list(SIM_MODELS),
                           help="Mann-Whitney U of per-seed metrics against a second model")
        else:
            p.add_argument("--keywords", type=str, default=None, help="comma list")
            p.add_argument("--seed-count", dest="seed_count", type=int, default=None)
            p.add_argument("--post-probability", dest="post_probability", type=float, default=None)

    p = sub.add_parser("metrics", help="classification or diversity metrics of files")
    _add_common(p)
    p.add_argument("--predictions", type=str, default="", help="CSV with prob,label")
    p.add_argument("--texts", type=str, default="", help="one text per line")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--f1-side", dest="f1_side", type=str, default=None)
    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "fixture": cmd_fixture,
    "communities": cmd_communities,
    "train-detector": cmd_train_detector,
    "run-arena": cmd_run_arena,
    "eval-matrix": cmd_eval_matrix,
    "generalization": cmd_generalization,
    "theory-check": cmd_theory_check,
    "simulate-opinion": cmd_simulate_opinion,
    "simulate-spread": cmd_simulate_spread,
    "metrics": cmd_metrics,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.cmd](args)
    except ConfigError as e:
        for issue in e.issues:
            print(f"error=ConfigError detail={issue}", file=sys.stderr)
        return EXIT_ERROR
    except (ArenaError, ValueError, OSError) as e:
        print(f"error={type(e).__name__} detail={e}", file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
