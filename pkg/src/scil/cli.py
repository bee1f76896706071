"""Command-line entry point: ``scil <command> ...``.

Commands: gen, train, eval, loss-check, compare, experiment.  All
randomness comes from the ``--seed`` of each command (or the config).
Exit status is 0 on success, 1 when a check fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import analysis
from .config import ExperimentConfig, load_config
from .fixtures import load_fixture
from .labeling import batch_labels
from .network import forward, load_checkpoint, relative_error, save_checkpoint
from .supcon import supcon_forward, supcon_loss_and_grad, supcon_oracle
from .tasks import export_dataset_text, generate_dataset, load_dataset, make_env, save_dataset
from .trainer import (
    TrainingHistory,
    compare_runs,
    evaluate_expert,
    evaluate_policy,
    evaluate_random,
    improvement_over_random,
    train,
)

log = logging.getLogger("scil")

ORACLE_TOL = 1e-9
GRAD_TOL = 1e-4


class CommandError(Exception):
    pass


def _config(args) -> ExperimentConfig:
    return load_config(args.config) if args.config else ExperimentConfig()


def class_histogram(actions, spec) -> dict[int, int]:
    return dict(sorted(Counter(int(x) for x in batch_labels(actions, spec)).items()))


def cmd_gen(args) -> int:
    cfg = _config(args)
    episodes = cfg.episodes if args.episodes is None else args.episodes
    seed = cfg.data_seed if args.seed is None else args.seed
    if episodes < 1:
        raise CommandError("--episodes must be >= 1")
    bins = cfg.train.bins if args.bins is None else args.bins
    env = make_env(cfg.env, bins)
    ds = generate_dataset(env, episodes, seed)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / f"{cfg.env}_seed{seed}.bin"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    if args.text:
        export_dataset_text(ds, args.text)
    hist = class_histogram(ds.actions, env.spec)
    print(f"wrote {out}")
    print(f"N={len(ds)} episodes={len(ds.episode_ends)} classes={len(hist)}")
    print("class_histogram=" + json.dumps(hist))
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    overrides = {}
    if args.lam is not None:
        overrides["lam"] = args.lam
    if args.bins is not None:
        overrides["bins"] = args.bins
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    tcfg = replace(cfg.train, **overrides)
    ds = load_dataset(args.dataset)
    if ds.env != cfg.env:
        raise CommandError(f"dataset was generated for {ds.env!r} but config env is {cfg.env!r}")
    run_dir = Path(args.out) if args.out else Path(cfg.output_dir) / f"{tcfg.run_label}_bins{tcfg.bins}_seed{tcfg.seed}"
    ckpt_dir = run_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    snapshot = cfg.to_dict()
    snapshot["train"] = asdict(tcfg)
    (run_dir / "config.json").write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")
    meta = {"env": ds.env, "run_label": tcfg.run_label, "bins": tcfg.bins, "lam": tcfg.lam, "seed": tcfg.seed}

    def on_epoch(epoch, params, record):
        log.info("epoch %d pred=%.5f supcon=%.5f val=%.5f sil=%.4f", epoch, record.train_pred_loss,
                 record.train_supcon_loss, record.val_pred_loss, record.val_silhouette)
        if args.save_every and epoch % args.save_every == 0:
            save_checkpoint(ckpt_dir / f"epoch_{epoch:04d}.npz", params, {**meta, "epoch": epoch})

    params, history, split = train(tcfg, ds, on_epoch=on_epoch)
    save_checkpoint(run_dir / "checkpoint.npz", params, {**meta, "epoch": tcfg.epochs})
    history.to_csv(run_dir / "history.csv")

    spec = params.spec
    val_labels = batch_labels(ds.actions[split.val], spec)
    emb = forward(ds.observations[split.val], params).embedding
    report = analysis.embedding_report(emb, val_labels)
    analysis.write_embedding_report_csv(run_dir / "embedding_report.csv", report, val_labels)
    hist = class_histogram(ds.actions, spec)
    analysis.write_summary(
        run_dir / "summary.txt",
        {**report.scalars(), **meta, "epochs": tcfg.epochs, "class_histogram": json.dumps(hist)},
    )
    print(f"run={tcfg.run_label} dir={run_dir}")
    print(f"final val_pred_loss={history.records[-1].val_pred_loss:.6f} silhouette={report.silhouette:.4f}" if history.records else "no epochs run")
    print("class_histogram=" + json.dumps(hist))
    return 0


def cmd_eval(args) -> int:
    if args.agent == "policy":
        if not args.checkpoint:
            raise CommandError("--checkpoint is required for the policy agent")
        params, meta = load_checkpoint(args.checkpoint)
        env_name = args.env or meta.get("env")
        if env_name is None:
            raise CommandError("checkpoint has no env metadata; pass --env")
        env = make_env(env_name, meta.get("bins", 5))
        stats = evaluate_policy(params, env, args.episodes, args.seed)
    else:
        if not args.env:
            raise CommandError(f"--env is required for the {args.agent} agent")
        env = make_env(args.env)
        stats = (evaluate_random if args.agent == "random" else evaluate_expert)(env, args.episodes, args.seed)
    result = {"agent": args.agent, "env": env.name, "seed": args.seed, **stats.as_dict(), "scores": stats.scores}
    print(f"agent={args.agent} env={env.name} episodes={len(stats.scores)} mean={stats.mean:.4f} std={stats.std:.4f} success_rate={stats.success_rate:.4f}")
    if args.normalize_random:
        rnd = evaluate_random(env, args.episodes, args.seed)
        result["random_mean"] = rnd.mean
        result["improvement_over_random_pct"] = improvement_over_random(stats.mean, rnd.mean)
        print(f"random_mean={rnd.mean:.4f} improvement_over_random={result['improvement_over_random_pct']:.2f}%")
    out = Path(args.out) if args.out else (Path(args.checkpoint).with_suffix(".eval.json") if args.checkpoint else Path(f"eval_{args.agent}_{env.name}.json"))
    out.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")
    return 0


def cmd_loss_check(args) -> int:
    fx = load_fixture(args.fixture)
    loss, grad = supcon_loss_and_grad(fx.embeddings, fx.labels, fx.params)
    oracle = supcon_oracle(fx.embeddings, fx.labels, fx.params)
    numeric = np.zeros_like(fx.embeddings)
    h = args.h
    for idx in np.ndindex(fx.embeddings.shape):
        up, down = fx.embeddings.copy(), fx.embeddings.copy()
        up[idx] += h
        down[idx] -= h
        numeric[idx] = (supcon_forward(up, fx.labels, fx.params) - supcon_forward(down, fx.labels, fx.params)) / (2 * h)
    gap = abs(loss - oracle)
    grad_err = float(relative_error(grad, numeric).max())
    ok = gap < ORACLE_TOL and grad_err < GRAD_TOL
    print(f"forward={loss:.12g}")
    print(f"oracle={oracle:.12g} |diff|={gap:.3e} tol={ORACLE_TOL:g} {'PASS' if gap < ORACLE_TOL else 'FAIL'}")
    print(f"grad_max_rel_err={grad_err:.3e} tol={GRAD_TOL:g} {'PASS' if grad_err < GRAD_TOL else 'FAIL'}")
    print(f"grad_norm={float(np.linalg.norm(grad)):.6g}")
    return 0 if ok else 1


def cmd_compare(args) -> int:
    a = TrainingHistory.from_csv(args.a)
    b = TrainingHistory.from_csv(args.b)
    report = compare_runs(a, b)
    report.to_csv(args.out)
    for key, value in report.summary().items():
        print(f"{key}={value:.6g}")
    print(f"wrote {args.out}")
    return 0


def cmd_experiment(args) -> int:
    from .experiments import paired_experiment

    cfg = _config(args)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / "experiment"
    out.mkdir(parents=True, exist_ok=True)
    ds = generate_dataset(make_env(cfg.env, cfg.train.bins), cfg.episodes, cfg.data_seed)
    rows = []
    for bins in args.bins or [cfg.train.bins]:
        result = paired_experiment(
            ds, replace(cfg.train, bins=bins), seeds=args.seeds, scil_lambda=args.lam,
            eval_episodes=cfg.eval_episodes, eval_seed=args.eval_seed,
        )
        for bl, sc in zip(result.baseline, result.scil):
            bl.history.to_csv(out / f"history_BL_bins{bins}_seed{bl.seed}.csv")
            sc.history.to_csv(out / f"history_SCIL_bins{bins}_seed{sc.seed}.csv")
            compare_runs(bl.history, sc.history).to_csv(out / f"comparison_bins{bins}_seed{bl.seed}.csv")
        norm = result.normalized()
        for row in result.rows():
            rows.append(row)
            print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
        print(f"bins={bins} bl_mean_score={result.baseline_score:.4f} scil_mean_score={result.scil_score:.4f} "
              f"random={norm['random_mean']:.4f} bl_vs_random={norm['baseline_vs_random_pct']:.2f}% "
              f"scil_vs_random={norm['scil_vs_random_pct']:.2f}%")
    with open(out / "experiment.csv", "w") as fh:
        cols = list(rows[0])
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) for c in cols) + "\n")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="scil",
        description="Supervised contrastive imitation learning on synthetic tasks. "
        "Loss defaults: temperature 0.07, base_temperature 0.07, n_bins 5.",
        formatter_class=fmt,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a demonstration dataset", formatter_class=fmt)
    p.add_argument("--config", help="experiment config (JSON); built-in defaults if omitted")
    p.add_argument("--episodes", type=int, help="episodes to record (config default: 20)")
    p.add_argument("--seed", type=int, help="dataset seed (config default: 0)")
    p.add_argument("--bins", type=int, help="bins per continuous dim for the printed histogram (default 5)")
    p.add_argument("--out", help="dataset file path")
    p.add_argument("--text", help="also write a CSV text export here")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train BL (--lambda 0) or SCIL", formatter_class=fmt)
    p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--dataset", required=True, help="dataset file from `scil gen`")
    p.add_argument("--lambda", dest="lam", type=float, help="SupCon weight; 0 is the baseline (config default 1.0)")
    p.add_argument("--bins", type=int, help="bins per continuous dim (config default 5)")
    p.add_argument("--seed", type=int, help="training seed (config default 0)")
    p.add_argument("--epochs", type=int, help="epochs (config default 40)")
    p.add_argument("--save-every", type=int, default=0, help="checkpoint interval in epochs; 0 keeps only the final one")
    p.add_argument("--out", help="run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="roll out a policy", formatter_class=fmt)
    p.add_argument("--checkpoint", help="checkpoint .npz from `scil train`")
    p.add_argument("--agent", choices=("policy", "random", "expert"), default="policy")
    p.add_argument("--env", help="environment (read from checkpoint metadata by default)")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=1000)
    p.add_argument("--normalize-random", action="store_true", help="report improvement over a seeded random agent")
    p.add_argument("--out", help="result JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loss-check", help="check forward, oracle and gradient on a fixture", formatter_class=fmt)
    p.add_argument("--fixture", required=True, help="fixture file, or a bundled name: worked_example, all_distinct")
    p.add_argument("--h", type=float, default=1e-5, help="finite-difference step")
    p.set_defaults(func=cmd_loss_check)

    p = sub.add_parser("compare", help="compare two history.csv files (b minus a)", formatter_class=fmt)
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out", default="comparison.csv")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("experiment", help="paired BL vs SCIL runs over seeds and bin counts", formatter_class=fmt)
    p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--bins", type=int, nargs="+", help="bin counts to sweep (default: config bins)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="SCIL arm SupCon weight")
    p.add_argument("--eval-seed", type=int, default=1000)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (CommandError, ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
