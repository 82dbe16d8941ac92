"""Command-line front end: collect, train, run, check-spec and bench.

Exit codes: 0 on success, 2 for usage or validation errors, 3 for runtime
failures. Every command writes a ``manifest.json``-style record listing the
configuration, seeds, produced files and the sha256 of its inputs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import EnvSpecBundle, load_bundle
from .dynamics import (DynamicsModel, TrainConfig, TrainingDiverged, load_checkpoint,
                       save_checkpoint, train)
from .envs import REGISTRY, collect, make_env
from .mpc import EpisodeResult, MpcConfig, run_episode
from .stl import StlSyntaxError, check_names, parse, robustness, satisfies
from .trace import DimensionError, Trajectory, load_dataset

log = logging.getLogger("stlmpc")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
THREADS_ENV = "STL_MPC_THREADS"
BENCH_ENVS = ("cartpole", "mountain_car", "acc", "parking")


class UsageError(Exception):
    """Invalid user input detected after argument parsing."""


# ---------------------------------------------------------------- helpers

def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


def _hidden(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(v) for v in text.replace("x", ",").split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"hidden sizes look like 256,256, got {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError(f"hidden sizes must be positive, got {text!r}")
    return sizes


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_manifest(path: Path, command: str, config: dict, seeds: dict,
                   inputs: Sequence[Path], outputs: Sequence[Path], started: float) -> None:
    manifest = {
        "command": command,
        "config": _jsonable(config),
        "seeds": seeds,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": [str(p) for p in outputs] + [str(path)],
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n")


def _load_bundle(source: str) -> EnvSpecBundle:
    try:
        return load_bundle(source)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"bad config {source}: {exc}") from None


def _bundle_for(env_id: str, config: str | None) -> EnvSpecBundle:
    if config is not None:
        bundle = _load_bundle(config)
        if bundle.env_id != env_id:
            raise UsageError(f"config {config} is for {bundle.env_id!r}, not {env_id!r}")
        return bundle
    if env_id not in REGISTRY:
        raise UsageError(f"unknown environment {env_id!r}; choose from {', '.join(sorted(REGISTRY))}")
    return _load_bundle(env_id)


def _read_spec(args) -> str | None:
    if getattr(args, "spec_file", None):
        try:
            return Path(args.spec_file).read_text().strip()
        except OSError as exc:
            raise UsageError(f"cannot read spec file: {exc}") from None
    return getattr(args, "spec", None)


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def _fmt(mean: float, std: float) -> str:
    return f"{mean:.4g} ± {std:.2g}"


# ---------------------------------------------------------------- collect

def collect_dataset(bundle: EnvSpecBundle, n_traj: int, episode_len: int, seed: int, out: Path):
    env = bundle.make_env()
    dataset = collect(env, n_traj, episode_len, seed, bundle.train.split_fraction)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix == ".npz":
        dataset.save_npz(out)
    else:
        dataset.to_csv(out)
    return dataset


def cmd_collect(args) -> int:
    started = time.time()
    bundle = _bundle_for(args.env, args.config)
    n_traj = args.n_traj or bundle.n_traj
    episode_len = args.episode_len or bundle.collect_episode_len
    seed = bundle.collect_seed if args.seed is None else args.seed
    out = Path(args.out)
    dataset = collect_dataset(bundle, n_traj, episode_len, seed, out)
    manifest = out.with_name(out.name + ".manifest.json")
    write_manifest(manifest, "collect",
                   {"env": args.env, "constants": bundle.constants, "n_traj": n_traj,
                    "episode_len": episode_len, "transitions": len(dataset)},
                   {"collect": seed}, [], [out], started)
    print(f"wrote {len(dataset)} transitions to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- train

def write_loss_curve(model: DynamicsModel, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tr, va in model.loss_curve:
            w.writerow([epoch, repr(tr), repr(va)])


def train_model(dataset_path: Path, cfg: TrainConfig, out: Path) -> tuple[DynamicsModel, Path]:
    try:
        dataset = load_dataset(dataset_path, cfg.split_fraction)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load dataset {dataset_path}: {exc}") from None
    model = train(dataset, cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out)
    curve = out.with_name(out.stem + ".loss.csv")
    write_loss_curve(model, curve)
    return model, curve


def cmd_train(args) -> int:
    started = time.time()
    base = _load_bundle(args.config).train if args.config else TrainConfig()
    overrides = {k: v for k, v in {
        "hidden_sizes": args.hidden, "learning_rate": args.lr, "epochs": args.epochs,
        "batch_size": args.batch_size, "momentum": args.momentum, "seed": args.seed,
    }.items() if v is not None}
    try:
        cfg = dataclasses.replace(base, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    dataset_path = Path(args.dataset)
    model, curve = train_model(dataset_path, cfg, out)
    manifest = out.with_name(out.name + ".manifest.json")
    write_manifest(manifest, "train", {"train": cfg}, {"train": cfg.seed},
                   [dataset_path], [out, curve], started)
    _, tr, va = model.loss_curve[-1]
    print(f"final train loss {tr:.6g}, val loss {va:.6g}; checkpoint {out}")
    return EXIT_OK


# ---------------------------------------------------------------- run

def episode_seeds(seed: int, index: int) -> tuple[int, int]:
    """Environment reset seed and planner seed for episode ``index``."""
    reset_seed, plan_seed = np.random.SeedSequence([seed, index]).generate_state(2)
    return int(reset_seed), int(plan_seed)


def _episode_job(job) -> tuple[int, EpisodeResult]:
    index, env_id, constants, spec, model, cfg, max_steps, seed = job
    env = make_env(env_id, **constants)
    reset_seed, plan_seed = episode_seeds(seed, index)
    env.reset(reset_seed)
    cfg = dataclasses.replace(cfg, seed=plan_seed)
    return index, run_episode(env, model, parse(spec), cfg, max_steps)


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def run_episodes(bundle: EnvSpecBundle, model: DynamicsModel, spec: str, cfg: MpcConfig,
                 episodes: int, max_steps: int, seed: int) -> list[EpisodeResult]:
    """Run seeded episodes, in worker processes when ``STL_MPC_THREADS`` > 1."""
    jobs = [(i, bundle.env_id, bundle.constants, spec, model, cfg, max_steps, seed)
            for i in range(episodes)]
    workers = min(_threads(), episodes)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_episode_job, jobs))
    else:
        done = []
        for job in jobs:
            done.append(_episode_job(job))
            log.info("episode %d: rho %.4g", job[0], done[-1][1].robustness)
    return [res for _, res in sorted(done, key=lambda item: item[0])]


def summarize(env_id: str, results: Sequence[EpisodeResult]) -> dict:
    rho_mean, rho_std = _mean_std([r.robustness for r in results])
    rewards = [r.reward for r in results if r.reward is not None]
    row = {"env": env_id, "episodes": len(results),
           "rho_mean": rho_mean, "rho_std": rho_std,
           "rho_positive": sum(r.robustness > 0 for r in results),
           "reward_mean": "", "reward_std": "",
           "rho": _fmt(rho_mean, rho_std), "reward": "--"}
    if rewards:
        rw_mean, rw_std = _mean_std(rewards)
        row.update(reward_mean=rw_mean, reward_std=rw_std, reward=_fmt(rw_mean, rw_std))
    return row


def _write_rows(path: Path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_run_outputs(out_dir: Path, env_id: str, results: Sequence[EpisodeResult],
                      emit_plot_data: bool) -> tuple[list[Path], dict]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, res in enumerate(results):
        path = out_dir / f"episode_{i:03d}.json"
        path.write_text(json.dumps(res.to_dict()) + "\n")
        written.append(path)
        if emit_plot_data:
            written.append(_write_series(out_dir / f"episode_{i:03d}_series.csv", res))
    summary = summarize(env_id, results)
    summary_path = out_dir / "summary.csv"
    _write_rows(summary_path, [summary])
    written.append(summary_path)
    return written, summary


def _write_series(path: Path, res: EpisodeResult) -> Path:
    """Per-step states, applied action and planner prediction for plotting."""
    traj = res.trajectory
    predicted = {}
    for entry in res.plan_log:
        predicted[entry["step"]] = entry["best_rho"]
    m = res.actions.shape[1] if res.actions.size else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "time", *traj.names, *[f"a{j}" for j in range(m)], "predicted_rho"])
        for t, row in enumerate(traj.samples):
            acts = res.actions[t].tolist() if t < len(res.actions) else [""] * m
            w.writerow([t, repr(t * traj.dt), *map(repr, row.tolist()), *acts,
                        predicted.get(t, "")])
    return path


def cmd_run(args) -> int:
    started = time.time()
    bundle = _bundle_for(args.env, args.config)
    spec = _read_spec(args) or bundle.spec
    phi = parse(spec)
    check_names(phi, bundle.names)
    try:
        model = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load checkpoint {args.checkpoint}: {exc}") from None
    env = bundle.make_env()
    if (model.state_dim, model.action_dim) != (env.state_dim, env.action_dim):
        raise UsageError(
            f"checkpoint dims (state {model.state_dim}, action {model.action_dim}) do not "
            f"match {args.env} (state {env.state_dim}, action {env.action_dim})")
    overrides = {k: v for k, v in {
        "horizon": args.horizon, "n_iter": args.n_iter, "n_samples": args.n_samples,
        "sigma0": args.sigma0}.items() if v is not None}
    if args.cold_start:
        overrides["warm_start"] = False
    cfg = dataclasses.replace(bundle.mpc, **overrides)
    episodes = args.episodes or bundle.episodes
    max_steps = args.max_steps or bundle.episode_len
    seed = bundle.run_seed if args.seed is None else args.seed
    results = run_episodes(bundle, model, spec, cfg, episodes, max_steps, seed)
    out_dir = Path(args.out)
    written, summary = write_run_outputs(out_dir, args.env, results, args.emit_plot_data)
    write_manifest(out_dir / "manifest.json", "run",
                   {"env": args.env, "constants": bundle.constants, "spec": spec, "mpc": cfg,
                    "episodes": episodes, "max_steps": max_steps},
                   {"run": seed, "episodes": [episode_seeds(seed, i) for i in range(episodes)]},
                   [Path(args.checkpoint)], written, started)
    print(f"{args.env}: rho {summary['rho']}, reward {summary['reward']}, "
          f"rho > 0 in {summary['rho_positive']}/{episodes} episodes")
    return EXIT_OK


# ---------------------------------------------------------------- check-spec

def cmd_check_spec(args) -> int:
    spec = _read_spec(args)
    if spec is None:
        raise UsageError("give a formula with --spec or --spec-file")
    phi = parse(spec)
    try:
        traj = Trajectory.read_csv(args.trace_file, args.dt)
    except OSError as exc:
        raise UsageError(f"cannot read trace file: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"malformed trace file {args.trace_file}: {exc}") from None
    check_names(phi, traj.names)
    rho = robustness(phi, traj, 0)
    verdict = "SAT" if satisfies(phi, traj, 0) else "UNSAT"
    print(f"rho = {rho:.6g}")
    print(verdict)
    return EXIT_OK


# ---------------------------------------------------------------- bench

BENCH_FIELDS = ("env", "episodes", "rho", "reward", "ref_rho", "ref_reward", "status")


def bench_env(bundle: EnvSpecBundle, out_dir: Path, episodes: int, max_steps: int | None,
              n_traj: int | None, epochs: int | None) -> tuple[dict, list[Path]]:
    env_dir = out_dir / bundle.env_id
    env_dir.mkdir(parents=True, exist_ok=True)
    data_path = env_dir / "dataset.npz"
    collect_dataset(bundle, n_traj or bundle.n_traj, bundle.collect_episode_len,
                    bundle.collect_seed, data_path)
    cfg = bundle.train if epochs is None else dataclasses.replace(bundle.train, epochs=epochs)
    ckpt = env_dir / "model.json"
    model, curve = train_model(data_path, cfg, ckpt)
    results = run_episodes(bundle, model, bundle.spec, bundle.mpc, episodes,
                           max_steps or bundle.episode_len, bundle.run_seed)
    written, summary = write_run_outputs(env_dir / "run", bundle.env_id, results, False)
    return summary, [data_path, ckpt, curve, *written]


def cmd_bench(args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, written, failed = [], [], []
    for env_id in (*BENCH_ENVS, "fetch"):
        bundle = load_bundle(env_id)
        ref = {"ref_rho": bundle.reference.get("rho", ""),
               "ref_reward": bundle.reference.get("reward", "--")}
        if not bundle.simulated:
            rows.append({"env": env_id, "episodes": 0, "rho": "", "reward": "--", **ref,
                         "status": "out of scope"})
            continue
        if args.desk:
            bundle = bundle.desk_scale()
        try:
            summary, files = bench_env(bundle, out_dir, args.episodes or bundle.episodes,
                                       args.max_steps, args.n_traj, args.epochs)
        except (TrainingDiverged, FloatingPointError, RuntimeError, ValueError) as exc:
            log.error("%s failed: %s", env_id, exc)
            failed.append(env_id)
            rows.append({"env": env_id, "episodes": 0, "rho": "", "reward": "", **ref,
                         "status": f"failed: {exc}"})
            continue
        written.extend(files)
        rows.append({"env": env_id, "episodes": summary["episodes"], "rho": summary["rho"],
                     "reward": summary["reward"], **ref, "status": "ok"})
    table = out_dir / "table.csv"
    with open(table, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        w.writeheader()
        w.writerows(rows)
    markdown = out_dir / "table.md"
    lines = ["| " + " | ".join(BENCH_FIELDS) + " |", "|" + "---|" * len(BENCH_FIELDS)]
    lines += ["| " + " | ".join(str(r[k]) for k in BENCH_FIELDS) + " |" for r in rows]
    markdown.write_text("\n".join(lines) + "\n")
    write_manifest(out_dir / "manifest.json", "bench",
                   {"suite": args.suite, "desk": args.desk, "episodes": args.episodes,
                    "max_steps": args.max_steps, "n_traj": args.n_traj, "epochs": args.epochs},
                   {env_id: load_bundle(env_id).run_seed for env_id in BENCH_ENVS},
                   [], [*written, table, markdown], started)
    print(markdown.read_text(), end="")
    return EXIT_RUNTIME if failed else EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stlmpc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="random-controller transitions to CSV or .npz")
    p.add_argument("env")
    p.add_argument("--config", help="INI config (defaults to the built-in one for ENV)")
    p.add_argument("--n-traj", type=_positive_int)
    p.add_argument("--episode-len", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="fit a dynamics model on a dataset")
    p.add_argument("dataset")
    p.add_argument("--config", help="take training defaults from this env id or INI file")
    p.add_argument("--hidden", type=_hidden)
    p.add_argument("--lr", type=_positive_float)
    p.add_argument("--epochs", type=_positive_int)
    p.add_argument("--batch-size", type=_positive_int)
    p.add_argument("--momentum", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="closed-loop MPC episodes with a trained model")
    p.add_argument("env")
    p.add_argument("checkpoint")
    spec = p.add_mutually_exclusive_group()
    spec.add_argument("--spec")
    spec.add_argument("--spec-file")
    p.add_argument("--config")
    p.add_argument("--horizon", type=_positive_int)
    p.add_argument("--n-iter", type=_positive_int)
    p.add_argument("--n-samples", type=_positive_int)
    p.add_argument("--sigma0", type=_positive_float)
    p.add_argument("--episodes", type=_positive_int)
    p.add_argument("--max-steps", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--cold-start", action="store_true", help="disable warm starting")
    p.add_argument("--emit-plot-data", action="store_true", help="write per-step series CSVs")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-spec", help="robustness and verdict of a formula on a trace")
    spec = p.add_mutually_exclusive_group(required=True)
    spec.add_argument("--spec")
    spec.add_argument("--spec-file")
    p.add_argument("--trace-file", required=True)
    p.add_argument("--dt", type=_positive_float, default=1.0)
    p.set_defaults(func=cmd_check_spec)

    p = sub.add_parser("bench", help="collect, train and run every built-in benchmark")
    p.add_argument("--suite", choices=["table1"], default="table1")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--desk", action="store_true", help="apply the reduced [desk] budgets")
    p.add_argument("--episodes", type=_positive_int)
    p.add_argument("--max-steps", type=_positive_int)
    p.add_argument("--n-traj", type=_positive_int)
    p.add_argument("--epochs", type=_positive_int)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, StlSyntaxError, DimensionError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, FloatingPointError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
