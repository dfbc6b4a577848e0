"""Command-line front end: run lifecycle, artifacts, and plot-data export.

A run directory is self-describing: it always holds the resolved config
snapshot (config.json), a manifest (manifest.json) naming the command and
seeds that produced it, the per-episode metrics table (metrics.csv), and a
checkpoint (checkpoint.npz) that bundles every network, optimizer, replay
buffer, and the training RNG state. `resume` needs nothing beyond the
directory itself, and a resumed run reproduces the uninterrupted one bit
for bit.

File formats are deliberately boring: CSV with repr-formatted floats (so a
rerun with the same seed is byte-identical and values round-trip exactly),
JSON for metadata, JSONL with one slot per line for trajectories.

Set UAVWPCN_OUT_ROOT to re-root relative --out paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import (
    WorldConfig,
    config_to_dict,
    desk_config,
    load_config,
    save_config,
)
from .neural import load_checkpoint, save_checkpoint
from .orchestrator import (
    METRIC_COLUMNS,
    Fleet,
    SCHEMES,
    TrainRun,
    dcov_sweep,
    run_benchmark,
    run_evaluation,
    run_training,
    scalability_sweep,
)

PROFILES = {"full": WorldConfig, "desk": desk_config}

EVAL_FIXED_COLUMNS = ("episode", "c_total", "wn_met", "all_met", "uav_safe",
                      "min_end_battery", "sep_violations")


class CliError(Exception):
    """Anything that should abort with a diagnostic instead of a traceback."""


# -- formatting ------------------------------------------------------------

def format_cell(value) -> str:
    """Floats via repr so equal values always print the same bytes and
    parse back exactly; everything else via str."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(row[c]) for c in columns) + "\n")


def read_csv(path: Path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise CliError(f"{path}: empty metrics file")
    columns = lines[0].split(",")
    return [dict(zip(columns, map(parse_cell, line.split(","))))
            for line in lines[1:]]


# -- run directories -------------------------------------------------------

def resolve_out(raw: str) -> Path:
    path = Path(raw)
    root = os.environ.get("UAVWPCN_OUT_ROOT")
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def prepare_out_dir(raw, force: bool) -> Path:
    out = resolve_out(raw) if isinstance(raw, str) else raw
    if out.exists():
        if not out.is_dir():
            raise CliError(f"{out} exists and is not a directory")
        if any(out.iterdir()) and not force:
            raise CliError(f"{out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_run_dir(raw: str):
    out = resolve_out(raw)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise CliError(f"{out}: no manifest.json; not a run directory")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    cfg = load_config(out / manifest["config"])
    return out, manifest, cfg


def write_manifest(out: Path, manifest: dict) -> None:
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_run_checkpoint(out: Path, run: TrainRun) -> None:
    meta = dict(run.fleet.meta())
    meta.update({
        "scheme": run.scheme, "seed": run.seed, "episodes": run.episodes,
        "completed": run.completed, "tbar": run.tbar,
        "rng_state": run.rng.bit_generator.state,
    })
    save_checkpoint(out / "checkpoint.npz", run.fleet.state_dict(), meta)


def load_run_checkpoint(out: Path, cfg: WorldConfig):
    arrays, meta = load_checkpoint(out / "checkpoint.npz")
    fleet = Fleet(cfg, np.random.default_rng(0))   # init weights are replaced
    fleet.check_meta(meta)
    fleet.load_state_dict(arrays)
    return fleet, meta


def restored_rng(meta: dict) -> np.random.Generator:
    rng = np.random.default_rng()
    state = meta.get("rng_state")
    if state is None:
        print("warning: checkpoint has no RNG state; continuing with a "
              "fresh generator", file=sys.stderr)
        return rng
    rng.bit_generator.state = state
    return rng


class MetricsWriter:
    """Streams metric rows so an interrupted run keeps what it finished."""

    def __init__(self, path: Path, resume: bool):
        self.path = path
        if not resume:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(",".join(METRIC_COLUMNS) + "\n")

    def __call__(self, row: dict) -> None:
        with open(self.path, "a", encoding="utf-8", newline="") as fh:
            fh.write(",".join(format_cell(row[c]) for c in METRIC_COLUMNS) + "\n")


def write_trajectory(path: Path, episodes) -> None:
    """JSONL, one slot per line, episode index attached to each."""
    with open(path, "w", encoding="utf-8") as fh:
        for ep, history in episodes:
            for entry in history:
                fh.write(json.dumps({"episode": ep, **entry}, sort_keys=True))
                fh.write("\n")


def eval_rows(reports, num_wns: int):
    columns = list(EVAL_FIXED_COLUMNS)
    columns += [f"wn{i}_total" for i in range(num_wns)]
    columns += [f"wn{i}_met" for i in range(num_wns)]
    rows = []
    for ep, report in enumerate(reports):
        row = {
            "episode": ep,
            "c_total": report.c_total,
            "wn_met": int(report.wn_met.sum()),
            "all_met": int(report.all_met),
            "uav_safe": int(report.uav_safe.sum()),
            "min_end_battery": float(report.uav_end_batteries.min()),
            "sep_violations": report.separation_violations,
        }
        for i in range(num_wns):
            row[f"wn{i}_total"] = float(report.wn_totals[i])
            row[f"wn{i}_met"] = int(report.wn_met[i])
        rows.append(row)
    return columns, rows


# -- subcommands -----------------------------------------------------------

def pick_config(args) -> WorldConfig:
    if args.config is not None:
        return load_config(args.config)
    return PROFILES[args.profile]()


def cmd_train(args) -> int:
    cfg = pick_config(args)
    out = prepare_out_dir(args.out, args.force)
    save_config(cfg, out / "config.json")
    writer = MetricsWriter(out / "metrics.csv", resume=False)
    run = run_training(cfg, args.episodes, args.seed, scheme=args.scheme,
                       tbar=args.tbar, stop_after=args.stop_after,
                       on_episode=writer)
    save_run_checkpoint(out, run)
    write_manifest(out, {
        "command": "train", "scheme": run.scheme, "seed": run.seed,
        "episodes": run.episodes, "completed": run.completed,
        "tbar": run.tbar, "config": "config.json",
        "checkpoint": "checkpoint.npz", "metrics": "metrics.csv",
    })
    if run.completed:
        print(f"{out}: {run.completed}/{run.episodes} episodes, "
              f"trailing mean c_total {run.final_c_total():.2f}")
    else:
        print(f"{out}: empty run")
    return 0


def cmd_resume(args) -> int:
    out, manifest, cfg = load_run_dir(args.run)
    if manifest["command"] != "train":
        raise CliError(f"{out}: can only resume train runs, "
                       f"this is a {manifest['command']} run")
    if manifest["completed"] >= manifest["episodes"]:
        print(f"{out}: already complete "
              f"({manifest['completed']}/{manifest['episodes']})")
        return 0
    fleet, meta = load_run_checkpoint(out, cfg)
    metrics = read_csv(out / manifest["metrics"])
    if len(metrics) != manifest["completed"]:
        raise CliError(f"{out}: metrics.csv has {len(metrics)} rows, "
                       f"manifest says {manifest['completed']} episodes")
    run = TrainRun(cfg=cfg, scheme=manifest["scheme"], seed=manifest["seed"],
                   episodes=manifest["episodes"], metrics=metrics,
                   fleet=fleet, rng=restored_rng(meta), tbar=manifest["tbar"])
    writer = MetricsWriter(out / manifest["metrics"], resume=True)
    run = run_training(cfg, run.episodes, run.seed, scheme=run.scheme,
                       tbar=run.tbar, stop_after=args.until,
                       resume_from=run, on_episode=writer)
    save_run_checkpoint(out, run)
    manifest["completed"] = run.completed
    write_manifest(out, manifest)
    print(f"{out}: {run.completed}/{run.episodes} episodes")
    return 0


def cmd_eval(args) -> int:
    run_dir, manifest, cfg = load_run_dir(args.run)
    fleet, _ = load_run_checkpoint(run_dir, cfg)
    out = prepare_out_dir(args.out if args.out else run_dir / "eval",
                          args.force)
    results = run_evaluation(cfg, fleet, args.episodes, args.seed,
                             scheme=manifest.get("scheme", "mahdrl"),
                             tbar=manifest.get("tbar"))
    columns, rows = eval_rows([r for r, _ in results], cfg.num_wns)
    write_csv(out / "eval_reports.csv", columns, rows)
    write_trajectory(out / "trajectory.jsonl",
                     [(ep, h) for ep, (_, h) in enumerate(results)])
    met = sum(r["all_met"] for r in rows)
    print(f"{out}: {len(rows)} episodes, {met} met every requirement")
    return 0


def cmd_benchmark(args) -> int:
    cfg = pick_config(args)
    out = prepare_out_dir(args.out, args.force)
    save_config(cfg, out / "config.json")
    manifest = {
        "command": "benchmark", "scheme": args.scheme, "seed": args.seed,
        "config": "config.json", "checkpoint": "checkpoint.npz",
        "metrics": "metrics.csv",
    }
    if args.scheme == "phase_division":
        grid = [int(t) for t in args.tbar_grid.split(",")] \
            if args.tbar_grid else None
        result = run_benchmark("phase_division", cfg, args.episodes, args.seed,
                               tbar_grid=grid, tbar_episodes=args.tbar_episodes)
        write_csv(out / "tbar_sweep.csv", ("tbar", "c_total"),
                  [{"tbar": t, "c_total": c} for t, c in result.curve])
        run = result.best_run
        write_csv(out / "metrics.csv", METRIC_COLUMNS, run.metrics)
        manifest.update({"episodes": run.episodes, "completed": run.completed,
                         "tbar": result.best_tbar,
                         "tbar_sweep": "tbar_sweep.csv"})
        save_run_checkpoint(out, run)
        write_manifest(out, manifest)
        best_score = max(c for _, c in result.curve)
        print(f"{out}: best switch slot {result.best_tbar}, "
              f"c_total {best_score:.2f}")
    else:
        writer = MetricsWriter(out / "metrics.csv", resume=False)
        run = run_benchmark(args.scheme, cfg, args.episodes, args.seed,
                            on_episode=writer)
        manifest.update({"episodes": run.episodes, "completed": run.completed,
                         "tbar": None})
        save_run_checkpoint(out, run)
        write_manifest(out, manifest)
        print(f"{out}: {run.completed}/{run.episodes} episodes, "
              f"trailing mean c_total {run.final_c_total():.2f}")
    return 0


def cmd_sweep(args) -> int:
    cfg = pick_config(args)
    out = prepare_out_dir(args.out, args.force)
    save_config(cfg, out / "config.json")
    seeds = [int(s) for s in args.seeds.split(",")]
    if args.what == "dcov":
        values = [float(v) for v in args.dcov.split(",")]
        rows = dcov_sweep(cfg, values, args.episodes, seeds)
        write_csv(out / "dcov_sweep.csv", ("d_cov", "seed", "c_total"), rows)
        table = "dcov_sweep.csv"
    else:
        counts = [int(v) for v in args.uavs.split(",")]
        cmins = [float(v) for v in args.cmins.split(",")]
        rows = scalability_sweep(cfg, counts, cmins, args.episodes, seeds[0])
        write_csv(out / "scalability.csv",
                  ("num_uavs", "num_wns", "c_min", "c_total"), rows)
        table = "scalability.csv"
    write_manifest(out, {
        "command": "sweep", "what": args.what, "seeds": seeds,
        "episodes": args.episodes, "config": "config.json", "table": table,
    })
    print(f"{out}: {len(rows)} rows in {table}")
    return 0


def cmd_export(args) -> int:
    run_dir, manifest, cfg = load_run_dir(args.run)
    if args.what == "metrics":
        rows = read_csv(run_dir / manifest["metrics"])
        target = resolve_out(args.out) if args.out \
            else run_dir / "metrics_export.csv"
        write_csv(target, METRIC_COLUMNS, rows)
        print(f"{target}: {len(rows)} rows")
        return 0
    # trajectory: one deterministic rollout of the stored policy
    fleet, _ = load_run_checkpoint(run_dir, cfg)
    results = run_evaluation(cfg, fleet, 1, args.seed,
                             scheme=manifest.get("scheme", "mahdrl"),
                             tbar=manifest.get("tbar"))
    target = resolve_out(args.out) if args.out else run_dir / "trajectory.jsonl"
    write_trajectory(target, [(0, results[0][1])])
    print(f"{target}: {len(results[0][1])} slots")
    return 0


# -- argument plumbing -----------------------------------------------------

def add_config_args(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--config", help="path to a config JSON")
    group.add_argument("--profile", choices=sorted(PROFILES), default="desk",
                       help="built-in scenario preset (default: desk)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavwpcn",
        description="Train, evaluate, and export the UAV charging-and-"
                    "collection simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the two-tier learner")
    add_config_args(p)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", choices=SCHEMES, default="mahdrl")
    p.add_argument("--tbar", type=int, default=None,
                   help="switch slot (phase_division only)")
    p.add_argument("--stop-after", type=int, default=None,
                   help="checkpoint and exit after this many episodes")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true",
                   help="write into a non-empty output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("resume", help="continue an interrupted train run")
    p.add_argument("--run", required=True)
    p.add_argument("--until", type=int, default=None,
                   help="stop again after this many total episodes")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("eval", help="deterministic rollouts of a trained run")
    p.add_argument("--run", required=True)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None,
                   help="output directory (default: RUN/eval)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("benchmark", help="train a comparison scheme")
    add_config_args(p)
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tbar-grid", default=None,
                   help="comma-separated switch slots (phase_division)")
    p.add_argument("--tbar-episodes", type=int, default=100,
                   help="training episodes per switch-slot candidate")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sweep", help="grid runs over fleet size or radio range")
    add_config_args(p)
    p.add_argument("--what", choices=("scalability", "dcov"), required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seeds", default="0",
                   help="comma-separated seeds (dcov uses all, "
                        "scalability uses the first)")
    p.add_argument("--uavs", default="1,2",
                   help="fleet sizes for --what scalability")
    p.add_argument("--cmins", default="100",
                   help="data requirements for --what scalability")
    p.add_argument("--dcov", default="5,20,80",
                   help="reporting radii for --what dcov")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="re-emit run artifacts for plotting")
    p.add_argument("--run", required=True)
    p.add_argument("--what", choices=("trajectory", "metrics"),
                   default="trajectory")
    p.add_argument("--seed", type=int, default=0,
                   help="world seed for the trajectory rollout")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
