"""Command-line entry point: ``activeevent <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .env import Action, ArenaEnv, write_pgm
from .errors import ActiveEventError, FormatError, UsageError
from .events import SegmenterConfig, detect_boundaries, segments_from_boundaries, summarize
from .harness import POLICIES, eval_seeds, rollout, run_training
from .metrics import PROFILES, evaluate_episodes, metrics_csv
from .trace import EpisodeTrace, read_stream


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def read_boundaries(path) -> list[int]:
    """Boundary file: JSON array of ints or of ``{"t": ...}`` objects."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not isinstance(data, list):
        raise FormatError(f"{path}: expected a JSON array")
    out = []
    for item in data:
        t = item.get("t") if isinstance(item, dict) else item
        if isinstance(t, bool) or not isinstance(t, int):
            raise FormatError(f"{path}: boundary entries must be integers or objects with integer 't'")
        out.append(t)
    return out


def parse_actions(path) -> list[Action]:
    acts = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        tok = line.split("#", 1)[0].strip()
        if not tok:
            continue
        try:
            acts.append(Action(int(tok)) if tok.lstrip("-").isdigit() else Action[tok.upper()])
        except (KeyError, ValueError):
            raise FormatError(f"{path}:{i + 1}: unknown action {tok!r}") from None
    return acts


def _segmenter(args) -> SegmenterConfig:
    cfg = SegmenterConfig(window_n=args.window, nms_radius=args.radius, min_prominence=args.prominence, signal_mode=args.mode)
    cfg.validate()
    return cfg


def cmd_train(args) -> None:
    cfg = load_config(args.config)
    if args.out_dir:
        cfg = dataclasses.replace(cfg, out_dir=args.out_dir)
    res = run_training(cfg)
    print(json.dumps({"out_dir": str(res.out_dir), "checkpoint": str(res.final_checkpoint),
                      "csv": str(res.csv_path), "steps": res.steps, "td_updates": res.td_updates}))


def cmd_rollout(args) -> None:
    cfg = load_config(args.config)
    policy = "greedy" if args.greedy else args.policy
    n = args.episodes
    seeds = [args.seed + k for k in range(n)] if args.seed is not None else eval_seeds(cfg, n)
    out = Path(args.out or Path(cfg.out_dir) / "rollouts")
    traces = rollout(args.checkpoint, cfg, seeds, policy=policy, out_dir=out)
    for k, tr in enumerate(traces):
        print(json.dumps({"episode": str(out / f"episode_{k:03d}.jsonl"), "steps": len(tr),
                          "r_intrinsic": float(tr.rewards("intrinsic").mean())}))


def cmd_segment(args) -> None:
    cfg = _segmenter(args)
    stream = read_stream(args.input, args.mode)
    bounds = detect_boundaries(stream, cfg)
    _emit(json.dumps([b.to_json() for b in bounds]) + "\n", args.out)


def cmd_summarize(args) -> None:
    stream = read_stream(args.trace, "le")
    segs = segments_from_boundaries(len(stream), read_boundaries(args.boundaries))
    frames = summarize(stream, segs)
    _emit(json.dumps([f.to_json() for f in frames]) + "\n", args.out)


def _load_gt(gt_dir: Path, stem: str):
    trace, bounds = gt_dir / f"{stem}.jsonl", gt_dir / f"{stem}.json"
    if trace.exists():
        return EpisodeTrace.read(trace)
    if bounds.exists():
        return read_boundaries(bounds)
    raise FormatError(f"no ground truth for {stem!r} in {gt_dir}")


def cmd_evaluate(args) -> None:
    gt_dir = Path(args.gt)
    if not gt_dir.is_dir():
        raise UsageError(f"--gt {gt_dir} is not a directory")
    seg_cfg = _segmenter(args)
    preds, gts = [], []
    for p in args.preds:
        p = Path(p)
        if p.suffix == ".jsonl":
            preds.append([b.t for b in detect_boundaries(read_stream(p, args.mode), seg_cfg)])
        else:
            preds.append(read_boundaries(p))
        gts.append(_load_gt(gt_dir, p.name.split(".", 1)[0]))
    rows = evaluate_episodes(preds, gts, PROFILES[args.profile], channel=args.reward_channel,
                             env_config=args.env_config, regime=args.regime, mode=args.mode)
    _emit(metrics_csv(rows), args.out)


def cmd_dump_frames(args) -> None:
    cfg = load_config(args.config)
    env_cfg = cfg.env if args.seed is None else dataclasses.replace(cfg.env, seed=args.seed)
    actions = parse_actions(args.actions)
    env = ArenaEnv(env_cfg)
    frames = [env.render()]
    frames += [env.step(a)[0] for a in actions]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, fr in enumerate(frames):
        write_pgm(out / f"frame_{k:04d}.pgm", fr)
    print(json.dumps({"out": str(out), "frames": len(frames)}))


def _add_segmenter_args(p) -> None:
    p.add_argument("--window", type=int, default=30, help="entropy window length N")
    p.add_argument("--mode", choices=("le", "hidden"), default="le")
    p.add_argument("--radius", type=int, default=15, help="suppression radius in frames")
    p.add_argument("--prominence", type=float, default=None, help="minimum entropy drop (default 0.02 ln N)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="activeevent", description="Active event segmentation toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train perception and controller")
    p.add_argument("config")
    p.add_argument("--out-dir", default=None, help="override run.out_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rollout", help="roll out a checkpoint and write JSONL traces")
    p.add_argument("checkpoint")
    p.add_argument("config")
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--greedy", action="store_true", help="shorthand for --policy greedy")
    p.add_argument("--policy", choices=POLICIES, default="epsilon")
    p.add_argument("--seed", type=int, default=None, help="first episode seed (default: held-out seeds)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("segment", help="detect event boundaries in a trace or error stream")
    p.add_argument("input")
    _add_segmenter_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("summarize", help="pick one keyframe per segment")
    p.add_argument("trace")
    p.add_argument("boundaries")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("evaluate", help="score predicted boundaries against ground truth")
    p.add_argument("preds", nargs="+", help="boundary JSON files or traces (segmented on the fly)")
    p.add_argument("--gt", required=True, help="directory with <stem>.jsonl traces or <stem>.json boundaries")
    p.add_argument("--profile", choices=tuple(PROFILES), default="relaxed")
    _add_segmenter_args(p)
    p.add_argument("--reward-channel", choices=("intrinsic", "extrinsic"), default="extrinsic")
    p.add_argument("--regime", default="intrinsic", help="label for the training regime column")
    p.add_argument("--env-config", default="default")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dump-frames", help="render frames for an action script as PGM")
    p.add_argument("config")
    p.add_argument("actions")
    p.add_argument("--out", default="frames")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_dump_frames)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ActiveEventError, ValueError, OSError, FloatingPointError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
