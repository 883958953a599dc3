"""Training loop, rollouts and artifact persistence."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .config import RunConfig, derive_seed, dump_config
from .controller import (
    Adam,
    QNet,
    ReplayBuffer,
    combined_reward,
    intrinsic_reward,
    policy_input,
    select_action,
    td_update,
)
from .env import EVENT_NAMES, N_ACTIONS, Action, ArenaEnv
from .errors import NumericFault, UsageError
from .events import entropy_curve
from .perception import Perception, prediction_error, uncertainty_map
from .trace import EpisodeTrace

log = logging.getLogger(__name__)

CSV_COLUMNS = ("step", "eps", "mean_q", "td_loss", "episode_reward")
POLICIES = ("greedy", "epsilon", "random", "oracle")


@dataclass
class Models:
    perception: Perception
    net: QNet
    target: QNet | None = None


def policy_in_dim(cfg: RunConfig) -> int:
    p = cfg.perception
    return p.feat_h * p.feat_w * (p.feat_d + 1)


def build_models(cfg: RunConfig) -> Models:
    perception = Perception(cfg.perception, cfg.env.frame_px, seed=derive_seed(cfg.master_seed, "perception"))
    net = QNet(policy_in_dim(cfg), cfg.dqn.agg_dim, N_ACTIONS, rng=np.random.default_rng(derive_seed(cfg.master_seed, "qnet")))
    return Models(perception, net, net.copy())


def checkpoint_blocks(models: Models, step: int) -> dict:
    blocks = {f"perception/{k}": v for k, v in models.perception.blocks().items()}
    blocks.update({f"qnet/{k}": v for k, v in models.net.params.items()})
    if models.target is not None:
        blocks.update({f"target/{k}": v for k, v in models.target.params.items()})
    blocks["meta/step"] = np.array([float(step)])
    return blocks


def save_checkpoint(path, models: Models, step: int) -> None:
    ckpt.save_blocks(path, checkpoint_blocks(models, step))


def load_models(path, cfg: RunConfig) -> Models:
    """Rebuild models for ``cfg`` and fill them from a checkpoint (shapes checked)."""
    blocks = ckpt.load_blocks(path)
    models = build_models(cfg)
    per = ckpt.group(blocks, "perception")
    ckpt.check_shapes(per, models.perception.blocks(), "perception")
    models.perception.load_blocks(per)
    q = ckpt.group(blocks, "qnet")
    ckpt.check_shapes(q, models.net.params, "qnet")
    for k in models.net.params:
        models.net.params[k] = q[k].copy()
    tgt = ckpt.group(blocks, "target")
    if tgt:
        ckpt.check_shapes(tgt, models.target.params, "target")
        for k in models.target.params:
            models.target.params[k] = tgt[k].copy()
    return models


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _check_writable(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out_dir} is not writable: {exc}") from exc


@dataclass
class TrainResult:
    out_dir: Path
    csv_path: Path
    final_checkpoint: Path
    steps: int
    td_updates: int


def run_training(cfg: RunConfig) -> TrainResult:
    """Phase 1 (random actions, predictor only) then phase 2 (epsilon-greedy, both losses)."""
    cfg.validate()
    out = Path(cfg.out_dir)
    _check_writable(out)
    (out / "config.txt").write_text(dump_config(cfg), encoding="utf-8")

    models = build_models(cfg)
    per, net, target = models.perception, models.net, models.target
    dq = cfg.dqn
    opt = Adam(net.params, dq.learn_rate)
    buf = ReplayBuffer(dq.buffer_capacity, policy_in_dim(cfg), dq.agg_dim)
    act_rng = np.random.default_rng(derive_seed(cfg.master_seed, "policy"))
    replay_rng = np.random.default_rng(derive_seed(cfg.master_seed, "replay"))
    uniform = np.full((cfg.perception.feat_h, cfg.perception.feat_w), 1.0 / (cfg.perception.feat_h * cfg.perception.feat_w))

    csv_buf = io.StringIO()
    writer = csv.writer(csv_buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    losses, qmax = [], []
    last_episode_reward = None
    episode_reward = 0.0
    episode = 0
    td_updates = 0
    env = f = alpha = hq = None
    ep_step = cfg.episode_horizon
    step = 0

    try:
        for step in range(cfg.total_steps):
            if ep_step >= cfg.episode_horizon:
                if step > 0:
                    last_episode_reward = episode_reward
                env_cfg = dataclasses.replace(cfg.env, seed=derive_seed(cfg.master_seed, f"train-episode/{episode}"))
                env = ArenaEnv(env_cfg)
                episode += 1
                per.reset()
                f = per.encode(env.render())
                alpha = uniform
                hq = net.zero_hidden()
                ep_step = 0
                episode_reward = 0.0

            x = policy_input(f, alpha)
            q, hq_new = net.q_values(x, hq)
            phase2 = step >= cfg.phase1_steps
            if phase2:
                eps = dq.epsilon(step - cfg.phase1_steps)
                a = select_action(q, eps, act_rng)
            else:
                eps = 1.0
                a = int(act_rng.integers(N_ACTIONS))

            obs, info = env.step(a)
            f2 = per.encode(obs)
            _, err, _ = per.train_step(f, f2, learn=True)
            alpha2 = uncertainty_map(err, cfg.perception.tau)
            r_int, _ = intrinsic_reward(alpha2)
            r = combined_reward(r_int, info.extrinsic_reward, dq.reward_mode, dq.hybrid_mix)
            # horizon cut-offs are truncations, not terminal states
            buf.push(x, hq, a, r, policy_input(f2, alpha2), hq_new, False)
            episode_reward += r

            if phase2:
                batch = buf.sample(min(dq.batch_size, len(buf)), replay_rng)
                losses.append(td_update(net, target, batch, dq.gamma, opt, dq.max_grad_norm))
                qmax.append(float(q.max()))
                td_updates += 1
                if td_updates % dq.target_sync_every == 0:
                    target.load_from(net)
                if (step + 1 - cfg.phase1_steps) % cfg.log_every == 0:
                    writer.writerow([step + 1, _fmt(eps), _fmt(np.mean(qmax)), _fmt(np.mean(losses)), _fmt(last_episode_reward)])
                    losses, qmax = [], []

            f, alpha, hq = f2, alpha2, hq_new
            ep_step += 1
            if (step + 1) % cfg.checkpoint_every == 0:
                save_checkpoint(out / f"ckpt_{step + 1:07d}.bin", models, step + 1)
    except NumericFault:
        save_checkpoint(out / "last_good.bin", models, step)
        (out / "train.csv").write_text(csv_buf.getvalue(), encoding="utf-8")
        log.error("numeric fault at step %d; saved last good state", step)
        raise

    if losses:
        writer.writerow([cfg.total_steps, _fmt(eps), _fmt(np.mean(qmax)), _fmt(np.mean(losses)), _fmt(last_episode_reward)])
    csv_path = out / "train.csv"
    csv_path.write_text(csv_buf.getvalue(), encoding="utf-8")
    final = out / "final.bin"
    save_checkpoint(final, models, cfg.total_steps)
    return TrainResult(out, csv_path, final, cfg.total_steps, td_updates)


def oracle_action(env: ArenaEnv, per: Perception, f_t: np.ndarray, tau: float) -> int:
    """Action whose simulated next frame puts the attention peak closest to center."""
    f_hat, _ = per.predict_next(f_t)
    best, best_r = 0, -np.inf
    for a in range(N_ACTIONS):
        sim = env.clone()
        obs, _ = sim.step(a)
        r, _ = intrinsic_reward(uncertainty_map(prediction_error(per.encode(obs), f_hat), tau))
        if r > best_r:
            best, best_r = a, r
    return best


def run_episode(models, cfg: RunConfig, seed: int, policy: str = "greedy", eps: float | None = None) -> EpisodeTrace:
    """One horizon-length rollout with frozen parameters.

    ``models`` is a checkpoint path or a ``Models`` instance.
    """
    if policy not in POLICIES:
        raise UsageError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    if not isinstance(models, Models):
        models = load_models(models, cfg)
    per, net = models.perception, models.net
    env = ArenaEnv(dataclasses.replace(cfg.env, seed=int(seed)))
    rng = np.random.default_rng(derive_seed(int(seed), f"rollout/{policy}"))
    eps = cfg.dqn.eps_final if eps is None else eps
    tau = cfg.perception.tau
    hw = cfg.perception.feat_h * cfg.perception.feat_w

    per.reset()
    f = per.encode(env.render())
    alpha = np.full((cfg.perception.feat_h, cfg.perception.feat_w), 1.0 / hw)
    hq = net.zero_hidden()
    trace = EpisodeTrace()
    for t in range(cfg.episode_horizon):
        q, hq = net.q_values(policy_input(f, alpha), hq)
        if policy == "greedy":
            a = int(np.argmax(q))
        elif policy == "epsilon":
            a = select_action(q, eps, rng)
        elif policy == "random":
            a = int(rng.integers(N_ACTIONS))
        else:
            a = oracle_action(env, per, f, tau)
        obs, info = env.step(a)
        f2 = per.encode(obs)
        f_hat, per.hidden = per.predict_next(f)
        err = prediction_error(f2, f_hat)
        alpha = uncertainty_map(err, tau)
        r_int, u = intrinsic_reward(alpha)
        trace.append({
            "step": t,
            "action": Action(a).name.lower(),
            "le": err.total,
            "entropy": None,
            "r_intrinsic": r_int,
            "r_extrinsic": info.extrinsic_reward,
            "alpha_argmax": list(u),
            "gt_boundary": bool(info.gt_boundary),
            "gt_event_kind": EVENT_NAMES[info.gt_event_kind],
            "target_visible": bool(info.target_visible),
            "hidden": hq.tolist(),
        })
        f = f2
    H = entropy_curve(trace.le, cfg.segmenter.window_n)
    for rec, h in zip(trace.records, H):
        rec["entropy"] = None if np.isnan(h) else float(h)
    return trace


def rollout(models, cfg: RunConfig, seeds, policy: str = "greedy", out_dir=None) -> list[EpisodeTrace]:
    if not isinstance(models, Models):
        models = load_models(models, cfg)
    traces = []
    for k, seed in enumerate(seeds):
        tr = run_episode(models, cfg, seed, policy)
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            tr.write(Path(out_dir) / f"episode_{k:03d}.jsonl")
        traces.append(tr)
    return traces


def eval_seeds(cfg: RunConfig, n: int | None = None) -> list[int]:
    """Held-out episode seeds (disjoint tag from the training episodes)."""
    n = cfg.eval_episodes if n is None else n
    return [derive_seed(cfg.master_seed, f"eval-episode/{k}") for k in range(n)]
