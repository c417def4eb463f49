"""Training/evaluation orchestration and result artifacts.

File formats:
  learning curve CSV  : global_step,episode,episode_return,steps,outcome
  trajectory CSV      : t,x,y,psi,u,v,r,n1,n2,n3,action1,action2,action3,reward,in_triangle
  evaluation summary  : JSON mirroring EvalSummary
  checkpoints         : one flat binary per network (see nn module)
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agents import (
    PPOAgent,
    ReplayBuffer,
    RolloutBatch,
    SACAgent,
    TD3Agent,
    Transition,
    make_agent,
)
from .config import RunConfig
from .env import ACT_DIM, OBS_DIM, AuvState, DockingEnv
from .nn import MlpNet, load_checkpoint, save_checkpoint
from .reward import DockGeometry, TerminalKind

CURVE_HEADER = "global_step,episode,episode_return,steps,outcome"
TRAJ_HEADER = "t,x,y,psi,u,v,r,n1,n2,n3,action1,action2,action3,reward,in_triangle"

OUTCOME_COLORS = {
    TerminalKind.GOAL: "#2e8b57",
    TerminalKind.VIOLATION: "#c0392b",
    TerminalKind.TIMEOUT: "#e67e22",
    TerminalKind.NONE: "#888888",
}


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class EpisodeRecord:
    seed: tuple
    initial_state: AuvState
    rows: list  # (t, raw state 9-tuple, action 3-tuple, reward, in_triangle)
    outcome: TerminalKind
    episode_return: float
    steps: int


@dataclass
class EvalSummary:
    mean_return: float
    std_return: float
    mean_steps_to_goal: float | None
    success_count: int
    episode_count: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _fmt(x: float) -> str:
    return repr(float(x))


def _agent_nets(agent) -> dict[str, MlpNet]:
    if isinstance(agent, (TD3Agent, SACAgent)):
        return {"actor": agent.actor, "critic1": agent.critic1, "critic2": agent.critic2}
    if isinstance(agent, PPOAgent):
        return {"actor": agent.policy, "value": agent.value_net}
    raise TypeError(f"unknown agent type {type(agent)!r}")


def _save_all(agent, out_dir: Path, tag: str) -> None:
    for name, net in _agent_nets(agent).items():
        save_checkpoint(net, out_dir / f"{name}_{tag}.bin")


def train(cfg: RunConfig, out_dir) -> dict:
    """Train the configured agent; returns a small summary dict.

    Fully deterministic for a fixed harness.seed: the environment,
    exploration and update random streams are split from it.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write_probe"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise OSError(f"output directory {out_dir} is not writable: {e}") from e

    with open(out_dir / "resolved_config.json", "w") as f:
        json.dump(cfg.to_dict(), f, indent=2)

    seed = cfg.harness.seed
    ss = np.random.SeedSequence([seed, 77])
    env_seq, explore_seq = ss.spawn(2)
    env = cfg.build_env(np.random.default_rng(env_seq))
    explore_rng = np.random.default_rng(explore_seq)
    agent = make_agent(OBS_DIM, ACT_DIM, cfg.agent, seed)

    total = cfg.harness.total_timesteps
    curve_path = out_dir / "learning_curve.csv"
    curve = open(curve_path, "w")
    curve.write(CURVE_HEADER + "\n")

    if total == 0:
        curve.close()
        _save_all(agent, out_dir, "final")
        return {"episodes": 0, "global_steps": 0, "out_dir": str(out_dir)}

    off_policy = cfg.agent.algo in ("td3", "sac")
    buffer = ReplayBuffer(cfg.agent.buffer_capacity, OBS_DIM, ACT_DIM) if off_policy else None
    rollout: list | None = [] if not off_policy else None

    obs = env.reset()
    ep_return = 0.0
    ep_steps = 0
    episode = 0
    episodes_done = 0
    ou_noise = np.zeros(ACT_DIM)  # exploration noise state (reset per episode)
    held_action = None  # sticky random action during warmup

    def check_losses(losses: dict, step: int) -> None:
        for k, v in losses.items():
            if not math.isfinite(v):
                _save_all(agent, out_dir, "diverged")
                curve.close()
                raise TrainingDiverged(
                    f"non-finite {k} at global step {step}; diagnostic checkpoints written"
                )

    for global_step in range(1, total + 1):
        if off_policy:
            if global_step <= cfg.agent.warmup_steps:
                # sticky uniform actions: sustained thrust segments cover far
                # more of the workspace than a per-step random walk
                if held_action is None or explore_rng.random() < 1.0 / cfg.agent.warmup_hold:
                    held_action = explore_rng.uniform(-1.0, 1.0, size=ACT_DIM)
                action = held_action
            elif cfg.agent.algo == "td3":
                sigma = cfg.agent.exploration_noise_std
                if cfg.agent.exploration_noise_final >= 0.0:
                    frac = global_step / total
                    sigma += (cfg.agent.exploration_noise_final - sigma) * frac
                if cfg.agent.exploration == "ou":
                    ou_noise = (
                        (1.0 - cfg.agent.ou_theta) * ou_noise
                        + sigma * explore_rng.standard_normal(ACT_DIM)
                    )
                    action = np.clip(agent.select_action(obs, 0.0, explore_rng) + ou_noise, -1.0, 1.0)
                else:
                    action = agent.select_action(obs, sigma, explore_rng)
            else:
                action, _ = agent.select_action(obs, explore_rng)
            next_obs, r, outcome, info = env.step(action)
            buffer.push(
                Transition(obs, np.clip(action, -1, 1), r, next_obs, outcome.is_terminal)
            )
            if global_step > cfg.agent.warmup_steps:
                for _ in range(cfg.agent.updates_per_step):
                    check_losses(agent.update(buffer), global_step)
        else:
            action, logp, value = agent.select_action(obs, explore_rng)
            next_obs, r, outcome, info = env.step(action)
            next_value = agent.state_value(next_obs)
            rollout.append(
                (
                    obs,
                    action,
                    logp,
                    value,
                    r,
                    1.0 if outcome.is_terminal else 0.0,
                    1.0 if outcome is not TerminalKind.NONE else 0.0,
                    next_value,
                )
            )
            if len(rollout) >= cfg.agent.rollout_length:
                cols = list(zip(*rollout))
                batch = RolloutBatch(
                    states=np.asarray(cols[0]),
                    actions=np.asarray(cols[1]),
                    log_probs=np.asarray(cols[2]),
                    values=np.asarray(cols[3]),
                    rewards=np.asarray(cols[4]),
                    terminal_flags=np.asarray(cols[5]),
                    episode_ends=np.asarray(cols[6]),
                    next_values=np.asarray(cols[7]),
                )
                check_losses(agent.update(batch), global_step)
                rollout.clear()

        ep_return += r
        ep_steps += 1
        obs = next_obs

        if outcome is not TerminalKind.NONE:
            curve.write(
                f"{global_step},{episode},{_fmt(ep_return)},{ep_steps},{outcome.value}\n"
            )
            episodes_done += 1
            episode += 1
            obs = env.reset()
            ep_return = 0.0
            ep_steps = 0
            ou_noise = np.zeros(ACT_DIM)
            held_action = None

        if global_step % cfg.harness.checkpoint_interval == 0 and global_step < total:
            _save_all(agent, out_dir, f"{global_step:08d}")

    curve.close()
    _save_all(agent, out_dir, "final")
    return {"episodes": episodes_done, "global_steps": total, "out_dir": str(out_dir)}


# ---- evaluation -------------------------------------------------------


def policy_from_checkpoint(algo: str, checkpoint_path):
    """Deterministic evaluation policy from an actor checkpoint file."""
    if algo in ("td3", "ppo"):
        net = load_checkpoint(checkpoint_path, output_activation="tanh")

        def policy(obs):
            return np.clip(net.forward(obs), -1.0, 1.0)

    elif algo == "sac":
        net = load_checkpoint(checkpoint_path, output_activation="identity")
        act_dim = net.sizes[-1] // 2

        def policy(obs):
            out = net.forward(obs)
            return np.tanh(out[:act_dim])

    else:
        raise ValueError(f"unknown algo {algo!r}")
    return policy


def eval_episode_seed(master_seed: int, run_idx: int, ep_idx: int):
    """Documented spawn-seed derivation: identical across algorithms."""
    return (master_seed, run_idx, ep_idx)


def run_episode(env: DockingEnv, policy, seed: tuple) -> EpisodeRecord:
    env.rng = np.random.default_rng(np.random.SeedSequence(list(seed)))
    obs = env.reset()
    initial = env.state
    rows = []
    ep_return = 0.0
    outcome = TerminalKind.NONE
    t = 0
    while outcome is TerminalKind.NONE:
        action = np.asarray(policy(obs), dtype=np.float64)
        obs, r, outcome, info = env.step(action)
        t += 1
        raw = info["state"].observation()
        rows.append((t, tuple(raw), tuple(info["action_applied"]), r, info["in_triangle"]))
        ep_return += r
    return EpisodeRecord(
        seed=seed,
        initial_state=initial,
        rows=rows,
        outcome=outcome,
        episode_return=ep_return,
        steps=t,
    )


def summarize_records(records: list[EpisodeRecord]) -> EvalSummary:
    returns = np.array([rec.episode_return for rec in records])
    goal_steps = [rec.steps for rec in records if rec.outcome is TerminalKind.GOAL]
    return EvalSummary(
        mean_return=float(returns.mean()),
        std_return=float(returns.std()),
        mean_steps_to_goal=float(np.mean(goal_steps)) if goal_steps else None,
        success_count=len(goal_steps),
        episode_count=len(records),
    )


def write_trajectory_csv(record: EpisodeRecord, path) -> None:
    with open(path, "w") as f:
        f.write(TRAJ_HEADER + "\n")
        for t, raw, action, r, inside in record.rows:
            vals = [str(t)]
            vals += [_fmt(x) for x in raw]
            vals += [_fmt(a) for a in action]
            vals.append(_fmt(r))
            vals.append("1" if inside else "0")
            f.write(",".join(vals) + "\n")


def read_trajectory_csv(path, geom: DockGeometry, workspace_half_extent: float) -> EpisodeRecord:
    """Rebuild an EpisodeRecord from its CSV; the outcome is re-derived from
    the final row (violation beats goal beats timeout, as in the env)."""
    from .dynamics import wrap_angle

    rows = []
    with open(path) as f:
        header = f.readline().strip()
        if header != TRAJ_HEADER:
            raise ValueError(f"{path}: unexpected trajectory header {header!r}")
        for line in f:
            parts = line.strip().split(",")
            t = int(parts[0])
            raw = tuple(float(x) for x in parts[1:10])
            action = tuple(float(x) for x in parts[10:13])
            r = float(parts[13])
            inside = parts[14] == "1"
            rows.append((t, raw, action, r, inside))
    if not rows:
        raise ValueError(f"{path}: empty trajectory")
    x, y, psi = rows[-1][1][0], rows[-1][1][1], rows[-1][1][2]
    if abs(x) > workspace_half_extent or abs(y) > workspace_half_extent:
        outcome = TerminalKind.VIOLATION
    elif (
        math.hypot(x - geom.goal.x, y - geom.goal.y) <= geom.goal_pos_tol
        and abs(wrap_angle(psi - geom.goal.psi)) <= geom.goal_yaw_tol
    ):
        outcome = TerminalKind.GOAL
    else:
        outcome = TerminalKind.TIMEOUT
    return EpisodeRecord(
        seed=(),
        initial_state=None,
        rows=rows,
        outcome=outcome,
        episode_return=float(sum(r[3] for r in rows)),
        steps=len(rows),
    )


def evaluate_policy(
    cfg: RunConfig,
    policy,
    out_dir=None,
    n_runs: int | None = None,
    n_episodes: int | None = None,
) -> tuple[EvalSummary, list[EpisodeRecord]]:
    n_runs = cfg.harness.eval_runs if n_runs is None else n_runs
    n_episodes = cfg.harness.eval_episodes if n_episodes is None else n_episodes
    env = cfg.build_env(np.random.default_rng(0))
    records = []
    for run in range(n_runs):
        for ep in range(n_episodes):
            seed = eval_episode_seed(cfg.harness.seed, run, ep)
            rec = run_episode(env, policy, seed)
            records.append(rec)
            if out_dir is not None:
                write_trajectory_csv(rec, Path(out_dir) / f"traj_run{run}_ep{ep}.csv")
    summary = summarize_records(records)
    if out_dir is not None:
        with open(Path(out_dir) / "eval_summary.json", "w") as f:
            json.dump(summary.to_dict(), f, indent=2)
    return summary, records


def evaluate(
    cfg: RunConfig,
    checkpoint_path,
    out_dir=None,
    n_runs: int | None = None,
    n_episodes: int | None = None,
):
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    policy = policy_from_checkpoint(cfg.agent.algo, checkpoint_path)
    return evaluate_policy(cfg, policy, out_dir, n_runs, n_episodes)


def smooth_curve(values, window: int = 20):
    """Trailing mean over the last `window` values (learning-curve figures)."""
    out = np.empty(len(values))
    for i in range(len(values)):
        out[i] = np.mean(values[max(0, i - window + 1) : i + 1])
    return out


# ---- plotting ---------------------------------------------------------


def plot_trajectories(
    records: list[EpisodeRecord],
    geom: DockGeometry,
    workspace_half_extent: float = 9.0,
    size: int = 600,
) -> str:
    """Top-down SVG of the workspace: +x (north) is up-page, +y is right.

    One polyline per episode, colored by outcome: green goal, red
    violation, orange timeout.
    """
    if not records:
        raise ValueError("plot_trajectories: need at least one episode record")

    margin = 30.0
    half = workspace_half_extent
    scale = (size - 2 * margin) / (2 * half)
    cx = size / 2.0
    cy = size / 2.0

    def to_svg(x: float, y: float) -> tuple[float, float]:
        return cx + y * scale, cy - x * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="#f4f8fb"/>',
    ]
    # workspace square
    x0, y0 = to_svg(half, -half)
    parts.append(
        f'<rect x="{x0:.1f}" y="{y0:.1f}" width="{2 * half * scale:.1f}" '
        f'height="{2 * half * scale:.1f}" fill="none" stroke="#334" stroke-width="1.5"/>'
    )
    # docking triangle (apex at goal, opening along goal heading)
    L = geom.triangle_length
    w = L * math.tan(geom.triangle_half_angle)
    c, s = math.cos(geom.goal.psi), math.sin(geom.goal.psi)
    corners = [(0.0, 0.0), (L, w), (L, -w)]
    pts = []
    for ax, ay in corners:
        gx = geom.goal.x + c * ax - s * ay
        gy = geom.goal.y + s * ax + c * ay
        sx, sy = to_svg(gx, gy)
        pts.append(f"{sx:.1f},{sy:.1f}")
    parts.append(
        f'<polygon points="{" ".join(pts)}" fill="none" stroke="#5577aa" '
        'stroke-width="1.2" stroke-dasharray="6 3"/>'
    )
    # goal tolerance circle
    gx, gy = to_svg(geom.goal.x, geom.goal.y)
    parts.append(
        f'<circle cx="{gx:.1f}" cy="{gy:.1f}" r="{geom.goal_pos_tol * scale:.1f}" '
        'fill="none" stroke="#000" stroke-width="1.5"/>'
    )
    for rec in records:
        pts = []
        if rec.initial_state is not None:
            sx, sy = to_svg(rec.initial_state.pose.x, rec.initial_state.pose.y)
            pts.append(f"{sx:.1f},{sy:.1f}")
        for _, raw, _, _, _ in rec.rows:
            sx, sy = to_svg(raw[0], raw[1])
            pts.append(f"{sx:.1f},{sy:.1f}")
        color = OUTCOME_COLORS[rec.outcome]
        parts.append(
            f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" '
            'stroke-width="1.5" stroke-opacity="0.85"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
