"""From-scratch TD3, SAC and PPO on the MLP engine, plus their plumbing.

All three agents operate on the scaled 9-vector observation and emit
3-vector actions in [-1, 1].  Rewards are multiplied by
``AgentConfig.reward_scale`` inside the updates only; evaluation returns
are always raw environment rewards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nn import Adam, MlpNet, polyak_update

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class AgentConfig:
    algo: str = "td3"
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 1e-3
    actor_lr: float = -1.0  # if < 0, use lr for the actor too
    batch_size: int = 256
    buffer_capacity: int = 100_000
    hidden_sizes: tuple = (64, 64)
    warmup_steps: int = 1000
    updates_per_step: int = 1
    reward_scale: float = 0.01
    # TD3
    exploration_noise_std: float = 0.1
    exploration_noise_final: float = -1.0  # if >= 0, linear decay target
    exploration: str = "gaussian"  # per-step iid, or "ou" time-correlated
    ou_theta: float = 0.15
    warmup_hold: int = 1  # mean steps each random warmup action is held
    target_noise_std: float = 0.2
    target_noise_clip: float = 0.5
    policy_delay: int = 2
    # SAC
    sac_target_entropy: float = -3.0
    sac_init_alpha: float = 0.2
    # PPO
    ppo_clip: float = 0.2
    gae_lambda: float = 0.95
    rollout_length: int = 2048
    epochs_per_rollout: int = 10
    minibatch_size: int = 64
    entropy_coef: float = 0.0

    def validate(self) -> None:
        if self.algo not in ("td3", "sac", "ppo"):
            raise ValueError(f"agent.algo: unknown algorithm {self.algo!r}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("agent.gamma: must be in (0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("agent.tau: must be in (0, 1]")
        if self.ppo_clip <= 0:
            raise ValueError("agent.ppo_clip: must be positive")
        if self.policy_delay < 1:
            raise ValueError("agent.policy_delay: must be >= 1")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("agent.batch_size: need 1 <= batch_size <= buffer_capacity")
        if self.reward_scale <= 0:
            raise ValueError("agent.reward_scale: must be positive")
        if self.exploration not in ("gaussian", "ou"):
            raise ValueError("agent.exploration: must be 'gaussian' or 'ou'")
        if not 0.0 < self.ou_theta <= 1.0:
            raise ValueError("agent.ou_theta: must be in (0, 1]")
        if self.warmup_hold < 1:
            raise ValueError("agent.warmup_hold: must be >= 1")


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminal_flag: bool  # True only for Goal/Violation; False at truncation


class ReplayBuffer:
    """Fixed-capacity ring with uniform sampling (with replacement)."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError("ReplayBuffer capacity must be >= 1")
        self.capacity = capacity
        self.size = 0
        self.cursor = 0
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.terminals = np.zeros(capacity)

    def push(self, t: Transition) -> None:
        i = self.cursor
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.terminals[i] = 1.0 if t.terminal_flag else 0.0
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        if self.size < batch_size:
            raise RuntimeError(
                f"ReplayBuffer.sample: only {self.size} transitions stored, "
                f"need {batch_size}"
            )
        idx = rng.integers(0, self.size, size=batch_size)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.terminals[idx],
        )


def _concat_sa(s: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.concatenate([s, a], axis=-1)


class TD3Agent:
    def __init__(self, obs_dim: int, act_dim: int, cfg: AgentConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        ss = np.random.SeedSequence([seed, 1001])
        r_actor, r_c1, r_c2, self.update_rng = [
            np.random.default_rng(s) for s in ss.spawn(4)
        ]
        hs = list(cfg.hidden_sizes)
        self.actor = MlpNet([obs_dim] + hs + [act_dim], "tanh", r_actor, final_scale=1e-3)
        self.critic1 = MlpNet([obs_dim + act_dim] + hs + [1], "identity", r_c1)
        self.critic2 = MlpNet([obs_dim + act_dim] + hs + [1], "identity", r_c2)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        actor_lr = cfg.actor_lr if cfg.actor_lr > 0 else cfg.lr
        self.actor_opt = Adam(self.actor, lr=actor_lr)
        self.critic1_opt = Adam(self.critic1, lr=cfg.lr)
        self.critic2_opt = Adam(self.critic2, lr=cfg.lr)
        self.update_count = 0

    def select_action(self, state, noise_std: float, rng: np.random.Generator):
        a = self.actor.forward(np.asarray(state))
        if noise_std > 0:
            a = a + rng.normal(0.0, noise_std, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def td_target(self, r, s2, d):
        """y = r + gamma * (1 - d) * min(Q1', Q2') at the smoothed target action."""
        cfg = self.cfg
        noise = np.clip(
            self.update_rng.normal(0.0, cfg.target_noise_std, size=(len(r), self.act_dim)),
            -cfg.target_noise_clip,
            cfg.target_noise_clip,
        )
        a2 = np.clip(self.actor_target.forward(s2) + noise, -1.0, 1.0)
        sa2 = _concat_sa(s2, a2)
        q1 = self.critic1_target.forward(sa2)[:, 0]
        q2 = self.critic2_target.forward(sa2)[:, 0]
        return r + cfg.gamma * (1.0 - d) * np.minimum(q1, q2)

    def update(self, buffer: ReplayBuffer) -> dict:
        cfg = self.cfg
        s, a, r, s2, d = buffer.sample(self.update_rng, cfg.batch_size)
        r = r * cfg.reward_scale
        y = self.td_target(r, s2, d)
        sa = _concat_sa(s, a)
        losses = {}
        for name, critic, opt in (
            ("critic1", self.critic1, self.critic1_opt),
            ("critic2", self.critic2, self.critic2_opt),
        ):
            q = critic.forward(sa, cache=True)[:, 0]
            err = q - y
            losses[name + "_loss"] = float(np.mean(err**2))
            critic.zero_grads()
            critic.backward((2.0 * err / len(err))[:, None])
            opt.step()

        self.update_count += 1
        if self.update_count % cfg.policy_delay == 0:
            a_pi = self.actor.forward(s, cache=True)
            q = self.critic1.forward(_concat_sa(s, a_pi), cache=True)
            losses["actor_loss"] = float(-np.mean(q))
            # ascend Q1: input gradient of the critic, chained into the actor
            gin = self.critic1.backward(-np.ones_like(q) / len(q))
            self.actor.zero_grads()
            self.actor.backward(gin[:, self.obs_dim:])
            self.actor_opt.step()
            polyak_update(self.actor_target, self.actor, cfg.tau)
            polyak_update(self.critic1_target, self.critic1, cfg.tau)
            polyak_update(self.critic2_target, self.critic2, cfg.tau)
        return losses


def squashed_gaussian_logprob(z, eps, log_std):
    """log pi(a) for a = tanh(z), z = mean + std*eps, summed over dims.

    Uses log(1 - tanh(z)^2) = 2*(log 2 - z - softplus(-2z)) so the result
    stays finite for actions arbitrarily close to +-1.
    """
    softplus = np.logaddexp(0.0, -2.0 * z)
    log_det = 2.0 * (math.log(2.0) - z - softplus)
    logn = -0.5 * LOG_2PI - log_std - 0.5 * eps**2
    return np.sum(logn - log_det, axis=-1)


class SACAgent:
    def __init__(self, obs_dim: int, act_dim: int, cfg: AgentConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        ss = np.random.SeedSequence([seed, 2002])
        r_actor, r_c1, r_c2, self.update_rng = [
            np.random.default_rng(s) for s in ss.spawn(4)
        ]
        hs = list(cfg.hidden_sizes)
        self.actor = MlpNet(
            [obs_dim] + hs + [2 * act_dim], "identity", r_actor, final_scale=1e-3
        )
        self.critic1 = MlpNet([obs_dim + act_dim] + hs + [1], "identity", r_c1)
        self.critic2 = MlpNet([obs_dim + act_dim] + hs + [1], "identity", r_c2)
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        actor_lr = cfg.actor_lr if cfg.actor_lr > 0 else cfg.lr
        self.actor_opt = Adam(self.actor, lr=actor_lr)
        self.critic1_opt = Adam(self.critic1, lr=cfg.lr)
        self.critic2_opt = Adam(self.critic2, lr=cfg.lr)
        self.log_alpha = math.log(cfg.sac_init_alpha)
        self.update_count = 0

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    def update_temperature(self, neg_logp_mean: float) -> None:
        """Descend alpha * (-logpi - target_entropy) in log space: alpha
        grows while the policy entropy sits below the target."""
        c = neg_logp_mean - self.cfg.sac_target_entropy
        self.log_alpha -= self.cfg.lr * self.alpha * c

    def _head(self, out):
        mean = out[..., : self.act_dim]
        log_std_raw = out[..., self.act_dim:]
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std, log_std_raw

    def select_action(self, state, rng: np.random.Generator, deterministic: bool = False):
        out = self.actor.forward(np.asarray(state))
        mean, log_std, _ = self._head(out)
        if deterministic:
            eps = np.zeros_like(mean)
        else:
            eps = rng.standard_normal(mean.shape)
        z = mean + np.exp(log_std) * eps
        a = np.tanh(z)
        logp = squashed_gaussian_logprob(z, eps, log_std)
        return a, logp

    def update(self, buffer: ReplayBuffer) -> dict:
        cfg = self.cfg
        s, a, r, s2, d = buffer.sample(self.update_rng, cfg.batch_size)
        r = r * cfg.reward_scale
        B = len(r)

        a2, logp2 = self.select_action(s2, self.update_rng)
        sa2 = _concat_sa(s2, a2)
        q1t = self.critic1_target.forward(sa2)[:, 0]
        q2t = self.critic2_target.forward(sa2)[:, 0]
        y = r + cfg.gamma * (1.0 - d) * (np.minimum(q1t, q2t) - self.alpha * logp2)

        sa = _concat_sa(s, a)
        losses = {}
        for name, critic, opt in (
            ("critic1", self.critic1, self.critic1_opt),
            ("critic2", self.critic2, self.critic2_opt),
        ):
            q = critic.forward(sa, cache=True)[:, 0]
            err = q - y
            losses[name + "_loss"] = float(np.mean(err**2))
            critic.zero_grads()
            critic.backward((2.0 * err / B)[:, None])
            opt.step()

        # actor: minimize alpha*logpi - min(Q1, Q2), reparameterized
        out = self.actor.forward(s, cache=True)
        mean, log_std, log_std_raw = self._head(out)
        std = np.exp(log_std)
        eps = self.update_rng.standard_normal(mean.shape)
        z = mean + std * eps
        a_pi = np.tanh(z)
        logp = squashed_gaussian_logprob(z, eps, log_std)

        sa_pi = _concat_sa(s, a_pi)
        q1 = self.critic1.forward(sa_pi, cache=True)[:, 0]
        q2 = self.critic2.forward(sa_pi, cache=True)[:, 0]
        losses["actor_loss"] = float(np.mean(self.alpha * logp - np.minimum(q1, q2)))
        mask1 = (q1 <= q2).astype(float)
        g1 = self.critic1.backward((-mask1 / B)[:, None])
        g2 = self.critic2.backward((-(1.0 - mask1) / B)[:, None])
        g_a = g1[:, self.obs_dim:] + g2[:, self.obs_dim:]

        g_logp = self.alpha / B  # scalar, per sample
        # d logp / dz = 2*tanh(z) from the change of variables; logN depends
        # on z only through log_std (held via eps reparameterization)
        g_z = g_a * (1.0 - a_pi**2) + g_logp * 2.0 * a_pi
        g_mean = g_z
        g_log_std = g_z * std * eps - g_logp
        clip_mask = ((log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)).astype(float)
        upstream = np.concatenate([g_mean, g_log_std * clip_mask], axis=-1)
        self.actor.zero_grads()
        self.actor.backward(upstream)
        self.actor_opt.step()

        self.update_temperature(float(np.mean(-logp)))
        losses["alpha"] = self.alpha

        polyak_update(self.critic1_target, self.critic1, cfg.tau)
        polyak_update(self.critic2_target, self.critic2, cfg.tau)
        self.update_count += 1
        return losses


def gae(rewards, values, next_values, terminal_flags, episode_ends, gamma, lam):
    """Generalized advantage estimation over a (possibly multi-episode) rollout.

    terminal_flags kill the bootstrap term inside delta (true terminals only);
    episode_ends stop advantage propagation across episode boundaries, so a
    truncated episode still bootstraps its final state via next_values.
    Returns (advantages, returns) with returns = advantages + values.
    """
    T = len(rewards)
    adv = np.zeros(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        delta = (
            rewards[t]
            + gamma * (1.0 - terminal_flags[t]) * next_values[t]
            - values[t]
        )
        acc = delta + gamma * lam * (1.0 - episode_ends[t]) * acc
        adv[t] = acc
    return adv, adv + values


@dataclass
class RolloutBatch:
    states: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    terminal_flags: np.ndarray
    episode_ends: np.ndarray
    next_values: np.ndarray
    advantages: np.ndarray = field(default=None)
    returns: np.ndarray = field(default=None)


class PPOAgent:
    def __init__(self, obs_dim: int, act_dim: int, cfg: AgentConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        ss = np.random.SeedSequence([seed, 3003])
        r_pi, r_v, self.update_rng = [np.random.default_rng(s) for s in ss.spawn(3)]
        hs = list(cfg.hidden_sizes)
        self.policy = MlpNet([obs_dim] + hs + [act_dim], "tanh", r_pi, final_scale=1e-2)
        self.value_net = MlpNet([obs_dim] + hs + [1], "identity", r_v)
        actor_lr = cfg.actor_lr if cfg.actor_lr > 0 else cfg.lr
        self.policy_opt = Adam(self.policy, lr=actor_lr)
        self.value_opt = Adam(self.value_net, lr=cfg.lr)
        # state-independent learned log_std with its own Adam moments
        self.log_std = np.zeros(act_dim)
        self._ls_m = np.zeros(act_dim)
        self._ls_v = np.zeros(act_dim)
        self._ls_t = 0

    def gaussian_logprob(self, actions, means):
        std = np.exp(self.log_std)
        w = (actions - means) / std
        return np.sum(-0.5 * LOG_2PI - self.log_std - 0.5 * w**2, axis=-1)

    def select_action(self, state, rng: np.random.Generator, deterministic: bool = False):
        mean = self.policy.forward(np.asarray(state))
        if deterministic:
            a = mean
        else:
            a = mean + np.exp(self.log_std) * rng.standard_normal(mean.shape)
        logp = self.gaussian_logprob(a, mean)
        value = float(self.value_net.forward(np.asarray(state))[0])
        return a, logp, value

    def state_value(self, state) -> float:
        return float(self.value_net.forward(np.asarray(state))[0])

    def _log_std_step(self, grad):
        cfg = self.cfg
        self._ls_t += 1
        self._ls_m = 0.9 * self._ls_m + 0.1 * grad
        self._ls_v = 0.999 * self._ls_v + 0.001 * grad**2
        mh = self._ls_m / (1.0 - 0.9**self._ls_t)
        vh = self._ls_v / (1.0 - 0.999**self._ls_t)
        self.log_std -= cfg.lr * mh / (np.sqrt(vh) + 1e-8)

    def update(self, rollout: RolloutBatch) -> dict:
        cfg = self.cfg
        adv, ret = gae(
            rollout.rewards * cfg.reward_scale,
            rollout.values,
            rollout.next_values,
            rollout.terminal_flags,
            rollout.episode_ends,
            cfg.gamma,
            cfg.gae_lambda,
        )
        rollout.advantages = adv
        rollout.returns = ret
        norm_adv = (adv - adv.mean()) / (adv.std() + 1e-8)

        T = len(adv)
        losses = {"policy_loss": 0.0, "value_loss": 0.0, "clip_fraction": 0.0}
        n_batches = 0
        for _ in range(cfg.epochs_per_rollout):
            perm = self.update_rng.permutation(T)
            for start in range(0, T, cfg.minibatch_size):
                idx = perm[start : start + cfg.minibatch_size]
                sb = rollout.states[idx]
                ab = rollout.actions[idx]
                advb = norm_adv[idx]
                old_lp = rollout.log_probs[idx]
                retb = ret[idx]
                B = len(idx)

                mean = self.policy.forward(sb, cache=True)
                lp = self.gaussian_logprob(ab, mean)
                ratio = np.exp(lp - old_lp)
                unclipped = ratio * advb
                clipped = np.clip(ratio, 1.0 - cfg.ppo_clip, 1.0 + cfg.ppo_clip) * advb
                losses["policy_loss"] += float(-np.mean(np.minimum(unclipped, clipped)))
                # gradient is zero where the clipped branch is active
                active = (
                    ((ratio <= 1.0 + cfg.ppo_clip) | (advb <= 0.0))
                    & ((ratio >= 1.0 - cfg.ppo_clip) | (advb >= 0.0))
                ).astype(float)
                losses["clip_fraction"] += float(np.mean(1.0 - active))
                g_lp = -(ratio * advb * active) / B

                std = np.exp(self.log_std)
                w = (ab - mean) / std
                g_mean = g_lp[:, None] * (w / std)
                g_log_std = np.sum(g_lp[:, None] * (w**2 - 1.0), axis=0)
                g_log_std -= cfg.entropy_coef * np.ones(self.act_dim) / 1.0
                self.policy.zero_grads()
                self.policy.backward(g_mean)
                self.policy_opt.step()
                self._log_std_step(g_log_std)

                v = self.value_net.forward(sb, cache=True)[:, 0]
                verr = v - retb
                losses["value_loss"] += float(np.mean(verr**2))
                self.value_net.zero_grads()
                self.value_net.backward((2.0 * verr / B)[:, None])
                self.value_opt.step()
                n_batches += 1
        for k in losses:
            losses[k] /= max(n_batches, 1)
        return losses


def make_agent(obs_dim: int, act_dim: int, cfg: AgentConfig, seed: int):
    cls = {"td3": TD3Agent, "sac": SACAgent, "ppo": PPOAgent}[cfg.algo]
    return cls(obs_dim, act_dim, cfg, seed)
