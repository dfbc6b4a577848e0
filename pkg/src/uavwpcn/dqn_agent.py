"""Tier-2 agent: per-UAV DQN scoring nodes for sub-slot data collection.

The net maps a (W+3)-long observation to W scores. The association
protocol consumes the whole score vector as a preference ranking, so
exploration replaces the ranking with a uniformly random permutation
instead of flipping a single argmax.

Schedules over a training run: epsilon falls linearly from eps_start to
eps_end across the first eps_decay_frac of episodes, then holds; the
learning rate decays exponentially between its endpoints across all
episodes.
"""

from __future__ import annotations

import math

import numpy as np

from .config import WorldConfig
from .neural import Adam, Mlp

SILENT_ACTION = -1


def epsilon_at(episode: int, total_episodes: int, eps_start: float,
               eps_end: float, decay_frac: float) -> float:
    span = decay_frac * total_episodes
    if span <= 0 or episode >= span:
        return eps_end
    return eps_start + (eps_end - eps_start) * (episode / span)


def lr_at(episode: int, total_episodes: int, lr_start: float, lr_end: float) -> float:
    if total_episodes <= 1:
        return lr_start
    frac = min(episode, total_episodes - 1) / (total_episodes - 1)
    return lr_start * (lr_end / lr_start) ** frac


class DqnModel:
    """Evaluate net + periodically copied target net."""

    def __init__(self, obs_dim: int, num_actions: int, hidden: int,
                 gamma: float, lr: float, target_sync_period: int,
                 rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.num_actions = num_actions
        self.gamma = gamma
        self.target_sync_period = target_sync_period
        h = hidden
        self.eval_net = Mlp([obs_dim, h, h, h, num_actions], rng)
        self.target_net = self.eval_net.copy()
        self.opt = Adam(self.eval_net.params(), lr)
        self.train_steps = 0

    @classmethod
    def for_world(cls, cfg: WorldConfig, rng: np.random.Generator) -> "DqnModel":
        return cls(obs_dim=cfg.num_wns + 3, num_actions=cfg.num_wns,
                   hidden=cfg.hidden_width, gamma=cfg.gamma, lr=cfg.dqn_lr_start,
                   target_sync_period=cfg.target_sync_period, rng=rng)

    def set_lr(self, lr: float) -> None:
        self.opt.lr = float(lr)

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        out, _ = self.eval_net.forward(np.asarray(obs, dtype=float)[None, :])
        return out[0]

    def select_scores(self, obs: np.ndarray, eps: float,
                      rng: np.random.Generator) -> np.ndarray:
        """Greedy Q scores, or a random preference ranking with probability eps."""
        if rng.random() < eps:
            return rng.permutation(self.num_actions).astype(float)
        return self.q_values(obs)

    def td_loss(self, batch: dict):
        """Masked TD regression loss and eval-net gradients, no parameter update.

        batch keys: obs (n, W+3), action (n,), reward (n,), next_obs (n, W+3).
        Silent transitions (action == SILENT_ACTION) carry no gradient: the
        net has no output head for staying silent, and the association
        protocol makes silence involuntary anyway.
        """
        obs = batch["obs"]
        action = np.asarray(batch["action"], dtype=np.int64)
        n = obs.shape[0]
        valid = action != SILENT_ACTION
        n_valid = int(valid.sum())
        if n_valid == 0:
            return 0.0, None

        next_q, _ = self.target_net.forward(batch["next_obs"])
        target = batch["reward"] + self.gamma * next_q.max(axis=1)
        pred, cache = self.eval_net.forward(obs)
        rows = np.arange(n)[valid]
        cols = action[valid]
        diff = pred[rows, cols] - target[valid]
        loss = 0.5 * float(np.mean(diff * diff))
        gout = np.zeros_like(pred)
        gout[rows, cols] = diff / n_valid
        grads, _ = self.eval_net.backward(cache, gout)
        return loss, grads

    def train_step(self, batch: dict) -> float:
        """One TD regression step plus the periodic target-net copy."""
        loss, grads = self.td_loss(batch)
        self.train_steps += 1
        if grads is not None:
            self.opt.step(self.eval_net.params(), grads)
        self._maybe_sync()
        return loss

    def _maybe_sync(self) -> None:
        if self.train_steps % self.target_sync_period == 0:
            self.target_net = self.eval_net.copy()

    # -- persistence -------------------------------------------------------

    def export_net(self) -> tuple[dict, dict]:
        meta = {"obs_dim": self.obs_dim, "num_actions": self.num_actions,
                "hidden_dims": list(self.eval_net.dims)}
        return {k: v.copy() for k, v in self.eval_net.named_arrays("eval_").items()}, meta

    def import_net(self, arrays: dict, meta: dict) -> None:
        if (meta.get("obs_dim") != self.obs_dim
                or meta.get("num_actions") != self.num_actions):
            raise ValueError(
                f"net snapshot for obs_dim={meta.get('obs_dim')}/"
                f"num_actions={meta.get('num_actions')}, model has "
                f"{self.obs_dim}/{self.num_actions}")
        self.eval_net.load_named_arrays(arrays, "eval_")
        self.target_net = self.eval_net.copy()

    def state_dict(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {"train_steps": np.array(self.train_steps)}
        out.update(self.eval_net.named_arrays("eval_"))
        out.update(self.target_net.named_arrays("target_"))
        out.update(self.opt.named_arrays("opt_"))
        return out

    def load_state_dict(self, arrays: dict) -> None:
        self.train_steps = int(arrays["train_steps"])
        self.eval_net.load_named_arrays(arrays, "eval_")
        self.target_net.load_named_arrays(arrays, "target_")
        self.opt.load_named_arrays(arrays, "opt_")
