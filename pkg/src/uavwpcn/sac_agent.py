"""Tier-1 agent: per-UAV soft actor-critic over slot-level actions.

Five networks per UAV. The actor maps the UAV's own observation to a
squashed Gaussian over a 3-vector (heading, speed, beam decision). Both V
critics and both Q critics see the joint state (all UAVs' observations
concatenated); Q additionally takes the squashed action vector, so the
policy loss can differentiate straight through the Q input.

Losses, in the order train_step applies them:

    L_V   = 1/2 E[(V1(s) - (min Q(s, a') - alpha log pi(a'|o)))^2],  a' ~ pi
    L_Qm  = 1/2 E[(Qm(s, a) - (r + gamma V2(s')))^2]
    L_pi  = E[alpha log pi(a_theta(o; eps)|o) - min Q(s, a_theta(o; eps))]
    L_al  = E[-alpha log pi(a'|o) - alpha H_target]
    V2 <- tau V2 + (1 - tau) V1

Actions live in [-1, 1]^3 (tanh). decode_action maps them to environment
units; the Q nets and the replay buffer only ever see the squashed form.
"""

from __future__ import annotations

import math

import numpy as np

from .config import WorldConfig
from .neural import Adam, Mlp
from .state import SlotAction

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6
_LOG_2PI = math.log(2.0 * math.pi)

ACTION_DIM = 3


def decode_action(y: np.ndarray, v_max: float) -> SlotAction:
    """Map a squashed 3-vector to (heading, speed, beam-on)."""
    heading = float((y[0] + 1.0) * math.pi)
    speed = float((y[1] + 1.0) * 0.5 * v_max)
    wet = 1 if y[2] > 0.0 else 0
    return SlotAction(heading=heading, speed=speed, wet=wet)


def act_with(actor: Mlp, obs: np.ndarray, v_max: float,
             rng: np.random.Generator | None = None,
             deterministic: bool = False) -> SlotAction:
    """Run one observation through an actor net (possibly a stale snapshot)."""
    y = sample_squashed(actor, obs, rng, deterministic)
    return decode_action(y, v_max)


def sample_squashed(actor: Mlp, obs: np.ndarray,
                    rng: np.random.Generator | None = None,
                    deterministic: bool = False) -> np.ndarray:
    out, _ = actor.forward(np.asarray(obs, dtype=float)[None, :])
    half = out.shape[1] // 2
    mu = out[0, :half]
    if deterministic:
        return np.tanh(mu)
    log_std = np.clip(out[0, half:], LOG_STD_MIN, LOG_STD_MAX)
    z = mu + np.exp(log_std) * rng.standard_normal(half)
    return np.tanh(z)


class SacModel:
    """One UAV's actor/critic ensemble plus the entropy temperature."""

    def __init__(self, obs_dim: int, state_dim: int, hidden: int,
                 gamma: float, tau: float, lr: float, alpha_lr: float,
                 alpha_init: float, entropy_target: float,
                 rng: np.random.Generator, action_dim: int = ACTION_DIM,
                 v_max: float = 1.0):
        self.obs_dim = obs_dim
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.gamma = gamma
        self.tau = tau
        self.entropy_target = entropy_target
        self.v_max = v_max
        self.rng = rng

        h = hidden
        self.actor = Mlp([obs_dim, h, h, h, 2 * action_dim], rng)
        self.v1 = Mlp([state_dim, h, h, h, 1], rng)
        self.v2 = self.v1.copy()
        self.q1 = Mlp([state_dim + action_dim, h, h, h, 1], rng)
        self.q2 = Mlp([state_dim + action_dim, h, h, h, 1], rng)
        self.log_alpha = np.array([math.log(alpha_init)])

        self.opt_actor = Adam(self.actor.params(), lr)
        self.opt_v1 = Adam(self.v1.params(), lr)
        self.opt_q1 = Adam(self.q1.params(), lr)
        self.opt_q2 = Adam(self.q2.params(), lr)
        self.opt_alpha = Adam([self.log_alpha], alpha_lr)

    @classmethod
    def for_world(cls, cfg: WorldConfig, rng: np.random.Generator) -> "SacModel":
        obs_dim = 3 * cfg.num_wns + 3
        return cls(obs_dim=obs_dim, state_dim=obs_dim * cfg.num_uavs,
                   hidden=cfg.hidden_width, gamma=cfg.gamma, tau=cfg.tau,
                   lr=cfg.sac_lr, alpha_lr=cfg.alpha_lr, alpha_init=cfg.alpha_init,
                   entropy_target=cfg.resolved_entropy_target(), rng=rng,
                   v_max=cfg.v_max)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    # -- acting ------------------------------------------------------------

    def act(self, obs: np.ndarray, deterministic: bool = False,
            rng: np.random.Generator | None = None) -> SlotAction:
        return decode_action(self.sample_action(obs, deterministic, rng), self.v_max)

    def sample_action(self, obs: np.ndarray, deterministic: bool = False,
                      rng: np.random.Generator | None = None) -> np.ndarray:
        """Squashed action vector in [-1, 1]^A; this is what the buffer stores."""
        return sample_squashed(self.actor, obs, rng if rng is not None else self.rng,
                               deterministic)

    def actor_snapshot(self) -> Mlp:
        return self.actor.copy()

    # -- pieces of the update, each pure given (params, batch, noise) ------

    def _policy_sample(self, obs: np.ndarray, eps: np.ndarray):
        """Forward the actor and apply the reparameterized squash.

        Returns (y, logp, aux) where aux carries everything the policy-loss
        backward pass needs.
        """
        out, cache = self.actor.forward(obs)
        a = self.action_dim
        mu = out[:, :a]
        raw = out[:, a:]
        log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        z = mu + std * eps
        y = np.tanh(z)
        one_m_y2 = 1.0 - y * y
        logp = np.sum(-0.5 * eps * eps - log_std - 0.5 * _LOG_2PI
                      - np.log(one_m_y2 + SQUASH_EPS), axis=1)
        aux = (cache, raw, std, y, one_m_y2)
        return y, logp, aux

    def value_loss(self, batch: dict, eps: np.ndarray):
        """V1 regression toward min-Q of a fresh policy sample, entropy-corrected.

        Returns (loss, grads for V1, logp of the fresh sample) so the
        temperature loss can reuse the sample.
        """
        state = batch["state"]
        n = state.shape[0]
        y1, logp1, _ = self._policy_sample(batch["obs"], eps)
        qin = np.hstack([state, y1])
        q1v, _ = self.q1.forward(qin)
        q2v, _ = self.q2.forward(qin)
        target = np.minimum(q1v, q2v) - self.alpha * logp1[:, None]
        pred, cache = self.v1.forward(state)
        diff = pred - target
        loss = 0.5 * float(np.mean(diff * diff))
        grads, _ = self.v1.backward(cache, diff / n)
        return loss, grads, logp1

    def q_losses(self, batch: dict):
        """Twin-Q regression toward r + gamma * V2(s')."""
        state, action = batch["state"], batch["action"]
        n = state.shape[0]
        v2n, _ = self.v2.forward(batch["next_state"])
        target = batch["reward"][:, None] + self.gamma * v2n
        qin = np.hstack([state, action])
        out = []
        for net in (self.q1, self.q2):
            pred, cache = net.forward(qin)
            diff = pred - target
            loss = 0.5 * float(np.mean(diff * diff))
            grads, _ = net.backward(cache, diff / n)
            out.append((loss, grads))
        return out[0], out[1]

    def policy_loss(self, batch: dict, eps: np.ndarray):
        """Reparameterized actor loss; gradients flow through the Q input."""
        state, obs = batch["state"], batch["obs"]
        n = state.shape[0]
        alpha = self.alpha
        y, logp, (cache_a, raw, std, y_, one_m_y2) = self._policy_sample(obs, eps)
        qin = np.hstack([state, y])
        q1v, c1 = self.q1.forward(qin)
        q2v, c2 = self.q2.forward(qin)
        pick1 = q1v <= q2v
        qmin = np.where(pick1, q1v, q2v)
        loss = float(np.mean(alpha * logp - qmin[:, 0]))

        # d loss / d y, through whichever Q was the min per sample
        _, gin1 = self.q1.backward(c1, -pick1.astype(float) / n)
        _, gin2 = self.q2.backward(c2, -(~pick1).astype(float) / n)
        g_y = (gin1 + gin2)[:, self.state_dim:]

        # d logp / d(mu, log_std) for the squashed Gaussian
        a_z = 2.0 * y * one_m_y2 / (one_m_y2 + SQUASH_EPS)
        sig_path = std * eps                      # dz/dlog_std
        g_mu = (alpha / n) * a_z + g_y * one_m_y2
        g_log_std = (alpha / n) * (-1.0 + a_z * sig_path) + g_y * one_m_y2 * sig_path
        g_log_std = g_log_std * ((raw > LOG_STD_MIN) & (raw < LOG_STD_MAX))

        grads, _ = self.actor.backward(cache_a, np.hstack([g_mu, g_log_std]))
        return loss, grads

    def temperature_loss(self, logp: np.ndarray):
        """Scalar loss on log-alpha pulling entropy toward the target."""
        alpha = self.alpha
        drive = float(np.mean(logp)) + self.entropy_target
        loss = -alpha * drive
        grad = np.array([-alpha * drive])         # d loss / d log_alpha
        return loss, grad

    def soft_update(self) -> None:
        for pv2, pv1 in zip(self.v2.params(), self.v1.params()):
            pv2 *= self.tau
            pv2 += (1.0 - self.tau) * pv1

    def train_step(self, batch: dict, rng: np.random.Generator | None = None) -> dict:
        """One full update from a minibatch; returns the five loss scalars."""
        rng = rng if rng is not None else self.rng
        n = batch["state"].shape[0]
        eps1 = rng.standard_normal((n, self.action_dim))
        eps2 = rng.standard_normal((n, self.action_dim))

        loss_v, grads_v, logp1 = self.value_loss(batch, eps1)
        (loss_q1, grads_q1), (loss_q2, grads_q2) = self.q_losses(batch)
        loss_pi, grads_pi = self.policy_loss(batch, eps2)
        loss_al, grad_al = self.temperature_loss(logp1)

        self.opt_v1.step(self.v1.params(), grads_v)
        self.opt_q1.step(self.q1.params(), grads_q1)
        self.opt_q2.step(self.q2.params(), grads_q2)
        self.opt_actor.step(self.actor.params(), grads_pi)
        self.opt_alpha.step([self.log_alpha], grad_al)
        self.soft_update()

        return {"v": loss_v, "q1": loss_q1, "q2": loss_q2,
                "policy": loss_pi, "temperature": loss_al, "alpha": self.alpha}

    # -- persistence -------------------------------------------------------

    def export_actor(self) -> tuple[dict, dict]:
        meta = {"obs_dim": self.obs_dim, "action_dim": self.action_dim,
                "hidden_dims": list(self.actor.dims)}
        return {k: v.copy() for k, v in self.actor.named_arrays("actor_").items()}, meta

    def import_actor(self, arrays: dict, meta: dict) -> None:
        if meta.get("obs_dim") != self.obs_dim or meta.get("action_dim") != self.action_dim:
            raise ValueError(
                f"actor snapshot for obs_dim={meta.get('obs_dim')}/"
                f"action_dim={meta.get('action_dim')}, model has "
                f"{self.obs_dim}/{self.action_dim}")
        self.actor.load_named_arrays(arrays, "actor_")

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {"log_alpha": self.log_alpha.copy()}
        for name in ("actor", "v1", "v2", "q1", "q2"):
            out.update(getattr(self, name).named_arrays(f"{name}_"))
        for name in ("opt_actor", "opt_v1", "opt_q1", "opt_q2", "opt_alpha"):
            out.update(getattr(self, name).named_arrays(f"{name}_"))
        return out

    def load_state_dict(self, arrays: dict) -> None:
        self.log_alpha[:] = np.asarray(arrays["log_alpha"], dtype=float)
        for name in ("actor", "v1", "v2", "q1", "q2"):
            getattr(self, name).load_named_arrays(arrays, f"{name}_")
        for name in ("opt_actor", "opt_v1", "opt_q1", "opt_q2", "opt_alpha"):
            getattr(self, name).load_named_arrays(arrays, f"{name}_")
