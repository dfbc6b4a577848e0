"""Training and evaluation loops tying the world engine to both agent tiers.

Training is centralized, acting is distributed: one process owns every
network and the shared slot-level replay buffer, while each UAV acts
through a snapshot of its own actor that is refreshed every
`actor_sync_slots` slots (so staleness is a config knob, not an accident).
Sub-slot experience stays in per-UAV buffers because the scheduling nets
only ever see local observations.

Besides the full two-tier learner ("mahdrl") the same loop runs four
comparison schemes that differ only in how actions are produced, never in
world dynamics:

    mahdrl_no_hoe   charging reward without the hunger weights
    phase_division  beam-only until slot T-bar, collect-only after
    team            first half of the fleet charges, second half collects
    random_wdc      scheduling scores drawn uniformly, scheduler untrained

One RNG drives everything after construction and every episode reseeds the
world from (seed, episode), so a run is a pure function of (config, seed)
and can be checkpointed at any episode boundary and resumed bit-exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .config import WorldConfig
from .dqn_agent import DqnModel, epsilon_at, lr_at
from .environment import EpisodeReport, WpcnEnv
from .neural import ReplayBuffer
from .sac_agent import ACTION_DIM, SacModel, decode_action, sample_squashed

SCHEMES = ("mahdrl", "mahdrl_no_hoe", "phase_division", "team", "random_wdc")

METRIC_COLUMNS = (
    "episode", "c_total", "wn_met", "all_met", "uav_safe", "sep_violations",
    "sac_v", "sac_q1", "sac_q2", "sac_policy", "sac_alpha",
    "dqn_loss", "epsilon", "dqn_lr",
)

FINAL_WINDOW = 50   # episodes averaged when a whole run is scored


def check_scheme(scheme: str) -> None:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; pick one of {', '.join(SCHEMES)}")


def beam_override(scheme: str, u: int, slot: int, tbar: int | None,
                  num_uavs: int) -> int | None:
    """Forced beam state for this UAV and slot, or None to let the policy pick."""
    if scheme == "phase_division":
        return 1 if slot < tbar else 0
    if scheme == "team" and u >= num_uavs // 2:
        return 0
    return None


def may_collect(scheme: str, u: int, slot: int, tbar: int | None,
                num_uavs: int) -> bool:
    """Whether this UAV participates in data collection this slot."""
    if scheme == "phase_division":
        return slot >= tbar
    if scheme == "team":
        return u >= num_uavs // 2
    return True


class Fleet:
    """Every UAV's model pair plus the replay buffers, as one checkpointable unit."""

    def __init__(self, cfg: WorldConfig, rng: np.random.Generator):
        self.cfg = cfg
        u, w = cfg.num_uavs, cfg.num_wns
        self.obs_dim = 3 * w + 3
        self.state_dim = self.obs_dim * u
        self.sac = [SacModel.for_world(cfg, rng) for _ in range(u)]
        self.dqn = [DqnModel.for_world(cfg, rng) for _ in range(u)]
        self.snapshots = [m.actor_snapshot() for m in self.sac]
        self.t1_buffer = ReplayBuffer(cfg.buffer_capacity, {
            "state": self.state_dim, "next_state": self.state_dim,
            "obs": self.obs_dim * u, "action": ACTION_DIM * u, "reward": u})
        self.t2_buffers = [
            ReplayBuffer(cfg.buffer_capacity,
                         {"obs": w + 3, "action": 1, "reward": 1, "next_obs": w + 3})
            for _ in range(u)]

    def sync_snapshots(self) -> None:
        self.snapshots = [m.actor_snapshot() for m in self.sac]

    def t1_batch_for(self, u: int, joint: dict) -> dict:
        """Slice one UAV's view out of a jointly sampled slot-level batch."""
        o, a = self.obs_dim, ACTION_DIM
        return {"state": joint["state"], "next_state": joint["next_state"],
                "obs": joint["obs"][:, u * o:(u + 1) * o],
                "action": joint["action"][:, u * a:(u + 1) * a],
                "reward": joint["reward"][:, u]}

    def state_dict(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for u in range(self.cfg.num_uavs):
            for k, v in self.sac[u].state_dict().items():
                out[f"sac{u}_{k}"] = v
            for k, v in self.dqn[u].state_dict().items():
                out[f"dqn{u}_{k}"] = v
            for k, v in self.t2_buffers[u].state_dict().items():
                out[f"t2buf{u}_{k}"] = v
        for k, v in self.t1_buffer.state_dict().items():
            out[f"t1buf_{k}"] = v
        return out

    def load_state_dict(self, arrays: dict) -> None:
        def sub(prefix):
            n = len(prefix)
            return {k[n:]: v for k, v in arrays.items() if k.startswith(prefix)}

        for u in range(self.cfg.num_uavs):
            self.sac[u].load_state_dict(sub(f"sac{u}_"))
            self.dqn[u].load_state_dict(sub(f"dqn{u}_"))
            self.t2_buffers[u].load_state_dict(sub(f"t2buf{u}_"))
        self.t1_buffer.load_state_dict(sub("t1buf_"))
        self.sync_snapshots()

    def meta(self) -> dict:
        return {"num_uavs": self.cfg.num_uavs, "num_wns": self.cfg.num_wns,
                "hidden_width": self.cfg.hidden_width}

    def check_meta(self, meta: dict) -> None:
        mine = self.meta()
        wrong = {k: (meta.get(k), mine[k]) for k in mine if meta.get(k) != mine[k]}
        if wrong:
            detail = ", ".join(f"{k}: checkpoint {a} vs config {b}"
                               for k, (a, b) in wrong.items())
            raise ValueError(f"checkpoint does not fit this config ({detail})")


@dataclass
class TrainRun:
    """A (possibly partial) training run: metrics so far plus everything
    needed to continue it."""

    cfg: WorldConfig
    scheme: str
    seed: int
    episodes: int                     # planned length; schedules key off this
    metrics: list[dict] = field(default_factory=list)
    fleet: Fleet | None = None
    rng: np.random.Generator | None = None
    tbar: int | None = None

    @property
    def completed(self) -> int:
        return len(self.metrics)

    def final_c_total(self, window: int = FINAL_WINDOW) -> float:
        """Mean data total over the trailing window, the run's headline score."""
        if not self.metrics:
            raise ValueError("no completed episodes to score")
        tail = self.metrics[-window:]
        return float(np.mean([row["c_total"] for row in tail]))


def _mean_or_nan(values: list[float]) -> float:
    return float(np.mean(values)) if values else float("nan")


def _run_episode(env: WpcnEnv, fleet: Fleet, scheme: str, tbar: int | None,
                 rng: np.random.Generator, training: bool, eps_now: float):
    """One full episode; trains in place when `training`.

    Returns (episode report, loss-mean dict, slot history).
    """
    cfg = env.cfg
    num_u = cfg.num_uavs
    losses: dict[str, list[float]] = {k: [] for k in
                                      ("v", "q1", "q2", "policy", "alpha", "dqn")}
    pending_t1 = None                       # (state, obs rows, actions, rewards)
    pending_t2 = [dict() for _ in range(num_u)]   # sub-slot index -> experience

    def train_tier1():
        if len(fleet.t1_buffer) < cfg.batch_size:
            return
        joint = fleet.t1_buffer.sample(cfg.batch_size, rng)
        for u in range(num_u):
            out = fleet.sac[u].train_step(fleet.t1_batch_for(u, joint), rng)
            for k in ("v", "q1", "q2", "policy"):
                losses[k].append(out[k])
            losses["alpha"].append(out["alpha"])

    def train_tier2(u):
        if len(fleet.t2_buffers[u]) < cfg.batch_size:
            return
        batch = fleet.t2_buffers[u].sample(cfg.batch_size, rng)
        batch["action"] = batch["action"].astype(int)
        losses["dqn"].append(fleet.dqn[u].train_step(batch))

    for slot in range(1, cfg.horizon_slots + 1):
        obs_rows = [env.make_tier1_observation(u) for u in range(num_u)]
        state = np.concatenate(obs_rows)
        if training and pending_t1 is not None:
            p_state, p_obs, p_act, p_rew = pending_t1
            fleet.t1_buffer.push(state=p_state, next_state=state,
                                 obs=np.concatenate(p_obs),
                                 action=np.concatenate(p_act), reward=p_rew)
            train_tier1()

        actions, vectors = [], []
        for u in range(num_u):
            y = sample_squashed(fleet.snapshots[u], obs_rows[u], rng,
                                deterministic=not training)
            forced = beam_override(scheme, u, slot, tbar, num_u)
            if forced is not None:
                y = y.copy()
                y[2] = 1.0 if forced else -1.0
            vectors.append(y)
            actions.append(decode_action(y, cfg.v_max))
        env.apply_slot_actions(actions)

        collectors = [u for u in range(num_u)
                      if may_collect(scheme, u, slot, tbar, num_u)]
        active = np.zeros(num_u, dtype=bool)
        active[collectors] = True
        for k in range(1, cfg.subslots_per_slot + 1):
            if not collectors:
                env.step_subslot(env.silent_schedule())
                continue
            t2_obs = {u: env.make_tier2_observation(u, k) for u in collectors}
            scores = np.zeros((num_u, cfg.num_wns))
            for u in collectors:
                if scheme == "random_wdc":
                    scores[u] = rng.random(cfg.num_wns)
                else:
                    scores[u] = fleet.dqn[u].select_scores(t2_obs[u], eps_now, rng)
            schedule = env.resolve_wdc_associations(scores, active=active)
            _, t2_rewards = env.step_subslot(schedule)
            if training and scheme != "random_wdc":
                for u in collectors:
                    if k in pending_t2[u]:
                        p_obs, p_act, p_rew = pending_t2[u][k]
                        fleet.t2_buffers[u].push(obs=p_obs, action=p_act,
                                                 reward=p_rew, next_obs=t2_obs[u])
                    pending_t2[u][k] = (t2_obs[u], schedule.assignment[u],
                                        t2_rewards[u])
                    if cfg.dqn_train_per_subslot:
                        train_tier2(u)
        if training and scheme != "random_wdc" and not cfg.dqn_train_per_subslot:
            for u in collectors:
                train_tier2(u)

        rewards = env.finish_slot()
        pending_t1 = (state, obs_rows, vectors,
                      np.array([bd.r_total for bd in rewards]))
        if training and slot % cfg.actor_sync_slots == 0:
            fleet.sync_snapshots()

    if training and pending_t1 is not None:
        final_state = env.tier1_state()
        p_state, p_obs, p_act, p_rew = pending_t1
        fleet.t1_buffer.push(state=p_state, next_state=final_state,
                             obs=np.concatenate(p_obs),
                             action=np.concatenate(p_act), reward=p_rew)
        train_tier1()

    means = {k: _mean_or_nan(v) for k, v in losses.items()}
    return env.episode_report(), means, env.history


def _metrics_row(ep: int, report: EpisodeReport, means: dict,
                 eps_now: float, lr_now: float) -> dict:
    return {
        "episode": ep,
        "c_total": report.c_total,
        "wn_met": int(report.wn_met.sum()),
        "all_met": int(report.all_met),
        "uav_safe": int(report.uav_safe.sum()),
        "sep_violations": report.separation_violations,
        "sac_v": means["v"], "sac_q1": means["q1"], "sac_q2": means["q2"],
        "sac_policy": means["policy"], "sac_alpha": means["alpha"],
        "dqn_loss": means["dqn"], "epsilon": eps_now, "dqn_lr": lr_now,
    }


def run_training(cfg: WorldConfig, episodes: int, seed: int,
                 scheme: str = "mahdrl", tbar: int | None = None,
                 stop_after: int | None = None, resume_from: TrainRun | None = None,
                 validate: bool = True, on_episode=None) -> TrainRun:
    """Train the fleet for `episodes` episodes (or up to `stop_after`).

    Passing the returned TrainRun back as `resume_from` continues it where
    it stopped; a finished-then-resumed run is bit-identical to one that
    never stopped, because the one RNG and the per-episode world seeds are
    the only entropy sources. `on_episode(row)` fires after each episode.
    """
    check_scheme(scheme)
    if scheme == "phase_division":
        if tbar is None or not 2 <= tbar <= cfg.horizon_slots:
            raise ValueError(f"phase_division needs 2 <= tbar <= "
                             f"{cfg.horizon_slots}, got {tbar}")
    if resume_from is not None:
        run = resume_from
        if (run.cfg, run.scheme, run.seed, run.episodes, run.tbar) != \
                (cfg, scheme, seed, episodes, tbar):
            raise ValueError("resume_from run does not match the requested run")
        fleet, rng = run.fleet, run.rng
    else:
        rng = np.random.default_rng(seed)
        fleet = Fleet(cfg, rng)
        run = TrainRun(cfg=cfg, scheme=scheme, seed=seed, episodes=episodes,
                       fleet=fleet, rng=rng, tbar=tbar)

    env = WpcnEnv(cfg, use_hoe_weighting=(scheme != "mahdrl_no_hoe"),
                  validate=validate)
    last = episodes if stop_after is None else min(stop_after, episodes)
    for ep in range(run.completed, last):
        eps_now = 0.0 if scheme == "random_wdc" else epsilon_at(
            ep, episodes, cfg.eps_start, cfg.eps_end, cfg.eps_decay_frac)
        lr_now = lr_at(ep, episodes, cfg.dqn_lr_start, cfg.dqn_lr_end)
        for model in fleet.dqn:
            model.set_lr(lr_now)
        # episode boundaries are parameter-sync points: this is what makes a
        # checkpointed resume identical to an uninterrupted run even when
        # actor_sync_slots leaves the last in-episode snapshot stale
        fleet.sync_snapshots()
        env.reset(seed=[seed, ep])
        report, means, _ = _run_episode(env, fleet, scheme, tbar, rng,
                                        training=True, eps_now=eps_now)
        row = _metrics_row(ep, report, means, eps_now, lr_now)
        run.metrics.append(row)
        if on_episode is not None:
            on_episode(row)
    return run


def run_evaluation(cfg: WorldConfig, fleet: Fleet, episodes: int, seed: int,
                   scheme: str = "mahdrl", tbar: int | None = None,
                   validate: bool = True):
    """Roll out the trained fleet without exploration or learning.

    Actors use their distribution means, schedulers act greedily. Returns a
    list of (EpisodeReport, slot history) pairs, one per episode.
    """
    check_scheme(scheme)
    env = WpcnEnv(cfg, use_hoe_weighting=(scheme != "mahdrl_no_hoe"),
                  validate=validate)
    rng = np.random.default_rng(seed)
    fleet.sync_snapshots()
    out = []
    for ep in range(episodes):
        env.reset(seed=[seed, ep])
        report, _, history = _run_episode(env, fleet, scheme, tbar, rng,
                                          training=False, eps_now=0.0)
        out.append((report, history))
    return out


@dataclass(frozen=True)
class PhaseSearchResult:
    """Outcome of the one-dimensional switch-slot search."""

    best_tbar: int
    best_run: TrainRun
    curve: list[tuple[int, float]]    # (tbar, trailing-window mean c_total)


def default_tbar_grid(cfg: WorldConfig, points: int = 6) -> list[int]:
    """Evenly spaced candidate switch slots across [2, horizon]."""
    grid = np.linspace(2, cfg.horizon_slots, points).round().astype(int)
    return sorted(set(int(t) for t in grid))


def run_benchmark(scheme: str, cfg: WorldConfig, episodes: int, seed: int,
                  tbar_grid=None, tbar_episodes: int = 100, on_episode=None):
    """Train one comparison scheme; phase_division searches its switch slot.

    Everything but phase_division returns a TrainRun; phase_division trains
    one run per candidate T-bar and returns a PhaseSearchResult.
    """
    check_scheme(scheme)
    if scheme != "phase_division":
        return run_training(cfg, episodes, seed, scheme=scheme,
                            on_episode=on_episode)
    grid = list(tbar_grid) if tbar_grid is not None else default_tbar_grid(cfg)
    curve, runs = [], []
    for tbar in grid:
        run = run_training(cfg, tbar_episodes, seed, scheme="phase_division",
                           tbar=tbar, on_episode=on_episode)
        curve.append((tbar, run.final_c_total()))
        runs.append(run)
    best = int(np.argmax([c for _, c in curve]))
    return PhaseSearchResult(best_tbar=grid[best], best_run=runs[best],
                             curve=curve)


def scalability_sweep(base_cfg: WorldConfig, uav_counts, c_min_values,
                      episodes: int, seed: int) -> list[dict]:
    """Train one run per (fleet size, data requirement) cell.

    Node count tracks fleet size at 2 nodes per UAV. Single-UAV cells skip
    config validation (it insists on a real fleet) but run fine.
    """
    rows = []
    for u in uav_counts:
        for c_min in c_min_values:
            cfg = dataclasses.replace(base_cfg, num_uavs=int(u),
                                      num_wns=2 * int(u), c_min=float(c_min))
            run = run_training(cfg, episodes, seed, validate=(u >= 2))
            rows.append({"num_uavs": int(u), "num_wns": 2 * int(u),
                         "c_min": float(c_min),
                         "c_total": run.final_c_total()})
    return rows


def dcov_sweep(base_cfg: WorldConfig, dcov_values, episodes: int,
               seeds) -> list[dict]:
    """Train one run per (reporting radius, seed) pair."""
    rows = []
    for d_cov in dcov_values:
        cfg = dataclasses.replace(base_cfg, d_cov=float(d_cov))
        for seed in seeds:
            run = run_training(cfg, episodes, int(seed))
            rows.append({"d_cov": float(d_cov), "seed": int(seed),
                         "c_total": run.final_c_total()})
    return rows
