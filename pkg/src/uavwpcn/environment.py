"""Discrete-time engine for the charging-and-collection world.

One slot runs through a fixed cycle:

    1. tier-1 observations             (slot-start node reports, own status)
    2. apply_slot_actions(actions)     fly to the slot's hover point, latch
                                       the energy beams, charge harvesters
    3. K times: tier-2 observations -> resolve_wdc_associations(scores)
                -> step_subslot(schedule)   uplink SINR, data, tier-2 reward
    4. finish_slot()                   batteries, node types, tier-1 rewards

Node status reports arrive only at slot boundaries. Transmitting nodes are
always heard; harvesting nodes are heard within the horizontal radius d_cov,
and a beam aimed at a harvester beyond that radius is taken to deliver
nothing (the harvester's sensitivity floor eats it), which keeps the
energy-share bookkeeping below consistent with what the UAV can observe.

All slot physics (channel gains, reporting distances, separation) are
evaluated at the post-move hover point: the slot's action decides where the
UAV spends the slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import gain_matrix, sinr_vector, subslot_data_size
from .config import WorldConfig, validate_config
from .energy import (
    HarvesterModel,
    uav_slot_energy,
    update_uav_battery,
    update_wn_battery,
)
from .node_rules import (
    initial_flags,
    initial_hoe,
    observe_status,
    update_hoe,
    update_node_type,
)
from .state import SILENT, RewardBreakdown, SlotAction, SubSlotSchedule


@dataclass(frozen=True)
class EpisodeReport:
    """End-of-episode accounting against the mission constraints."""

    wn_totals: np.ndarray          # per-node data over the whole horizon
    wn_met: np.ndarray             # per-node: total >= c_min
    uav_end_batteries: np.ndarray
    uav_safe: np.ndarray           # per-UAV: end battery >= b_uav_min
    separation_violations: int     # slots where some pair flew closer than d_min
    c_total: float

    @property
    def all_met(self) -> bool:
        return bool(self.wn_met.all() and self.uav_safe.all())


def association_schedule(flags: np.ndarray, scores: np.ndarray,
                         active=None) -> np.ndarray:
    """One-to-one collection assignment from per-UAV preference scores.

    UAVs claim in index order; each walks its scores in descending order and
    takes the first transmitter nobody with a lower index has claimed. A UAV
    with no claimable node (or an inactive one) stays silent. Ties break
    toward the lower node index.
    """
    scores = np.asarray(scores, dtype=float)
    num_uavs = scores.shape[0]
    assignment = np.full(num_uavs, SILENT, dtype=int)
    claimed: set[int] = set()
    for u in range(num_uavs):
        if active is not None and not active[u]:
            continue
        for w in np.argsort(-scores[u], kind="stable"):
            w = int(w)
            if flags[w] == 1 and w not in claimed:
                assignment[u] = w
                claimed.add(w)
                break
    return assignment


class WpcnEnv:
    """World state plus the slot cycle. One instance, one episode at a time.

    `use_hoe_weighting=False` drops the hunger weights from the charging
    reward (every harvester counts the same); everything else is unchanged.
    """

    def __init__(self, cfg: WorldConfig, use_hoe_weighting: bool = True,
                 validate: bool = True):
        if validate:
            problems = validate_config(cfg)
            if problems:
                raise ValueError("invalid config: " + "; ".join(problems))
        self.cfg = cfg
        self.use_hoe_weighting = use_hoe_weighting
        self.harvester = HarvesterModel.from_config(cfg)
        self.slot = 0          # 1-based once reset() has run
        self._moved = False

    # -- episode setup -----------------------------------------------------

    def reset(self, seed=None) -> None:
        cfg = self.cfg
        rng = np.random.default_rng(seed)
        area = np.array([cfg.area_width, cfg.area_height])
        self.wn_xy = rng.uniform(0.0, 1.0, (cfg.num_wns, 2)) * area
        self.wn_battery = rng.uniform(cfg.wn_battery_init_low,
                                      cfg.wn_battery_init_high, cfg.num_wns)
        self.uav_pos = rng.uniform(0.0, 1.0, (cfg.num_uavs, 2)) * area
        self.uav_battery = np.full(cfg.num_uavs, cfg.b_uav_max)
        self.flags = initial_flags(self.wn_battery, cfg)
        self.hoe = initial_hoe(self.flags)
        self.acc_data = np.zeros(cfg.num_wns)
        self.last_harvest = np.zeros(cfg.num_wns)
        # a node nobody has heard from reads as empty until its first report
        self.obs_b = np.zeros((cfg.num_uavs, cfg.num_wns))
        self.obs_c = np.zeros((cfg.num_uavs, cfg.num_wns))
        self._refresh_reports()
        self.slot = 1
        self._moved = False
        self._subslots_done = 0
        self._sep_violations = 0
        self.history: list[dict] = []

    def _refresh_reports(self) -> None:
        for u in range(self.cfg.num_uavs):
            self.obs_b[u], self.obs_c[u] = observe_status(
                self.uav_pos[u], self.wn_xy, self.flags, self.wn_battery,
                self.acc_data, self.obs_b[u], self.obs_c[u], self.cfg.d_cov)

    # -- observations ------------------------------------------------------

    def make_tier1_observation(self, u: int) -> np.ndarray:
        if self._moved:
            raise RuntimeError("slot cycle: slot-start observation requested "
                               "after the move")
        cfg = self.cfg
        own = np.array([self.uav_pos[u, 0] / cfg.area_width,
                        self.uav_pos[u, 1] / cfg.area_height,
                        self.uav_battery[u] / cfg.b_uav_max])
        return np.concatenate([self.flags.astype(float),
                               self.obs_b[u] / cfg.b_wn_max,
                               self.obs_c[u] / cfg.data_scale,
                               own])

    def tier1_state(self) -> np.ndarray:
        return np.concatenate([self.make_tier1_observation(u)
                               for u in range(self.cfg.num_uavs)])

    def make_tier2_observation(self, u: int, k: int) -> np.ndarray:
        if not self._moved:
            raise RuntimeError("slot cycle: sub-slot observation requested "
                               "before the move")
        cfg = self.cfg
        if not 1 <= k <= cfg.subslots_per_slot:
            raise ValueError(f"sub-slot index {k} out of 1..{cfg.subslots_per_slot}")
        return np.concatenate([
            [self.uav_pos[u, 0] / cfg.area_width,
             self.uav_pos[u, 1] / cfg.area_height],
            self.obs_c[u] / cfg.data_scale,
            [k / cfg.subslots_per_slot]])

    # -- slot cycle --------------------------------------------------------

    def apply_slot_actions(self, actions) -> None:
        cfg = self.cfg
        if self.slot == 0:
            raise RuntimeError("reset() the environment first")
        if self.slot > cfg.horizon_slots:
            raise RuntimeError("episode is over")
        if self._moved:
            raise RuntimeError("slot cycle: actions already applied this slot")
        if len(actions) != cfg.num_uavs:
            raise ValueError(f"need {cfg.num_uavs} actions, got {len(actions)}")

        # the slot's reward accounting works on the slot-start snapshot
        self._flags_slot = self.flags.copy()
        self._hoe_slot = self.hoe.copy()
        self._obs_b_slot = self.obs_b.copy()

        self._z = np.zeros(cfg.num_uavs, dtype=int)
        self._v_eff = np.zeros(cfg.num_uavs)
        new_pos = self.uav_pos.copy()
        for u, act in enumerate(actions):
            if not isinstance(act, SlotAction):
                raise TypeError(f"action {u} is {type(act).__name__}")
            if act.speed < 0 or act.speed > cfg.v_max * (1 + 1e-9):
                raise ValueError(f"speed {act.speed} outside [0, {cfg.v_max}]")
            if act.wet not in (0, 1):
                raise ValueError(f"wet flag {act.wet} not binary")
            if self.uav_battery[u] <= 0.0:
                continue                      # drained: grounded and dark
            step = act.speed * cfg.slot_len
            target = self.uav_pos[u] + step * np.array(
                [np.cos(act.heading), np.sin(act.heading)])
            new_pos[u, 0] = min(max(target[0], 0.0), cfg.area_width)
            new_pos[u, 1] = min(max(target[1], 0.0), cfg.area_height)
            self._v_eff[u] = float(np.linalg.norm(new_pos[u] - self.uav_pos[u])) \
                / cfg.slot_len
            self._z[u] = act.wet
        self.uav_pos = new_pos

        # slot physics anchor
        self._gains = gain_matrix(self.uav_pos, self.wn_xy, cfg)
        diff = self.uav_pos[:, None, :] - self.wn_xy[None, :, :]
        d_horiz = np.sqrt(np.einsum("uwk,uwk->uw", diff, diff))
        beam = (self._z[:, None] * (d_horiz <= cfg.d_cov)) * self._gains
        dc = self.harvester.dc_power(cfg.p_uav_tx * beam.sum(axis=0))
        self._pending_harvest = np.where(self._flags_slot == 0,
                                         dc * cfg.slot_len, 0.0)
        # each UAV's standalone delivery, for the energy-share weight below
        self._wet_share_num = self.harvester.dc_power(cfg.p_uav_tx * beam) \
            * cfg.slot_len

        inodes = self._flags_slot == 1
        pace = (self.slot - 1) / cfg.horizon_slots * cfg.c_min
        self._tier2_gap = np.sum(self.obs_c[:, inodes] - pace, axis=1)

        self._tx_counts = np.zeros(cfg.num_wns, dtype=int)
        self._uav_tx_counts = np.zeros(cfg.num_uavs, dtype=int)
        self._slot_data = np.zeros(cfg.num_wns)
        self._subslots_done = 0
        self._moved = True

    def resolve_wdc_associations(self, scores: np.ndarray,
                                 active=None) -> SubSlotSchedule:
        """Build the sub-slot schedule; `active` further restricts which UAVs
        may collect (a drained UAV is excluded either way)."""
        if not self._moved:
            raise RuntimeError("slot cycle: associations requested before the move")
        may_collect = self.uav_battery > 0.0
        if active is not None:
            may_collect = may_collect & np.asarray(active, dtype=bool)
        assignment = association_schedule(self._flags_slot, scores,
                                          active=may_collect)
        return SubSlotSchedule(assignment)

    def silent_schedule(self) -> SubSlotSchedule:
        return SubSlotSchedule(np.full(self.cfg.num_uavs, SILENT, dtype=int))

    def step_subslot(self, schedule: SubSlotSchedule):
        """Run one sub-slot. Returns (per-UAV data sizes, per-UAV tier-2 rewards)."""
        cfg = self.cfg
        if not self._moved:
            raise RuntimeError("slot cycle: sub-slot stepped before the move")
        if self._subslots_done >= cfg.subslots_per_slot:
            raise RuntimeError("slot cycle: all sub-slots already stepped")
        schedule.check(self._flags_slot)
        sinr = sinr_vector(schedule, self._gains, cfg.p_wn_tx, cfg.noise_power)
        data = subslot_data_size(sinr, cfg.subslot_len)
        for u, w in schedule.pairs():
            self.acc_data[w] += data[u]
            self._slot_data[w] += data[u]
            self._tx_counts[w] += 1
            self._uav_tx_counts[u] += 1
        self._subslots_done += 1
        return data, data + self._tier2_gap

    def finish_slot(self) -> list[RewardBreakdown]:
        cfg = self.cfg
        if not self._moved:
            raise RuntimeError("slot cycle: finish before the move")
        if self._subslots_done != cfg.subslots_per_slot:
            raise RuntimeError(f"slot cycle: only {self._subslots_done} of "
                               f"{cfg.subslots_per_slot} sub-slots stepped")

        new_wn_b = np.array([
            update_wn_battery(self.wn_battery[w], self._flags_slot[w],
                              self._pending_harvest[w], self._tx_counts[w], cfg)
            for w in range(cfg.num_wns)])
        new_uav_b = np.array([
            update_uav_battery(self.uav_battery[u], uav_slot_energy(
                self._uav_tx_counts[u], self._z[u], self._v_eff[u], cfg))
            for u in range(cfg.num_uavs)])

        new_flags = update_node_type(new_wn_b, self._flags_slot, cfg.b_e, cfg.b_i)
        new_hoe = update_hoe(self._hoe_slot, self._pending_harvest, new_flags, cfg)

        self.wn_battery = new_wn_b
        self.uav_battery = new_uav_b
        self.flags = new_flags
        self.hoe = new_hoe
        self.last_harvest = self._pending_harvest
        self._refresh_reports()          # next slot's reports, same hover points

        e_mask = self._flags_slot == 0
        i_mask = ~e_mask
        hoe_w = self._hoe_slot if self.use_hoe_weighting else np.ones(cfg.num_wns)
        b_wdc = float(np.sum(self.acc_data[i_mask]
                             - self.slot / cfg.horizon_slots * cfg.c_min))
        sep_ok = True
        for a in range(cfg.num_uavs):
            for b in range(a + 1, cfg.num_uavs):
                if np.linalg.norm(self.uav_pos[a] - self.uav_pos[b]) < cfg.d_min:
                    sep_ok = False
        b_sd = 0.0 if sep_ok else -1.0
        if not sep_ok:
            self._sep_violations += 1

        breakdowns = []
        for u in range(cfg.num_uavs):
            delta = self.obs_b[u] - self._obs_b_slot[u]
            ratio = np.zeros(cfg.num_wns)
            nz = delta != 0.0
            ratio[nz] = self._wet_share_num[u, nz] / delta[nz]
            share = float(np.sum(ratio[e_mask]))
            b_wet = share * float(np.sum(hoe_w[e_mask] * delta[e_mask]))
            b_es = float(new_uav_b[u]) - cfg.b_uav_min
            breakdowns.append(RewardBreakdown.mix(
                b_wet, b_wdc, b_es, b_sd,
                cfg.xi_wet, cfg.xi_wdc, cfg.xi_es, cfg.xi_sd))

        self.history.append({
            "slot": self.slot,
            "uav_pos": self.uav_pos.tolist(),
            "wet": self._z.tolist(),
            "speed": self._v_eff.tolist(),
            "uav_battery": new_uav_b.tolist(),
            "wn_battery": new_wn_b.tolist(),
            "wn_flag": self._flags_slot.tolist(),
            "wn_acc_data": self.acc_data.tolist(),
            "slot_data": float(self._slot_data.sum()),
            "num_inodes": int(i_mask.sum()),
            "r_total": [bd.r_total for bd in breakdowns],
        })
        self.slot += 1
        self._moved = False
        return breakdowns

    # -- reporting ---------------------------------------------------------

    def episode_report(self) -> EpisodeReport:
        cfg = self.cfg
        if self.slot <= cfg.horizon_slots:
            raise RuntimeError(f"episode still at slot {self.slot} of "
                               f"{cfg.horizon_slots}")
        return EpisodeReport(
            wn_totals=self.acc_data.copy(),
            wn_met=self.acc_data >= cfg.c_min,
            uav_end_batteries=self.uav_battery.copy(),
            uav_safe=self.uav_battery >= cfg.b_uav_min,
            separation_violations=self._sep_violations,
            c_total=float(self.acc_data.sum()),
        )
